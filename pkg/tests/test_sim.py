import numpy as np
import pytest

from agedist import FinitePMF, Geometric, ImportanceDist, Model, policy_iteration
from agedist.bufferignorant import BinarySource, PlainThresholdBitPolicy
from agedist.sim import SimConfig, simulate_bit_policy, simulate_erasure, simulate_policy
from agedist.strategies import SendLatestPolicy


def test_config_validation(fig1):
    with pytest.raises(ValueError):
        SimConfig(horizon=5000, seed=1, model=fig1)
    with pytest.raises(ValueError):
        SimConfig(horizon=100_000, seed=1, model=fig1, burn_in=20_000)
    cfg = SimConfig(horizon=100_000, seed=1, model=fig1)
    assert cfg.burn == 1000
    assert SimConfig(horizon=100_000, seed=1, model=fig1, burn_in=0).burn == 0


def test_reproducibility(fig1):
    sol = policy_iteration(fig1, 1.0)
    cfg = SimConfig(horizon=50_000, seed=42, model=fig1)
    a = simulate_policy(cfg, sol)
    b = simulate_policy(cfg, sol)
    assert a.to_json_dict() == b.to_json_dict()
    assert np.array_equal(a.batch_delta, b.batch_delta)
    c = simulate_policy(SimConfig(horizon=50_000, seed=43, model=fig1), sol)
    assert c.d != a.d


def test_send_latest_matches_renewal_value(fig1):
    res = simulate_policy(SimConfig(horizon=600_000, seed=7, model=fig1), SendLatestPolicy())
    assert res.delta_e == 0.0
    assert abs(res.d - 5.36) < 4 * res.se_d
    # raw age = excess age + nu/mu; with nothing stale it tends to 1/p
    assert res.raw_age == pytest.approx(5.0, abs=0.05)


def test_deterministic_unit_gaps():
    model = Model(ImportanceDist((1.0, 20.0), (0.7, 0.3)), FinitePMF((1.0,)))
    res = simulate_policy(SimConfig(horizon=20_000, seed=3, model=model), SendLatestPolicy())
    assert res.delta_e == 0.0
    assert res.d == 0.0


def test_solved_policy_consistency(fig1):
    sol = policy_iteration(fig1, 0.5)
    res = simulate_policy(SimConfig(horizon=500_000, seed=20, model=fig1), sol)
    gap = abs(res.d + 0.5 * res.delta_e - sol.lam)
    assert gap < 4 * res.combined_se(0.5)


def test_erasure_equivalence(fig1):
    sol = policy_iteration(fig1, 1.0)
    cfg = SimConfig(horizon=300_000, seed=9, model=fig1)
    direct = simulate_policy(cfg, sol)
    shared = simulate_erasure(cfg, sol)
    # shared seed: identical trajectories for a stationary policy
    assert shared.d == direct.d
    assert shared.delta_e == direct.delta_e
    other = simulate_erasure(SimConfig(horizon=300_000, seed=10, model=fig1), sol)
    assert abs(other.d - direct.d) < 4 * (other.se_d + direct.se_d)
    assert abs(other.delta_e - direct.delta_e) < 4 * (other.se_delta + direct.se_delta)


def test_erasure_probability_zero(fig1):
    model = Model(fig1.v, Geometric(1.0))  # every commitment delivered
    cfg = SimConfig(horizon=20_000, seed=4, model=model)
    res = simulate_erasure(cfg, SendLatestPolicy())
    assert res.delta_e == 0.0
    assert res.d == 0.0
    with pytest.raises(ValueError):
        simulate_erasure(
            SimConfig(horizon=20_000, seed=4, model=Model(fig1.v, FinitePMF((1.0,)))),
            SendLatestPolicy(),
        )


def test_infeasible_policy_aborts(fig1):
    class Stale:
        max_buffer = 4

        def __call__(self, entries):
            return 1  # eventually points at a stale minimum-importance packet

    with pytest.raises(RuntimeError):
        simulate_policy(SimConfig(horizon=10_000, seed=0, model=fig1), Stale())


def test_bit_sim_tau0(fig1):
    src = BinarySource.from_model(fig1, 3)
    res = simulate_bit_policy(
        SimConfig(horizon=400_000, seed=6), src, PlainThresholdBitPolicy(src, 0)
    )
    assert res.delta_e == 0.0
    assert abs(res.d - 6.7 * 0.512) < 4 * res.se_d


def test_se_scales_with_horizon(fig1):
    sol = policy_iteration(fig1, 1.0)
    r1 = simulate_policy(SimConfig(horizon=200_000, seed=15, model=fig1), sol)
    r2 = simulate_policy(SimConfig(horizon=400_000, seed=15, model=fig1), sol)
    for a, b in ((r1.se_d, r2.se_d), (r1.se_delta, r2.se_delta)):
        ratio = a / b
        assert np.sqrt(2) / 1.5 < ratio < np.sqrt(2) * 1.5


def test_json_contract(fig1, tmp_path):
    res = simulate_policy(SimConfig(horizon=20_000, seed=1, model=fig1), SendLatestPolicy())
    doc = res.to_json_dict()
    assert set(doc) == {"delta_e", "se_delta", "d", "se_d", "horizon", "seed"}
    path = tmp_path / "r.json"
    res.to_json(str(path))
    import json

    assert json.loads(path.read_text()) == doc


def test_missing_model_rejected():
    with pytest.raises(ValueError):
        simulate_policy(SimConfig(horizon=20_000, seed=0), SendLatestPolicy())
