import numpy as np
import pytest
from scipy import stats

from iplab.observables import MACRO, MESO
from iplab.simulator import (IPParams, MESO_TIME, RAW, EnsembleResult,
                             run_ensemble, simulate, step, total_rate)
from iplab.states import Configuration
from iplab.stationary import CanonicalMeasure


def test_params_validation():
    with pytest.raises(ValueError):
        IPParams(1, 5, 0.5)
    with pytest.raises(ValueError):
        IPParams(3, 5, 0.0)
    with pytest.raises(ValueError):
        IPParams(3, 5, 0.5, "fast")


def test_physical_time_meso_rescaling():
    p = IPParams(10, 10, 0.5, MESO_TIME)
    assert p.physical_time(1.0) == pytest.approx(1.0 / (0.5 * 10))
    assert IPParams(10, 10, 0.5, RAW).physical_time(1.0) == 1.0


def test_total_rate_matches_sum():
    c = Configuration([3, 0, 2])
    d = 0.5
    brute = sum(c.occupations[x] * (d + c.occupations[y])
                for x in range(3) for y in range(3) if x != y)
    assert total_rate(c, d) == pytest.approx(brute)


def test_step_conserves_particles():
    rng = np.random.default_rng(0)
    c = Configuration([3, 0, 2])
    for _ in range(50):
        (x, y), wait = step(c, 0.5, rng)
        assert x != y
        assert wait > 0
    assert c.particles == 5
    assert c.sum_squares == int((c.occupations ** 2).sum())


def test_simulate_snapshot_kinds():
    params = IPParams(4, 6, 0.5)
    init = Configuration([6, 0, 0, 0])
    rng = np.random.default_rng(1)
    traj = simulate(params, init, [0.1, 0.2], rng, record="config")
    assert len(traj.snapshots) == 2
    assert int(traj.snapshots[0].sum()) == 6

    rng = np.random.default_rng(1)
    traj_m = simulate(params, init, [0.1, 0.2], rng, record="macro")
    assert traj_m.snapshots[0].domain == MACRO
    rng = np.random.default_rng(1)
    traj_s = simulate(params, init, [0.1, 0.2], rng, record="meso")
    assert traj_s.snapshots[0].domain == MESO


def test_simulate_validates_schedule_and_shape():
    params = IPParams(4, 6, 0.5)
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        simulate(params, Configuration([6, 0, 0]), [0.1], rng)
    with pytest.raises(ValueError):
        simulate(params, Configuration([6, 0, 0, 0]), [], rng)


def test_ensemble_worker_invariance():
    params = IPParams(16, 16, 0.25)
    init = Configuration([16] + [0] * 15)
    r1 = run_ensemble(params, init, [0.5, 1.0], 6, seed=9, workers=1)
    r4 = run_ensemble(params, init, [0.5, 1.0], 6, seed=9, workers=4)
    for a, b in zip(r1.snapshots, r4.snapshots):
        for ma, mb in zip(a, b):
            assert ma == mb


def test_ensemble_backend_invariance():
    from iplab.kernel import HAVE_COMPILED
    if not HAVE_COMPILED:
        pytest.skip("compiled kernel unavailable")
    params = IPParams(16, 16, 0.25)
    init = Configuration([16] + [0] * 15)
    rc = run_ensemble(params, init, [0.5], 4, seed=9, backend="cython")
    rp = run_ensemble(params, init, [0.5], 4, seed=9, backend="python")
    for a, b in zip(rc.snapshots, rp.snapshots):
        assert a[0] == b[0]


def test_pooled_measure_mass():
    params = IPParams(8, 8, 0.5)
    init = Configuration([8] + [0] * 7)
    res = run_ensemble(params, init, [0.3], 5, seed=2)
    pooled = res.pooled_measure(0)
    assert float(pooled.weights.sum()) == pytest.approx(1.0)


def test_reversibility_from_stationary_start():
    """Started from an exact stationary sample, the occupation of site 1
    keeps the exact size-biased-free marginal pi(eta_1 = n)."""
    L, N, d = 4, 6, 0.7
    pi = CanonicalMeasure(L, N, d)
    rng = np.random.default_rng(12)
    t_run = 2.0
    counts = np.zeros(N + 1)
    reps = 400
    for _ in range(reps):
        init = pi.exact_sampler(rng)
        params = IPParams(L, N, d)
        traj = simulate(params, init, [t_run], rng, record="config")
        counts[int(traj.snapshots[0][0])] += 1
    from iplab.stationary import log_partition, log_weight
    import math
    probs = np.array([
        math.exp(log_weight(n, d) + log_partition(L - 1, N - n, d)
                 - log_partition(L, N, d)) for n in range(N + 1)
    ])
    assert probs.sum() == pytest.approx(1.0)
    expected = probs * reps
    mask = expected > 5
    chi2 = float(((counts[mask] - expected[mask]) ** 2 / expected[mask]).sum())
    p = stats.chi2.sf(chi2, df=int(mask.sum()) - 1)
    assert p > 0.001
