"""Acceptance criteria, one test per criterion.

Run with `pytest tests/test_acceptance.py -v` to get one pass/fail line
per criterion.  Every test prints a short summary line with the measured
quantities so the margin is visible in the captured output.
"""
import itertools
import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy import stats

from iplab.diffusions import (EXACT_CIR, ensemble_law, macro_mean,
                              meso_dual_spec, pd_stationary_moment,
                              simulate_jump_diffusion)
from iplab.generators import (B_operator, CylindricalFunction,
                              condensed_config, convergence_report,
                              discrete_generator_apply,
                              discrete_generator_naive, ek_identity_residual,
                              flat_config, mutation_macro,
                              theta_limit_residual)
from iplab.flemingviot import (LabelledState, fv_convergence_errors,
                               labelled_generator_identity, labelled_simulate)
from iplab.kernel import make_kernel
from iplab.metrics import empirical_measure, qv_estimate, tv_binned, wasserstein1
from iplab.observables import MACRO, MESO, Observable
from iplab.simulator import IPParams, MESO_TIME, RAW, run_ensemble, simulate
from iplab.states import (Configuration, DiscreteMeasure, embed_mesoscopic,
                          exp1_quantile_measure, integrate,
                          order_configuration)
from iplab.stationary import (CanonicalMeasure, beta_generator_pairing,
                              closed_form_density, fokker_planck_solve,
                              geometric_limit_pmf, sample_pd,
                              size_biased_marginal)

WORKERS = 4


def all_configurations(L, N):
    for bars in itertools.combinations(range(N + L - 1), L - 1):
        occ, prev = [], -1
        for b in bars:
            occ.append(b - prev - 1)
            prev = b
        occ.append(N + L - 2 - prev)
        yield tuple(occ)


def naive_move_law(occ, d):
    occ = np.asarray(occ, dtype=float)
    L = occ.size
    law = {}
    for x in range(L):
        if occ[x] == 0:
            continue
        for y in range(L):
            if y != x:
                law[(x, y)] = occ[x] * (d + occ[y])
    total = sum(law.values())
    return {k: v / total for k, v in law.items()}


def test_01_exact_small_instance_equivalence():
    """Sampler pair law = naive rate law on Omega_{3,4} (chi^2);
    grouped generator = naive on Omega_{4,5} to 1e-9."""
    d = 0.6
    configs = [c for c in all_configurations(3, 4)]
    events_per_config = 10**6 // len(configs)
    chi2_total, df_total = 0.0, 0
    rng = np.random.default_rng(100)
    for occ in configs:
        law = naive_move_law(occ, d)
        k = make_kernel(occ, d, rng)
        counts = {m: 0 for m in law}
        for _ in range(events_per_config):
            counts[k.sample_move()] += 1
        exp = np.array([law[m] * events_per_config for m in law])
        obs = np.array([counts[m] for m in law])
        chi2_total += float(((obs - exp) ** 2 / exp).sum())
        df_total += len(law) - 1
    p = stats.chi2.sf(chi2_total, df=df_total)
    assert p > 0.001, f"pair-law chi2 p = {p:.2e}"

    z = Observable.polynomial([0.0, 1.0])
    z2 = Observable.polynomial([0.0, 0.0, 1.0])
    batteries = [CylindricalFunction.product(z),
                 CylindricalFunction.product(z, z),
                 CylindricalFunction.product(z2, z)]
    worst = 0.0
    for occ in all_configurations(4, 5):
        cfg = Configuration(occ)
        for H in batteries:
            a = discrete_generator_apply(cfg, H, d, MACRO)
            b = discrete_generator_naive(cfg, H, d, MACRO)
            worst = max(worst, abs(a - b))
    assert worst < 1e-9, f"grouped vs naive worst gap {worst:.2e}"
    print(f"\n[criterion 1] chi2 p = {p:.3f}, generator gap = {worst:.2e}")


def test_02_stationarity_exactness():
    """Exact sampler matches exhaustive pi; marginal matches enumeration;
    L=2,N=2,d=1 gives 1/3 and 2/3."""
    L, N, d = 3, 4, 0.6
    pi = CanonicalMeasure(L, N, d)
    rng = np.random.default_rng(200)
    reps = 30000
    counts = {}
    for _ in range(reps):
        key = tuple(pi.exact_sampler(rng).occupations)
        counts[key] = counts.get(key, 0) + 1
    configs = list(all_configurations(L, N))
    exp = np.array([reps * math.exp(pi.log_prob(Configuration(o)))
                    for o in configs])
    obs = np.array([counts.get(o, 0) for o in configs])
    chi2 = float(((obs - exp) ** 2 / exp).sum())
    p = stats.chi2.sf(chi2, df=len(configs) - 1)
    assert p > 0.001, f"sampler chi2 p = {p:.2e}"

    worst = 0.0
    for n in range(1, N + 1):
        total = sum(math.exp(pi.log_prob(Configuration(o)))
                    * n * sum(1 for v in o if v == n) / N
                    for o in all_configurations(L, N))
        worst = max(worst, abs(size_biased_marginal(n, L, N, d) - total))
    assert worst < 1e-10, f"marginal vs enumeration gap {worst:.2e}"
    assert abs(size_biased_marginal(1, 2, 2, 1.0) - 1 / 3) < 1e-12
    assert abs(size_biased_marginal(2, 2, 2, 1.0) - 2 / 3) < 1e-12
    print(f"\n[criterion 2] chi2 p = {p:.3f}, marginal gap = {worst:.2e}")


def test_03_generator_convergence():
    """Battery error at L=1024 <= error at L=64 / 4, MACRO and MESO;
    theta-residual strictly decreasing over {10,100,1000}."""
    grid = [64, 256, 1024]
    macro = convergence_report(MACRO, grid).errors_by_L()
    assert macro[1024] <= macro[64] / 4.0, f"MACRO errors {macro}"
    meso = convergence_report(MESO, grid).errors_by_L()
    assert meso[1024] <= meso[64] / 4.0, f"MESO errors {meso}"
    mu = DiscreteMeasure([0.02, 0.3], [0.4, 0.6], MACRO)
    H = CylindricalFunction.product(Observable.window(1, 4, 4))
    res = [theta_limit_residual(mu, H, th) for th in (10.0, 100.0, 1000.0)]
    assert res[0] > res[1] > res[2], f"theta residuals {res}"
    print(f"\n[criterion 3] macro ratio = {macro[64] / macro[1024]:.2f}, "
          f"meso ratio = {meso[64] / meso[1024]:.2f}, theta residuals = {res}")


def test_04_ek_identity():
    """ek_identity_residual < 1e-9 on 100 random (p, h, theta) triples."""
    rng = np.random.default_rng(400)
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(1, 4))
        raw = np.sort(rng.uniform(0.01, 1.0, k))[::-1]
        raw = raw / raw.sum() * rng.uniform(0.3, 0.99)
        masses = tuple(float(m) for m in raw)
        from iplab.states import Partition
        p = Partition(masses, 1.0 - sum(masses))
        h = Observable.polynomial(list(rng.uniform(-1, 1, 4)))
        theta = float(rng.uniform(0.1, 8.0))
        worst = max(worst, abs(ek_identity_residual(p, h, theta)))
    assert worst < 1e-9, f"worst EK residual {worst:.2e}"
    print(f"\n[criterion 4] worst residual = {worst:.2e}")


def _cdf_interp(t, z0, z_max=60.0, nodes=6000):
    zs = np.linspace(0.0, z_max, nodes)
    dens = np.array([closed_form_density(t, z, z0) if z > 0 else 1.0
                     for z in zs])
    cdf = sp_integrate.cumulative_trapezoid(dens, zs, initial=0.0)
    return zs, cdf


def test_05_closed_form_density():
    """EXACT_CIR samples KS vs f(t,.|0) < 0.01; PDE max-norm < 1e-3;
    stationary Exp(1) drift < 1e-4."""
    rng = np.random.default_rng(500)
    spec = meso_dual_spec()
    n = 100_000
    worst_ks = 0.0
    for t in (0.5, 1.0, 3.0):
        samples = np.sort([simulate_jump_diffusion(spec, 0.0, t, EXACT_CIR, rng)
                           for _ in range(n)])
        zs, cdf = _cdf_interp(t, 0.0)
        ref = np.interp(samples, zs, cdf)
        emp_hi = np.arange(1, n + 1) / n
        emp_lo = np.arange(0, n) / n
        ks = max(float(np.max(np.abs(emp_hi - ref))),
                 float(np.max(np.abs(emp_lo - ref))))
        worst_ks = max(worst_ks, ks)
        assert ks < 0.01, f"KS at t={t}: {ks:.4f}"

    eps = 1e-3
    grid, f = fokker_planck_solve(
        lambda z: closed_form_density(eps, z, 0.0) if z > 0 else 1.0,
        1.0 - eps, z_max=20.0, nodes=2000, dt=1e-3)
    mask = (grid >= 0.1) & (grid <= 10.0)
    ref = np.array([closed_form_density(1.0, float(z), 0.0) for z in grid[mask]])
    pde_err = float(np.max(np.abs(f[mask] - ref)))
    assert pde_err < 1e-3, f"PDE max-norm {pde_err:.2e}"

    grid, f = fokker_planck_solve(lambda z: math.exp(-z), 1.0,
                                  z_max=25.0, nodes=2000, dt=1e-3)
    mask = grid <= 10.0
    drift = float(np.max(np.abs(f[mask] - np.exp(-grid[mask]))))
    assert drift < 1e-4, f"stationary drift {drift:.2e}"
    print(f"\n[criterion 5] worst KS = {worst_ks:.4f}, PDE err = {pde_err:.2e}, "
          f"stationary drift = {drift:.2e}")


def test_06_ergodicity_and_mass():
    """Binned TV to Exp(1) <= e^-t + statistical floor from z0 = 5;
    finite-mass fraction from infinity equals 1 - e^-t within 3 sigma."""
    rng = np.random.default_rng(600)
    spec = meso_dual_spec()
    n = 40_000
    exp_ref = exp1_quantile_measure(20_000)
    # statistical floor: TV between two independent Exp(1) samples of size n
    floor = tv_binned(empirical_measure(rng.exponential(1.0, n), MESO),
                      empirical_measure(rng.exponential(1.0, n), MESO))
    eps_stat = 3.0 * floor
    tvs = {}
    for t in (1.0, 2.0, 3.0):
        samples = np.array([
            simulate_jump_diffusion(spec, 5.0, t, EXACT_CIR, rng)
            for _ in range(n)
        ])
        tv = tv_binned(empirical_measure(samples, MESO), exp_ref)
        tvs[t] = tv
        assert tv <= math.exp(-t) + eps_stat, \
            f"TV at t={t}: {tv:.4f} > e^-t + {eps_stat:.4f}"

    t = 1.0
    states = np.array([
        simulate_jump_diffusion(spec, math.inf, t, EXACT_CIR, rng)
        for _ in range(n)
    ])
    frac = float(np.isfinite(states).mean())
    target = 1.0 - math.exp(-t)
    sigma = math.sqrt(target * (1 - target) / n)
    assert abs(frac - target) < 3 * sigma, \
        f"finite fraction {frac:.4f} vs {target:.4f} (3 sigma = {3 * sigma:.4f})"
    print(f"\n[criterion 6] TVs = { {k: round(v, 4) for k, v in tvs.items()} }, "
          f"eps_stat = {eps_stat:.4f}, finite fraction {frac:.4f} vs {target:.4f}")


def test_07_duality():
    """IP mean of mu_t(z), L=N=512, theta=1, from delta_1, 500 replicas,
    vs 1/2 + 1/2 e^{-4t} within 3 bootstrap sigma; long-run value 0.5
    within 5%."""
    L = N = 512
    theta = 1.0
    params = IPParams(L, N, theta / L, RAW)
    init = condensed_config(L, N)
    times = [0.1, 0.5, 2.0]
    res = run_ensemble(params, init, times, 500, seed=700, record="macro",
                       workers=WORKERS)
    z = Observable.polynomial([0.0, 1.0])
    rng = np.random.default_rng(701)
    margins = []
    for i, t in enumerate(times):
        vals = np.array([integrate(m, z) for m in res.at_time(i)])
        target = macro_mean(theta, 1.0, t)
        boots = np.array([vals[rng.integers(0, vals.size, vals.size)].mean()
                          for _ in range(300)])
        se = float(boots.std(ddof=1))
        resid = abs(float(vals.mean()) - target)
        margins.append((t, resid, se))
        assert resid <= 3 * se, f"t={t}: residual {resid:.4f} > 3*{se:.4f}"

    sched = np.linspace(10.0, 40.0, 61)
    traj = simulate(params, init, sched, np.random.default_rng(702),
                    record="macro")
    lr = float(np.mean([integrate(m, z) for m in traj.snapshots]))
    assert abs(lr - 0.5) / 0.5 < 0.05, f"long-run mean {lr:.4f}"
    print(f"\n[criterion 7] residuals (t, |resid|, se) = "
          f"{[(t, round(r, 4), round(s, 4)) for t, r, s in margins]}, "
          f"long-run mean = {lr:.4f}")


def test_08_pd_stationary_moments():
    """Long-run IP time averages of phi_2, phi_3 within 5% of 1/2, 1/3;
    PD(1) sampler reproduces them; size-biased pick KS vs Beta(1,theta)."""
    L = N = 512
    theta = 1.0
    params = IPParams(L, N, theta / L, RAW)
    init = condensed_config(L, N)
    sched = np.linspace(5.0, 65.0, 121)
    traj = simulate(params, init, sched, np.random.default_rng(800),
                    record="config")
    phi2s, phi3s = [], []
    for occ in traj.snapshots:
        p = order_configuration(Configuration(occ))
        phi2s.append(p.phi(2))
        phi3s.append(p.phi(3))
    m2, m3 = float(np.mean(phi2s)), float(np.mean(phi3s))
    assert abs(m2 - 0.5) / 0.5 < 0.05, f"IP phi_2 average {m2:.4f}"
    assert abs(m3 - 1 / 3) / (1 / 3) < 0.05, f"IP phi_3 average {m3:.4f}"

    rng = np.random.default_rng(801)
    p2s, p3s = [], []
    for _ in range(20000):
        p = sample_pd(theta, 1e-8, rng)
        p2s.append(p.phi(2))
        p3s.append(p.phi(3))
    s2, s3 = float(np.mean(p2s)), float(np.mean(p3s))
    assert abs(s2 - 0.5) / 0.5 < 0.05, f"PD sampler phi_2 {s2:.4f}"
    assert abs(s3 - 1 / 3) / (1 / 3) < 0.05, f"PD sampler phi_3 {s3:.4f}"
    assert pd_stationary_moment(theta, 2) == pytest.approx(0.5)
    assert pd_stationary_moment(theta, 3) == pytest.approx(1 / 3)

    ks_all = {}
    for th in (0.5, 1.0, 5.0):
        picks = []
        for _ in range(8000):
            p = sample_pd(th, 1e-8, rng)
            masses = np.array(p.masses)
            cum = np.cumsum(masses)
            u = rng.random() * (cum[-1] + p.dust)
            idx = int(np.searchsorted(cum, u))
            picks.append(masses[min(idx, masses.size - 1)])
        ks = stats.kstest(picks, stats.beta(1, th).cdf).statistic
        ks_all[th] = float(ks)
        assert ks < 0.02, f"size-biased pick KS at theta={th}: {ks:.4f}"
    print(f"\n[criterion 8] IP averages = ({m2:.4f}, {m3:.4f}), "
          f"PD sampler = ({s2:.4f}, {s3:.4f}), KS = {ks_all}")


def test_09_beta_pairing_exactness():
    """theta=1 magnitudes 1/3 and 1/4 to 1e-12; pairing with g = 1 is 0."""
    z = Observable.polynomial([0.0, 1.0])
    z2 = Observable.polynomial([0.0, 0.0, 1.0])
    v1 = beta_generator_pairing(z, z2, 1.0)
    v2 = beta_generator_pairing(z2, z, 1.0)
    assert abs(abs(v1) - 1 / 3) < 1e-12
    assert abs(abs(v2) - 1 / 4) < 1e-12
    inv = beta_generator_pairing(z2, Observable.constant(1.0), 1.0)
    assert abs(inv) < 1e-12
    print(f"\n[criterion 9] |pairings| = ({abs(v1):.15f}, {abs(v2):.15f}), "
          f"invariance = {inv:.2e}")


def test_10_geometric_regime():
    """Size-biased pmf at L=1e5, N=1e3, d=1e-2 vs 2^-n within 2% rel
    error for n <= 10."""
    L, N, d = 100_000, 1000, 0.01
    worst = 0.0
    for n in range(1, 11):
        exact = size_biased_marginal(n, L, N, d)
        limit = geometric_limit_pmf(n, 1.0)  # gamma = N/(dL) = 1 -> 2^-n
        assert limit == pytest.approx(2.0 ** -n)
        rel = abs(exact / limit - 1.0)
        worst = max(worst, rel)
    assert worst < 0.02, f"worst relative error {worst:.4f}"
    print(f"\n[criterion 10] worst relative error = {worst:.4f}")


def test_11_figure_scale_experiment():
    """N=L=1024, d=1/32, init delta_{25/32}, 1000 replicas: at the last
    MESO time W1 to Exp(1) < 0.05; W1 to the dual ensemble < 0.05 at each
    matched time."""
    L = N = 1024
    d = 1.0 / 32
    from iplab.states import config_from_measure
    init = config_from_measure(DiscreteMeasure([25 / 32], [1.0], MESO), L, N, d)
    times = [0.1, 1.0, 5.0]
    params = IPParams(L, N, d, MESO_TIME)
    res = run_ensemble(params, init, times, 1000, seed=1100, record="meso",
                       workers=WORKERS)
    exp_ref = exp1_quantile_measure(20_000)
    pooled_last = res.pooled_measure(len(times) - 1)
    w1_exp = wasserstein1(pooled_last, exp_ref)
    assert w1_exp < 0.05, f"W1 to Exp(1) at t={times[-1]}: {w1_exp:.4f}"

    init_law = embed_mesoscopic(init, d)
    rng = np.random.default_rng(1101)
    w1_dual = {}
    for i, t in enumerate(times):
        law = ensemble_law(meso_dual_spec(), init_law, t, 10_000, EXACT_CIR, rng)
        w1 = wasserstein1(res.pooled_measure(i), law.to_measure(MESO))
        w1_dual[t] = float(w1)
        assert w1 < 0.05, f"W1 to dual law at t={t}: {w1:.4f}"
    print(f"\n[criterion 11] W1 to Exp(1) = {w1_exp:.4f}, "
          f"W1 to dual = { {k: round(v, 4) for k, v in w1_dual.items()} }")


def test_12_qv_structure():
    """Realized vs predicted quadratic variation within 10%
    (100 replicas, h(z) = z, L=N=512, theta=1)."""
    L = N = 512
    theta = 1.0
    params = IPParams(L, N, theta / L, RAW)
    init = condensed_config(L, N)
    times = np.linspace(0.0, 1.0, 201)
    h = Observable.polynomial([0.0, 1.0])
    bh = B_operator(h)
    bh2 = bh * bh
    res = run_ensemble(params, init, times, 100, seed=1200, record="macro",
                       workers=WORKERS)
    realized_sum, predicted_sum = 0.0, 0.0
    for r in range(res.replicas):
        ms = res.snapshots[r]
        vals = np.array([integrate(m, h) for m in ms])
        drift = np.array([
            sum(w * mutation_macro(h, z, theta)
                for z, w in zip(m.locations, m.weights)) for m in ms
        ])
        integrand = np.array([
            2.0 * (integrate(m, bh2) - integrate(m, bh) ** 2) for m in ms
        ])
        realized, predicted = qv_estimate(times, vals, integrand, drift)
        realized_sum += realized[-1]
        predicted_sum += predicted[-1]
    ratio = realized_sum / predicted_sum
    assert abs(ratio - 1.0) < 0.10, f"realized/predicted = {ratio:.4f}"
    print(f"\n[criterion 12] realized/predicted QV = {ratio:.4f}")


def test_13_labelled_system():
    """Labelled generator identity exact to 1e-10; labelled/unlabelled
    distributional match; FV battery error halves from L=64 to 1024."""
    rng = np.random.default_rng(1300)
    worst = 0.0
    for L in (16, 64):
        pos = rng.integers(1, L + 1, size=L)
        s = LabelledState(pos, L)
        h = Observable.polynomial(list(rng.uniform(-1, 1, 4)))
        lhs, rhs = labelled_generator_identity(s, h, 0.25)
        worst = max(worst, abs(lhs - rhs))
    assert worst < 1e-10, f"identity gap {worst:.2e}"

    L, N, d, t, reps = 6, 6, 0.5, 1.0, 800
    lab_max, unlab_max = [], []
    for _ in range(reps):
        s = LabelledState(np.arange(1, L + 1), L)
        snaps, _ = labelled_simulate(s, d, [t], rng)
        lab_max.append(int(np.bincount(snaps[0].positions - 1).max()))
        params = IPParams(L, N, d)
        traj = simulate(params, Configuration(np.ones(L, dtype=np.int64)),
                        [t], rng, record="config")
        unlab_max.append(int(traj.snapshots[0].max()))
    p = stats.ks_2samp(lab_max, unlab_max).pvalue
    assert p > 0.001, f"labelled/unlabelled KS p = {p:.2e}"

    h1 = Observable.polynomial([0.0, 1.0])
    h2 = Observable.polynomial([0.0, 0.0, 1.0])
    H_builders = [("muh", CylindricalFunction.product(h1)),
                  ("muh-muh2", CylindricalFunction.product(h1, h2))]
    config_builders = [("flat", flat_config), ("condensed", condensed_config)]
    errs = fv_convergence_errors([64, 1024], lambda L: 1.0 / L,
                                 config_builders, H_builders)
    assert errs[1024] <= errs[64] / 2.0, f"FV battery errors {errs}"
    print(f"\n[criterion 13] identity gap = {worst:.2e}, KS p = {p:.3f}, "
          f"FV errors = {errs}")
