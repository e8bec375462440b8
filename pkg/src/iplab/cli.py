"""Batch experiment runner.

Every module is exposed as a subcommand taking a declarative descriptor
(JSON file via --descriptor) mirrored by flat flags.  A key set both in
the file and as a flag is a conflict and rejected; unknown descriptor
keys are rejected.  Exit codes: 0 success, 2 validation error, 3
numerical gate failure.  Each run writes the module CSVs plus a JSON
manifest (descriptor echo, master seed, versions, wall time) so any
output is reproducible from its manifest alone.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .diffusions import (EULER, EXACT_CIR, ensemble_law, jacobi_spec,
                         macro_dual_spec, meso_dual_spec, moment_ode_solve,
                         simulate_jump_diffusion)
from .flemingviot import LabelledState, labelled_simulate, type_embedding
from .generators import (CylindricalFunction, condensed_config,
                         convergence_report, dimer_config, flat_config,
                         zipf_config)
from .observables import MACRO, MESO, Observable
from .simulator import IPParams, MESO_TIME, RAW, run_ensemble
from .states import (Configuration, DiscreteMeasure, config_from_measure)
from .stationary import (CanonicalMeasure, closed_form_density,
                         fokker_planck_solve, geometric_limit_pmf,
                         size_biased_marginal)

INF = math.inf


class ValidationError(Exception):
    pass


class GateFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# descriptor plumbing

# key: (parser, default, required)
def _float_list(v):
    if isinstance(v, str):
        v = [x for x in v.replace(",", " ").split() if x]
    return [float(x) for x in v]


def _int_list(v):
    if isinstance(v, str):
        v = [x for x in v.replace(",", " ").split() if x]
    return [int(x) for x in v]


def _ext_float(v):
    if isinstance(v, str) and v.strip().lower() == "inf":
        return INF
    return float(v)


SCHEMAS = {
    "simulate-ip": {
        "L": (int, None, True), "N": (int, None, True), "d": (float, None, True),
        "time_scale": (str, "raw", False), "times": (_float_list, None, True),
        "replicas": (int, 1, False), "record": (str, "macro", False),
        "init": (str, "flat", False),
    },
    "simulate-labelled": {
        "L": (int, None, True), "N": (int, None, True), "d": (float, None, True),
        "times": (_float_list, None, True), "replicas": (int, 1, False),
        "init": (str, "flat", False),
    },
    "simulate-diffusion": {
        "process": (str, "meso", False), "theta": (float, 1.0, False),
        "z0": (_ext_float, 0.0, False), "times": (_float_list, None, True),
        "replicas": (int, 1000, False), "scheme": (str, "exact_cir", False),
        "dt": (float, 1e-3, False),
    },
    "generator-check": {
        "mode": (str, "macro", False), "L_grid": (_int_list, [64, 256, 1024], False),
        "rho": (float, 1.0, False), "theta": (float, 1.0, False),
    },
    "duality-check": {
        "L": (int, 512, False), "N": (int, 512, False), "theta": (float, 1.0, False),
        "times": (_float_list, [0.1, 0.5, 2.0], False), "replicas": (int, 500, False),
    },
    "stationary": {
        "L": (int, None, True), "N": (int, None, True), "d": (float, None, True),
        "gamma": (float, None, False), "n_max": (int, 10, False),
    },
    "density": {
        "t": (float, None, True), "z0": (_ext_float, 0.0, False),
        "z_max": (float, 20.0, False), "points": (int, 400, False),
    },
    "pde": {
        "t": (float, None, True), "z_max": (float, 20.0, False),
        "nodes": (int, 2000, False), "dt": (float, 1e-3, False),
        "check": (bool, False, False),
    },
    "moments": {
        "system": (str, None, True), "theta": (float, 1.0, False),
        "m0": (float, 1.0, False), "m_max": (int, 3, False),
        "init": (_float_list, None, False), "alpha0": (float, 0.0, False),
        "times": (_float_list, None, True),
    },
    "reproduce-figure": {
        "L": (int, 1024, False), "N": (int, 1024, False), "d": (float, 1.0 / 32, False),
        "times": (_float_list, [0.1, 1.0, 5.0], False),
        "replicas": (int, 1000, False), "init": (str, "delta:0.78125", False),
        "dual_replicas": (int, 10000, False),
    },
}


def _merge_descriptor(sub, file_path, flag_values):
    schema = SCHEMAS[sub]
    desc = {}
    if file_path:
        try:
            raw = json.loads(Path(file_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"descriptor: cannot read ({exc})")
        if not isinstance(raw, dict):
            raise ValidationError("descriptor: top level must be an object")
        for key in raw:
            if key not in schema:
                raise ValidationError(f"descriptor key '{key}' is not valid for {sub}")
        desc.update(raw)
    for key, value in flag_values.items():
        if value is None:
            continue
        if key in desc:
            raise ValidationError(
                f"key '{key}' set both in the descriptor file and as a flag")
        desc[key] = value
    out = {}
    for key, (parse, default, required) in schema.items():
        if key in desc:
            try:
                out[key] = parse(desc[key]) if parse is not bool else bool(desc[key])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"key '{key}': {exc}")
        elif required:
            raise ValidationError(f"required key '{key}' missing")
        else:
            out[key] = default
    if "times" in out and out["times"] is not None and len(out["times"]) == 0:
        raise ValidationError("key 'times' must list at least one time")
    return out


def _build_init(spec, L, N, d):
    if spec == "flat":
        return flat_config(L, N)
    if spec == "condensed":
        return condensed_config(L, N)
    if spec == "dimer":
        return dimer_config(L, N)
    if spec == "zipf":
        return zipf_config(L, N)
    if spec.startswith("delta:"):
        z = float(spec.split(":", 1)[1])
        return config_from_measure(DiscreteMeasure([z], [1.0], MESO), L, N, d)
    if spec == "stationary":
        rng = np.random.default_rng(12345)
        return CanonicalMeasure(L, N, d).exact_sampler(rng)
    raise ValidationError(f"key 'init': unknown spec '{spec}'")


def _fmt(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return repr(float(x))


def _write_measure_csv(path, rows):
    """rows: (time, replica, measure)."""
    with open(path, "w") as fh:
        fh.write("time,replica,location,weight\n")
        for t, r, m in rows:
            for z, w in zip(m.locations, m.weights):
                fh.write(f"{_fmt(t)},{r},{_fmt(z)},{_fmt(w)}\n")


# ---------------------------------------------------------------------------
# subcommand bodies (return list of output files)


def _cmd_simulate_ip(desc, out, seed, workers):
    ts = MESO_TIME if desc["time_scale"] == "meso" else RAW
    params = IPParams(desc["L"], desc["N"], desc["d"], ts)
    init = _build_init(desc["init"], desc["L"], desc["N"], desc["d"])
    res = run_ensemble(params, init, desc["times"], desc["replicas"], seed,
                       record=desc["record"], workers=workers)
    rows = [(t, r, res.snapshots[r][i])
            for r in range(res.replicas)
            for i, t in enumerate(res.times)]
    rows.sort(key=lambda x: (x[0], x[1]))
    path = out / "trajectory.csv"
    _write_measure_csv(path, rows)
    return [path]


def _cmd_simulate_labelled(desc, out, seed, workers):
    L, N, d = desc["L"], desc["N"], desc["d"]
    init_cfg = _build_init(desc["init"], L, N, d)
    positions = np.repeat(np.arange(1, L + 1), init_cfg.occupations)
    seeds = np.random.SeedSequence(seed).spawn(desc["replicas"])
    path = out / "trajectory.csv"
    with open(path, "w") as fh:
        fh.write("time,replica,location,weight,labelled\n")
        for r in range(desc["replicas"]):
            rng = np.random.default_rng(seeds[r])
            state = LabelledState(positions.copy(), L)
            snaps, _ = labelled_simulate(state, d, desc["times"], rng)
            for t, st in zip(desc["times"], snaps):
                m = type_embedding(st)
                for z, w in zip(m.locations, m.weights):
                    fh.write(f"{_fmt(t)},{r},{_fmt(z)},{_fmt(w)},1\n")
    return [path]


def _cmd_simulate_diffusion(desc, out, seed, workers):
    proc = desc["process"]
    if proc == "macro":
        spec = macro_dual_spec(desc["theta"])
    elif proc == "meso":
        spec = meso_dual_spec()
    elif proc == "jacobi":
        spec = jacobi_spec(desc["theta"])
    else:
        raise ValidationError(f"key 'process': unknown '{proc}'")
    scheme = desc["scheme"]
    if scheme not in (EULER, EXACT_CIR):
        raise ValidationError("key 'scheme': must be 'euler' or 'exact_cir'")
    rng = np.random.default_rng(seed)
    path = out / "ensemble.csv"
    with open(path, "w") as fh:
        fh.write("time,replica,state\n")
        for t in desc["times"]:
            states = [simulate_jump_diffusion(spec, desc["z0"], t, scheme, rng,
                                              dt=desc["dt"])
                      for _ in range(desc["replicas"])]
            for r, s in enumerate(states):
                fh.write(f"{_fmt(t)},{r},{_fmt(s)}\n")
    return [path]


def _cmd_generator_check(desc, out, seed, workers):
    mode = MACRO if desc["mode"] == "macro" else MESO
    report = convergence_report(mode, desc["L_grid"], rho=desc["rho"],
                                theta=desc["theta"])
    path = out / "report.csv"
    path.write_text(report.to_csv())
    errs = report.errors_by_L()
    Ls = sorted(errs)
    if errs[Ls[-1]] > errs[Ls[0]] / 4.0:
        raise GateFailure(
            f"decrease gate: error {errs[Ls[-1]]:.3e} at L={Ls[-1]} exceeds "
            f"a quarter of {errs[Ls[0]]:.3e} at L={Ls[0]}")
    return [path]


def _cmd_duality_check(desc, out, seed, workers):
    from .diffusions import macro_mean
    from .metrics import ComparisonResult
    from .states import integrate
    theta = desc["theta"]
    L, N = desc["L"], desc["N"]
    params = IPParams(L, N, theta / L, RAW)
    init = condensed_config(L, N)
    res = run_ensemble(params, init, desc["times"], desc["replicas"], seed,
                       record="macro", workers=workers)
    z = Observable.polynomial([0.0, 1.0])
    rng = np.random.default_rng(seed + 1)
    rows, failed = [], False
    for i, t in enumerate(res.times):
        vals = np.array([integrate(m, z) for m in res.at_time(i)])
        target = macro_mean(theta, 1.0, t)
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        resid = abs(vals.mean() - target)
        rows.append(ComparisonResult(f"duality_t{t:g}", resid, se,
                                     vals.size, 0))
        if resid > 3.0 * max(se, 1e-12):
            failed = True
    path = out / "duality.csv"
    with open(path, "w") as fh:
        fh.write(ComparisonResult.csv_header() + "\n")
        for row in rows:
            fh.write(row.to_csv_row() + "\n")
    if failed:
        raise GateFailure("duality residual above 3 standard errors")
    return [path]


def _cmd_stationary(desc, out, seed, workers):
    L, N, d = desc["L"], desc["N"], desc["d"]
    nmax = desc["n_max"]
    p1 = out / "size_biased_pmf.csv"
    with open(p1, "w") as fh:
        fh.write("n,p\n")
        for n in range(1, nmax + 1):
            fh.write(f"{n},{size_biased_marginal(n, L, N, d)!r}\n")
    files = [p1]
    gamma = desc["gamma"] if desc["gamma"] is not None else N / (d * L)
    p2 = out / "geometric_pmf.csv"
    with open(p2, "w") as fh:
        fh.write("n,p\n")
        for n in range(1, nmax + 1):
            fh.write(f"{n},{geometric_limit_pmf(n, gamma)!r}\n")
    files.append(p2)
    return files


def _cmd_density(desc, out, seed, workers):
    zs = np.linspace(desc["z_max"] / desc["points"], desc["z_max"], desc["points"])
    path = out / "density.csv"
    with open(path, "w") as fh:
        fh.write("z,f\n")
        for z in zs:
            fh.write(f"{_fmt(z)},{closed_form_density(desc['t'], float(z), desc['z0'])!r}\n")
    return [path]


def _cmd_pde(desc, out, seed, workers):
    eps = 1e-3
    grid, f = fokker_planck_solve(
        lambda z: closed_form_density(eps, z, 0.0) if z > 0 else 1.0,
        desc["t"] - eps, z_max=desc["z_max"], nodes=desc["nodes"], dt=desc["dt"])
    path = out / "pde.csv"
    with open(path, "w") as fh:
        fh.write("z,f\n")
        for z, v in zip(grid, f):
            fh.write(f"{_fmt(z)},{_fmt(v)}\n")
    if desc["check"]:
        mask = (grid >= 0.1) & (grid <= 10.0)
        ref = np.array([closed_form_density(desc["t"], float(z), 0.0)
                        for z in grid[mask]])
        err = float(np.max(np.abs(f[mask] - ref)))
        if err > 1e-3:
            raise GateFailure(f"PDE max-norm {err:.2e} above 1e-3")
    return [path]


def _cmd_moments(desc, out, seed, workers):
    system = desc["system"].upper()
    path = out / "moments.csv"
    with open(path, "w") as fh:
        if system == "PD_MOMENTS":
            init = desc["init"] or [1.0] * (desc["m_max"] - 1)
            header = ",".join(f"phi{m}" for m in range(2, desc["m_max"] + 1))
            fh.write(f"t,{header}\n")
            for t in desc["times"]:
                y = moment_ode_solve("PD_MOMENTS", t, theta=desc["theta"],
                                     m_max=desc["m_max"], init=init)
                fh.write(_fmt(t) + "," + ",".join(_fmt(v) for v in y) + "\n")
        elif system in ("MACRO_MEAN", "MASS"):
            fh.write("t,value\n")
            for t in desc["times"]:
                kw = ({"theta": desc["theta"], "m0": desc["m0"]}
                      if system == "MACRO_MEAN" else {"alpha0": desc["alpha0"]})
                fh.write(f"{_fmt(t)},{moment_ode_solve(system, t, **kw)!r}\n")
        else:
            raise ValidationError("key 'system': one of MACRO_MEAN, PD_MOMENTS, MASS")
    return [path]


def _cmd_reproduce_figure(desc, out, seed, workers):
    L, N, d = desc["L"], desc["N"], desc["d"]
    init = _build_init(desc["init"], L, N, d)
    params = IPParams(L, N, d, MESO_TIME)
    res = run_ensemble(params, init, desc["times"], desc["replicas"], seed,
                       record="meso", workers=workers)
    rows = [(t, r, res.snapshots[r][i])
            for r in range(res.replicas)
            for i, t in enumerate(res.times)]
    rows.sort(key=lambda x: (x[0], x[1]))
    p1 = out / "ip_measures.csv"
    _write_measure_csv(p1, rows)

    # matched dual ensemble from the embedded initial law
    from .states import embed_mesoscopic
    init_law = embed_mesoscopic(init, d)
    spec = meso_dual_spec()
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    p2 = out / "dual.csv"
    with open(p2, "w") as fh:
        fh.write("time,replica,state\n")
        for t in desc["times"]:
            law = ensemble_law(spec, init_law, t, desc["dual_replicas"],
                               EXACT_CIR, rng)
            for r, s in enumerate(law.states):
                fh.write(f"{_fmt(t)},{r},{_fmt(s)}\n")

    # golden reference curve: the stationary unit-exponential density
    p3 = out / "density_exp1.csv"
    zs = np.linspace(0.05, 20.0, 400)
    with open(p3, "w") as fh:
        fh.write("z,f\n")
        for z in zs:
            fh.write(f"{_fmt(z)},{_fmt(math.exp(-z))}\n")
    return [p1, p2, p3]


COMMANDS = {
    "simulate-ip": _cmd_simulate_ip,
    "simulate-labelled": _cmd_simulate_labelled,
    "simulate-diffusion": _cmd_simulate_diffusion,
    "generator-check": _cmd_generator_check,
    "duality-check": _cmd_duality_check,
    "stationary": _cmd_stationary,
    "density": _cmd_density,
    "pde": _cmd_pde,
    "moments": _cmd_moments,
    "reproduce-figure": _cmd_reproduce_figure,
}


def _build_parser():
    parser = argparse.ArgumentParser(prog="iplab")
    subs = parser.add_subparsers(dest="subcommand", required=True)
    for name, schema in SCHEMAS.items():
        sp = subs.add_parser(name)
        sp.add_argument("--descriptor", default=None)
        sp.add_argument("--out", default="out")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=1)
        for key, (parse, default, required) in schema.items():
            flag = "--" + key.replace("_", "-")
            if parse is bool:
                sp.add_argument(flag, dest=key, action="store_const", const=True,
                                default=None)
            else:
                sp.add_argument(flag, dest=key, type=str, default=None)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    sub = args.subcommand
    flag_values = {k: getattr(args, k) for k in SCHEMAS[sub]}
    t0 = time.monotonic()
    try:
        desc = _merge_descriptor(sub, args.descriptor, flag_values)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[sub](desc, out, args.seed, args.workers)
        code = 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GateFailure as exc:
        print(f"gate failure: {exc}", file=sys.stderr)
        outputs = sorted(Path(args.out).glob("*.csv")) if Path(args.out).exists() else []
        code = 3
    manifest = {
        "subcommand": sub,
        "descriptor": {k: ("inf" if isinstance(v, float) and math.isinf(v) else v)
                       for k, v in desc.items()},
        "seed": args.seed,
        "workers": args.workers,
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "iplab": __version__,
        },
        "wall_time_s": round(time.monotonic() - t0, 3),
        "outputs": [str(p) for p in outputs],
        "exit_code": code,
    }
    (Path(args.out) / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
