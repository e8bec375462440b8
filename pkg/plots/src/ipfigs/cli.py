"""Entry point: `ipfigs <figure> --in DIR --out DIR [options]`.

Figures:
  overlay      density panels from ip_measures.csv + dual.csv + density_exp1.csv
  convergence  log-log battery error from report.csv
  pmf          size-biased pmf bars from size_biased_pmf.csv (+ geometric_pmf.csv)
  moments      moment trajectories from moments.csv vs the ODE solution
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .io import InputError
from .reference import GoldenMismatch
from .render import (FigureSpec, render_convergence, render_moments,
                     render_overlay, render_pmf)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="ipfigs")
    sub = ap.add_subparsers(dest="figure", required=True)
    for name in ("overlay", "convergence", "pmf", "moments"):
        sp = sub.add_parser(name)
        sp.add_argument("--in", dest="indir", required=True)
        sp.add_argument("--out", dest="outdir", required=True)
        if name == "pmf":
            sp.add_argument("--gamma", type=float, default=1.0)
        if name == "moments":
            sp.add_argument("--system", default="MASS")
            sp.add_argument("--theta", type=float, default=1.0)
            sp.add_argument("--m0", type=float, default=1.0)
            sp.add_argument("--alpha0", type=float, default=0.0)
    args = ap.parse_args(argv)
    indir = Path(args.indir)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    try:
        if args.figure == "overlay":
            spec = FigureSpec(
                inputs={"measures": indir / "ip_measures.csv",
                        "states": indir / "dual.csv",
                        "golden": indir / "density_exp1.csv"},
                out_stem=str(outdir / "overlay"))
            paths = render_overlay(spec)
        elif args.figure == "convergence":
            spec = FigureSpec(inputs={"report": indir / "report.csv"},
                              out_stem=str(outdir / "convergence"),
                              reference="none")
            paths = render_convergence(spec)
        elif args.figure == "pmf":
            spec = FigureSpec(
                inputs={"pmf": indir / "size_biased_pmf.csv",
                        "geometric": indir / "geometric_pmf.csv"},
                out_stem=str(outdir / "pmf"), reference="geometric")
            paths = render_pmf(spec, gamma=args.gamma)
        else:
            spec = FigureSpec(inputs={"moments": indir / "moments.csv"},
                              out_stem=str(outdir / "moments"),
                              reference="none")
            paths = render_moments(spec, system=args.system, theta=args.theta,
                                   m0=args.m0, alpha0=args.alpha0)
    except (InputError, GoldenMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
