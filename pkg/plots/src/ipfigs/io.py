"""CSV readers for the simulation output schemas.

Schemas consumed here:
  measures:  time,replica,location,weight   ('inf' allowed in location)
  states:    time,replica,state             ('inf' allowed in state)
  curve:     z,f
  pmf:       n,p
  report:    L,N,d,theta,test_id,error
Missing files, missing columns and empty replica sets are reported with
the file and column name.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path


class InputError(ValueError):
    pass


def _float(tok):
    tok = tok.strip()
    return math.inf if tok == "inf" else float(tok)


def _read_rows(path, required):
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: input file does not exist")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        for col in required:
            if col not in cols:
                raise InputError(f"{path}: missing column '{col}'")
        rows = list(reader)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return rows


def read_measures(path):
    """-> {time: {replica: [(location, weight), ...]}}"""
    out = {}
    for row in _read_rows(path, ("time", "replica", "location", "weight")):
        t = float(row["time"])
        r = int(row["replica"])
        out.setdefault(t, {}).setdefault(r, []).append(
            (_float(row["location"]), float(row["weight"])))
    for t, reps in out.items():
        if not reps:
            raise InputError(f"{path}: empty replica set at time {t}")
    return out


def read_states(path):
    """-> {time: [state, ...]}"""
    out = {}
    for row in _read_rows(path, ("time", "replica", "state")):
        out.setdefault(float(row["time"]), []).append(_float(row["state"]))
    return out


def read_curve(path):
    rows = _read_rows(path, ("z", "f"))
    return ([float(r["z"]) for r in rows], [float(r["f"]) for r in rows])


def read_pmf(path):
    rows = _read_rows(path, ("n", "p"))
    return ([int(r["n"]) for r in rows], [float(r["p"]) for r in rows])


def read_report(path):
    rows = _read_rows(path, ("L", "N", "d", "theta", "test_id", "error"))
    return [(int(r["L"]), r["test_id"], float(r["error"])) for r in rows]


def read_moments(path):
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: input file does not exist")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if "t" not in cols:
            raise InputError(f"{path}: missing column 't'")
        rows = list(reader)
    if not rows:
        raise InputError(f"{path}: no data rows")
    series = {c: [float(r[c]) for r in rows] for c in cols}
    return series
