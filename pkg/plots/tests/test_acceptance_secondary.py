"""End-to-end: the plot scripts regenerate the three-panel overlay from
the figure-scale experiment CSVs, with the golden cross-check enforced.

Uses a reduced replica count so the whole pipeline runs in seconds; the
CSV schemas and the cross-check path are identical to the full run.
"""
import shutil
import subprocess
import sys

import pytest

iplab_cli = shutil.which("iplab")


@pytest.mark.skipif(iplab_cli is None, reason="simulation CLI not installed")
def test_overlay_regenerates_from_experiment_csvs(tmp_path):
    data = tmp_path / "data"
    run = subprocess.run(
        [iplab_cli, "reproduce-figure", "--replicas", "20",
         "--dual-replicas", "500", "--workers", "2", "--seed", "5",
         "--out", str(data)],
        capture_output=True, text=True)
    assert run.returncode == 0, run.stderr
    for name in ("ip_measures.csv", "dual.csv", "density_exp1.csv"):
        assert (data / name).exists()

    from ipfigs.cli import main
    out = tmp_path / "figs"
    assert main(["overlay", "--in", str(data), "--out", str(out)]) == 0
    assert (out / "overlay.png").exists()
    assert (out / "overlay.svg").exists()
