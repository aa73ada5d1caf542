import csv
import subprocess
import sys
from pathlib import Path

import pytest

from hvkit import HAVE_EXTENSION

SCRIPT = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"


@pytest.mark.skipif(not HAVE_EXTENSION, reason="compiled kernels not built")
def test_benchmark_runs_and_backends_agree(tmp_path):
    out = tmp_path / "bench.csv"
    res = subprocess.run([sys.executable, str(SCRIPT), "--repeats", "1", "--out", str(out)],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0, res.stderr
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 8
    assert all(float(r["cython_seconds"]) > 0 and float(r["python_seconds"]) > 0 for r in rows)
