import importlib.util
from pathlib import Path

from simplexshot import _backend

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"


def test_benchmark_quick_run(capsys):
    spec = importlib.util.spec_from_file_location("bench_kernels", BENCH)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    rows = bench.main(["--quick"])
    assert len(rows) == 3
    for _, times in rows:
        assert set(times) == set(_backend.available())
        assert all(t > 0 for t in times.values())
    assert "w_descent" in capsys.readouterr().out
