import importlib.util
from pathlib import Path

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernel.py"


def test_benchmark_runs_and_backends_agree(capsys):
    spec = importlib.util.spec_from_file_location("bench_kernel", BENCH)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    assert bench.main(["--steps", "2000", "--repeat", "1"]) == 0
    out = capsys.readouterr().out
    assert out.count("\n") == 1 + 3 * len(bench.available_backends())
