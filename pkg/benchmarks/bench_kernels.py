"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--paths 2000] [--repeat 3]

Each backend runs in its own interpreter (the backend is chosen at import
time from ``POLYSLE_NO_NUMBA``). Numba timings exclude the first call, which
compiles or loads the cache.
"""
import argparse
import json
import os
import subprocess
import sys
import textwrap

WORKER = textwrap.dedent("""
    import json, sys, time
    import numpy as np
    from polysle import backend
    from polysle.driving import simulate_endpoints, metric_values_at_clock
    from polysle.geometry import PrevertexConfig
    from polysle.verify import hitting_probability_mc

    paths, repeat = int(sys.argv[1]), int(sys.argv[2])
    cfg = PrevertexConfig((-1.0, 1.0), (0.5, 0.5), 4.0)
    jobs = {
        "endpoints": lambda n: simulate_endpoints(cfg, 0.02, 1e-4, n, seed=1),
        "metric": lambda n: metric_values_at_clock(cfg, 0.01, 1e-4, n, seed=2, S=0.3),
        "hitting": lambda n: hitting_probability_mc(8.0, 1.0, 2.0, n, seed=3),
    }
    out = {"backend": backend()}
    for name, job in jobs.items():
        job(4)  # warm-up
        best = float("inf")
        for _ in range(repeat):
            t = time.perf_counter()
            job(paths)
            best = min(best, time.perf_counter() - t)
        out[name] = best
    print(json.dumps(out))
""")


def run(no_numba: bool, paths: int, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("POLYSLE_NO_NUMBA", None)
    if no_numba:
        env["POLYSLE_NO_NUMBA"] = "1"
    r = subprocess.run([sys.executable, "-c", WORKER, str(paths), str(repeat)],
                       capture_output=True, text=True, env=env, check=True)
    return json.loads(r.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run(False, args.paths, args.repeat)
    slow = run(True, args.paths, args.repeat)
    print(f"{'kernel':<12}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for k in ("endpoints", "metric", "hitting"):
        print(f"{k:<12}{fast[k]:>12.3f}{slow[k]:>12.3f}{slow[k] / fast[k]:>10.1f}")


if __name__ == "__main__":
    main()
