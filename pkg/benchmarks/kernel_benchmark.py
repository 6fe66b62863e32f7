"""Compare the compiled kernels against the pure-numpy fallback.

Runs the queue sweep and the FK weight computation twice in fresh
subprocesses, once as installed and once with LOWSPEC_NO_NUMBA=1, and
prints a small timing table.  The estimates themselves must agree
bit-for-bit between the two paths; the script asserts that.

Usage: python3 benchmarks/kernel_benchmark.py [--n-paths N]
"""

import argparse
import json
import os
import subprocess
import sys
import textwrap

WORKER = textwrap.dedent("""
    import json, time
    import lowspec as L
    import lowspec.measures as me

    n = {n_paths}
    tr = L.build_renewal_transform(me.two_atoms(0.5, 1.0))
    t0 = time.perf_counter()
    stats = L.sample_paths(tr, 30.0, n, 7, tgrid=[1.0, 5.0], workers=1)
    t_queue = time.perf_counter() - t0

    model = L.ssb_model(1.0, 0.2, 1.0, 4)
    t0 = time.perf_counter()
    est = L.fk_mc_Z(model, 4.0, n, 7, workers=1)
    t_fk = time.perf_counter() - t0

    print(json.dumps({{
        "queue_s": t_queue, "fk_s": t_fk,
        "queue_digest": stats.to_dict(), "fk_logZ": est.logZ,
    }}))
""")


def run_case(n_paths, no_numba):
    env = dict(os.environ)
    if no_numba:
        env["LOWSPEC_NO_NUMBA"] = "1"
    else:
        env.pop("LOWSPEC_NO_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", WORKER.format(n_paths=n_paths)],
                         capture_output=True, text=True, env=env, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-paths", type=int, default=50000)
    args = ap.parse_args()

    # run the compiled case twice so the table reports post-warmup timings
    run_case(args.n_paths, no_numba=False)
    fast = run_case(args.n_paths, no_numba=False)
    slow = run_case(args.n_paths, no_numba=True)

    assert fast["queue_digest"] == slow["queue_digest"], \
        "queue results differ between kernel paths"
    assert fast["fk_logZ"] == slow["fk_logZ"], \
        "FK results differ between kernel paths"

    print(f"{args.n_paths} paths, single worker")
    print(f"{'kernel':<14}{'numba (s)':>12}{'numpy (s)':>12}{'speedup':>10}")
    for key, label in (("queue_s", "queue sweep"), ("fk_s", "fk weights")):
        ratio = slow[key] / fast[key]
        print(f"{label:<14}{fast[key]:>12.3f}{slow[key]:>12.3f}{ratio:>9.1f}x")
    print("results identical across kernel paths")


if __name__ == "__main__":
    main()
