"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat N]

Times one forward run, one backward costate pass and a small tau scan with
each backend and prints the speed-up.
"""
import argparse
import time

import numpy as np

from sirtimeopt import _backend
from sirtimeopt.integrate import default_config, kernel_coefficients
from sirtimeopt.model import ModelParams, Policy
from sirtimeopt.timeopt import optimize


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(kern, p, pol, cfg):
    coeffs = kernel_coefficients(p, pol)
    k_sw = 1000
    s = np.empty(cfg.k_max + 1)
    i = np.empty(cfg.k_max + 1)
    s[0], i[0] = p.s0, p.i0

    def forward():
        return kern.integrate(*coeffs, p.mu, p.s0, p.i0, 0, k_sw, cfg.k_max, cfg.dt, p.epsilon,
                              cfg.newton_tol, cfg.newton_max_iter, s, i)

    n = forward()[1] + 1
    ss, ii = s[:n].copy(), i[:n].copy()
    ls, li = np.empty(n), np.empty(n)

    def backward():
        kern.adjoint(ss, ii, k_sw, *coeffs, p.mu, cfg.dt, 0.0, -0.01, ls, li)

    def scan():
        saved = _backend.kernels
        _backend.kernels = kern
        try:
            optimize(p, pol, 20, cfg, prune=False)
        finally:
            _backend.kernels = saved

    return {"forward run": forward, "costate pass": backward, "tau scan (M=20)": scan}, n


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    p = ModelParams.from_r0(3.0)
    pol = Policy("isolation", 3.0)
    cfg = default_config(p, pol)
    try:
        backends = {"cython": _backend.get("cython")}
    except ImportError:
        backends = {}
        print("compiled kernels not built; timing the Python backend only")
    backends["python"] = _backend.get("python")

    results = {}
    for name, kern in backends.items():
        work, n = cases(kern, p, pol, cfg)
        results[name] = {label: _best(fn, args.repeat) for label, fn in work.items()}
    print(f"R0=3 isolation u_max=3, dt={cfg.dt:.3g}, {n} grid points per run")
    print(f"{'case':<18}" + "".join(f"{b:>12}" for b in results) + ("     speed-up" if len(results) == 2 else ""))
    for label in results["python"]:
        row = f"{label:<18}" + "".join(f"{results[b][label] * 1e3:>10.2f}ms" for b in results)
        if len(results) == 2:
            row += f"{results['python'][label] / results['cython'][label]:>12.1f}x"
        print(row)


if __name__ == "__main__":
    main()
