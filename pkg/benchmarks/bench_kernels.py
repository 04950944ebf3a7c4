"""Compare the compiled and numpy statevector kernels.

Usage::

    python benchmarks/bench_kernels.py            # default sizes
    python benchmarks/bench_kernels.py --quick    # small sizes only

For each (qubits, batch) size it times one sweep of single-qubit gates over
every wire, a CNOT ring, and the Pauli expectation pass, for each backend,
and checks that both backends produce the same state.
"""
import argparse
import sys
import timeit

import numpy as np

from qfinseq.qsim import rotation_matrix
from qfinseq.qsim._backend import get_kernels


def random_states(n, batch, seed=0):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal((batch, 1 << n)) + 1j * rng.standard_normal((batch, 1 << n))
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    return np.ascontiguousarray(s)


def workload(k, states, n, gates):
    for q in range(n):
        k.apply_1q(states, gates[q], q, n)
    for q in range(n):
        k.apply_cnot(states, q, (q + 1) % n, n)
    return k.pauli_expectations(states, n)


def bench(n, batch, repeat):
    gates = [np.ascontiguousarray(rotation_matrix("RY", 0.3 + 0.1 * q)) for q in range(n)]
    base = random_states(n, batch)
    out, results = {}, {}
    for name in ("python", "cython"):
        try:
            k = get_kernels(name)
        except ImportError:
            continue
        st = base.copy()
        results[name] = (workload(k, st, n, gates), st)
        st = base.copy()
        t = min(timeit.repeat(lambda: workload(k, st, n, gates), number=1, repeat=repeat))
        out[name] = t
    if len(results) == 2:
        (ea, sa), (eb, sb) = results["python"], results["cython"]
        assert np.allclose(sa, sb, atol=1e-12) and np.allclose(ea, eb, atol=1e-12), "backends disagree"
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    sizes = [(4, 1), (4, 256), (8, 64)] if args.quick else [(4, 1), (4, 256), (4, 4096), (8, 64), (10, 16), (12, 4)]
    print(f"{'qubits':>6} {'batch':>6} {'numpy [ms]':>12} {'cython [ms]':>12} {'speedup':>8}")
    for n, batch in sizes:
        t = bench(n, batch, args.repeat)
        py = t.get("python")
        cy = t.get("cython")
        speed = f"{py / cy:8.1f}" if py and cy else "     n/a"
        cy_s = f"{1e3 * cy:12.3f}" if cy else f"{'n/a':>12}"
        print(f"{n:>6} {batch:>6} {1e3 * py:12.3f} {cy_s} {speed}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
