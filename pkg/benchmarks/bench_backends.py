"""Compare the compiled training kernels against the NumPy fallback.

Micro-benchmarks call both kernel modules directly; the end-to-end
training comparison re-launches this script in a subprocess per backend
because the kernel binding is fixed when the package is imported.

    python3 benchmarks/bench_backends.py
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def best_of(repeats, fn):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def make_problem(batch, seed=7):
    """A three-layer batch in the shape the kernels consume."""
    rng = np.random.default_rng(seed)
    sizes = [20, 32, 16, 1]
    weights = [rng.normal(scale=0.3, size=(sizes[i + 1], sizes[i]))
               for i in range(3)]
    biases = [rng.normal(scale=0.1, size=sizes[i + 1]) for i in range(3)]
    activations = (1, 2, 0)  # relu, sigmoid, identity
    x = rng.normal(size=(batch, sizes[0]))
    targets = rng.normal(size=batch)
    return weights, biases, activations, x, targets


def micro_benchmarks(batch, repeats):
    from funnet.backends import available_backends

    weights, biases, activations, x, targets = make_problem(batch)
    rows = []
    for kernels in available_backends():
        dws = [np.zeros_like(w) for w in weights]
        dbs = [np.zeros_like(b) for b in biases]
        m_w = [np.zeros_like(w) for w in weights]
        m_b = [np.zeros_like(b) for b in biases]
        v_w = [np.zeros_like(w) for w in weights]
        v_b = [np.zeros_like(b) for b in biases]
        timings = {
            "forward": best_of(repeats, lambda: kernels.forward(
                weights, biases, activations, x)),
            "grad_batch": best_of(repeats, lambda: kernels.grad_batch(
                weights, biases, activations, x, targets)),
            "adam_update": best_of(repeats, lambda: kernels.adam_update(
                [w.copy() for w in weights], [b.copy() for b in biases],
                dws, dbs, m_w, m_b, v_w, v_b, 1, 1e-3, 0.9, 0.999, 1e-8)),
        }
        rows.append((kernels.NAME, timings))
    return rows


def train_once(epochs):
    from funnet.backends import backend_name
    from funnet.basis import FunctionalCurve, make_fourier_basis
    from funnet.dataset import dataset_from_curves
    from funnet.network import FnnConfig, train

    rng = np.random.default_rng(11)
    basis = make_fourier_basis((0.0, 1.0), 7)
    curves = [FunctionalCurve(basis=basis, coefs=rng.normal(size=7))
              for _ in range(512)]
    beta = rng.normal(size=7)
    y = np.array([c.coefs @ beta for c in curves]) + rng.normal(size=512) * 0.1
    dataset = dataset_from_curves([curves], response=y)
    config = FnnConfig(weight_basis_sizes=(7,), hidden_sizes=(32, 16),
                       activations=("relu", "relu"), epochs=epochs,
                       batch_size=64, early_stopping=None, seed=0)
    start = time.perf_counter()
    train(dataset, config)
    return backend_name(), time.perf_counter() - start


def end_to_end(epochs):
    rows = []
    for name in ("python", "compiled"):
        env = dict(os.environ, FUNNET_BACKEND=name)
        proc = subprocess.run(
            [sys.executable, __file__, "--train-worker",
             "--epochs", str(epochs)],
            env=env, capture_output=True, text=True,
        )
        if proc.returncode != 0:
            print(f"  {name:<10} unavailable "
                  f"({proc.stderr.strip().splitlines()[-1]})")
            continue
        used, seconds = proc.stdout.split()[-2:]
        assert used == name, f"worker ran {used!r}, wanted {name!r}"
        rows.append((name, float(seconds)))
    return rows


def print_table(title, rows, unit_scale, unit):
    print(f"\n{title}")
    names = [name for name, _ in rows]
    if isinstance(rows[0][1], dict):
        kernels = list(rows[0][1].keys())
        print(f"  {'kernel':<12}" + "".join(f"{n:>12}" for n in names)
              + ("     speedup" if len(rows) == 2 else ""))
        for kernel in kernels:
            cells = [timings[kernel] for _, timings in rows]
            line = f"  {kernel:<12}" + "".join(
                f"{c * unit_scale:>10.1f}{unit}" for c in cells)
            if len(cells) == 2:
                line += f"{cells[0] / cells[1]:>11.1f}x"
            print(line)
    else:
        for name, seconds in rows:
            print(f"  {name:<10} {seconds:8.2f} s")
        if len(rows) == 2:
            print(f"  speedup    {rows[0][1] / rows[1][1]:8.1f}x")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=256,
                        help="batch size for the kernel micro-benchmarks")
    parser.add_argument("--repeats", type=int, default=20,
                        help="repetitions per timing (best is kept)")
    parser.add_argument("--epochs", type=int, default=30,
                        help="epochs for the end-to-end training run")
    parser.add_argument("--train-worker", action="store_true",
                        help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.train_worker:
        name, seconds = train_once(args.epochs)
        print(name, seconds)
        return

    from funnet.backends import available_backends

    names = [k.NAME for k in available_backends()]
    print(f"available backends: {', '.join(names)}")
    micro = micro_benchmarks(args.batch, args.repeats)
    print_table(f"kernel micro-benchmarks (batch {args.batch}, best of "
                f"{args.repeats})", micro, 1e6, "us")
    print_table(f"end-to-end training (512 observations, {args.epochs} "
                f"epochs)", end_to_end(args.epochs), 1, "s")


if __name__ == "__main__":
    main()
