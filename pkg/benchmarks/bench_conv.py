"""Compare the compiled convolution kernels against the NumPy fallback.

Times the forward pass and both gradients on a few shapes that bracket
real workloads (lift, strided downsampling, large single image, training
batch) and prints median milliseconds per call plus the speedup.  Run from
the repository root:

    python3 benchmarks/bench_conv.py [--reps N]
"""

import argparse
import time

import numpy as np

from echoform.kernels import conv_numpy

try:
    from echoform.kernels import _conv_cy
except ImportError:
    _conv_cy = None

# (label, batch, c_in, h, w, c_out, k, stride, pad)
CASES = [
    ("lift 64^2", 1, 2, 64, 64, 4, 3, 1, 1),
    ("down 128^2 s2", 1, 4, 128, 128, 4, 3, 2, 1),
    ("wide 256^2", 1, 4, 256, 256, 8, 3, 1, 1),
    ("batch 4x32^2", 4, 8, 32, 32, 16, 3, 1, 1),
]


def median_ms(fn, reps: int) -> float:
    fn()  # warm caches
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)) * 1e3


def bench_case(label, b, ci, h, w, co, k, stride, pad, reps):
    gen = np.random.default_rng(0)
    x = gen.standard_normal((b, ci, h, w))
    wt = gen.standard_normal((co, ci, k, k))
    gout = np.ones_like(conv_numpy.conv2d_forward(x, wt, stride, pad))

    ops = {
        "forward": lambda m: m.conv2d_forward(x, wt, stride, pad),
        "grad_w": lambda m: m.conv2d_grad_weight(x, gout, k, k, stride, pad),
        "grad_x": lambda m: m.conv2d_grad_input(wt, gout, h, w, stride, pad),
    }
    for op_name, op in ops.items():
        t_np = median_ms(lambda: op(conv_numpy), reps)
        if _conv_cy is None:
            print(f"{label:16s} {op_name:8s} numpy {t_np:8.2f} ms   "
                  f"(extension not built)")
            continue
        gap = np.max(np.abs(op(conv_numpy) - op(_conv_cy)))
        t_cy = median_ms(lambda: op(_conv_cy), reps)
        print(f"{label:16s} {op_name:8s} numpy {t_np:8.2f} ms   "
              f"cython {t_cy:8.2f} ms   speedup {t_np / t_cy:5.2f}x   "
              f"max gap {gap:.1e}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--reps", type=int, default=5,
                        help="timed repetitions per op (median is reported)")
    args = parser.parse_args()
    for case in CASES:
        bench_case(*case, reps=args.reps)


if __name__ == "__main__":
    main()
