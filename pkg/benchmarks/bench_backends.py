"""Timing comparison of the hot feature kernels across backends.

Runs the three-patch LBP code map and the keypoint descriptor kernel with
the numba-compiled loops (when numba is importable) and with the vectorized
numpy fallback, on a face-sized image.

Usage: python benchmarks/bench_backends.py [--size 64] [--repeats 5]
"""

import argparse
import time

import numpy as np

from poseexpr.backend import HAS_NUMBA
from poseexpr.features import _kern_numpy
from poseexpr.features.image import GrayImage, image_gradients


def timed(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    img = rng.uniform(0.0, 1.0, (args.size, args.size))
    mag, ori = image_gradients(GrayImage(img))
    keypoints = np.column_stack([
        rng.uniform(4.0, args.size - 4.0, 68),
        rng.uniform(4.0, args.size - 4.0, 68),
    ])

    backends = {"numpy": _kern_numpy}
    if HAS_NUMBA:
        from poseexpr.features import kernels as kb

        class _Jit:
            tplbp_code_map = staticmethod(kb.tplbp_code_map)
            sift_raw_descriptor = staticmethod(kb.sift_raw_descriptor)

        # warm up the lazy compilation so it is not counted
        kb.tplbp_code_map(img, 2.0, 8, 3, 2, 0.01)
        kb.sift_raw_descriptor(mag, ori, 10.0, 10.0, 8.0, 4, 8)
        backends["numba"] = _Jit
    else:
        print("numba not importable; timing the numpy backend only")

    print(f"image {args.size}x{args.size}, best of {args.repeats} runs")
    print(f"{'kernel':<28}" + "".join(f"{name:>12}" for name in backends))

    rows = [
        ("tplbp_code_map (full image)",
         lambda mod: mod.tplbp_code_map(img, 2.0, 8, 3, 2, 0.01)),
        ("sift descriptors (68 pts)",
         lambda mod: [mod.sift_raw_descriptor(mag, ori, x, y, 8.0, 4, 8)
                      for x, y in keypoints]),
    ]
    results = {}
    for label, make in rows:
        times = []
        for name, mod in backends.items():
            t = timed(lambda: make(mod), args.repeats)
            results[(label, name)] = t
            times.append(f"{t * 1e3:>10.2f}ms")
        print(f"{label:<28}" + "".join(times))

    if HAS_NUMBA:
        for label, _ in rows:
            ratio = results[(label, "numpy")] / results[(label, "numba")]
            print(f"{label}: numba is {ratio:.1f}x the numpy backend speed")


if __name__ == "__main__":
    main()
