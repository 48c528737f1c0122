"""Independent oracles used by the tests.

These deliberately avoid the library's closed forms and gradient code:
lens measures come from Monte Carlo hit counting in a bounding box, and
gradients from central finite differences.
"""

from __future__ import annotations

import math

import numpy as np


def mc_lens_area(d: float, r: float, samples: int = 10_000_000, seed: int = 0) -> float:
    """Hit-count estimate of the intersection area of two radius-r circles
    at center distance d, sampling the bounding box of the lens."""
    if d >= 2 * r:
        return 0.0
    h = math.sqrt(r * r - (d / 2.0) ** 2)
    lo_x, hi_x = d - r, r
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo_x, hi_x, samples)
    y = rng.uniform(-h, h, samples)
    inside = (x * x + y * y <= r * r) & ((x - d) ** 2 + y * y <= r * r)
    box = (hi_x - lo_x) * 2.0 * h
    return box * np.count_nonzero(inside) / samples


def mc_lens_volume(d: float, r: float, samples: int = 10_000_000, seed: int = 0) -> float:
    """3D analogue of mc_lens_area for two radius-r spheres."""
    if d >= 2 * r:
        return 0.0
    h = math.sqrt(r * r - (d / 2.0) ** 2)
    lo_x, hi_x = d - r, r
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo_x, hi_x, samples)
    y = rng.uniform(-h, h, samples)
    z = rng.uniform(-h, h, samples)
    inside = (x * x + y * y + z * z <= r * r) & ((x - d) ** 2 + y * y + z * z <= r * r)
    box = (hi_x - lo_x) * (2.0 * h) ** 2
    return box * np.count_nonzero(inside) / samples


def finite_difference_grads(f, params: list[np.ndarray], h: float = 1e-5) -> list[np.ndarray]:
    """Central finite differences of a scalar function of the given arrays,
    evaluated elementwise (mutates and restores the arrays in place)."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat, gflat = p.ravel(), g.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            fp = f()
            flat[k] = orig - h
            fm = f()
            flat[k] = orig
            gflat[k] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads
