"""Containers, pairwise overlap measures, and Monte Carlo packing density.

Everything is dimension-generic over n in {2, 3}: a "ball" container is a
circle/sphere of radius R centered at the origin, a "box" container is the
axis-aligned square/cube [-s/2, s/2]^n.  These functions are the geometric
ground truth that the training and baseline modules report against, so they
stay pure, 64-bit, and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Absolute tolerance for containment checks on layout centers.
CONTAINMENT_TOL = 1e-9

# Monte Carlo points are drawn in fixed-size chunks, each chunk from a
# substream keyed by (seed, chunk index).  The estimate therefore depends
# only on (seed, samples), never on how chunks are scheduled across workers.
MC_CHUNK = 1 << 20


@dataclass(frozen=True)
class Container:
    """The larger object that small balls are packed into.

    kind "ball": circle/sphere of radius ``extent`` centered at the origin.
    kind "box":  axis-aligned square/cube [-extent/2, extent/2]^dim.
    """

    kind: str
    dim: int
    extent: float

    def __post_init__(self) -> None:
        if self.kind not in ("ball", "box"):
            raise ValueError(f"unknown container kind {self.kind!r}")
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if not (math.isfinite(self.extent) and self.extent > 0):
            raise ValueError(f"extent must be a positive real, got {self.extent}")

    @property
    def admissible_radius(self) -> float:
        """Largest small-ball radius that fits at all (the N = 1 case)."""
        return self.extent if self.kind == "ball" else self.extent / 2.0

    def center_bound(self, r: float) -> float:
        """Bound on feasible centers: L2 norm for balls, Linf for boxes."""
        if self.kind == "ball":
            return self.extent - r
        return self.extent / 2.0 - r

    @property
    def volume(self) -> float:
        """Lebesgue measure of the container (area when dim == 2)."""
        if self.kind == "box":
            return self.extent**self.dim
        return ball_volume(self.extent, self.dim)


def ball_volume(r: float, dim: int) -> float:
    """Area of a disc (dim 2) or volume of a ball (dim 3) of radius r."""
    if dim == 2:
        return math.pi * r * r
    if dim == 3:
        return 4.0 / 3.0 * math.pi * r**3
    raise ValueError(f"dim must be 2 or 3, got {dim}")


@dataclass(frozen=True)
class PackingInstance:
    """N identical small balls of radius ``small_radius`` in ``container``.

    count == 0 is allowed so that empty layouts can be measured; the
    optimizers themselves require count >= 1.
    """

    container: Container
    count: int
    small_radius: float

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ValueError(f"count must be nonnegative, got {self.count}")
        r = self.small_radius
        if not (math.isfinite(r) and r > 0):
            raise ValueError(f"small radius must be a positive real, got {r}")
        if r > self.container.admissible_radius:
            raise ValueError(
                f"small radius {r} exceeds the admissible radius "
                f"{self.container.admissible_radius} of the container"
            )

    @property
    def center_bound(self) -> float:
        return self.container.center_bound(self.small_radius)


@dataclass
class Layout:
    """N centers for a packing instance; validated for shape and containment."""

    instance: PackingInstance
    centers: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        dim = self.instance.container.dim
        c = np.asarray(self.centers, dtype=np.float64)
        if c.size == 0:
            c = c.reshape(0, dim)
        if c.ndim != 2 or c.shape != (self.instance.count, dim):
            raise ValueError(
                f"centers must have shape ({self.instance.count}, {dim}), got {c.shape}"
            )
        if c.size and not np.all(np.isfinite(c)):
            raise ValueError("centers contain non-finite values")
        excess = containment_excess(c, self.instance.container, self.instance.small_radius)
        if excess > CONTAINMENT_TOL:
            raise ValueError(f"centers leave the feasible region by {excess:.3e}")
        self.centers = c


def containment_excess(centers: np.ndarray, container: Container, r: float) -> float:
    """Worst violation of the feasible-center constraint; <= 0 means feasible."""
    if centers.size == 0:
        return 0.0
    bound = container.center_bound(r)
    if container.kind == "ball":
        worst = float(np.max(np.linalg.norm(centers, axis=1)))
    else:
        worst = float(np.max(np.abs(centers)))
    return worst - bound


def project_center(point: np.ndarray, container: Container, r: float) -> np.ndarray:
    """Euclidean projection of a candidate center onto the feasible set.

    Balls project radially onto the ball of radius R - r; boxes clamp each
    coordinate to +/-(s/2 - r).  Idempotent; identity on feasible points.
    """
    p = np.asarray(point, dtype=np.float64)
    bound = container.center_bound(r)
    if container.kind == "box":
        return np.clip(p, -bound, bound)
    norm = float(np.linalg.norm(p))
    if norm <= bound:
        return p.copy()
    return p * (bound / norm)


def project_centers(centers: np.ndarray, container: Container, r: float) -> np.ndarray:
    """Row-wise ``project_center`` for an (N, dim) array."""
    c = np.asarray(centers, dtype=np.float64)
    bound = container.center_bound(r)
    if container.kind == "box":
        return np.clip(c, -bound, bound)
    norms = np.linalg.norm(c, axis=1)
    out = c.copy()
    over = norms > bound
    if np.any(over):
        out[over] *= (bound / norms[over])[:, None]
    return out


def overlap_length(c_i: np.ndarray, c_j: np.ndarray, r: float) -> float:
    """max(0, 2r - ||c_i - c_j||): positive iff the two balls overlap."""
    d = float(np.linalg.norm(np.asarray(c_i, float) - np.asarray(c_j, float)))
    return max(0.0, 2.0 * r - d)


def lens_area(d, r: float):
    """Intersection area of two radius-r circles with centers d apart.

    Scalar or array d; zero for d >= 2r, pi r^2 at d = 0, continuous and
    non-increasing in between.
    """
    d_arr = np.asarray(d, dtype=np.float64)
    half = np.clip(d_arr / (2.0 * r), -1.0, 1.0)
    inside = 2.0 * r * r * np.arccos(half) - 0.5 * d_arr * np.sqrt(
        np.maximum(4.0 * r * r - d_arr * d_arr, 0.0)
    )
    out = np.where(d_arr < 2.0 * r, inside, 0.0)
    return float(out) if np.ndim(d) == 0 else out


def lens_volume(d, r: float):
    """Intersection volume of two radius-r spheres with centers d apart."""
    d_arr = np.asarray(d, dtype=np.float64)
    inside = math.pi * (2.0 * r - d_arr) ** 2 * (d_arr + 4.0 * r) / 12.0
    out = np.where(d_arr < 2.0 * r, inside, 0.0)
    return float(out) if np.ndim(d) == 0 else out


def pair_distances(centers: np.ndarray) -> np.ndarray:
    """Condensed vector of pairwise distances (i < j order)."""
    n = centers.shape[0]
    if n < 2:
        return np.zeros(0)
    iu, ju = np.triu_indices(n, k=1)
    diff = centers[iu] - centers[ju]
    return np.sqrt(np.sum(diff * diff, axis=1))


def total_overlap(layout: Layout, measure: str = "length") -> float:
    """Sum of pairwise overlaps over all unordered pairs.

    measure "length" uses the scalar overlap 2r - d; "area_or_volume" uses
    the lens area (dim 2) or lens volume (dim 3).
    """
    r = layout.instance.small_radius
    d = pair_distances(layout.centers)
    if d.size == 0:
        return 0.0
    if measure == "length":
        return float(np.sum(np.maximum(0.0, 2.0 * r - d)))
    if measure == "area_or_volume":
        if layout.instance.container.dim == 2:
            return float(np.sum(lens_area(d, r)))
        return float(np.sum(lens_volume(d, r)))
    raise ValueError(f"unknown overlap measure {measure!r}")


def has_pairwise_triple(layout: Layout) -> bool:
    """True if any three balls overlap mutually (necessary for a triple
    intersection region, so this is a conservative detector)."""
    c = layout.centers
    n = c.shape[0]
    if n < 3:
        return False
    diff = c[:, None, :] - c[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    adj = dist < 2.0 * layout.instance.small_radius
    np.fill_diagonal(adj, False)
    triangles = np.sum((adj @ adj) * adj)
    return bool(triangles > 0)


def _sample_ball(radius: float, dim: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points in a ball via the Z^(1/n) radial law (no rejection)."""
    v = rng.standard_normal((m, dim))
    norms = np.linalg.norm(v, axis=1)
    while np.any(norms == 0.0):  # probability-zero, numerically possible
        bad = norms == 0.0
        v[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(v, axis=1)
    radii = radius * rng.random(m) ** (1.0 / dim)
    return v * (radii / norms)[:, None]


def sample_in_container(container: Container, m: int, rng: np.random.Generator) -> np.ndarray:
    """m points drawn uniformly inside the container."""
    if container.kind == "box":
        half = container.extent / 2.0
        return rng.uniform(-half, half, size=(m, container.dim))
    return _sample_ball(container.extent, container.dim, m, rng)


def sample_feasible_centers(
    instance: PackingInstance, m: int, rng: np.random.Generator
) -> np.ndarray:
    """m centers drawn uniformly from the feasible center set."""
    bound = instance.center_bound
    dim = instance.container.dim
    if instance.container.kind == "box":
        return rng.uniform(-bound, bound, size=(m, dim))
    return _sample_ball(bound, dim, m, rng)


def mc_density(layout: Layout, samples: int, rng_seed: int) -> tuple[float, float]:
    """Monte Carlo packing density: the fraction of the container covered by
    the union of the small balls, with its binomial standard error.

    Deterministic for fixed (rng_seed, samples): points are drawn in
    MC_CHUNK-sized chunks, each chunk from substream (rng_seed, chunk index).
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    container = layout.instance.container
    r = layout.instance.small_radius
    r2 = r * r
    hits = 0
    for k, start in enumerate(range(0, samples, MC_CHUNK)):
        m = min(MC_CHUNK, samples - start)
        rng = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(k,)))
        pts = sample_in_container(container, m, rng)
        covered = np.zeros(m, dtype=bool)
        for c in layout.centers:
            delta = pts - c
            covered |= np.einsum("ij,ij->i", delta, delta) <= r2
        hits += int(np.count_nonzero(covered))
    p_hat = hits / samples
    std_error = math.sqrt(p_hat * (1.0 - p_hat) / samples)
    return p_hat, std_error
