"""Reproducible Brownian increments on uniform time grids.

Increments are produced by a counter-based generator (Philox) keyed on
``(seed, path_index)``; within one path the draw for step k, component j
sits at a fixed counter offset ``k * noise_dim + j``.  Paths are therefore
independent streams that can be generated in any order, on any number of
workers, with bit-identical results.

Uniform bits are mapped to normals through a fixed rational approximation
of the inverse normal CDF (Acklam), so regeneration is bit-exact and does
not depend on the platform's transcendental-function library beyond
``sqrt`` and ``log``.

Coarsening a fine path to a coarser grid sums constituent increments in a
fixed left-to-right pairwise order, so ``coarsen(coarsen(g, 2), 2)`` equals
``coarsen(g, 4)`` bit-exactly and coarse/fine paths stay coupled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "TimePartition",
    "BrownianGrid",
    "generate",
    "generate_increments",
    "coarsen",
    "pairwise_sum",
    "pairwise_group_sum",
    "inverse_normal_cdf",
]


@dataclass(frozen=True)
class TimePartition:
    """Uniform partition of [0, t_end] into ``steps`` intervals.

    ``steps == 0`` is the degenerate empty partition and requires
    ``t_end == 0``; it is accepted so that whole-path drivers can handle
    the no-step case uniformly.
    """

    t_end: float
    steps: int

    def __post_init__(self):
        if self.steps < 0 or int(self.steps) != self.steps:
            raise ConfigError(f"steps must be a nonnegative integer, got {self.steps}")
        if self.steps == 0:
            if self.t_end != 0.0:
                raise ConfigError("empty partition requires t_end == 0")
        elif not (self.t_end > 0.0):
            raise ConfigError(f"t_end must be positive, got {self.t_end}")

    @property
    def dt(self) -> float:
        return self.t_end / self.steps if self.steps else 0.0

    def times(self) -> np.ndarray:
        """Grid points t_k = k * dt, shape (steps + 1,)."""
        return np.arange(self.steps + 1) * self.dt


@dataclass(frozen=True)
class BrownianGrid:
    """Increments of one Brownian path on a uniform partition.

    ``increments[k, j]`` is w_j(t_{k+1}) - w_j(t_k).  Instances are
    immutable; the increment array is marked read-only.
    """

    partition: TimePartition
    noise_dim: int
    increments: np.ndarray
    seed: int
    level: int = 0
    path_index: int = 0

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.shape != (self.partition.steps, self.noise_dim):
            raise ConfigError(
                f"increments shape {inc.shape} does not match "
                f"(steps, noise_dim) = ({self.partition.steps}, {self.noise_dim})"
            )
        inc = inc.copy()
        inc.flags.writeable = False
        object.__setattr__(self, "increments", inc)

    @property
    def dt(self) -> float:
        return self.partition.dt


# Rational approximation of the inverse normal CDF (P. J. Acklam, 2003).
# Relative error below 1.15e-9 over (0, 1).
_ICDF_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
           1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ICDF_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
           6.680131188771972e+01, -1.328068155288572e+01)
_ICDF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
           -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ICDF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
           3.754408661907416e+00)
_ICDF_PLOW = 0.02425


def inverse_normal_cdf(u: np.ndarray) -> np.ndarray:
    """Standard-normal quantile of ``u`` in (0, 1), elementwise."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise ValueError("inverse_normal_cdf requires arguments strictly inside (0, 1)")
    a, b, c, d = _ICDF_A, _ICDF_B, _ICDF_C, _ICDF_D
    out = np.empty_like(u)

    lo = u < _ICDF_PLOW
    hi = u > 1.0 - _ICDF_PLOW
    mid = ~(lo | hi)

    if np.any(mid):
        q = u[mid] - 0.5
        r = q * q
        num = ((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]
        den = ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        out[mid] = q * num / den
    if np.any(lo):
        q = np.sqrt(-2.0 * np.log(u[lo]))
        num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
        den = (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        out[lo] = num / den
    if np.any(hi):
        q = np.sqrt(-2.0 * np.log(1.0 - u[hi]))
        num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
        den = (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        out[hi] = -num / den
    return out


def _validate_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)):
        raise ConfigError(f"seed must be an integer, got {type(seed).__name__}")
    if not (0 <= int(seed) < 2 ** 64):
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    return int(seed)


def _standard_normals(seed: int, path_index: int, count: int) -> np.ndarray:
    """``count`` standard normals from the (seed, path_index) stream."""
    bitgen = np.random.Philox(key=np.array([seed, path_index], dtype=np.uint64))
    raw = bitgen.random_raw(count)
    # 53-bit uniforms shifted into the open interval (0, 1)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)
    return inverse_normal_cdf(u)


def generate(partition: TimePartition, noise_dim: int, seed: int,
             path_index: int = 0, level: int = 0) -> BrownianGrid:
    """Sample one path of N(0, dt) increments, shape (steps, noise_dim).

    The stream is keyed on (seed, path_index); regeneration with the same
    key is bit-exact and independent of any other path's generation.
    """
    if partition.steps < 1:
        raise ConfigError("generate requires at least one step")
    if noise_dim < 1:
        raise ConfigError(f"noise_dim must be positive, got {noise_dim}")
    seed = _validate_seed(seed)
    if path_index < 0:
        raise ConfigError(f"path_index must be nonnegative, got {path_index}")
    z = _standard_normals(seed, path_index, partition.steps * noise_dim)
    inc = np.sqrt(partition.dt) * z.reshape(partition.steps, noise_dim)
    return BrownianGrid(partition, noise_dim, inc, seed, level, path_index)


def generate_increments(partition: TimePartition, noise_dim: int, seed: int,
                        path_indices) -> np.ndarray:
    """Increments for several paths at once, shape (paths, steps, noise_dim).

    Row p holds exactly the increments :func:`generate` would produce for
    ``path_indices[p]``.
    """
    if partition.steps < 1:
        raise ConfigError("generate_increments requires at least one step")
    if noise_dim < 1:
        raise ConfigError(f"noise_dim must be positive, got {noise_dim}")
    seed = _validate_seed(seed)
    path_indices = list(path_indices)
    out = np.empty((len(path_indices), partition.steps, noise_dim))
    scale = np.sqrt(partition.dt)
    for row, p in enumerate(path_indices):
        z = _standard_normals(seed, int(p), partition.steps * noise_dim)
        out[row] = scale * z.reshape(partition.steps, noise_dim)
    return out


def _pairwise_reduce(arr: np.ndarray, axis: int) -> np.ndarray:
    """Sum along ``axis`` by repeated adjacent pairing, left to right.

    For a power-of-two extent this is the balanced tree
    ((w1+w2)+(w3+w4))..., which makes nested dyadic coarsening associative
    by construction.  An odd trailing element is carried unchanged to the
    next round.
    """
    a = np.moveaxis(np.asarray(arr, dtype=float), axis, 0)
    n = a.shape[0]
    while n > 1:
        m = n // 2
        paired = a[0:2 * m:2] + a[1:2 * m:2]
        if n % 2:
            a = np.concatenate([paired, a[n - 1:n]], axis=0)
        else:
            a = paired
        n = a.shape[0]
    return np.moveaxis(a, 0, axis)


def pairwise_sum(arr: np.ndarray, axis: int = 0) -> np.ndarray:
    """Full reduction along ``axis`` in the fixed pairwise order."""
    return np.squeeze(_pairwise_reduce(arr, axis), axis=axis)


def pairwise_group_sum(arr: np.ndarray, factor: int, axis: int = 0) -> np.ndarray:
    """Sum consecutive groups of ``factor`` entries along ``axis``.

    The extent of ``axis`` must be divisible by ``factor``; each group is
    reduced in the fixed pairwise order.
    """
    a = np.moveaxis(np.asarray(arr, dtype=float), axis, 0)
    n = a.shape[0]
    if factor < 1 or n % factor != 0:
        raise ConfigError(f"factor {factor} does not divide {n} steps")
    grouped = a.reshape(n // factor, factor, *a.shape[1:])
    reduced = np.squeeze(_pairwise_reduce(grouped, 1), axis=1)
    return np.moveaxis(reduced, 0, axis)


def coarsen(grid: BrownianGrid, factor: int) -> BrownianGrid:
    """Merge every ``factor`` consecutive increments of ``grid``.

    The coarse path is driven by the same Brownian motion: coarse increment
    k is the (pairwise-ordered) sum of its ``factor`` fine constituents.
    ``factor == 1`` returns a grid with bit-identical increments.
    """
    if factor < 1 or int(factor) != factor:
        raise ConfigError(f"factor must be a positive integer, got {factor}")
    if grid.partition.steps % factor != 0:
        raise ConfigError(
            f"factor {factor} does not divide {grid.partition.steps} steps")
    if factor == 1:
        return grid
    coarse_steps = grid.partition.steps // factor
    inc = pairwise_group_sum(grid.increments, factor, axis=0)
    new_level = grid.level
    shift = int(np.log2(factor))
    if 2 ** shift == factor:
        new_level = grid.level - shift
    part = TimePartition(grid.partition.t_end, coarse_steps)
    return BrownianGrid(part, grid.noise_dim, inc, grid.seed, new_level,
                        grid.path_index)
