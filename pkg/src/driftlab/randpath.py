"""Seeded samplers for Brownian and fractional Brownian paths on dyadic grids.

All samplers are exact in distribution on their grid and are pure functions
of an :class:`RngStream`: the same (seed, stream_id) always reproduces the
same path bit for bit. Grids are uniform dyadic partitions of [t0, t1], so
bridge refinement is exact and box counts align with dyadic cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimeGrid",
    "PathSample",
    "RngStream",
    "brownian_sample",
    "refine_bridge",
    "fbm_sample",
]

# Dense-covariance fallback for fBM is allowed up to this many grid points.
_FBM_DENSE_LIMIT = 2**12


@dataclass(frozen=True)
class TimeGrid:
    """Uniform dyadic grid on [t0, t1] with 2**levels + 1 points."""

    t0: float
    t1: float
    levels: int

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.t1)):
            raise ValueError("grid bounds must be finite")
        if self.t0 < 0:
            raise ValueError("grid must start at t0 >= 0")
        if not self.t1 > self.t0:
            raise ValueError("grid needs t1 > t0")
        if self.levels < 0 or int(self.levels) != self.levels:
            raise ValueError("levels must be a nonnegative integer")

    @property
    def n_points(self) -> int:
        return 2**self.levels + 1

    @property
    def spacing(self) -> float:
        return (self.t1 - self.t0) / 2**self.levels

    def times(self) -> np.ndarray:
        return self.t0 + self.spacing * np.arange(self.n_points)

    def refined(self) -> "TimeGrid":
        return TimeGrid(self.t0, self.t1, self.levels + 1)


@dataclass(frozen=True)
class PathSample:
    """A d-dimensional trajectory sampled on a TimeGrid.

    ``points`` has shape (grid.n_points, dim); row i is the position at
    grid time i.
    """

    grid: TimeGrid
    dim: int
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (self.grid.n_points, self.dim):
            raise ValueError(
                f"points shape {pts.shape} does not match grid/dim "
                f"({self.grid.n_points}, {self.dim})"
            )
        if not np.all(np.isfinite(pts)):
            raise ValueError("path contains non-finite coordinates")
        object.__setattr__(self, "points", pts)

    def times(self) -> np.ndarray:
        return self.grid.times()


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream identified by (seed, stream_id).

    Distinct stream ids key independent Philox counters, so parallel
    replicas can draw from their own streams without coordination. The
    stream is a value object: ``generator()`` always restarts from the
    same state.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array(
            [self.seed & 0xFFFFFFFFFFFFFFFF, self.stream_id & 0xFFFFFFFFFFFFFFFF],
            dtype=np.uint64,
        )
        return np.random.Generator(np.random.Philox(key=key))

    def bit_generator(self) -> np.random.Philox:
        key = np.array(
            [self.seed & 0xFFFFFFFFFFFFFFFF, self.stream_id & 0xFFFFFFFFFFFFFFFF],
            dtype=np.uint64,
        )
        return np.random.Philox(key=key)

    def substream(self, k: int) -> "RngStream":
        """Derived stream for internal fan-out (k < 2**16 per level)."""
        return RngStream(self.seed, ((self.stream_id + 1) << 16) + k)


def brownian_sample(rng: RngStream, grid: TimeGrid, dim: int) -> PathSample:
    """Standard Brownian motion on the grid, started at the origin.

    Increments over consecutive grid points are independent centered
    Gaussians with per-coordinate variance ``grid.spacing``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    gen = rng.generator()
    n_steps = grid.n_points - 1
    steps = gen.standard_normal((n_steps, dim)) * np.sqrt(grid.spacing)
    points = np.empty((grid.n_points, dim))
    points[0] = 0.0
    np.cumsum(steps, axis=0, out=points[1:])
    return PathSample(grid, dim, points)


def refine_bridge(rng: RngStream, path: PathSample) -> PathSample:
    """One level of Brownian-bridge midpoint refinement.

    The returned path lives on ``path.grid.refined()``; its restriction to
    the coarse grid equals the input exactly. Midpoints are drawn from the
    conditional law given the neighbors: mean is the neighbor average,
    per-coordinate variance is (coarse spacing)/4.
    """
    gen = rng.generator()
    coarse = path.points
    n_mid = coarse.shape[0] - 1
    noise = gen.standard_normal((n_mid, path.dim))
    mids = 0.5 * (coarse[:-1] + coarse[1:]) + np.sqrt(path.grid.spacing / 4.0) * noise
    fine = np.empty((2 * n_mid + 1, path.dim))
    fine[0::2] = coarse
    fine[1::2] = mids
    return PathSample(path.grid.refined(), path.dim, fine)


def _fgn_autocov(n: int, hurst: float) -> np.ndarray:
    """Autocovariance of unit-spacing fractional Gaussian noise, lags 0..n-1."""
    j = np.arange(n, dtype=np.float64)
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(j + 1) ** h2 - 2 * np.abs(j) ** h2 + np.abs(j - 1) ** h2)


def _fgn_circulant(gen: np.random.Generator, n: int, dim: int, hurst: float):
    """Davies-Harte sampling of fractional Gaussian noise.

    Returns an (n, dim) array of unit-spacing fGn, or None when the
    circulant embedding is not nonnegative definite.
    """
    rho = _fgn_autocov(n, hurst)
    row = np.concatenate([rho, [0.0], rho[:0:-1]])
    eig = np.fft.fft(row).real
    tol = -1e-9 * eig.max()
    if eig.min() < tol:
        return None
    eig = np.clip(eig, 0.0, None)

    m = 2 * n
    # Hermitian-symmetric complex Gaussian weights; endpoints are real.
    ends = gen.standard_normal((2, dim))
    re = gen.standard_normal((n - 1, dim))
    im = gen.standard_normal((n - 1, dim))
    z = np.empty((m, dim), dtype=np.complex128)
    z[0] = ends[0]
    z[n] = ends[1]
    z[1:n] = (re + 1j * im) / np.sqrt(2.0)
    z[n + 1 :] = np.conj(z[n - 1 : 0 : -1])

    w = np.sqrt(eig)[:, None] * z
    fgn = np.sqrt(m) * np.fft.ifft(w, axis=0).real[:n]
    return fgn


def _fgn_dense(gen: np.random.Generator, n: int, dim: int, hurst: float):
    """Exact fGn via Cholesky factorization of the dense covariance."""
    rho = _fgn_autocov(n, hurst)
    idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    cov = rho[idx]
    # Tiny jitter guards against roundoff on the smallest eigenvalues.
    cov[np.diag_indices(n)] += 1e-12
    chol = np.linalg.cholesky(cov)
    return chol @ gen.standard_normal((n, dim))


def fbm_sample(rng: RngStream, grid: TimeGrid, dim: int, hurst: float) -> PathSample:
    """Fractional Brownian motion with Hurst index ``hurst`` on the grid.

    Each coordinate is an independent centered Gaussian process with
    covariance (s^{2a} + t^{2a} - |t-s|^{2a})/2, a = hurst, pinned at the
    origin. Sampling goes through circulant embedding of the stationary
    increments, with a dense-covariance factorization fallback on small
    grids.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not 0.0 < hurst < 1.0:
        raise ValueError("hurst must lie in (0, 1)")
    if grid.t0 != 0.0:
        raise ValueError("fBM grids must start at t0 = 0")
    gen = rng.generator()
    n = grid.n_points - 1

    if n <= 8:
        fgn = _fgn_dense(gen, n, dim, hurst)
    else:
        fgn = _fgn_circulant(gen, n, dim, hurst)
        if fgn is None:
            if grid.n_points > _FBM_DENSE_LIMIT:
                raise RuntimeError(
                    "circulant embedding not nonnegative definite and grid too "
                    f"large for dense factorization (> {_FBM_DENSE_LIMIT} points)"
                )
            fgn = _fgn_dense(gen, n, dim, hurst)

    fgn = fgn * grid.spacing**hurst
    points = np.empty((grid.n_points, dim))
    points[0] = 0.0
    np.cumsum(fgn, axis=0, out=points[1:])
    return PathSample(grid, dim, points)
