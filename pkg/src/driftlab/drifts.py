"""Deterministic drift functions with known Holder regularity.

Every drift maps times to R^d vectors, is immutable after construction, and
can report a Holder certificate: a pair (exponent, constant) that bounds
|f(t)-f(s)| <= K |t-s|^gamma, either analytically or measured empirically
on dyadic grids.

Empirical constants are measured over endpoint pairs of dyadic intervals,
i.e. K = max over scales m <= levels and cells i of
|f((i+1) 2^-m) - f(i 2^-m)| / (2^-m)^gamma on the certificate window. This
includes the full-window pair (attaining the supremum for the cusp and
linear families) and is monotone in ``levels``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .randpath import RngStream, TimeGrid, fbm_sample

__all__ = [
    "HolderCertificate",
    "Drift",
    "ZeroDrift",
    "LinearDrift",
    "SqrtCuspDrift",
    "WeierstrassDrift",
    "FbmDrift",
    "TabulatedDrift",
    "eval_drift",
    "holder_constant",
]


@dataclass(frozen=True)
class HolderCertificate:
    """Bound |f(t)-f(s)| <= constant * |t-s|**exponent on the drift window."""

    exponent: float
    constant: float
    kind: str  # "analytic" or "empirical"
    levels: int | None = None

    def __post_init__(self):
        if not 0.0 < self.exponent <= 1.0:
            raise ValueError("exponent must lie in (0, 1]")
        if self.constant < 0:
            raise ValueError("constant must be >= 0")
        if self.kind not in ("analytic", "empirical"):
            raise ValueError("kind must be 'analytic' or 'empirical'")


class Drift:
    """Base class: deterministic f: [t_lo, t_hi] -> R^d."""

    dim: int
    t_lo: float = 0.0
    t_hi: float = np.inf
    #: window on which empirical certificates are measured
    cert_window: tuple[float, float] = (0.0, 1.0)

    def _values(self, ts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def values(self, ts) -> np.ndarray:
        """Vectorized evaluation; ts outside [t_lo, t_hi] raise ValueError."""
        ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
        if ts.size and (ts.min() < self.t_lo or ts.max() > self.t_hi):
            raise ValueError(
                f"time outside drift interval [{self.t_lo}, {self.t_hi}]"
            )
        return self._values(ts)

    def value(self, t: float) -> np.ndarray:
        return self.values(np.array([t]))[0]

    def certificate(self, gamma: float) -> HolderCertificate | None:
        """Analytic certificate when known; None otherwise."""
        return None

    def rescaled(self, a: float, b: float = 0.0) -> "Drift":
        """The shifted and diffusively rescaled drift t -> (f(a^2 t + b) - f(b)) / a."""
        return RescaledDrift(self, a, b)

    def _numba_params(self):
        """(code, params) for the jitted steppers; None if unsupported."""
        return None


class ZeroDrift(Drift):
    def __init__(self, dim: int):
        self.dim = int(dim)

    def _values(self, ts):
        return np.zeros((ts.size, self.dim))

    def certificate(self, gamma):
        return HolderCertificate(gamma, 0.0, "analytic")

    def _numba_params(self):
        return 0, np.zeros(self.dim)


class LinearDrift(Drift):
    """f(t) = slope * t."""

    def __init__(self, slope):
        self.slope = np.atleast_1d(np.asarray(slope, dtype=np.float64))
        self.dim = self.slope.size

    def _values(self, ts):
        return ts[:, None] * self.slope[None, :]

    def certificate(self, gamma):
        speed = float(np.linalg.norm(self.slope))
        if gamma == 1.0:
            return HolderCertificate(1.0, speed, "analytic")
        if gamma == 0.5:
            width = self.cert_window[1] - self.cert_window[0]
            return HolderCertificate(0.5, speed * np.sqrt(width), "analytic")
        return None

    def _numba_params(self):
        return 1, self.slope.copy()


def _unit(direction) -> np.ndarray:
    v = np.atleast_1d(np.asarray(direction, dtype=np.float64))
    norm = np.linalg.norm(v)
    if not np.isclose(norm, 1.0, atol=1e-9):
        raise ValueError("direction must be a unit vector")
    return v / norm


class SqrtCuspDrift(Drift):
    """f(t) = K * sqrt(t) * direction; Holder(1/2) with constant exactly K."""

    def __init__(self, scale: float, direction):
        if scale < 0:
            raise ValueError("scale must be >= 0")
        self.scale = float(scale)
        self.direction = _unit(direction)
        self.dim = self.direction.size

    def _values(self, ts):
        return (self.scale * np.sqrt(ts))[:, None] * self.direction[None, :]

    def certificate(self, gamma):
        if gamma == 0.5:
            return HolderCertificate(0.5, self.scale, "analytic")
        return None

    def _numba_params(self):
        return 2, self.scale * self.direction


class WeierstrassDrift(Drift):
    """Lacunary cosine sum with seeded phases.

    f(t) = direction * sum_{j=0}^{terms} 2^{-j*gamma} cos(2^j pi t + phase_j).
    Nowhere differentiable for gamma < 1; Holder(gamma). The certificate is
    empirical: the level-20 dyadic measurement plus a 10% margin.
    """

    _CERT_LEVELS = 20

    def __init__(self, gamma: float, terms: int, phase_seed: int, direction):
        if not 0.0 < gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if terms < 1:
            raise ValueError("need at least one term")
        self.gamma = float(gamma)
        self.terms = int(terms)
        self.phase_seed = int(phase_seed)
        self.direction = _unit(direction)
        self.dim = self.direction.size
        gen = RngStream(phase_seed, 0).generator()
        self.phases = gen.uniform(0.0, 2.0 * np.pi, self.terms + 1)
        self._cert_cache: HolderCertificate | None = None

    def _profile(self, ts):
        out = np.zeros_like(ts)
        for j in range(self.terms + 1):
            out += 2.0 ** (-j * self.gamma) * np.cos(2.0**j * np.pi * ts + self.phases[j])
        return out

    def _values(self, ts):
        return self._profile(ts)[:, None] * self.direction[None, :]

    def certificate(self, gamma):
        if gamma != self.gamma:
            return None
        if self._cert_cache is None:
            emp = holder_constant(self, self.gamma, self._CERT_LEVELS)
            self._cert_cache = HolderCertificate(
                self.gamma, 1.1 * emp.constant, "empirical", self._CERT_LEVELS
            )
        return self._cert_cache

    def _numba_params(self):
        # layout: gamma, n_terms, phases..., direction...
        return 3, np.concatenate(
            [[self.gamma, float(self.terms)], self.phases, self.direction]
        )


class FbmDrift(Drift):
    """A frozen fractional Brownian path used as a deterministic drift.

    The path is sampled once at construction (seed-determined) on a dyadic
    grid of 2**levels steps over [0, horizon] and linearly interpolated in
    between; it is then a fixed function, independent of any process it is
    added to. ``coordinate=i`` puts the one-dimensional path in coordinate
    i and zeros elsewhere; ``coordinate=None`` makes all coordinates
    independent fBM.
    """

    def __init__(
        self,
        hurst: float,
        seed: int,
        dim: int,
        coordinate: int | None = None,
        levels: int = 20,
        horizon: float = 1.0,
    ):
        if coordinate is not None and not 0 <= coordinate < dim:
            raise ValueError("coordinate index out of range")
        self.hurst = float(hurst)
        self.seed = int(seed)
        self.dim = int(dim)
        self.coordinate = coordinate
        self.levels = int(levels)
        self.t_hi = float(horizon)
        self.cert_window = (0.0, float(horizon))
        n_comp = 1 if coordinate is not None else dim
        grid = TimeGrid(0.0, float(horizon), self.levels)
        path = fbm_sample(RngStream(seed, 0), grid, n_comp, self.hurst)
        self._times = grid.times()
        self._table = path.points
        self._cert_cache: dict[float, HolderCertificate] = {}

    def _values(self, ts):
        out = np.zeros((ts.size, self.dim))
        cols = (
            [self.coordinate]
            if self.coordinate is not None
            else list(range(self.dim))
        )
        for k, col in enumerate(cols):
            out[:, col] = np.interp(ts, self._times, self._table[:, k])
        return out

    def certificate(self, gamma):
        if gamma not in self._cert_cache:
            levels = min(self.levels, 16)
            emp = holder_constant(self, gamma, levels)
            self._cert_cache[gamma] = HolderCertificate(
                gamma, 1.1 * emp.constant, "empirical", levels
            )
        return self._cert_cache[gamma]


class TabulatedDrift(Drift):
    """Linear interpolation of user-supplied (time, value) samples.

    ``extend="clamp"`` holds the endpoint values outside the tabulated
    range (making the drift evaluable on [0, inf)); ``extend="error"``
    restricts the domain to the tabulation interval.
    """

    def __init__(self, times, values, extend: str = "error"):
        times = np.asarray(times, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if times.ndim != 1 or times.size < 2 or values.shape[0] != times.size:
            raise ValueError("need matching 1-d times and (n, d) values, n >= 2")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if extend not in ("error", "clamp"):
            raise ValueError("extend must be 'error' or 'clamp'")
        self.grid_times = times
        self.grid_values = values
        self.dim = values.shape[1]
        if extend == "error":
            self.t_lo = float(times[0])
            self.t_hi = float(times[-1])
        else:
            self.t_lo, self.t_hi = 0.0, np.inf
        self.cert_window = (float(times[0]), float(times[-1]))
        self._cert_cache: dict[float, HolderCertificate] = {}

    @classmethod
    def from_csv(cls, path, extend: str = "error") -> "TabulatedDrift":
        """Load from CSV with a header row: time, value components."""
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] < 2:
            raise ValueError("CSV needs a time column plus value column(s)")
        return cls(data[:, 0], data[:, 1:], extend=extend)

    def _values(self, ts):
        out = np.empty((ts.size, self.dim))
        for j in range(self.dim):
            out[:, j] = np.interp(ts, self.grid_times, self.grid_values[:, j])
        return out

    def certificate(self, gamma):
        # Measured over all pairs of tabulation nodes only.
        if gamma not in self._cert_cache:
            t = self.grid_times
            v = self.grid_values
            best = 0.0
            for i in range(t.size - 1):
                d = np.linalg.norm(v[i + 1 :] - v[i], axis=1)
                lag = t[i + 1 :] - t[i]
                best = max(best, float(np.max(d / lag**gamma)))
            self._cert_cache[gamma] = HolderCertificate(gamma, best, "empirical", None)
        return self._cert_cache[gamma]


class RescaledDrift(Drift):
    """g(t) = (f(a^2 t + b) - f(b)) / a.

    Diffusive rescaling preserves Holder(1/2) certificates exactly, which
    is what lets hitting-probability constants be start-point free.
    """

    def __init__(self, base: Drift, a: float, b: float = 0.0):
        if a <= 0:
            raise ValueError("a must be > 0")
        if not base.t_lo <= b <= base.t_hi:
            raise ValueError("b outside base drift interval")
        self.base = base
        self.a = float(a)
        self.b = float(b)
        self.dim = base.dim
        self.t_lo = 0.0
        self.t_hi = (base.t_hi - b) / a**2
        hi = min(self.t_hi, (base.cert_window[1] - b) / a**2, 1.0)
        self.cert_window = (0.0, hi)
        self._fb = base.value(b)

    def _values(self, ts):
        return (self.base.values(self.a**2 * ts + self.b) - self._fb) / self.a

    def certificate(self, gamma):
        if gamma == 0.5:
            inner = self.base.certificate(0.5)
            if inner is not None:
                return inner
        return None


def eval_drift(f: Drift, t: float) -> np.ndarray:
    """Evaluate the drift at one time; raises outside its interval."""
    return f.value(t)


def holder_constant(f: Drift, gamma: float, levels: int) -> HolderCertificate:
    """Empirical Holder(gamma) constant over dyadic intervals.

    Takes the maximum of |f(right) - f(left)| / length**gamma over every
    dyadic interval of the certificate window at scales 0..levels. The
    result is monotone nondecreasing in ``levels``.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    if levels < 0:
        raise ValueError("levels must be >= 0")
    lo, hi = f.cert_window
    width = hi - lo
    n = 2**levels
    ts = lo + width * np.arange(n + 1) / n
    vals = f.values(ts)
    best = 0.0
    for m in range(levels + 1):
        stride = 2 ** (levels - m)
        sub = vals[::stride]
        diffs = np.linalg.norm(np.diff(sub, axis=0), axis=1)
        length = width / 2**m
        best = max(best, float(diffs.max()) / length**gamma)
    return HolderCertificate(gamma, best, "empirical", levels)
