"""Discrete laws for the random wave degrees.

A degree law is admissible for a covariance model when its support contains
the support of the model's Schoenberg sequence.  Beyond admissibility, the
tail of the law controls whether the third absolute moment of a single wave
is finite, hence whether the normal-approximation error of the wave ensemble
decays like 1/sqrt(L); recommend_distribution encodes those criteria.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import zeta as riemann_zeta

from .covariance import NUMERIC_ZERO
from .gegenbauer import gegenbauer_log_at_one

__all__ = [
    "FiniteDegrees",
    "GeometricDegrees",
    "ShiftedZeta",
    "OddShiftedZeta",
    "Recommendation",
    "recommend_distribution",
    "theta_prime_max",
    "support_covers",
]


class DegreeDistribution:
    """Common interface: pmf/log_pmf, exact sampling, support membership."""

    def pmf(self, n):
        raise NotImplementedError

    def log_pmf(self, n):
        with np.errstate(divide="ignore"):
            out = np.log(self.pmf(n))
        return out

    def sample(self, rng, size=None):
        raise NotImplementedError

    def in_support(self, n):
        raise NotImplementedError

    def spec_string(self) -> str:
        raise NotImplementedError


class FiniteDegrees(DegreeDistribution):
    """Law with finitely many atoms 0..len(pmf)-1."""

    def __init__(self, pmf):
        pmf = np.asarray(pmf, dtype=float)
        if pmf.ndim != 1 or pmf.size == 0:
            raise ValueError("pmf must be a nonempty vector")
        if np.any(pmf < 0.0) or not np.all(np.isfinite(pmf)):
            raise ValueError("pmf entries must be finite and nonnegative")
        total = pmf.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"pmf must sum to 1 within 1e-12, got {total!r}")
        self.probs = pmf / total
        self._cdf = np.cumsum(self.probs)
        self._cdf[-1] = 1.0

    def pmf(self, n):
        n_arr = np.atleast_1d(np.asarray(n, dtype=int))
        out = np.zeros(n_arr.shape)
        inside = (n_arr >= 0) & (n_arr < self.probs.size)
        out[inside] = self.probs[n_arr[inside]]
        return float(out[0]) if np.ndim(n) == 0 else out

    def sample(self, rng, size=None):
        u = rng.random(size)
        idx = np.searchsorted(self._cdf, u, side="right")
        return int(idx) if size is None else idx.astype(np.int64)

    def in_support(self, n):
        n_arr = np.atleast_1d(np.asarray(n, dtype=int))
        out = np.zeros(n_arr.shape, dtype=bool)
        inside = (n_arr >= 0) & (n_arr < self.probs.size)
        out[inside] = self.probs[n_arr[inside]] > 0.0
        return bool(out[0]) if np.ndim(n) == 0 else out

    def spec_string(self):
        return "finite:" + ",".join(f"{p:.17g}" for p in self.probs)


class GeometricDegrees(DegreeDistribution):
    """a_n = p (1-p)^n on n >= 0, sampled by inversion of the closed-form CDF."""

    def __init__(self, p: float):
        if not 0.0 < p < 1.0:
            raise ValueError(f"success probability must lie in (0, 1), got {p}")
        self.p = float(p)

    def pmf(self, n):
        return np.exp(self.log_pmf(n))

    def log_pmf(self, n):
        n_arr = np.atleast_1d(np.asarray(n, dtype=float))
        out = np.log(self.p) + n_arr * np.log1p(-self.p)
        out[n_arr < 0] = -np.inf
        return float(out[0]) if np.ndim(n) == 0 else out

    def sample(self, rng, size=None):
        u = rng.random(size)
        n = np.floor(np.log1p(-u) / np.log1p(-self.p))
        return int(n) if size is None else n.astype(np.int64)

    def in_support(self, n):
        n_arr = np.asarray(n)
        out = n_arr >= 0
        return bool(out) if np.ndim(n) == 0 else np.atleast_1d(out)

    def spec_string(self):
        return f"geometric:{self.p:g}"


def _devroye_zeta(theta: float, rng, count: int) -> np.ndarray:
    """Exact draws X >= 1 with pmf proportional to X^-theta (rejection scheme).

    Candidates come from inverting the Pareto envelope, the squeeze uses the
    ratio T = (1+1/X)^(theta-1); expected trials per draw are bounded
    uniformly in theta > 1.
    """
    b = 2.0 ** (theta - 1.0)
    inv_exp = -1.0 / (theta - 1.0)
    out = np.empty(count, dtype=np.int64)
    filled = 0
    while filled < count:
        m = max(64, 2 * (count - filled))
        u = rng.random(m)
        v = rng.random(m)
        with np.errstate(over="ignore", divide="ignore"):
            x = np.floor(u**inv_exp)
            t = (1.0 + 1.0 / x) ** (theta - 1.0)
            ok = np.isfinite(x) & (x < 2.0**62)
            ok &= v * x * (t - 1.0) / (b - 1.0) <= t / b
        accepted = x[ok]
        take = min(accepted.size, count - filled)
        out[filled : filled + take] = accepted[:take].astype(np.int64)
        filled += take
    return out


class ShiftedZeta(DegreeDistribution):
    """a_n = (n+1)^(-theta) / zeta(theta) on n >= 0.

    The classical zeta law lives on {1, 2, ...}; shifting it down by one keeps
    the polynomial tail needed by the convergence criterion while covering
    degree 0, which every catalog model except the odd-degree one loads.
    """

    def __init__(self, theta: float):
        if not theta > 1.0:
            raise ValueError(f"zeta exponent must exceed 1, got {theta}")
        self.theta = float(theta)
        self._zeta = float(riemann_zeta(self.theta))

    def pmf(self, n):
        return np.exp(self.log_pmf(n))

    def log_pmf(self, n):
        n_arr = np.atleast_1d(np.asarray(n, dtype=float))
        with np.errstate(invalid="ignore"):
            out = -self.theta * np.log(n_arr + 1.0) - np.log(self._zeta)
        out[n_arr < 0] = -np.inf
        return float(out[0]) if np.ndim(n) == 0 else out

    def sample(self, rng, size=None):
        draws = _devroye_zeta(self.theta, rng, 1 if size is None else int(size))
        shifted = draws - 1
        return int(shifted[0]) if size is None else shifted

    def in_support(self, n):
        n_arr = np.asarray(n)
        out = n_arr >= 0
        return bool(out) if np.ndim(n) == 0 else np.atleast_1d(out)

    def spec_string(self):
        return f"zeta:{self.theta:g}"


class OddShiftedZeta(DegreeDistribution):
    """Mass (m+1)^(-theta)/zeta(theta) on the odd degrees 2m+1, m >= 0."""

    def __init__(self, theta: float):
        if not theta > 1.0:
            raise ValueError(f"zeta exponent must exceed 1, got {theta}")
        self.theta = float(theta)
        self._zeta = float(riemann_zeta(self.theta))

    def pmf(self, n):
        return np.exp(self.log_pmf(n))

    def log_pmf(self, n):
        n_arr = np.atleast_1d(np.asarray(n, dtype=float))
        out = np.full(n_arr.shape, -np.inf)
        odd = (n_arr >= 1) & (np.mod(n_arr, 2) == 1)
        m = (n_arr[odd] - 1.0) / 2.0
        out[odd] = -self.theta * np.log(m + 1.0) - np.log(self._zeta)
        return float(out[0]) if np.ndim(n) == 0 else out

    def sample(self, rng, size=None):
        draws = _devroye_zeta(self.theta, rng, 1 if size is None else int(size))
        odd = 2 * draws - 1
        return int(odd[0]) if size is None else odd

    def in_support(self, n):
        n_arr = np.asarray(n)
        out = (n_arr >= 1) & (np.mod(n_arr, 2) == 1)
        return bool(out) if np.ndim(n) == 0 else np.atleast_1d(out)

    def spec_string(self):
        return f"oddzeta:{self.theta:g}"


# ---------------------------------------------------------------------------
# selection criteria
# ---------------------------------------------------------------------------

def theta_prime_max(theta: float, d: int) -> float:
    """Upper end of the admissible zeta-exponent interval for coefficient
    decay n^-theta on the d-sphere; on the circle the third moment of the
    cosine wave is bounded, which matches the d=2 branch."""
    if d <= 2:
        return 3.0 * theta - 2.0
    if d == 3:
        return 3.0 * theta - 5.0
    return 3.0 * theta - 5.0 - 6.0 * ((d - 1) // 2)


@dataclass
class Recommendation:
    distribution: DegreeDistribution
    case: int
    interval: tuple | None = None
    warning: str | None = None


def recommend_distribution(spec) -> Recommendation:
    """Pick a degree law for the model per the tail-based convergence cases.

    Case 1: finitely supported coefficients -> matching finite pmf weighted
    by the wave energy b_n G_n(1).  Case 2: geometric decay with root r ->
    geometric law with 1-p >= r^3.  Case 3: polynomial decay n^-theta ->
    (odd-)shifted zeta with exponent inside (1, theta_prime_max); when that
    interval is empty the default exponent 2 is returned together with a
    warning that the normal-approximation bound is not guaranteed finite.
    """
    kind, value = spec.decay()
    d = spec.d
    if kind == "finite":
        n_last = int(value)
        degrees = np.arange(n_last + 1)
        log_b = _scalar_log_coeffs(spec, n_last)
        log_w = log_b + (gegenbauer_log_at_one(0.5 * (d - 1), degrees) if d >= 2 else 0.0)
        finite = np.isfinite(log_w)
        w = np.zeros(n_last + 1)
        w[finite] = np.exp(log_w[finite] - log_w[finite].max())
        return Recommendation(FiniteDegrees(w / w.sum()), case=1)
    if kind == "geometric":
        r = float(value)
        p = min(0.01, 1.0 - r**3)
        return Recommendation(GeometricDegrees(p), case=2)
    theta = float(value)
    tp_max = theta_prime_max(theta, d)
    interval = (1.0, tp_max)
    make = OddShiftedZeta if spec.odd_support else ShiftedZeta
    if tp_max <= 1.0:
        return Recommendation(
            make(2.0),
            case=3,
            interval=interval,
            warning="Berry-Esseen bound not guaranteed finite",
        )
    tp = min(2.0, 0.5 * (1.0 + tp_max))
    return Recommendation(make(tp), case=3, interval=interval)


def _scalar_log_coeffs(spec, n_max: int) -> np.ndarray:
    if hasattr(spec, "log_schoenberg_coeff"):
        return np.atleast_1d(spec.log_schoenberg_coeff(np.arange(n_max + 1)))
    with np.errstate(divide="ignore"):
        return np.log(_magnitude_table(spec, n_max))


def _magnitude_table(spec, n_max: int) -> np.ndarray:
    """Per-degree coefficient magnitude: |b_n| for scalar models, the largest
    matrix entry in absolute value for multivariate ones."""
    if getattr(spec, "p", 1) == 1:
        return spec.coeff_table(n_max)
    return spec.magnitude_table(n_max)


def support_covers(dist: DegreeDistribution, spec, n_max: int):
    """None when the law loads every degree the model loads (up to n_max);
    otherwise the first uncovered degree."""
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    magnitude = _magnitude_table(spec, n_max)
    needed = np.nonzero(magnitude > NUMERIC_ZERO)[0]
    if needed.size == 0:
        return None
    covered = dist.in_support(needed)
    missing = needed[~covered]
    return None if missing.size == 0 else int(missing[0])
