"""Maximum-likelihood fits of heavy-tailed families above a threshold ``x_min``,
best-family selection, and KL-divergence between fitted class distributions.

All families are continuous densities on ``[x_min, inf)``; count data is fitted
with the continuous likelihood as an approximation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, special

from .errors import DivergenceError, FitError

EXPONENTIAL = "exponential"
LOGNORMAL = "lognormal_positive"
POWERLAW = "powerlaw"
TRUNCATED_POWERLAW = "truncated_powerlaw"
FAMILIES = (EXPONENTIAL, LOGNORMAL, POWERLAW, TRUNCATED_POWERLAW)

MIN_TAIL = 10
KS_VALID = 0.15
DENSITY_FLOOR = 1e-12
MAX_XMIN_CANDIDATES = 12
# Auto x_min never discards more than this share of the samples.
MIN_TAIL_FRACTION = 0.5
# 2 * log-likelihood gain a two-parameter family must show over a family it nests (chi2_1, 99%).
NESTED_LR_CRITICAL = 6.635
_NESTS = {TRUNCATED_POWERLAW: (EXPONENTIAL, POWERLAW)}
_TPL_ALPHA_BOUNDS = (0.0, 20.0)

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


class DomainError(FitError, ValueError):
    """Samples outside the support of every family (non-positive values)."""


# --------------------------------------------------------------------- families

def log_upper_gamma(s: float, z) -> np.ndarray:
    """log of the upper incomplete gamma function Gamma(s, z) for real s <= 1, z > 0.

    Continued fraction (modified Lentz) for z >= 1; for z < 1 the function is
    anchored at s + k in [0, 1) and carried down with
    Gamma(a - 1, z) = (Gamma(a, z) - z^(a-1) e^-z) / (a - 1).
    """
    s = float(s)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    big = z >= 1.0
    if big.any():
        x = z[big]
        tiny = 1e-300
        b = x + 1.0 - s
        c = np.full_like(x, 1.0 / tiny)
        d = 1.0 / b
        h = d.copy()
        active = np.arange(len(x))
        for i in range(1, 5000):
            an = -i * (i - s)
            bi = b[active] + 2.0
            di = an * d[active] + bi
            di = np.where(np.abs(di) < tiny, tiny, di)
            ci = bi + an / c[active]
            ci = np.where(np.abs(ci) < tiny, tiny, ci)
            di = 1.0 / di
            delta = di * ci
            h[active] *= delta
            b[active], c[active], d[active] = bi, ci, di
            active = active[np.abs(delta - 1.0) >= 1e-15]
            if active.size == 0:
                break
        out[big] = -x + s * np.log(x) + np.log(h)
    small = ~big
    if small.any():
        x = z[small]
        if s > 0:
            out[small] = special.gammaln(s) + np.log(special.gammaincc(s, x))
        else:
            k = math.ceil(-s)
            a = s + k
            g = special.gamma(a) * special.gammaincc(a, x) if a > 0 else special.exp1(x)
            for _ in range(k):
                g = (g - np.power(x, a - 1.0) * np.exp(-x)) / (a - 1.0)
                a -= 1.0
            out[small] = np.log(g)
    return out


def _log_upper_gamma_scalar(s: float, z: float) -> float:
    """Scalar twin of ``log_upper_gamma`` using plain floats (the optimizer's hot path)."""
    if z >= 1.0:
        tiny = 1e-300
        b = z + 1.0 - s
        c = 1.0 / tiny
        d = 1.0 / b
        h = d
        for i in range(1, 5000):
            an = -i * (i - s)
            b += 2.0
            d = an * d + b
            if abs(d) < tiny:
                d = tiny
            c = b + an / c
            if abs(c) < tiny:
                c = tiny
            d = 1.0 / d
            delta = d * c
            h *= delta
            if abs(delta - 1.0) < 1e-15:
                break
        return -z + s * math.log(z) + math.log(h)
    if s > 0:
        return special.gammaln(s) + math.log(special.gammaincc(s, z))
    k = math.ceil(-s)
    a = s + k
    g = special.gamma(a) * special.gammaincc(a, z) if a > 0 else special.exp1(z)
    ez = math.exp(-z)
    for _ in range(k):
        g = (g - z ** (a - 1.0) * ez) / (a - 1.0)
        a -= 1.0
    return math.log(g)


def _tpl_log_norm(alpha: float, lam: float, x: float) -> float:
    """log of integral_x^inf t^-alpha e^(-lam t) dt = (alpha-1) log lam + log Gamma(1-alpha, lam x)."""
    return (alpha - 1) * math.log(lam) + _log_upper_gamma_scalar(1.0 - alpha, lam * x)


def _tpl_log_survival(alpha: float, lam: float, x: np.ndarray, x_min: float) -> np.ndarray:
    """log P(X >= x | X >= x_min) for the truncated power law."""
    z = lam * np.asarray(x, dtype=float)
    log_g = log_upper_gamma(1 - alpha, z)
    log_g0 = _log_upper_gamma_scalar(1 - alpha, lam * x_min)
    return np.minimum(log_g - log_g0, 0.0)


def _logpdf(family: str, params: dict, x_min: float, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if family == EXPONENTIAL:
        lam = params["lambda"]
        return math.log(lam) - lam * (x - x_min)
    if family == POWERLAW:
        a = params["alpha"]
        return math.log(a - 1) - math.log(x_min) - a * np.log(x / x_min)
    if family == LOGNORMAL:
        mu, sigma = params["mu"], params["sigma"]
        z = (np.log(x) - mu) / sigma
        z0 = (math.log(x_min) - mu) / sigma
        return -np.log(x) - math.log(sigma) - _LOG_SQRT_2PI - 0.5 * z * z - special.log_ndtr(-z0)
    if family == TRUNCATED_POWERLAW:
        a, lam = params["alpha"], params["lambda"]
        return -a * np.log(x) - lam * x - _tpl_log_norm(a, lam, x_min)
    raise ValueError(f"unknown family {family!r}")


def _log_survival(family: str, params: dict, x_min: float, x: np.ndarray) -> np.ndarray:
    """log P(X >= x | X >= x_min) for x >= x_min."""
    x = np.asarray(x, dtype=float)
    if family == EXPONENTIAL:
        return -params["lambda"] * (x - x_min)
    if family == POWERLAW:
        return (1 - params["alpha"]) * np.log(x / x_min)
    if family == LOGNORMAL:
        mu, sigma = params["mu"], params["sigma"]
        z = (np.log(x) - mu) / sigma
        z0 = (math.log(x_min) - mu) / sigma
        return np.minimum(special.log_ndtr(-z) - special.log_ndtr(-z0), 0.0)
    if family == TRUNCATED_POWERLAW:
        return _tpl_log_survival(params["alpha"], params["lambda"], x, x_min)
    raise ValueError(f"unknown family {family!r}")


def _cdf(family, params, x_min, x):
    x = np.asarray(x, dtype=float)
    out = -np.expm1(_log_survival(family, params, x_min, np.maximum(x, x_min)))
    return np.where(x < x_min, 0.0, out)


def _mle_exponential(tail, x_min, start=None):
    excess = tail.mean() - x_min
    if excess <= 0:
        raise FitError("exponential fit needs samples above x_min")
    return {"lambda": 1.0 / excess}


def _mle_powerlaw(tail, x_min, start=None):
    s = np.log(tail / x_min).sum()
    if s <= 0:
        raise FitError("power-law fit needs samples above x_min")
    return {"alpha": 1.0 + len(tail) / s}


def _mle_lognormal(tail, x_min, start=None):
    logs = np.log(tail)
    n = len(tail)
    lx0 = math.log(x_min)

    def nll(theta):
        mu, s = theta
        sigma = math.exp(s)
        z = (logs - mu) / sigma
        z0 = (lx0 - mu) / sigma
        log_sf0 = special.log_ndtr(-z0)
        value = n * s + 0.5 * np.dot(z, z) + n * log_sf0
        h = math.exp(-0.5 * z0 * z0 - _LOG_SQRT_2PI - log_sf0)
        grad = np.array([-z.sum() / sigma + n * h / sigma, n - np.dot(z, z) + n * h * z0])
        return value, grad

    if start is None:
        sd = logs.std()
        start = np.array([logs.mean(), math.log(sd if sd > 0 else 1.0)])
    else:
        start = np.array([start["mu"], math.log(start["sigma"])])
    res = optimize.minimize(nll, start, jac=True, method="L-BFGS-B",
                            bounds=[(-50.0, 50.0), (math.log(1e-4), math.log(50.0))],
                            options={"ftol": 1e-13, "gtol": 1e-9, "maxiter": 500})
    if not np.all(np.isfinite(res.x)):
        raise FitError(f"log-normal fit did not converge: {res.message}")
    return {"mu": float(res.x[0]), "sigma": float(math.exp(res.x[1]))}


def _mle_truncated_powerlaw(tail, x_min, start=None):
    n = len(tail)
    sum_log, sum_x = np.log(tail).sum(), tail.sum()

    def nll(theta):
        a, log_lam = theta
        lam = math.exp(log_lam)
        try:
            log_z = _tpl_log_norm(a, lam, x_min)
            # d/dlam log Z = -E[X] = -Z(alpha - 1) / Z(alpha)
            mean_x = math.exp(_tpl_log_norm(a - 1.0, lam, x_min) - log_z)
            h = 1e-6
            dlog_z_da = (_tpl_log_norm(a + h, lam, x_min) - _tpl_log_norm(a - h, lam, x_min)) / (2 * h)
        except (ValueError, OverflowError, ZeroDivisionError):
            return np.inf, np.zeros(2)
        value = a * sum_log + lam * sum_x + n * log_z
        if not math.isfinite(value):
            return np.inf, np.zeros(2)
        grad = np.array([sum_log + n * dlog_z_da, lam * (sum_x - n * mean_x)])
        return value, grad

    starts = []
    if start is not None:
        starts.append((start["alpha"], math.log(start["lambda"])))
    pl = np.log(tail / x_min).sum()
    if pl > 0:
        starts.append((min(1.0 + n / pl, 10.0), math.log(1e-3 / tail.mean())))
    if start is None:
        starts.append((0.5, -math.log(max(tail.mean() - x_min, 1e-9 * x_min) * 2)))
        starts.append((0.0, -math.log(max(tail.mean() - x_min, 1e-9 * x_min))))
    best = None
    for a0, l0 in starts:
        res = optimize.minimize(nll, np.array([a0, l0]), jac=True, method="L-BFGS-B",
                                bounds=[_TPL_ALPHA_BOUNDS, (math.log(1e-12 / tail.max()), math.log(1e6 / x_min))],
                                options={"ftol": 1e-14, "gtol": 1e-8, "maxiter": 500})
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise FitError("truncated power-law fit did not converge")
    return {"alpha": float(best.x[0]), "lambda": float(math.exp(best.x[1]))}


_MLE = {
    EXPONENTIAL: _mle_exponential,
    POWERLAW: _mle_powerlaw,
    LOGNORMAL: _mle_lognormal,
    TRUNCATED_POWERLAW: _mle_truncated_powerlaw,
}


# ----------------------------------------------------------------------- results

@dataclass(frozen=True)
class FitResult:
    family: str
    x_min: float
    params: dict
    log_likelihood: float
    ks_statistic: float
    n_tail: int
    x_max: float
    valid: bool = field(default=True, compare=False)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = _logpdf(self.family, self.params, self.x_min, np.maximum(x, self.x_min))
        return np.where(x < self.x_min, -np.inf, out)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        return _cdf(self.family, self.params, self.x_min, x)

    def tail_log_likelihood(self, samples, threshold: float) -> float:
        """Log-likelihood of samples >= threshold under this fit renormalized to [threshold, inf)."""
        x = np.asarray(samples, dtype=float)
        x = x[x >= threshold]
        log_s = float(_log_survival(self.family, self.params, self.x_min, np.array([threshold]))[0])
        return float(self.logpdf(x).sum() - len(x) * log_s)

    def to_dict(self) -> dict:
        return {"family": self.family, "x_min": self.x_min, "params": dict(self.params),
                "log_likelihood": self.log_likelihood, "ks_statistic": self.ks_statistic,
                "n_tail": self.n_tail, "x_max": self.x_max, "valid": self.valid}

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(d["family"], float(d["x_min"]), dict(d["params"]), float(d["log_likelihood"]),
                   float(d["ks_statistic"]), int(d["n_tail"]), float(d["x_max"]), bool(d.get("valid", True)))


@dataclass(frozen=True)
class NoValidFit:
    """Outcome of ``select_best_fit`` when no candidate family describes the data."""

    reason: str
    candidates: tuple[FitResult, ...] = ()
    valid: bool = False

    def to_dict(self) -> dict:
        return {"family": None, "valid": False, "reason": self.reason,
                "candidates": [c.to_dict() for c in self.candidates]}


def ks_distance(cdf_at_unique: np.ndarray, counts: np.ndarray) -> float:
    """Sup distance between a continuous model CDF and the empirical CDF with ties."""
    n = counts.sum()
    above = np.cumsum(counts) / n
    below = above - counts / n
    F = cdf_at_unique
    return float(min(1.0, max(np.max(np.abs(above - F)), np.max(np.abs(F - below)))))


def _check_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise FitError("no samples")
    if not np.all(np.isfinite(x)):
        raise DomainError("samples must be finite")
    if np.any(x <= 0):
        raise DomainError("samples must be strictly positive")
    return np.sort(x)


class _Sorted:
    """Sorted samples with their distinct values, shared across candidate thresholds."""

    def __init__(self, x_sorted: np.ndarray):
        self.x = x_sorted
        self.unique, self.counts = np.unique(x_sorted, return_counts=True)

    def tail(self, x_min):
        i = np.searchsorted(self.x, x_min, side="left")
        j = np.searchsorted(self.unique, x_min, side="left")
        return self.x[i:], self.unique[j:], self.counts[j:]


def _fit_at(data: _Sorted, family: str, x_min: float, start: dict | None = None) -> FitResult:
    tail, unique, counts = data.tail(x_min)
    if len(tail) < MIN_TAIL:
        raise FitError(f"only {len(tail)} samples >= x_min={x_min} (need {MIN_TAIL})")
    # the exponential MLE needs only mean > x_min; other shapes are unidentifiable without spread
    if tail[0] == tail[-1] and (family != EXPONENTIAL or tail[0] == x_min):
        raise FitError("zero-variance tail: all samples equal")
    params = {k: float(v) for k, v in _MLE[family](tail, x_min, start).items()}
    with np.errstate(all="ignore"):
        ll = float(_logpdf(family, params, x_min, tail).sum())
        ks = ks_distance(_cdf(family, params, x_min, unique), counts)
    if not math.isfinite(ll) or not math.isfinite(ks):
        raise FitError(f"{family} fit produced a non-finite likelihood")
    return FitResult(family, float(x_min), params, ll, ks, int(len(tail)), float(tail[-1]))


def xmin_candidates(x_sorted: np.ndarray, max_candidates: int = MAX_XMIN_CANDIDATES,
                    min_tail_fraction: float = MIN_TAIL_FRACTION) -> np.ndarray:
    """Distinct sample values whose tail keeps >= MIN_TAIL samples and
    >= ``min_tail_fraction`` of all samples, thinned to at most ``max_candidates``
    at quantile spacing (the smallest value is always kept)."""
    unique = np.unique(x_sorted)
    tail_sizes = len(x_sorted) - np.searchsorted(x_sorted, unique, side="left")
    keep = (tail_sizes >= MIN_TAIL) & (tail_sizes >= min_tail_fraction * len(x_sorted))
    cands = unique[keep]
    if len(cands) > max_candidates:
        idx = np.unique(np.round(np.linspace(0, len(cands) - 1, max_candidates)).astype(int))
        cands = cands[idx]
    return cands


def _fit_auto(data: _Sorted, family: str, max_candidates: int, min_tail_fraction: float) -> FitResult:
    best, last_error, prev = None, None, None
    for cand in xmin_candidates(data.x, max_candidates, min_tail_fraction):
        try:
            fit = _fit_at(data, family, float(cand), prev)
        except FitError as exc:
            last_error = exc
            continue
        prev = fit.params
        if best is None or fit.ks_statistic < best.ks_statistic:
            best = fit
    if best is None:
        raise last_error or FitError(f"fewer than {MIN_TAIL} samples")
    return best


def fit_distribution(samples: Sequence[float], family: str, x_min: float | str = "auto",
                     max_candidates: int = MAX_XMIN_CANDIDATES,
                     min_tail_fraction: float = MIN_TAIL_FRACTION) -> FitResult:
    """MLE fit of ``family`` to the samples >= ``x_min``.

    With ``x_min="auto"`` each candidate threshold from ``xmin_candidates`` is
    fitted and the one with the smallest KS distance wins; ties go to the
    smaller threshold.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    data = _Sorted(_check_samples(samples))
    if x_min != "auto":
        x_min = float(x_min)
        if x_min <= 0:
            raise DomainError("x_min must be positive")
        return _fit_at(data, family, x_min)
    return _fit_auto(data, family, max_candidates, min_tail_fraction)


def select_best_fit(samples: Sequence[float], families: Sequence[str] = FAMILIES,
                    ks_threshold: float = KS_VALID,
                    max_candidates: int = MAX_XMIN_CANDIDATES,
                    min_tail_fraction: float = MIN_TAIL_FRACTION) -> FitResult | NoValidFit:
    """Fit each family at its own auto x_min and rank on the common tail.

    Ranking is by log-likelihood of the samples above the largest chosen x_min,
    with each fit renormalized to that tail. A two-parameter family is only
    preferred over a one-parameter family it nests when the likelihood-ratio
    statistic clears ``NESTED_LR_CRITICAL``. The winner must have KS <= ks_threshold.
    """
    x = _check_samples(samples)
    if len(x) < MIN_TAIL:
        return NoValidFit(f"only {len(x)} samples (need {MIN_TAIL})")
    data = _Sorted(x)
    fits = []
    for fam in families:
        try:
            fits.append(_fit_auto(data, fam, max_candidates, min_tail_fraction))
        except FitError:
            continue
    if not fits:
        return NoValidFit("no family could be fitted")
    common = max(f.x_min for f in fits)
    scores = {f.family: f.tail_log_likelihood(x, common) for f in fits}
    ranked = sorted(fits, key=lambda f: (-scores[f.family], FAMILIES.index(f.family)))
    best = ranked[0]
    nested = [scores[f] for f in _NESTS.get(best.family, ()) if f in scores]
    if nested and 2 * (scores[best.family] - max(nested)) < NESTED_LR_CRITICAL:
        best = next(f for f in ranked if f.family not in _NESTS)
    if best.ks_statistic > ks_threshold:
        return NoValidFit(f"best fit {best.family} has KS {best.ks_statistic:.3f} > {ks_threshold}",
                          tuple(fits))
    return best


# -------------------------------------------------------------------- divergence

def kl_divergence_discrete(p: Sequence[float], q: Sequence[float]) -> float:
    """sum p ln(p/q) for two distributions on the same support (normalized first)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("p and q need the same 1-D shape")
    if np.any(p < 0) or np.any(q < 0) or p.sum() <= 0 or q.sum() <= 0:
        raise ValueError("p and q must be non-negative and non-empty")
    p, q = p / p.sum(), q / q.sum()
    mask = p > 0
    if np.any(q[mask] == 0):
        raise DivergenceError("q is zero where p is positive")
    return float(max(0.0, np.sum(p[mask] * np.log(p[mask] / q[mask]))))


def integer_support(fit_p: FitResult, fit_q: FitResult) -> tuple[int, int]:
    lo = math.ceil(max(fit_p.x_min, fit_q.x_min))
    hi = math.floor(max(fit_p.x_max, fit_q.x_max))
    return lo, hi


def kl_divergence(fit_p: FitResult, fit_q: FitResult, support: tuple[int, int] | None = None) -> float:
    """KL(p || q) between two fitted densities evaluated on a common integer grid.

    Densities are floored at DENSITY_FLOOR and renormalized over the grid. The
    default grid runs from the larger x_min to the larger observed maximum.
    """
    for f in (fit_p, fit_q):
        if not isinstance(f, FitResult) or not f.valid:
            raise DivergenceError("both fits must be valid FitResults")
    lo, hi = support if support is not None else integer_support(fit_p, fit_q)
    if hi < lo:
        raise DivergenceError(f"empty integer support [{lo}, {hi}]")
    grid = np.arange(lo, hi + 1, dtype=float)
    p = np.maximum(np.nan_to_num(fit_p.pdf(grid)), DENSITY_FLOOR)
    q = np.maximum(np.nan_to_num(fit_q.pdf(grid)), DENSITY_FLOOR)
    return kl_divergence_discrete(p, q)


@dataclass
class ComparisonReport:
    feature_name: str
    fit_class_a: FitResult | NoValidFit
    fit_class_b: FitResult | NoValidFit
    kld_nats: float | None
    class_a: str = "a"
    class_b: str = "b"
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"feature": self.feature_name, "class_a": self.class_a, "class_b": self.class_b,
                "fit_class_a": self.fit_class_a.to_dict(), "fit_class_b": self.fit_class_b.to_dict(),
                "kld_nats": self.kld_nats, "notes": list(self.notes)}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def compare_classes(feature_name: str, samples_a, samples_b, class_a="a", class_b="b",
                    families: Sequence[str] = FAMILIES) -> ComparisonReport:
    fit_a = select_best_fit(samples_a, families)
    fit_b = select_best_fit(samples_b, families)
    notes, kld = [], None
    if fit_a.valid and fit_b.valid:
        try:
            kld = kl_divergence(fit_a, fit_b)
        except DivergenceError as exc:
            notes.append(str(exc))
    else:
        notes.append("no valid fit")
    return ComparisonReport(feature_name, fit_a, fit_b, kld, class_a, class_b, notes)


def cdf_plot_data(samples, fit: FitResult) -> list[tuple[float, float, float]]:
    """(value, empirical CDF, model CDF) at each distinct tail value."""
    x = _check_samples(samples)
    tail = x[x >= fit.x_min]
    unique, counts = np.unique(tail, return_counts=True)
    emp = np.cumsum(counts) / counts.sum()
    model = fit.cdf(unique)
    return [(float(u), float(e), float(m)) for u, e, m in zip(unique, emp, model)]
