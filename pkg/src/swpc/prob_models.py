"""Probability models for integer-quantized latent symbols.

Three families share one interface: Gaussian ("gm"), generalized Gaussian
("ggm", density beta/(2*alpha*Gamma(1/beta)) * exp(-(|x|/alpha)**beta)), and
a K-component Gaussian mixture ("gmm").  A symbol k carries the probability
mass of the unit bin [k-1/2, k+1/2], and its code length is -log2 of that
mass.

Scalar operations (`cdf_eval`, `pmf_integer`, `rate_bits`, `grad_rate_params`)
work on a single `ProbModel`; the `*_integer_pmf` / `*_pmf_grads` kernels are
the vectorized equivalents used by table builders and the trainer.  The
generalized-Gaussian CDF rests on `regularized_lower_gamma`, computed by a
series expansion for x < a+1 and a continued fraction otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, erf, erfc, gammainccinv, gammaln, ndtr, ndtri

__all__ = [
    "PROB_FLOOR",
    "ParameterDomainError",
    "InfiniteRateError",
    "GaussianParams",
    "GeneralizedGaussianParams",
    "GmmParams",
    "ProbModel",
    "cdf_eval",
    "pmf_integer",
    "rate_bits",
    "floored_rate_bits",
    "gmm_effective_mean",
    "grad_rate_params",
    "regularized_lower_gamma",
    "regularized_lower_gamma_with_da",
    "gaussian_integer_pmf",
    "ggm_integer_pmf",
    "gmm_integer_pmf",
    "gaussian_pmf_grads",
    "ggm_pmf_grads",
    "gmm_pmf_grads",
    "gaussian_cdf",
    "ggm_cdf",
    "gmm_cdf",
    "ggm_std",
    "ggm_alpha_for_std",
    "model_std",
    "support_radius",
]

# Bin masses below this are treated as zero for rate purposes.
PROB_FLOOR = 2.0 ** -32

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_LN2 = math.log(2.0)


class ParameterDomainError(ValueError):
    """A distribution parameter is outside its valid domain."""


class InfiniteRateError(ValueError):
    """The symbol has (numerically) zero probability under the model.

    Callers that must code such a symbol anyway should route it through the
    tail/bypass escape of the quantized tables.
    """


# ---------------------------------------------------------------------------
# Parameter containers


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ParameterDomainError(msg)


def _finite(x) -> bool:
    return bool(np.all(np.isfinite(x)))


@dataclass(frozen=True)
class GaussianParams:
    """Zero-mean Gaussian with scale ``sigma``."""

    sigma: float

    def __post_init__(self):
        _require(_finite(self.sigma) and self.sigma > 0, f"sigma must be finite and > 0, got {self.sigma}")


@dataclass(frozen=True)
class GeneralizedGaussianParams:
    """Zero-mean generalized Gaussian with shape ``beta`` and scale ``alpha``.

    beta = 2 recovers a Gaussian with sigma = alpha / sqrt(2); beta = 1 is
    Laplacian with diversity alpha.
    """

    beta: float
    alpha: float

    def __post_init__(self):
        _require(_finite(self.beta) and self.beta > 0, f"beta must be finite and > 0, got {self.beta}")
        _require(_finite(self.alpha) and self.alpha > 0, f"alpha must be finite and > 0, got {self.alpha}")


@dataclass(frozen=True)
class GmmParams:
    """Gaussian mixture: per-component (weight, mean, sigma), weights sum to 1."""

    weights: tuple[float, ...]
    means: tuple[float, ...]
    sigmas: tuple[float, ...]

    def __post_init__(self):
        k = len(self.weights)
        _require(k >= 1, "mixture needs at least one component")
        _require(len(self.means) == k and len(self.sigmas) == k, "weights/means/sigmas lengths differ")
        _require(_finite(self.weights) and _finite(self.means) and _finite(self.sigmas), "non-finite mixture parameter")
        _require(all(w > 0 for w in self.weights), "weights must be > 0")
        _require(all(s > 0 for s in self.sigmas), "sigmas must be > 0")
        _require(abs(sum(self.weights) - 1.0) <= 1e-9, f"weights sum to {sum(self.weights)}, expected 1")

    @property
    def component_count(self) -> int:
        return len(self.weights)

    @property
    def components(self) -> tuple[tuple[float, float, float], ...]:
        return tuple(zip(self.weights, self.means, self.sigmas))


_FAMILIES = ("gm", "ggm", "gmm")


@dataclass(frozen=True)
class ProbModel:
    """Tagged union over the three supported families."""

    family: str
    params: GaussianParams | GeneralizedGaussianParams | GmmParams

    def __post_init__(self):
        _require(self.family in _FAMILIES, f"unknown family {self.family!r}")
        expected = {"gm": GaussianParams, "ggm": GeneralizedGaussianParams, "gmm": GmmParams}[self.family]
        _require(isinstance(self.params, expected), f"family {self.family!r} expects {expected.__name__}")

    @classmethod
    def gaussian(cls, sigma: float) -> "ProbModel":
        return cls("gm", GaussianParams(float(sigma)))

    @classmethod
    def generalized_gaussian(cls, beta: float, alpha: float) -> "ProbModel":
        return cls("ggm", GeneralizedGaussianParams(float(beta), float(alpha)))

    @classmethod
    def mixture(cls, weights, means, sigmas) -> "ProbModel":
        return cls("gmm", GmmParams(tuple(map(float, weights)), tuple(map(float, means)), tuple(map(float, sigmas))))


# ---------------------------------------------------------------------------
# Regularized lower incomplete gamma P(a, x)

_GAMMA_EPS = 1e-15
_GAMMA_TINY = 1e-300
_GAMMA_MAX_ITER = 500


def _validate_gamma_args(a, x):
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise ParameterDomainError("order a must be finite and > 0")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ParameterDomainError("argument x must be finite and >= 0")
    return np.broadcast_arrays(a, x)


def _gamma_series(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    # P(a,x) = x^a e^-x sum_n x^n / (a (a+1) ... (a+n)), for x < a+1.
    # Converged lanes retire from the batch so stragglers don't gate everyone.
    a = a.ravel()
    x = x.ravel()
    out = np.empty_like(a)
    active = np.arange(a.size)
    ap = a.copy()
    term = 1.0 / a
    total = term.copy()
    xs = x.copy()
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term *= xs / ap
        total += term
        done = np.abs(term) <= np.abs(total) * _GAMMA_EPS
        if done.any():
            out[active[done]] = total[done]
            keep = ~done
            active, ap, term, total, xs = active[keep], ap[keep], term[keep], total[keep], xs[keep]
            if active.size == 0:
                break
    out[active] = total
    return out * np.exp(-x + a * np.log(x) - gammaln(a))


def _gamma_cf(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Q(a,x) by modified Lentz continued fraction, for x >= a+1.
    a = a.ravel()
    x = x.ravel()
    out = np.empty_like(a)
    active = np.arange(a.size)
    aa = a.copy()
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _GAMMA_TINY)
    d = np.where(np.abs(b) < _GAMMA_TINY, _GAMMA_TINY, b)
    d = 1.0 / d
    h = d.copy()
    for i in range(1, _GAMMA_MAX_ITER + 1):
        an = -i * (i - aa)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _GAMMA_TINY, _GAMMA_TINY, d)
        d = 1.0 / d
        c = b + an / c
        c = np.where(np.abs(c) < _GAMMA_TINY, _GAMMA_TINY, c)
        delta = c * d
        h = h * delta
        done = np.abs(delta - 1.0) < _GAMMA_EPS
        if done.any():
            out[active[done]] = h[done]
            keep = ~done
            active, aa, b, c, d, h = active[keep], aa[keep], b[keep], c[keep], d[keep], h[keep]
            if active.size == 0:
                break
    out[active] = h
    return np.exp(-x + a * np.log(x) - gammaln(a)) * out


def _reg_gamma_pq(a, x):
    """Return (P(a,x), Q(a,x), cf_branch) elementwise, branch-accurate."""
    a, x = _validate_gamma_args(a, x)
    p = np.zeros(a.shape, dtype=np.float64)
    q = np.ones(a.shape, dtype=np.float64)
    cf_branch = (x >= a + 1.0)
    ser = (x > 0) & ~cf_branch
    if np.any(ser):
        ps = _gamma_series(a[ser], x[ser])
        p[ser] = ps
        q[ser] = 1.0 - ps
    if np.any(cf_branch):
        qc = _gamma_cf(a[cf_branch], x[cf_branch])
        q[cf_branch] = qc
        p[cf_branch] = 1.0 - qc
    np.clip(p, 0.0, 1.0, out=p)
    np.clip(q, 0.0, 1.0, out=q)
    return p, q, cf_branch


def regularized_lower_gamma(a, x):
    """Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).

    Series expansion for x < a+1, Lentz continued fraction otherwise.
    Accepts scalars or broadcastable arrays; a > 0, x >= 0.
    """
    p, _, _ = _reg_gamma_pq(a, x)
    if p.ndim == 0:
        return float(p)
    return p


def _gamma_series_da(a: np.ndarray, x: np.ndarray):
    # Series with dual propagation of d/da.  term_n = x^n / (a...(a+n)).
    a = a.ravel()
    x = x.ravel()
    out = np.empty_like(a)
    dout = np.empty_like(a)
    active = np.arange(a.size)
    ap = a.copy()
    term = 1.0 / a
    dterm = -1.0 / (a * a)
    total = term.copy()
    dtotal = dterm.copy()
    xs = x.copy()
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        dterm = (xs / ap) * (dterm - term / ap)
        term = term * xs / ap
        total += term
        dtotal += dterm
        done = np.abs(term) <= np.abs(total) * _GAMMA_EPS
        if done.any():
            out[active[done]] = total[done]
            dout[active[done]] = dtotal[done]
            keep = ~done
            active, ap, term, dterm, total, dtotal, xs = (
                active[keep], ap[keep], term[keep], dterm[keep], total[keep], dtotal[keep], xs[keep],
            )
            if active.size == 0:
                break
    out[active] = total
    dout[active] = dtotal
    pref = np.exp(-x + a * np.log(x) - gammaln(a))
    dpref = pref * (np.log(x) - digamma(a))
    return pref * out, dpref * out + pref * dout


def _gamma_cf_da(a: np.ndarray, x: np.ndarray):
    # Continued fraction with dual propagation of d/da (derivatives of b and
    # a_n in the Lentz recurrence are -1 and +i respectively).
    a = a.ravel()
    x = x.ravel()
    out = np.empty_like(a)
    dout = np.empty_like(a)
    active = np.arange(a.size)
    aa = a.copy()
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _GAMMA_TINY)
    dc = np.zeros_like(x)
    v = np.where(np.abs(b) < _GAMMA_TINY, _GAMMA_TINY, b)
    d = 1.0 / v
    dd = 1.0 / (v * v)  # = -db / v^2 with db = -1
    h = d.copy()
    dh = dd.copy()
    for i in range(1, _GAMMA_MAX_ITER + 1):
        an = -i * (i - aa)
        dan = float(i)
        b = b + 2.0
        v = an * d + b
        dv = dan * d + an * dd - 1.0
        v = np.where(np.abs(v) < _GAMMA_TINY, _GAMMA_TINY, v)
        d = 1.0 / v
        dd = -dv * d * d
        cv = b + an / c
        dcv = (dan - an * (dc / c)) / c - 1.0
        cv = np.where(np.abs(cv) < _GAMMA_TINY, _GAMMA_TINY, cv)
        c, dc = cv, dcv
        delta = c * d
        ddelta = dc * d + c * dd
        dh = dh * delta + h * ddelta
        h = h * delta
        done = np.abs(delta - 1.0) < _GAMMA_EPS
        if done.any():
            out[active[done]] = h[done]
            dout[active[done]] = dh[done]
            keep = ~done
            active, aa, b, c, dc, d, dd, h, dh = (
                active[keep], aa[keep], b[keep], c[keep], dc[keep], d[keep], dd[keep], h[keep], dh[keep],
            )
            if active.size == 0:
                break
    out[active] = h
    dout[active] = dh
    pref = np.exp(-x + a * np.log(x) - gammaln(a))
    dpref = pref * (np.log(x) - digamma(a))
    return pref * out, dpref * out + pref * dout  # (Q, dQ/da)


def regularized_lower_gamma_with_da(a, x):
    """P(a, x) together with its order derivative dP/da.

    The derivative is the exact forward-mode differential of the same
    series/continued-fraction evaluation, not a finite difference.
    """
    a, x = _validate_gamma_args(a, x)
    p = np.zeros(a.shape, dtype=np.float64)
    dp = np.zeros(a.shape, dtype=np.float64)
    cf = (x >= a + 1.0)
    ser = (x > 0) & ~cf
    if np.any(ser):
        ps, dps = _gamma_series_da(a[ser], x[ser])
        p[ser] = ps
        dp[ser] = dps
    if np.any(cf):
        qc, dqc = _gamma_cf_da(a[cf], x[cf])
        p[cf] = 1.0 - qc
        dp[cf] = -dqc
    np.clip(p, 0.0, 1.0, out=p)
    if p.ndim == 0:
        return float(p), float(dp)
    return p, dp


# ---------------------------------------------------------------------------
# Vectorized family kernels: CDFs and unit-bin masses


def gaussian_cdf(x, sigma):
    x = np.asarray(x, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    return ndtr(x / sigma)


def _ggm_u(x, beta, alpha):
    # u = (x / alpha)^beta evaluated in log space; x >= 0.
    with np.errstate(divide="ignore"):
        logr = np.log(x) - np.log(alpha)
    u = np.exp(beta * logr)
    return np.where(x > 0, u, 0.0)


def ggm_cdf(x, beta, alpha):
    x, beta, alpha = np.broadcast_arrays(
        np.asarray(x, np.float64), np.asarray(beta, np.float64), np.asarray(alpha, np.float64)
    )
    u = _ggm_u(np.abs(x), beta, alpha)
    p, _, _ = _reg_gamma_pq(1.0 / beta, u)
    out = 0.5 + 0.5 * np.sign(x) * p
    return out


def gmm_cdf(x, weights, means, sigmas):
    """Mixture CDF; component axis is the trailing axis of the parameters."""
    x = np.asarray(x, dtype=np.float64)[..., None]
    z = (x - np.asarray(means, np.float64)) / np.asarray(sigmas, np.float64)
    return np.sum(np.asarray(weights, np.float64) * ndtr(z), axis=-1)


def gaussian_integer_pmf(k, sigma):
    """Mass of the unit bin around integer k under Gaussian(sigma).

    Evaluated on the positive half-axis with erf/erfc so that the result is
    exactly symmetric in k and stable in the far tail.
    """
    k = np.asarray(k, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    m = np.abs(k)
    denom = sigma * _SQRT2
    lo = (m - 0.5) / denom
    hi = (m + 0.5) / denom
    center = erf(hi)
    off = 0.5 * (erfc(lo) - erfc(hi))
    return np.where(m == 0, center, off)


def ggm_integer_pmf(k, beta, alpha):
    """Unit-bin mass under the generalized Gaussian, symmetric in k."""
    k, beta, alpha = np.broadcast_arrays(
        np.asarray(k, np.float64), np.asarray(beta, np.float64), np.asarray(alpha, np.float64)
    )
    a = 1.0 / beta
    m = np.abs(k)
    u_hi = _ggm_u(m + 0.5, beta, alpha)
    u_lo = _ggm_u(np.maximum(m - 0.5, 0.0), beta, alpha)
    p_hi, q_hi, cf_hi = _reg_gamma_pq(a, u_hi)
    p_lo, q_lo, cf_lo = _reg_gamma_pq(a, u_lo)
    # Far tail: both endpoints on the continued-fraction branch, so the
    # complementary form avoids cancellation between two values near 1.
    both_cf = cf_hi & cf_lo
    off = 0.5 * np.where(both_cf, q_lo - q_hi, p_hi - p_lo)
    out = np.where(m == 0, p_hi, off)
    return np.clip(out, 0.0, 1.0)


def gmm_integer_pmf(k, weights, means, sigmas):
    """Unit-bin mass under a Gaussian mixture (component axis trailing)."""
    k = np.asarray(k, dtype=np.float64)[..., None]
    means = np.asarray(means, np.float64)
    sigmas = np.asarray(sigmas, np.float64)
    weights = np.asarray(weights, np.float64)
    a = (k - 0.5 - means) / sigmas
    b = (k + 0.5 - means) / sigmas
    comp = ndtr(b) - ndtr(a)
    return np.sum(weights * comp, axis=-1)


# ---------------------------------------------------------------------------
# Gradients of the bin mass w.r.t. the trainable coordinates


def _phi(t):
    return np.exp(-0.5 * t * t) * _INV_SQRT_2PI


def gaussian_pmf_grads(k, sigma):
    """Return (pmf, d pmf / d log sigma)."""
    k = np.asarray(k, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    pmf = gaussian_integer_pmf(k, sigma)
    a = (k - 0.5) / sigma
    b = (k + 0.5) / sigma
    dlogsigma = a * _phi(a) - b * _phi(b)
    return pmf, np.broadcast_to(dlogsigma, pmf.shape).copy()


def _q1(a, u):
    # u^a e^-u / Gamma(a) == u * pdf_gamma(a, u); stays finite as u -> 0.
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(a * np.log(u) - u - gammaln(a))
    return np.where(u > 0, out, 0.0)


def _ggm_endpoint_grads(a, beta, u):
    """d/dlogbeta and d/dlogalpha of P(a(beta), u(x; alpha, beta)) at fixed x."""
    p, dpda = regularized_lower_gamma_with_da(a, np.asarray(u, np.float64))
    p = np.asarray(p, np.float64)
    dpda = np.asarray(dpda, np.float64)
    q1 = _q1(a, u)
    with np.errstate(divide="ignore", invalid="ignore"):
        qlog = q1 * np.log(u)
    qlog = np.where(q1 > 0, qlog, 0.0)
    dlogbeta = -dpda / beta + qlog
    dlogalpha = -beta * q1
    return p, dlogbeta, dlogalpha


def ggm_pmf_grads(k, beta, alpha):
    """Return (pmf, d pmf/d log beta, d pmf/d log alpha)."""
    k, beta, alpha = np.broadcast_arrays(
        np.asarray(k, np.float64), np.asarray(beta, np.float64), np.asarray(alpha, np.float64)
    )
    a = 1.0 / beta
    m = np.abs(k)
    u_hi = _ggm_u(m + 0.5, beta, alpha)
    u_lo = _ggm_u(np.maximum(m - 0.5, 0.0), beta, alpha)
    p_hi, db_hi, da_hi = _ggm_endpoint_grads(a, beta, u_hi)
    p_lo, db_lo, da_lo = _ggm_endpoint_grads(a, beta, u_lo)
    center = m == 0
    pmf = np.where(center, p_hi, 0.5 * (p_hi - p_lo))
    dlogbeta = np.where(center, db_hi, 0.5 * (db_hi - db_lo))
    dlogalpha = np.where(center, da_hi, 0.5 * (da_hi - da_lo))
    return np.clip(pmf, 0.0, 1.0), dlogbeta, dlogalpha


def gmm_pmf_grads(k, weights, means, sigmas):
    """Return (pmf, d/d weight-logits, d/d means, d/d log sigmas).

    The weight gradient is taken in the normalized soft parameterization
    (weights = softmax(logits)), evaluated at the current weights; the
    component axis is the trailing axis of every returned gradient.
    """
    k = np.asarray(k, dtype=np.float64)[..., None]
    weights = np.asarray(weights, np.float64)
    means = np.asarray(means, np.float64)
    sigmas = np.asarray(sigmas, np.float64)
    a = (k - 0.5 - means) / sigmas
    b = (k + 0.5 - means) / sigmas
    comp = ndtr(b) - ndtr(a)
    pmf = np.sum(weights * comp, axis=-1)
    phi_a = _phi(a)
    phi_b = _phi(b)
    dmeans = weights * (phi_a - phi_b) / sigmas
    dlogsigmas = weights * (a * phi_a - b * phi_b)
    dlogits = weights * (comp - pmf[..., None])
    return pmf, dlogits, dmeans, dlogsigmas


# ---------------------------------------------------------------------------
# Scalar operations on ProbModel


def cdf_eval(model: ProbModel, x):
    """CDF of the model at x (scalar or array)."""
    p = model.params
    if model.family == "gm":
        out = gaussian_cdf(x, p.sigma)
    elif model.family == "ggm":
        out = ggm_cdf(x, p.beta, p.alpha)
    else:
        out = gmm_cdf(x, p.weights, p.means, p.sigmas)
    return float(out) if np.ndim(out) == 0 else out


def pmf_integer(model: ProbModel, k):
    """Probability mass of the unit bin [k-1/2, k+1/2]."""
    p = model.params
    if model.family == "gm":
        out = gaussian_integer_pmf(k, p.sigma)
    elif model.family == "ggm":
        out = ggm_integer_pmf(k, p.beta, p.alpha)
    else:
        out = gmm_integer_pmf(k, p.weights, p.means, p.sigmas)
    return float(out) if np.ndim(out) == 0 else out


def rate_bits(model: ProbModel, k) -> float:
    """Ideal code length -log2 pmf_integer(model, k), in bits.

    Raises InfiniteRateError when the mass falls below the 2^-32 floor.
    """
    p = pmf_integer(model, k)
    if np.ndim(p) != 0:
        raise TypeError("rate_bits takes a scalar symbol; use floored_rate_bits for arrays")
    if p < PROB_FLOOR:
        raise InfiniteRateError(f"symbol {k} has probability {p:.3e} < 2^-32 under {model.family}")
    return -math.log2(p)


def floored_rate_bits(pmf):
    """-log2(max(pmf, 2^-32)) elementwise; the training-side rate kernel."""
    return -np.log2(np.maximum(np.asarray(pmf, np.float64), PROB_FLOOR))


def gmm_effective_mean(params: GmmParams) -> float:
    """Weighted component mean: the quantization center of a mixture."""
    return float(np.dot(params.weights, params.means))


def grad_rate_params(model: ProbModel, k) -> np.ndarray:
    """Gradient of rate_bits(model, k) w.r.t. the trainable coordinates.

    Coordinate order: gm -> [log sigma]; ggm -> [log beta, log alpha];
    gmm -> [weight logits (K), means (K), log sigmas (K)].
    """
    p = model.params
    if model.family == "gm":
        pmf, dls = gaussian_pmf_grads(k, p.sigma)
        grads = np.array([dls])
    elif model.family == "ggm":
        pmf, dlb, dla = ggm_pmf_grads(k, p.beta, p.alpha)
        grads = np.array([dlb, dla])
    else:
        pmf, dw, dm, ds = gmm_pmf_grads(k, p.weights, p.means, p.sigmas)
        grads = np.concatenate([dw, dm, ds])
    pmf = float(pmf)
    if pmf < PROB_FLOOR:
        raise InfiniteRateError(f"symbol {k} has probability {pmf:.3e} < 2^-32 under {model.family}")
    return -grads / (pmf * _LN2)


# ---------------------------------------------------------------------------
# Spread summaries and support sizing


def ggm_std(beta, alpha):
    """Standard deviation of the generalized Gaussian."""
    beta = np.asarray(beta, np.float64)
    alpha = np.asarray(alpha, np.float64)
    a = 1.0 / beta
    out = alpha * np.exp(0.5 * (gammaln(3.0 * a) - gammaln(a)))
    return float(out) if np.ndim(out) == 0 else out


def ggm_alpha_for_std(beta, std):
    """Scale alpha that gives the generalized Gaussian the requested std."""
    beta = np.asarray(beta, np.float64)
    std = np.asarray(std, np.float64)
    a = 1.0 / beta
    out = std * np.exp(-0.5 * (gammaln(3.0 * a) - gammaln(a)))
    return float(out) if np.ndim(out) == 0 else out


def model_std(model: ProbModel) -> float:
    """Standard deviation of the model (mixture: around its overall mean)."""
    p = model.params
    if model.family == "gm":
        return float(p.sigma)
    if model.family == "ggm":
        return ggm_std(p.beta, p.alpha)
    w = np.asarray(p.weights)
    mu = np.asarray(p.means)
    sg = np.asarray(p.sigmas)
    mean = float(np.dot(w, mu))
    var = float(np.dot(w, sg * sg + mu * mu) - mean * mean)
    return math.sqrt(max(var, 0.0))


def gaussian_support_radius(sigma, tail_mass: float = 2.0 ** -20, cap: int = 127):
    z = float(ndtri(1.0 - 0.5 * tail_mass))
    return _edge_to_radius(np.asarray(sigma, np.float64) * z, cap)


def ggm_support_radius(beta, alpha, tail_mass: float = 2.0 ** -20, cap: int = 127):
    a = 1.0 / np.asarray(beta, np.float64)
    u = gammainccinv(a, min(1.0, tail_mass))
    return _edge_to_radius(np.asarray(alpha, np.float64) * u ** a, cap)


def gmm_support_radius(means, sigmas, tail_mass: float = 2.0 ** -20, cap: int = 127):
    """Radius covering every component (component axis trailing)."""
    z = float(ndtri(1.0 - 0.5 * tail_mass))
    edge = np.max(np.abs(np.asarray(means, np.float64)) + np.asarray(sigmas, np.float64) * z, axis=-1)
    return _edge_to_radius(edge, cap)


def _edge_to_radius(edge, cap: int):
    r = np.ceil(np.asarray(edge, np.float64) - 0.5).astype(np.int64)
    r = np.clip(r, 1, cap)
    return int(r) if r.ndim == 0 else r


def support_radius(model: ProbModel, tail_mass: float = 2.0 ** -20, cap: int = 127) -> int:
    """Smallest radius r such that P(|X| > r + 1/2) stays below ~tail_mass.

    Used to size per-element dynamic tables; clamped to [1, cap].
    """
    p = model.params
    if model.family == "gm":
        return int(gaussian_support_radius(p.sigma, tail_mass, cap))
    if model.family == "ggm":
        return int(ggm_support_radius(p.beta, p.alpha, tail_mass, cap))
    return int(gmm_support_radius(p.means, p.sigmas, tail_mass, cap))
