"""Trainable switchable prior sets.

A prior set is a small family of distributions {theta_m} shared by every
element of a latent block.  Each element carries a continuous index i that
softly selects priors during training (softmax over the distances |i - m|)
and hardens to round(clip(i, 1, M)) for coding.  This module owns the
training side: soft weights, weighted and Top-K rate estimates, 2-D sets,
skip-mask training through a Gumbel relaxation, hyperlatent prior reuse,
annealing schedules, entropy-increasing initialization, and the final
export to quantized CDF tables.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .cdf_tables import CdfTableSet, quantize_pmf
from .coding_backends import IndexGrid, LatentBlock, SkipMask, harden_index
from .prob_models import (
    PROB_FLOOR,
    GaussianParams,
    GeneralizedGaussianParams,
    GmmParams,
    InfiniteRateError,
    ProbModel,
    gaussian_pmf_grads,
    ggm_alpha_for_std,
    ggm_pmf_grads,
    gmm_pmf_grads,
    pmf_integer,
)

_LN2 = math.log(2.0)

# beta projection bounds: keeps the gamma kernels numerically healthy while
# leaving plenty of room around the tabulated [0.5, 3] shape range
_BETA_MIN, _BETA_MAX = 0.05, 6.0

_EXPORT_RADIUS = 127


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; carries the trace up to the failure."""

    def __init__(self, message: str, loss_trace: list[float]):
        super().__init__(message)
        self.loss_trace = loss_trace


# ---------------------------------------------------------------------------
# Unconstrained coordinates
#
# gm  -> [log sigma]
# ggm -> [log beta, log alpha]
# gmm -> [K weight logits, K means, K log sigmas]
# matching the gradient order of prob_models.grad_rate_params.


def _coord_dim(family: str, components: int) -> int:
    if family == "gm":
        return 1
    if family == "ggm":
        return 2
    if family == "gmm":
        return 3 * components
    raise ValueError(f"unknown family {family!r}")


def _softmax(x, axis=-1):
    x = np.asarray(x, dtype=np.float64)
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def model_from_coords(family: str, coords: np.ndarray) -> ProbModel:
    """Project one unconstrained coordinate vector to a validated model."""
    coords = np.asarray(coords, dtype=np.float64)
    if family == "gm":
        return ProbModel("gm", GaussianParams(sigma=float(np.exp(coords[0]))))
    if family == "ggm":
        beta = float(np.clip(np.exp(coords[0]), _BETA_MIN, _BETA_MAX))
        return ProbModel("ggm", GeneralizedGaussianParams(beta=beta, alpha=float(np.exp(coords[1]))))
    k = coords.size // 3
    weights = _softmax(coords[:k])
    return ProbModel(
        "gmm",
        GmmParams(
            weights=tuple(weights.tolist()),
            means=tuple(coords[k:2 * k].tolist()),
            sigmas=tuple(np.exp(coords[2 * k:]).tolist()),
        ),
    )


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class PriorSet1D:
    """M priors of one family, stored as unconstrained coordinate rows."""

    family: str
    params: np.ndarray
    components: int = 2

    def __post_init__(self):
        params = np.array(self.params, dtype=np.float64)
        params.flags.writeable = False
        object.__setattr__(self, "params", params)
        if params.ndim != 2 or params.shape[0] < 1:
            raise ValueError("params must be an (M, D) array with M >= 1")
        if params.shape[1] != _coord_dim(self.family, self.components):
            raise ValueError(f"{self.family} priors need {_coord_dim(self.family, self.components)} coordinates")
        if not np.isfinite(params).all():
            raise ValueError("prior coordinates must be finite")

    @property
    def m(self) -> int:
        return self.params.shape[0]

    def model(self, index: int) -> ProbModel:
        """One-based prior index, matching the soft-weight convention."""
        if not 1 <= index <= self.m:
            raise ValueError(f"prior index {index} out of [1, {self.m}]")
        return model_from_coords(self.family, self.params[index - 1])

    def models(self) -> list[ProbModel]:
        return [model_from_coords(self.family, row) for row in self.params]


@dataclass(frozen=True)
class PriorSet2D:
    """An M x N grid of priors; flat layout is row-major (i-1)*N + (j-1)."""

    family: str
    params: np.ndarray
    components: int = 2

    def __post_init__(self):
        params = np.array(self.params, dtype=np.float64)
        params.flags.writeable = False
        object.__setattr__(self, "params", params)
        if params.ndim != 3 or params.shape[0] < 1 or params.shape[1] < 1:
            raise ValueError("params must be an (M, N, D) array")
        if params.shape[2] != _coord_dim(self.family, self.components):
            raise ValueError(f"{self.family} priors need {_coord_dim(self.family, self.components)} coordinates")
        if not np.isfinite(params).all():
            raise ValueError("prior coordinates must be finite")

    @property
    def m(self) -> int:
        return self.params.shape[0]

    @property
    def n(self) -> int:
        return self.params.shape[1]

    def model(self, i: int, j: int) -> ProbModel:
        if not (1 <= i <= self.m and 1 <= j <= self.n):
            raise ValueError(f"prior index ({i}, {j}) out of grid")
        return model_from_coords(self.family, self.params[i - 1, j - 1])

    def models(self) -> list[ProbModel]:
        flat = self.params.reshape(-1, self.params.shape[2])
        return [model_from_coords(self.family, row) for row in flat]


@dataclass(frozen=True)
class AnnealSchedule:
    """Exponential decay of the assignment and mask temperatures."""

    tau0: float
    tau_decay_per_epoch: float = 0.01
    t0: float = 0.4
    t_decay_per_epoch: float = 0.01
    gumbel_coefficient: float = 0.5

    def __post_init__(self):
        for name in ("tau0", "tau_decay_per_epoch", "t0", "t_decay_per_epoch", "gumbel_coefficient"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite")

    @classmethod
    def for_set_size(cls, m: int, **overrides) -> "AnnealSchedule":
        return cls(tau0=0.05 * m, **overrides)

    def tau(self, epoch: int) -> float:
        return self.tau0 * math.exp(-self.tau_decay_per_epoch * epoch)

    def t(self, epoch: int) -> float:
        return self.t0 * math.exp(-self.t_decay_per_epoch * epoch)


@dataclass(frozen=True)
class SkipHead:
    """Per-element soft mask parameters, plus per-channel ones for hyper."""

    b: np.ndarray
    b_z: np.ndarray | None = None

    def __post_init__(self):
        b = np.array(self.b, dtype=np.float64)
        b.flags.writeable = False
        object.__setattr__(self, "b", b)
        if not np.isfinite(b).all():
            raise ValueError("mask parameters must be finite")
        if self.b_z is not None:
            b_z = np.array(self.b_z, dtype=np.float64)
            b_z.flags.writeable = False
            object.__setattr__(self, "b_z", b_z)
            if b_z.ndim != 1 or not np.isfinite(b_z).all():
                raise ValueError("b_z must be a finite vector with one entry per channel")

    def hard_mask(self) -> SkipMask:
        return SkipMask.from_soft(self.b)

    def hard_channel_mask(self) -> np.ndarray:
        if self.b_z is None:
            raise ValueError("this head has no hyperlatent mask")
        return np.clip(np.round(self.b_z), 0, 1).astype(np.int64)


@dataclass(frozen=True)
class HyperLogits:
    """Per-channel logits over the M priors reused for hyperlatents."""

    logits: np.ndarray

    def __post_init__(self):
        logits = np.array(self.logits, dtype=np.float64)
        logits.flags.writeable = False
        object.__setattr__(self, "logits", logits)
        if logits.ndim != 2:
            raise ValueError("logits must be (channels, M)")
        if not np.isfinite(logits).all():
            raise ValueError("logits must be finite")

    @property
    def m(self) -> int:
        return self.logits.shape[1]

    @property
    def channels(self) -> int:
        return self.logits.shape[0]

    def weights(self) -> np.ndarray:
        return _softmax(self.logits, axis=1)

    def selected(self) -> np.ndarray:
        """One-based prior index per channel: the post-training argmax."""
        return self.logits.argmax(axis=1) + 1


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for one training run.

    dims is (M,) for a 1-D set or (M, N) for a 2-D grid (gmm only);
    k = None means full-M weighting (no Top-K truncation); skip_epochs > 0
    appends a second phase that trains the skip mask with priors frozen;
    mask_hyper additionally masks the hyperlatent rate in that phase.
    """

    family: str
    dims: tuple
    epochs: int
    lr: float = 1e-2
    k: int | None = None
    lambda_: float = 0.01
    seed: int = 0
    predictor_mode: str = "free-index"
    skip_epochs: int = 0
    mask_hyper: bool = False
    components: int = 2

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.family not in ("gm", "ggm", "gmm"):
            raise ValueError(f"unknown family {self.family!r}")
        if len(self.dims) not in (1, 2) or any(d < 1 for d in self.dims):
            raise ValueError("dims must be (M,) or (M, N) with positive sizes")
        if len(self.dims) == 2 and self.family != "gmm":
            raise ValueError("2-D prior grids are defined for the gmm family")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.lambda_ < 0:
            raise ValueError("lambda_ must be >= 0")
        if self.predictor_mode not in ("free-index", "calibration-curve"):
            raise ValueError(f"unknown predictor mode {self.predictor_mode!r}")
        if self.skip_epochs < 0:
            raise ValueError("skip_epochs must be >= 0")
        if self.components < 1:
            raise ValueError("components must be >= 1")

    @property
    def flat_count(self) -> int:
        return int(np.prod(self.dims))


# ---------------------------------------------------------------------------
# Soft assignment and rate estimates


def soft_weights(i: float, m: int, tau: float) -> np.ndarray:
    """Softmax of -|i - m'|/tau over the prior indexes m' = 1..m."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if m < 1:
        raise ValueError("m must be >= 1")
    dist = np.abs(float(i) - np.arange(1, m + 1, dtype=np.float64))
    return _softmax(-dist / tau)


def soft_weights_2d(i: float, j: float, m: int, n: int, tau: float) -> np.ndarray:
    """Outer product of the per-dimension weight vectors; sums to 1."""
    return np.outer(soft_weights(i, m, tau), soft_weights(j, n, tau))


def top_k_indices(i: float, m: int, k: int) -> np.ndarray:
    """The k prior indexes nearest to i, nearest first, ties to smaller m."""
    if not 1 <= k <= m:
        raise ValueError("k must satisfy 1 <= k <= m")
    candidates = np.arange(1, m + 1, dtype=np.int64)
    order = np.lexsort((candidates, np.abs(float(i) - candidates)))
    return candidates[order[:k]]


def top2_indices(i: float, m: int) -> tuple[int, int]:
    """Floor and ceiling of clip(i, 1, m); equal when the clip is integral."""
    if m < 1:
        raise ValueError("m must be >= 1")
    c = min(max(float(i), 1.0), float(m))
    return int(math.floor(c)), int(math.ceil(c))


def top2_pairs_2d(i: float, j: float, m: int, n: int) -> list[tuple[int, int]]:
    """Per-dimension two-nearest selection: at most 4 grid cells."""
    rows = sorted(set(top2_indices(i, m)))
    cols = sorted(set(top2_indices(j, n)))
    return [(r, c) for r in rows for c in cols]


def _selected_rates(symbol: int, prior_set: PriorSet1D, selection: np.ndarray) -> np.ndarray:
    rates = np.empty(len(selection), dtype=np.float64)
    for pos, index in enumerate(selection):
        p = float(pmf_integer(prior_set.model(int(index)), symbol))
        if p < PROB_FLOOR:
            raise InfiniteRateError(
                f"prior {int(index)} gives symbol {symbol} probability {p:.3e} < 2^-32"
            )
        rates[pos] = -math.log2(p)
    return rates


def weighted_rate(symbol: int, prior_set: PriorSet1D, i: float, tau: float) -> float:
    """Rate estimate sum_m pi_m * rate(theta_m, symbol) over the full set."""
    weights = soft_weights(i, prior_set.m, tau)
    live = weights > 0.0
    rates = np.zeros(prior_set.m)
    rates[live] = _selected_rates(symbol, prior_set, np.nonzero(live)[0] + 1)
    return float(np.dot(weights, rates))


def topk_rate(symbol: int, prior_set: PriorSet1D, i: float, tau: float, k: int) -> float:
    """weighted_rate restricted to the k nearest priors, renormalized."""
    selection = top_k_indices(i, prior_set.m, k)
    dist = np.abs(float(i) - selection.astype(np.float64))
    weights = _softmax(-dist / tau)
    rates = _selected_rates(symbol, prior_set, selection)
    return float(np.dot(weights, rates))


def weighted_rate_grads(symbol: int, prior_set: PriorSet1D, i: float, tau: float):
    """(rate, d rate / d prior coords (M, D), d rate / d i)."""
    return _rate_grads(symbol, prior_set, i, tau, np.arange(1, prior_set.m + 1))


def topk_rate_grads(symbol: int, prior_set: PriorSet1D, i: float, tau: float, k: int):
    return _rate_grads(symbol, prior_set, i, tau, top_k_indices(i, prior_set.m, k))


def _coord_rate_grads(prior_set: PriorSet1D, index: int, symbol: int):
    """(rate, d rate / d coords) for one prior, raising below the floor."""
    model = prior_set.model(index)
    p = model.params
    if prior_set.family == "gm":
        pmf, dls = gaussian_pmf_grads(symbol, p.sigma)
        grads = np.array([dls])
    elif prior_set.family == "ggm":
        pmf, dlb, dla = ggm_pmf_grads(symbol, p.beta, p.alpha)
        grads = np.array([dlb, dla])
    else:
        pmf, dw, dm, ds = gmm_pmf_grads(symbol, np.array(p.weights), np.array(p.means), np.array(p.sigmas))
        grads = np.concatenate([dw, dm, ds])
    pmf = float(pmf)
    if pmf < PROB_FLOOR:
        raise InfiniteRateError(f"prior {index} gives symbol {symbol} probability {pmf:.3e} < 2^-32")
    return -math.log2(pmf), -np.asarray(grads, np.float64) / (pmf * _LN2)


def _rate_grads(symbol, prior_set, i, tau, selection):
    dist = np.abs(float(i) - selection.astype(np.float64))
    weights = _softmax(-dist / tau)
    rates = np.zeros(len(selection))
    dtheta = np.zeros_like(prior_set.params)
    for pos, index in enumerate(selection):
        if weights[pos] == 0.0:
            continue  # an unweighted prior may not see the symbol at all
        rates[pos], grad = _coord_rate_grads(prior_set, int(index), symbol)
        dtheta[index - 1] = weights[pos] * grad
    rate = float(np.dot(weights, rates))
    signs = np.sign(float(i) - selection.astype(np.float64))
    # d pi_m / d i = pi_m (mean_l pi_l s_l - s_m) / tau under the softmax
    di = float(np.dot(weights, rates * (np.dot(weights, signs) - signs)) / tau)
    return rate, dtheta, di


# ---------------------------------------------------------------------------
# Gumbel-relaxed skip mask


def _gumbel_pair(shape, coefficient: float, noise_seed: int):
    rng = np.random.Generator(np.random.Philox(noise_seed))
    g = rng.gumbel(size=(2,) + tuple(shape))
    return coefficient * (g[1] - g[0])


def gumbel_mask(b, t: float, coefficient: float = 0.5, noise_seed: int = 0):
    """Soft keep probability from the two-class Gumbel relaxation.

    Class logits are -|b - 0|/t and -|b - 1|/t; the class-1 softmax
    component is sigmoid of their noisy difference, with the noise gap
    scaled by the fixed coefficient.
    """
    mask, _ = gumbel_mask_grad(b, t, coefficient, noise_seed)
    return mask


def gumbel_mask_grad(b, t: float, coefficient: float = 0.5, noise_seed: int = 0):
    """(mask, d mask / d b) at a fixed noise realization per seed."""
    if t <= 0:
        raise ValueError("t must be positive")
    b = np.asarray(b, dtype=np.float64)
    noise = _gumbel_pair(b.shape, coefficient, noise_seed)
    logit_gap = (np.abs(b) - np.abs(b - 1.0)) / t
    mask = 1.0 / (1.0 + np.exp(-(logit_gap + noise)))
    dmask = mask * (1.0 - mask) * (np.sign(b) - np.sign(b - 1.0)) / t
    if mask.ndim == 0:
        return float(mask), float(dmask)
    return mask, dmask


# ---------------------------------------------------------------------------
# Losses


def hyper_rate(z_block: LatentBlock, prior_set: PriorSet1D, logits: HyperLogits) -> float:
    """Hyperlatent rate reusing the prior set: per-channel softmax over all M."""
    rate, _, _ = hyper_rate_grads(z_block, prior_set, logits)
    return rate


def hyper_rate_grads(z_block: LatentBlock, prior_set: PriorSet1D, logits: HyperLogits):
    """(rate, d rate / d logits, d rate / d prior coords)."""
    if logits.m != prior_set.m:
        raise ValueError("logits width must match the prior count")
    if logits.channels != z_block.channels:
        raise ValueError("logits must have one row per hyperlatent channel")
    weights = logits.weights()
    per_channel = z_block.residuals.reshape(z_block.channels, -1)
    uniques, inverse = np.unique(per_channel, return_inverse=True)
    inverse = inverse.reshape(per_channel.shape)
    rates, grads, pmf = _family_tables(prior_set.family, prior_set.params, uniques,
                                       prior_set.components)
    counts = np.zeros((z_block.channels, len(uniques)))
    for c in range(z_block.channels):
        np.add.at(counts[c], inverse[c], 1.0)
    bad = pmf < PROB_FLOOR
    if bad.any():
        # error only when a weighted prior meets a symbol its channel holds
        exposed = (weights > 0.0).astype(np.float64).T @ (counts > 0.0)
        if (bad & (exposed > 0.0)).any():
            m_bad, u_bad = np.argwhere(bad & (exposed > 0.0))[0]
            raise InfiniteRateError(
                f"prior {m_bad + 1} gives symbol {int(uniques[u_bad])} probability < 2^-32"
            )
    rate_sums = counts @ rates.T
    channel_rates = (weights * rate_sums).sum(axis=1)
    dlogits = weights * (rate_sums - channel_rates[:, None])
    touched = weights.T @ counts
    dtheta = np.einsum("mu,mud->md", touched, grads)
    return float(channel_rates.sum()), dlogits, dtheta


def skip_loss(block: LatentBlock, prior_set: PriorSet1D, indexes: IndexGrid,
              mask_soft, lambda_: float, tau: float, t: float, *,
              k: int | None = None, noise_seed: int | None = None,
              z_block: LatentBlock | None = None,
              z_logits: HyperLogits | None = None) -> float:
    """Rate-distortion objective with a soft skip mask.

    mask_soft is taken as the relaxed mask itself; pass noise_seed to
    treat it as raw parameters and draw the Gumbel relaxation here (t is
    the relaxation temperature).  The distortion surrogate is the energy
    the mask removes: sum((1 - mask) * residual)^2 elementwise.
    """
    loss, _, _, _, _ = skip_loss_grads(
        block, prior_set, indexes, mask_soft, lambda_, tau, t,
        k=k, noise_seed=noise_seed, z_block=z_block, z_logits=z_logits,
    )
    return loss


def skip_loss_grads(block: LatentBlock, prior_set: PriorSet1D, indexes: IndexGrid,
                    mask_soft, lambda_: float, tau: float, t: float, *,
                    k: int | None = None, noise_seed: int | None = None,
                    z_block: LatentBlock | None = None,
                    z_logits: HyperLogits | None = None):
    """(loss, d/d prior coords, d/d i, d/d mask entries, d/d hyper logits).

    The mask gradient is with respect to the entries actually passed in:
    the soft mask itself, or the raw parameters when noise_seed is given.
    """
    if indexes.continuous.shape != block.shape:
        raise ValueError("index grid shape must match the block")
    if indexes.is_2d:
        raise ValueError("skip training drives 1-D prior sets")
    if lambda_ < 0:
        raise ValueError("lambda_ must be >= 0")
    mask_soft = np.asarray(mask_soft, dtype=np.float64)
    if mask_soft.shape != block.shape:
        raise ValueError("mask shape must match the block")
    if noise_seed is None:
        mask = mask_soft
        dmask_dparam = np.ones_like(mask)
    else:
        mask, dmask_dparam = gumbel_mask_grad(mask_soft, t, noise_seed=noise_seed)

    symbols = block.residuals.ravel()
    ivals = indexes.continuous.ravel()
    flat_mask = mask.ravel()
    kk = prior_set.m if k is None else k
    n = symbols.size
    rates = np.empty(n)
    dtheta = np.zeros_like(prior_set.params)
    di = np.empty(n)
    for e in range(n):
        rate, dth, die = _rate_grads(
            int(symbols[e]), prior_set, float(ivals[e]), tau,
            top_k_indices(float(ivals[e]), prior_set.m, kk),
        )
        rates[e] = rate
        dtheta += flat_mask[e] * dth
        di[e] = flat_mask[e] * die
    residual_sq = symbols.astype(np.float64) ** 2
    distortion = float(np.sum((1.0 - flat_mask) ** 2 * residual_sq))
    loss = float(np.dot(flat_mask, rates)) + lambda_ * distortion
    dmask = rates - 2.0 * lambda_ * (1.0 - flat_mask) * residual_sq

    dlogits = None
    if z_block is not None:
        if z_logits is None:
            raise ValueError("hyperlatent blocks need logits")
        z_rate, dlogits, z_dtheta = hyper_rate_grads(z_block, prior_set, z_logits)
        loss += z_rate
        dtheta += z_dtheta
    return loss, dtheta, di.reshape(block.shape), (dmask * dmask_dparam.ravel()).reshape(block.shape), dlogits


# ---------------------------------------------------------------------------
# Initialization


def _scale_ladder(m: int, max_abs_residual: float) -> np.ndarray:
    # below sigma ~ 0.3 the mass at +-1 sits under the 2^-32 floor where
    # gradients vanish, so only all-zero data starts the ladder at 0.05
    lo = 0.05 if max_abs_residual == 0 else 0.3
    hi = max(float(max_abs_residual) / 2.0, lo * 1.2)
    if m == 1:
        return np.array([math.sqrt(lo * hi)])
    return np.geomspace(lo, hi, m)


def init_prior_set(family: str, m: int, max_abs_residual: float, components: int = 2) -> PriorSet1D:
    """Entropy-increasing start: scales climb log-spaced with the index."""
    if m < 1:
        raise ValueError("m must be >= 1")
    scales = _scale_ladder(m, max_abs_residual)
    if family == "gm":
        params = np.log(scales)[:, None]
    elif family == "ggm":
        alphas = ggm_alpha_for_std(2.0, scales)
        params = np.stack([np.full(m, math.log(2.0)), np.log(alphas)], axis=1)
    elif family == "gmm":
        k = components
        spread = np.geomspace(0.7, 1.4, k) if k > 1 else np.ones(1)
        logits = np.zeros((m, k))
        means = np.zeros((m, k))
        sigmas = np.log(scales[:, None] * spread[None, :])
        params = np.concatenate([logits, means, sigmas], axis=1)
    else:
        raise ValueError(f"unknown family {family!r}")
    return PriorSet1D(family=family, params=params, components=components)


def init_prior_set_2d(m: int, n: int, max_abs_residual: float, components: int = 2) -> PriorSet2D:
    """2-D mixture grid: axis 1 varies the means, axis 2 the scales."""
    if m < 1 or n < 1:
        raise ValueError("grid dimensions must be >= 1")
    k = components
    offsets = np.linspace(0.0, max(float(max_abs_residual) / 2.0, 0.5), m)
    scales = _scale_ladder(n, max_abs_residual)
    spread = np.geomspace(0.7, 1.4, k) if k > 1 else np.ones(1)
    signs = np.array([1.0 if j % 2 else -1.0 for j in range(k)])
    params = np.empty((m, n, 3 * k))
    for a in range(m):
        means = signs * offsets[a]
        for b in range(n):
            params[a, b, :k] = 0.0
            params[a, b, k:2 * k] = means
            params[a, b, 2 * k:] = np.log(scales[b] * spread)
    return PriorSet2D(family="gmm", params=params, components=components)


# ---------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class TrainResult:
    prior_set: PriorSet1D | PriorSet2D
    predictor: dict
    indexes: IndexGrid
    skip_head: SkipHead | None
    hyper_logits: HyperLogits | None
    loss_trace: list[float]
    skip_trace: list[float]
    final_tau: float
    final_t: float


class _Adam:
    def __init__(self, shape, lr: float):
        self.lr = lr
        self.mean = np.zeros(shape)
        self.var = np.zeros(shape)
        self.steps = 0

    def step(self, grad: np.ndarray) -> np.ndarray:
        self.steps += 1
        self.mean = 0.9 * self.mean + 0.1 * grad
        self.var = 0.999 * self.var + 0.001 * grad * grad
        mhat = self.mean / (1.0 - 0.9 ** self.steps)
        vhat = self.var / (1.0 - 0.999 ** self.steps)
        return -self.lr * mhat / (np.sqrt(vhat) + 1e-8)


def _as_blocks(blocks) -> list[LatentBlock]:
    if isinstance(blocks, LatentBlock):
        return [blocks]
    out = list(blocks)
    if not out or not all(isinstance(b, LatentBlock) for b in out):
        raise ValueError("training needs one or more latent blocks")
    return out


def _family_tables(family: str, coords_rows: np.ndarray, uniques: np.ndarray, components: int):
    """Per-prior floored rates, rate gradients, and raw pmf over uniques.

    Returns (rates (A, U), grads (A, U, D), pmf (A, U)); gradients are zero
    wherever the probability sits on the 2^-32 floor, like the rate itself.
    """
    k = uniques.astype(np.float64)
    # divergent coordinate values overflow exp on purpose; the NaN loss they
    # produce is caught by the trainer, so the numpy warnings are noise
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if family == "gm":
            sigma = np.exp(coords_rows[:, :1])
            pmf, dls = gaussian_pmf_grads(k[None, :], sigma)
            grads = dls[:, :, None]
        elif family == "ggm":
            beta = np.clip(np.exp(coords_rows[:, :1]), _BETA_MIN, _BETA_MAX)
            alpha = np.exp(coords_rows[:, 1:2])
            pmf, dlb, dla = ggm_pmf_grads(k[None, :], beta, alpha)
            grads = np.stack([dlb, dla], axis=-1)
        else:
            kk = components
            weights = _softmax(coords_rows[:, :kk])[:, None, :]
            means = coords_rows[:, None, kk:2 * kk]
            sigmas = np.exp(coords_rows[:, None, 2 * kk:])
            pmf, dw, dm, ds = gmm_pmf_grads(k[None, :], weights, means, sigmas)
            grads = np.concatenate([dw, dm, ds], axis=-1)
        floored = pmf < PROB_FLOOR
        rates = -np.log2(np.maximum(pmf, PROB_FLOOR))
        scale = np.where(floored, 0.0, -1.0 / (np.maximum(pmf, PROB_FLOOR) * _LN2))
        return rates, grads * scale[:, :, None], pmf


def _window_weights(count: int, k: int, tau: float):
    """Integer-index Top-K selections and weights for assignments 1..count."""
    selections = np.empty((count, k), dtype=np.int64)
    weights = np.empty((count, k))
    for a in range(count):
        sel = top_k_indices(a + 1.0, count, k)
        selections[a] = sel - 1
        weights[a] = _softmax(-np.abs(a + 1.0 - sel) / tau)
    return selections, weights


def _assignment_matrix(count: int, k: int, tau: float) -> np.ndarray:
    """Row a: weights over all priors when the index sits exactly at a+1."""
    selections, weights = _window_weights(count, k, tau)
    full = np.zeros((count, count))
    np.put_along_axis(full, selections, weights, axis=1)
    return full


def train_priors(blocks, config: TrainConfig, schedule: AnnealSchedule | None = None,
                 z_block: LatentBlock | None = None) -> TrainResult:
    """Fit a prior set (and optionally skip mask and hyper logits) to data.

    Phase 1 alternates exact index reassignment (free-index mode) or a
    trainable log-linear index curve (calibration mode) with Adam steps on
    the prior coordinates; phase 2, when skip_epochs > 0, freezes the
    priors and trains the skip mask through the Gumbel relaxation.
    """
    block_list = _as_blocks(blocks)
    primary = block_list[0]
    symbols = np.concatenate([b.residuals.ravel() for b in block_list])
    features = np.concatenate([b.side_features.ravel() for b in block_list])
    if symbols.size == 0:
        raise ValueError("training stream is empty")
    if z_block is not None and z_block.channels < 1:
        raise ValueError("hyperlatent block needs at least one channel")

    flat = config.flat_count
    two_d = len(config.dims) == 2
    if config.k is not None and config.k > (config.dims[0] if not two_d else max(config.dims)):
        raise ValueError("k cannot exceed the per-dimension prior count")
    if schedule is None:
        schedule = AnnealSchedule.for_set_size(max(config.dims))

    if two_d:
        base = init_prior_set_2d(config.dims[0], config.dims[1],
                                 float(np.abs(symbols).max()), config.components)
        coords = base.params.reshape(flat, -1).copy()
    else:
        base = init_prior_set(config.family, config.dims[0],
                              float(np.abs(symbols).max()), config.components)
        coords = base.params.copy()

    uniques, inverse = np.unique(symbols, return_inverse=True)
    n = symbols.size
    calibration = config.predictor_mode == "calibration-curve"
    if calibration:
        if two_d:
            raise ValueError("the calibration-curve predictor drives 1-D sets")
        log_f = np.log(np.maximum(features, 1e-12))
        span = log_f.max() - log_f.min()
        slope = (config.dims[0] - 1) / span if span > 0 else 0.0
        intercept = 1.0 - slope * log_f.min() if span > 0 else (config.dims[0] + 1) / 2.0
        curve_opt = _Adam(2, config.lr)

    z_uniques = z_inverse = None
    logits = None
    if z_block is not None:
        z_syms = z_block.residuals.reshape(z_block.channels, -1)
        z_uniques, z_inverse = np.unique(z_syms, return_inverse=True)
        z_inverse = z_inverse.reshape(z_syms.shape)
        logits = np.zeros((z_block.channels, flat))
        logits_opt = _Adam(logits.shape, config.lr)

    opt = _Adam(coords.shape, config.lr)
    trace: list[float] = []
    assignment = np.zeros(n, dtype=np.int64)
    kk = flat if config.k is None else config.k
    if two_d:
        # per-dimension two-nearest selection, narrowed further by config.k
        kk_dim = min(2 if config.k is None else config.k, min(config.dims))

    for epoch in range(config.epochs):
        tau = schedule.tau(epoch)
        lr_scale = 0.01 if epoch >= 0.8 * config.epochs else (0.1 if epoch >= 0.5 * config.epochs else 1.0)
        opt.lr = config.lr * lr_scale
        rates, grads, _ = _family_tables(config.family, coords, uniques, config.components)

        if calibration:
            ivals = slope * log_f + intercept
            loss, dtheta, dslope, dintercept = _calibration_pass(
                rates, grads, inverse, ivals, log_f, config.dims[0], min(kk, config.dims[0]), tau)
        else:
            assignment = rates[:, inverse].argmin(axis=0)
            ivals = assignment.astype(np.float64) + 1.0
            if two_d:
                weight_rows = _grid_assignment_matrix(config.dims, kk_dim, tau)
            else:
                weight_rows = _assignment_matrix(flat, min(kk, flat), tau)
            counts = np.zeros((flat, len(uniques)))
            np.add.at(counts, (assignment, inverse), 1.0)
            loss = float(np.sum(counts * (weight_rows @ rates)))
            touched = weight_rows.T @ counts
            dtheta = np.einsum("mu,mud->md", touched, grads)

        if z_block is not None:
            # z has its own symbol table; the main-block rates don't apply
            z_rates, z_grads, _ = _family_tables(
                config.family, coords, z_uniques, config.components)
            z_loss, dlogits, z_dtheta = _hyper_pass(z_rates, z_grads, z_inverse, logits)
            loss += z_loss
            dtheta += z_dtheta
            logits += logits_opt.step(dlogits)

        if not math.isfinite(loss):
            raise TrainingDivergedError(f"loss diverged at epoch {epoch}", trace)
        trace.append(loss / n)
        coords += opt.step(dtheta)
        if calibration:
            delta = curve_opt.step(np.array([dslope, dintercept]))
            slope += delta[0]
            intercept += delta[1]

    final_tau = schedule.tau(config.epochs - 1)
    # rebuild the assignment under the final coordinates
    rates, _, _ = _family_tables(config.family, coords, uniques, config.components)
    if calibration:
        ivals = slope * log_f + intercept
        predictor = {"mode": "calibration-curve", "a": float(slope), "c": float(intercept)}
    else:
        assignment = rates[:, inverse].argmin(axis=0)
        ivals = assignment.astype(np.float64) + 1.0
        predictor = {"mode": "free-index"}

    if two_d:
        prior_set = PriorSet2D(family=config.family,
                               params=coords.reshape(config.dims + (-1,)),
                               components=config.components)
        rows, cols = np.divmod(assignment, config.dims[1])
        shaped = primary.shape if n == primary.n_elements else (1, 1, n)
        indexes = IndexGrid.from_continuous(
            (rows + 1.0).reshape(shaped), config.dims[0],
            second=(cols + 1.0).reshape(shaped), n=config.dims[1])
    else:
        prior_set = PriorSet1D(family=config.family, params=coords, components=config.components)
        shaped = primary.shape if n == primary.n_elements else (1, 1, n)
        indexes = IndexGrid.from_continuous(ivals.reshape(shaped), config.dims[0])

    hyper = HyperLogits(logits) if logits is not None else None

    skip_head = None
    skip_trace: list[float] = []
    final_t = schedule.t0
    if config.skip_epochs > 0:
        z_rates = None
        if config.mask_hyper and z_block is not None:
            z_rates, _, _ = _family_tables(config.family, coords, z_uniques,
                                           config.components)
        skip_head, skip_trace, final_t = _train_skip(
            symbols, rates, inverse, indexes, config, schedule, hyper, z_inverse,
            z_block, shaped, z_rates)

    return TrainResult(
        prior_set=prior_set,
        predictor=predictor,
        indexes=indexes,
        skip_head=skip_head,
        hyper_logits=hyper,
        loss_trace=trace,
        skip_trace=skip_trace,
        final_tau=final_tau,
        final_t=final_t,
    )


def _grid_assignment_matrix(dims: tuple, k_dim: int, tau: float) -> np.ndarray:
    """Flat-assignment weight rows for a 2-D grid: per-dimension windows."""
    m, n = dims
    sel_m, w_m = _window_weights(m, min(k_dim, m), tau)
    sel_n, w_n = _window_weights(n, min(k_dim, n), tau)
    flat = m * n
    full = np.zeros((flat, flat))
    for a in range(m):
        for b in range(n):
            row = a * n + b
            cells = (sel_m[a][:, None] * n + sel_n[b][None, :]).ravel()
            full[row, cells] = np.outer(w_m[a], w_n[b]).ravel()
    return full


def _calibration_pass(rates, grads, inverse, ivals, log_f, m, k, tau):
    """Loss and gradients when indexes come from the log-linear curve."""
    n = ivals.size
    candidates = np.arange(1, m + 1, dtype=np.float64)
    dist = np.abs(ivals[:, None] - candidates[None, :])
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    sel_dist = np.take_along_axis(dist, order, axis=1)
    weights = _softmax(-sel_dist / tau, axis=1)
    sel_rates = rates[order, inverse[:, None]]
    loss = float(np.sum(weights * sel_rates))

    touched = np.zeros_like(rates)
    np.add.at(touched, (order.ravel(), np.repeat(inverse, k)), weights.ravel())
    dtheta = np.einsum("mu,mud->md", touched, grads)

    signs = np.sign(ivals[:, None] - (order + 1.0))
    mean_sign = (weights * signs).sum(axis=1, keepdims=True)
    di = (weights * sel_rates * (mean_sign - signs)).sum(axis=1) / tau
    return loss, dtheta, float(np.dot(di, log_f)), float(di.sum())


def _hyper_pass(rates, grads, z_inverse, logits):
    """Hyperlatent rate over tabulated symbols: loss plus both gradients."""
    weights = _softmax(logits, axis=1)
    counts = np.zeros((logits.shape[0], rates.shape[1]))
    for c in range(logits.shape[0]):
        np.add.at(counts[c], z_inverse[c], 1.0)
    rate_sums = counts @ rates.T
    channel_rates = (weights * rate_sums).sum(axis=1)
    loss = float(channel_rates.sum())
    dlogits = weights * (rate_sums - channel_rates[:, None])
    touched = weights.T @ counts
    dtheta = np.einsum("mu,mud->md", touched, grads)
    return loss, dlogits, dtheta


def _train_skip(symbols, rates, inverse, indexes, config, schedule, hyper,
                z_inverse, z_block, shaped, z_rates=None):
    """Phase 2: priors frozen, per-element mask parameters trained."""
    idx = indexes.flat_table_indexes()
    element_rates = rates[idx, inverse]
    residual_sq = symbols.astype(np.float64) ** 2
    b = np.ones(symbols.size)
    opt = _Adam(b.shape, config.lr)
    rng_base = int(config.seed) * 1_000_003 + 1

    b_z = None
    if config.mask_hyper and z_block is not None:
        weights = _softmax(hyper.logits, axis=1)
        counts = np.zeros((z_block.channels, z_rates.shape[1]))
        for c in range(z_block.channels):
            np.add.at(counts[c], z_inverse[c], 1.0)
        channel_rates = (weights * (counts @ z_rates.T)).sum(axis=1)
        channel_energy = (z_block.residuals.reshape(z_block.channels, -1).astype(np.float64) ** 2).sum(axis=1)
        b_z = np.ones(z_block.channels)
        opt_z = _Adam(b_z.shape, config.lr)

    trace = []
    t = schedule.t0
    for epoch in range(config.skip_epochs):
        t = schedule.t(epoch)
        mask, dmask_db = gumbel_mask_grad(b, t, schedule.gumbel_coefficient, rng_base + epoch)
        loss = float(np.dot(mask, element_rates))
        loss += config.lambda_ * float(np.sum((1.0 - mask) ** 2 * residual_sq))
        dmask = element_rates - 2.0 * config.lambda_ * (1.0 - mask) * residual_sq
        if b_z is not None:
            mask_z, dmask_z_db = gumbel_mask_grad(b_z, t, schedule.gumbel_coefficient, rng_base - 1 - epoch)
            loss += float(np.dot(mask_z, channel_rates))
            loss += config.lambda_ * float(np.sum((1.0 - mask_z) ** 2 * channel_energy))
            dz = channel_rates - 2.0 * config.lambda_ * (1.0 - mask_z) * channel_energy
            b_z += opt_z.step(dz * dmask_z_db)
        if not math.isfinite(loss):
            raise TrainingDivergedError(f"skip loss diverged at epoch {epoch}", trace)
        trace.append(loss / symbols.size)
        b += opt.step(dmask * dmask_db)
    return SkipHead(b=b.reshape(shaped), b_z=b_z), trace, t


# ---------------------------------------------------------------------------
# Export


def export_tables(prior_set: PriorSet1D | PriorSet2D) -> CdfTableSet:
    """One quantized table per prior, row-major for grids; deterministic."""
    tables = [quantize_pmf(model, support_radius=_EXPORT_RADIUS) for model in prior_set.models()]
    meta = {"family": prior_set.family}
    if isinstance(prior_set, PriorSet2D):
        meta["dims"] = [prior_set.m, prior_set.n]
    else:
        meta["dims"] = [prior_set.m]
    return CdfTableSet(tables, meta=meta)
