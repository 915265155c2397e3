"""End-to-end coding strategies over shared entropy-coder plumbing.

Three backends cover the trade-off between rate and table cost: dynamic
builds one quantized table per element from its predicted parameters, lut
snaps parameters to a pre-built grid, and switch codes against a small
trained table set through a per-element index grid, optionally dropping
elements a skip mask marks as zero.

Conventions fixed here and used everywhere: rounding is half away from
zero; coding order is channel-major then row-major; the index grid and
skip mask are never transmitted (both ends derive them from shared side
information); skipped positions reconstruct as residual 0.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass

import numpy as np

from swpc.cdf_tables import (
    CdfTableSet,
    LutGrid,
    allocate_frequencies,
    lut_search_ggm,
    lut_search_gm,
    serialize_table_set,
)
from swpc.prob_models import (
    gaussian_integer_pmf,
    gaussian_support_radius,
    ggm_integer_pmf,
    ggm_support_radius,
    gmm_integer_pmf,
    gmm_support_radius,
)
from swpc.rans_coder import Bitstream, decode_elementwise, encode, encode_elementwise
from swpc.rans_coder import decode as rans_decode

__all__ = [
    "LatentBlock",
    "IndexGrid",
    "SkipMask",
    "CodingReport",
    "round_half_away",
    "harden_index",
    "harden_index_2d",
    "backend_dynamic",
    "backend_dynamic_decode",
    "backend_lut",
    "backend_lut_decode",
    "backend_switch",
    "backend_switch_decode",
    "prune_hyper_channels",
    "restore_pruned_channels",
]

_TAIL_MASS = 2.0 ** -20


def round_half_away(x):
    """Nearest integer with halves going away from zero, as float."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def harden_index(i, m: int):
    """Integer prior index in [1, m]: round(clip(i, 1, m))."""
    if m < 1:
        raise ValueError("m must be >= 1")
    out = round_half_away(np.clip(np.asarray(i, np.float64), 1.0, float(m))).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def harden_index_2d(i, j, m: int, n: int):
    return harden_index(i, m), harden_index(j, n)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class LatentBlock:
    """A (channels, height, width) grid of quantized residuals.

    means holds the per-element centers (zero in nonzero-center mode, where
    the offsets live inside the element distributions instead);
    side_features is the scalar per-element input to index prediction;
    truth_params optionally carries the exact per-element model parameters
    as arrays keyed by family.
    """

    residuals: np.ndarray
    means: np.ndarray
    side_features: np.ndarray
    truth_params: dict | None = None

    def __post_init__(self):
        res = _frozen(np.array(self.residuals, dtype=np.int64))
        means = _frozen(np.array(self.means, dtype=np.float64))
        feats = _frozen(np.array(self.side_features, dtype=np.float64))
        object.__setattr__(self, "residuals", res)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "side_features", feats)
        if res.ndim != 3:
            raise ValueError("blocks are (channels, height, width)")
        if means.shape != res.shape or feats.shape != res.shape:
            raise ValueError("means and side_features must match the residual shape")
        if not (np.isfinite(means).all() and np.isfinite(feats).all()):
            raise ValueError("means and side_features must be finite")
        if self.truth_params is not None:
            _check_truth(self.truth_params, res.shape)

    @property
    def shape(self) -> tuple:
        return self.residuals.shape

    @property
    def channels(self) -> int:
        return self.residuals.shape[0]

    @property
    def n_elements(self) -> int:
        return self.residuals.size

    def reconstruction(self) -> np.ndarray:
        """Decoded values: residual plus the stored center."""
        return self.residuals + self.means


def _check_truth(params: dict, shape: tuple):
    family = params.get("family")
    if family == "gm":
        needed = ("sigma",)
    elif family == "ggm":
        needed = ("beta", "alpha")
    elif family == "gmm":
        needed = ("weights", "means", "sigmas")
    else:
        raise ValueError(f"unknown truth family {family!r}")
    for key in needed:
        arr = np.asarray(params[key])
        if family == "gmm":
            if arr.ndim != len(shape) + 1 or arr.shape[:-1] != shape:
                raise ValueError("gmm truth arrays need the block shape plus a component axis")
        elif arr.shape != shape:
            raise ValueError(f"truth_params[{key!r}] does not match the block shape")


@dataclass(frozen=True)
class IndexGrid:
    """Per-element prior indexes: continuous predictions plus hardened ints.

    One axis for 1-D prior sets; a second (continuous2/hardened2, size n)
    for 2-D sets, where the flat table index is row-major (i-1) * n + (j-1).
    """

    continuous: np.ndarray
    hardened: np.ndarray
    m: int
    continuous2: np.ndarray | None = None
    hardened2: np.ndarray | None = None
    n: int | None = None

    def __post_init__(self):
        cont = _frozen(np.array(self.continuous, dtype=np.float64))
        hard = _frozen(np.array(self.hardened, dtype=np.int64))
        object.__setattr__(self, "continuous", cont)
        object.__setattr__(self, "hardened", hard)
        if hard.shape != cont.shape:
            raise ValueError("hardened shape must match continuous")
        if not np.array_equal(hard, harden_index(cont, self.m)):
            raise ValueError("hardened must equal round(clip(continuous, 1, m))")
        if (self.continuous2 is None) != (self.hardened2 is None) or (
            (self.continuous2 is None) != (self.n is None)
        ):
            raise ValueError("2-D grids need continuous2, hardened2, and n together")
        if self.continuous2 is not None:
            cont2 = _frozen(np.array(self.continuous2, dtype=np.float64))
            hard2 = _frozen(np.array(self.hardened2, dtype=np.int64))
            object.__setattr__(self, "continuous2", cont2)
            object.__setattr__(self, "hardened2", hard2)
            if cont2.shape != cont.shape or hard2.shape != cont.shape:
                raise ValueError("second-axis tensors must match the first axis shape")
            if not np.array_equal(hard2, harden_index(cont2, self.n)):
                raise ValueError("hardened2 must equal round(clip(continuous2, 1, n))")

    @classmethod
    def from_continuous(cls, continuous, m: int, second=None, n: int | None = None) -> "IndexGrid":
        cont = np.asarray(continuous, dtype=np.float64)
        if second is None:
            return cls(cont, harden_index(cont, m), m)
        cont2 = np.asarray(second, dtype=np.float64)
        return cls(cont, harden_index(cont, m), m, cont2, harden_index(cont2, n), n)

    @property
    def is_2d(self) -> bool:
        return self.continuous2 is not None

    @property
    def table_count(self) -> int:
        return self.m * (self.n if self.is_2d else 1)

    def flat_table_indexes(self) -> np.ndarray:
        """Zero-based table index per element, in coding order."""
        if self.is_2d:
            return ((self.hardened - 1) * self.n + (self.hardened2 - 1)).ravel()
        return (self.hardened - 1).ravel()


@dataclass(frozen=True)
class SkipMask:
    """Per-element keep/skip decision: soft scores and the hard round."""

    soft: np.ndarray
    hard: np.ndarray

    def __post_init__(self):
        soft = _frozen(np.array(self.soft, dtype=np.float64))
        hard = _frozen(np.array(self.hard, dtype=np.int64))
        object.__setattr__(self, "soft", soft)
        object.__setattr__(self, "hard", hard)
        if hard.shape != soft.shape:
            raise ValueError("hard shape must match soft")
        if not np.array_equal(hard, round_half_away(np.clip(soft, 0.0, 1.0)).astype(np.int64)):
            raise ValueError("hard must equal round(clip(soft, 0, 1))")

    @classmethod
    def from_soft(cls, soft) -> "SkipMask":
        soft = np.asarray(soft, dtype=np.float64)
        return cls(soft, round_half_away(np.clip(soft, 0.0, 1.0)).astype(np.int64))

    @classmethod
    def keep_all(cls, shape) -> "SkipMask":
        return cls.from_soft(np.ones(shape))

    @property
    def skip_ratio(self) -> float:
        return float((self.hard == 0).mean()) if self.hard.size else 0.0


@dataclass(frozen=True)
class CodingReport:
    """What one encode (plus optionally one decode) cost.

    bits_per_symbol is total_bits over all block elements, coded or
    skipped, so skip savings show up in it.
    """

    total_bits: int
    bits_per_symbol: float
    table_count: int
    table_bytes: int
    encode_nanos: int
    decode_nanos: int
    skip_ratio: float
    symbols_coded: int
    symbols_skipped: int

    def __post_init__(self):
        total = self.symbols_coded + self.symbols_skipped
        if total:
            expect = self.symbols_skipped / total
            if abs(self.skip_ratio - expect) > 1e-12:
                raise ValueError("skip_ratio must equal skipped / total")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CodingReport":
        return cls(**json.loads(text))

    def with_decode_nanos(self, nanos: int) -> "CodingReport":
        return dataclasses.replace(self, decode_nanos=int(nanos))


def _report(stream: Bitstream, n_total: int, n_coded: int, table_count: int,
            table_bytes: int, encode_nanos: int) -> CodingReport:
    skipped = n_total - n_coded
    return CodingReport(
        total_bits=stream.bit_length,
        bits_per_symbol=stream.bit_length / n_total if n_total else 0.0,
        table_count=table_count,
        table_bytes=int(table_bytes),
        encode_nanos=int(encode_nanos),
        decode_nanos=0,
        skip_ratio=skipped / n_total if n_total else 0.0,
        symbols_coded=n_coded,
        symbols_skipped=skipped,
    )


# ---------------------------------------------------------------------------
# Dynamic backend: one table per element


def _flat_truth(truth: dict) -> dict:
    family = truth["family"]
    out = {"family": family}
    keys = {"gm": ("sigma",), "ggm": ("beta", "alpha"), "gmm": ("weights", "means", "sigmas")}
    for key in keys[family]:
        arr = np.asarray(truth[key], dtype=np.float64)
        out[key] = arr.reshape(-1, arr.shape[-1]) if family == "gmm" else arr.ravel()
    return out


def _dynamic_radii(truth: dict, radius: int | None, tail_mass: float) -> np.ndarray:
    family = truth["family"]
    if radius is not None:
        if not 1 <= radius <= 127:
            raise ValueError("radius override must be in [1, 127]")
        n = len(truth["sigma"]) if family == "gm" else len(truth[("beta" if family == "ggm" else "means")])
        return np.full(n, radius, dtype=np.int64)
    if family == "gm":
        return np.atleast_1d(gaussian_support_radius(truth["sigma"], tail_mass))
    if family == "ggm":
        return np.atleast_1d(ggm_support_radius(truth["beta"], truth["alpha"], tail_mass))
    return np.atleast_1d(gmm_support_radius(truth["means"], truth["sigmas"], tail_mass))


def _bin_masses(truth: dict, ids: np.ndarray, ks: np.ndarray) -> np.ndarray:
    family = truth["family"]
    if family == "gm":
        return gaussian_integer_pmf(ks[None, :], truth["sigma"][ids][:, None])
    if family == "ggm":
        return ggm_integer_pmf(ks[None, :], truth["beta"][ids][:, None], truth["alpha"][ids][:, None])
    return gmm_integer_pmf(
        ks[None, :],
        truth["weights"][ids][:, None, :],
        truth["means"][ids][:, None, :],
        truth["sigmas"][ids][:, None, :],
    )


def _dynamic_chunk_builder(truth: dict, radii: np.ndarray):
    """Chunk-table callback building per-element tables bucketed by radius."""

    def chunk(lo, hi):
        r = radii[lo:hi]
        lengths = 2 * r + 3  # cumulative entries per table
        rows = np.concatenate([[0], np.cumsum(lengths)])[:-1]
        flat = np.empty(int(lengths.sum()), dtype=np.int64)
        for radius in np.unique(r):
            ids = np.nonzero(r == radius)[0]
            ks = np.arange(-radius, radius + 1)
            masses = _bin_masses(truth, ids + lo, ks)
            tail = np.maximum(0.0, 1.0 - masses.sum(axis=-1, keepdims=True))
            freqs = allocate_frequencies(np.concatenate([masses, tail], axis=-1))
            cums = np.concatenate(
                [np.zeros((len(ids), 1), np.int64), np.cumsum(freqs, axis=-1)], axis=-1
            )
            flat[rows[ids][:, None] + np.arange(2 * radius + 3)] = cums
        return flat, None, rows, -r, 2 * r + 1

    return chunk


def backend_dynamic(block: LatentBlock, *, radius: int | None = None,
                    tail_mass: float = _TAIL_MASS, chunk_size: int = 16384):
    """Build a fresh table per element from its true parameters and code.

    Plays the role of an entropy model whose predictions are exact; the
    per-element table construction is the cost being measured.
    """
    if block.truth_params is None:
        raise ValueError("backend_dynamic needs truth_params")
    t0 = time.perf_counter_ns()
    truth = _flat_truth(block.truth_params)
    radii = _dynamic_radii(truth, radius, tail_mass)
    stream = encode_elementwise(
        block.residuals.ravel(), _dynamic_chunk_builder(truth, radii), chunk_size
    )
    encode_nanos = time.perf_counter_ns() - t0
    n = block.n_elements
    table_bytes = int(np.sum(2 * radii + 2) * 2)  # 16 bits per stored entry
    return stream, _report(stream, n, n, table_count=n, table_bytes=table_bytes,
                           encode_nanos=encode_nanos)


def backend_dynamic_decode(stream: Bitstream, truth_params: dict, shape, *,
                           radius: int | None = None, tail_mass: float = _TAIL_MASS,
                           chunk_size: int = 16384):
    """Rebuild the same per-element tables and invert the stream."""
    t0 = time.perf_counter_ns()
    truth = _flat_truth(truth_params)
    radii = _dynamic_radii(truth, radius, tail_mass)
    flat = decode_elementwise(stream, _dynamic_chunk_builder(truth, radii), chunk_size)
    return flat.reshape(shape), time.perf_counter_ns() - t0


# ---------------------------------------------------------------------------
# LUT backend: nearest grid sample per element


def _lut_indexes(truth: dict, grid: LutGrid) -> np.ndarray:
    family = truth["family"]
    if family != grid.family:
        raise ValueError(f"truth family {family!r} does not match grid family {grid.family!r}")
    if family == "gm":
        return lut_search_gm(grid, truth["sigma"])
    return lut_search_ggm(grid, truth["beta"], truth["alpha"])


def backend_lut(block: LatentBlock, grid: LutGrid, table_set: CdfTableSet):
    """Snap each element's parameters to the nearest grid table and code."""
    if block.truth_params is None:
        raise ValueError("backend_lut needs truth_params")
    if len(table_set) != grid.n_tables:
        raise ValueError("table set size does not match the grid")
    t0 = time.perf_counter_ns()
    idx = _lut_indexes(_flat_truth(block.truth_params), grid)
    stream = encode(block.residuals.ravel(), idx, table_set)
    encode_nanos = time.perf_counter_ns() - t0
    n = block.n_elements
    return stream, _report(stream, n, n, table_count=len(table_set),
                           table_bytes=len(serialize_table_set(table_set)),
                           encode_nanos=encode_nanos)


def backend_lut_decode(stream: Bitstream, truth_params: dict, grid: LutGrid,
                       table_set: CdfTableSet, shape):
    t0 = time.perf_counter_ns()
    idx = _lut_indexes(_flat_truth(truth_params), grid)
    flat = rans_decode(stream, idx, table_set)
    return flat.reshape(shape), time.perf_counter_ns() - t0


# ---------------------------------------------------------------------------
# Switch backend: trained table set through an index grid, optional skip


def _switch_check(indexes: IndexGrid, shape, table_set: CdfTableSet):
    if indexes.continuous.shape != shape:
        raise ValueError("index grid shape must match the block")
    if indexes.table_count != len(table_set):
        raise ValueError("index grid table count does not match the table set")


def backend_switch(block: LatentBlock, indexes: IndexGrid,
                   mask: SkipMask | None, table_set: CdfTableSet):
    """Code against a small trained set; skip elements the mask zeroes."""
    _switch_check(indexes, block.shape, table_set)
    if mask is not None and mask.hard.shape != block.shape:
        raise ValueError("mask shape must match the block")
    t0 = time.perf_counter_ns()
    idx = indexes.flat_table_indexes()
    symbols = block.residuals.ravel()
    if mask is not None:
        kept = mask.hard.ravel() == 1
        symbols = symbols[kept]
        idx = idx[kept]
    stream = encode(symbols, idx, table_set)
    encode_nanos = time.perf_counter_ns() - t0
    return stream, _report(stream, block.n_elements, len(symbols),
                           table_count=len(table_set),
                           table_bytes=len(serialize_table_set(table_set)),
                           encode_nanos=encode_nanos)


def backend_switch_decode(stream: Bitstream, indexes: IndexGrid,
                          mask: SkipMask | None, table_set: CdfTableSet, shape):
    """Invert backend_switch; skipped positions come back as residual 0."""
    _switch_check(indexes, tuple(shape), table_set)
    t0 = time.perf_counter_ns()
    idx = indexes.flat_table_indexes()
    out = np.zeros(int(np.prod(shape)), dtype=np.int64)
    if mask is not None:
        kept = mask.hard.ravel() == 1
        out[kept] = rans_decode(stream, idx[kept], table_set)
    else:
        out[:] = rans_decode(stream, idx, table_set)
    return out.reshape(shape), time.perf_counter_ns() - t0


# ---------------------------------------------------------------------------
# Hyperlatent channel pruning


def _sliced_truth(truth: dict | None, keep: np.ndarray) -> dict | None:
    if truth is None:
        return None
    out = {"family": truth["family"]}
    for key, value in truth.items():
        if key != "family":
            out[key] = np.asarray(value)[keep]
    return out


def prune_hyper_channels(block: LatentBlock, channel_mask) -> LatentBlock:
    """Drop channels whose mask entry is 0, preserving order."""
    mask = np.asarray(channel_mask).astype(bool)
    if mask.shape != (block.channels,):
        raise ValueError("channel_mask length must equal the channel count")
    keep = np.nonzero(mask)[0]
    return LatentBlock(
        residuals=block.residuals[keep],
        means=block.means[keep],
        side_features=block.side_features[keep],
        truth_params=_sliced_truth(block.truth_params, keep),
    )


def restore_pruned_channels(block: LatentBlock, channel_mask) -> LatentBlock:
    """Undo pruning: pruned channels come back all-zero."""
    mask = np.asarray(channel_mask).astype(bool)
    if int(mask.sum()) != block.channels:
        raise ValueError("channel_mask keep-count must equal the pruned channel count")
    shape = (len(mask),) + block.shape[1:]
    residuals = np.zeros(shape, dtype=np.int64)
    means = np.zeros(shape, dtype=np.float64)
    feats = np.zeros(shape, dtype=np.float64)
    keep = np.nonzero(mask)[0]
    residuals[keep] = block.residuals
    means[keep] = block.means
    feats[keep] = block.side_features
    return LatentBlock(residuals=residuals, means=means, side_features=feats)
