"""Quantized CDF tables, parameter-grid LUTs, and their wire format.

A table covers the integer symbols [offset, offset + n_coded - 1] plus one
tail interval used as an escape for anything outside.  Frequencies are
integers summing to 2^16, assigned by largest remainder with a floor of one
count per interval (ties to the smaller symbol, tail last), so the table's
distribution tracks the model's bin masses as closely as the integer grid
allows.

The serialized form is little-endian: magic "SWPC", version u16, family tag
u8 (0=gm, 1=ggm, 2=gmm, 3=learned), table count u32, then per table an i32
offset, a u16 entry count, and the cumulative entries as u32 each (the
leading zero is implicit).  A length-prefixed UTF-8 JSON blob with grid axes
or training provenance may follow.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from swpc.prob_models import (
    ProbModel,
    gaussian_integer_pmf,
    ggm_integer_pmf,
    gmm_integer_pmf,
)

__all__ = [
    "TOTAL_FREQ",
    "MAX_RADIUS",
    "CapacityError",
    "ParseError",
    "MagicError",
    "VersionError",
    "TruncatedError",
    "TableInvariantError",
    "QuantizedCdfTable",
    "CdfTableSet",
    "LutGrid",
    "quantize_pmf",
    "allocate_frequencies",
    "tables_from_masses",
    "build_lut_gm",
    "build_lut_ggm",
    "lut_search",
    "lut_search_gm",
    "lut_search_ggm",
    "serialize_table_set",
    "deserialize_table_set",
    "table_set_16bit_bytes",
    "GM_SIGMA_RANGE",
    "GGM_BETA_RANGE",
    "GGM_ALPHA_RANGE",
]

TOTAL_FREQ = 1 << 16
MAX_RADIUS = 127  # 255 coded symbols + tail fill the 256-interval cap

_MAGIC = b"SWPC"
_VERSION = 1
_FAMILY_TAGS = {"gm": 0, "ggm": 1, "gmm": 2, "learned": 3}
_TAG_FAMILIES = {v: k for k, v in _FAMILY_TAGS.items()}

# Grid endpoints for the LUT builders.
GM_SIGMA_RANGE = (0.11, 60.0)
GGM_BETA_RANGE = (0.5, 3.0)
GGM_ALPHA_RANGE = (0.01, 60.0)


class CapacityError(ValueError):
    """Requested support does not fit the 256-interval table cap."""


class ParseError(ValueError):
    """Serialized table set is malformed."""


class MagicError(ParseError):
    pass


class VersionError(ParseError):
    pass


class TruncatedError(ParseError):
    pass


class TableInvariantError(ParseError):
    pass


# ---------------------------------------------------------------------------
# Tables


@dataclass(frozen=True, eq=False)
class QuantizedCdfTable:
    """Integer CDF over [offset, offset + n_coded - 1] plus a tail escape.

    ``cumulative`` starts at 0, is strictly increasing, and ends at exactly
    2^16; interval j has frequency cumulative[j+1] - cumulative[j].  The last
    interval is the tail.
    """

    offset: int
    cumulative: np.ndarray

    def __post_init__(self):
        cum = np.array(self.cumulative, dtype=np.int64)
        cum.flags.writeable = False
        object.__setattr__(self, "cumulative", cum)
        object.__setattr__(self, "offset", int(self.offset))
        if cum.ndim != 1 or len(cum) < 3:
            raise TableInvariantError("cumulative needs at least a coded interval and a tail")
        if len(cum) > 257:
            raise TableInvariantError(f"{len(cum)} cumulative entries exceed the 257 cap")
        if cum[0] != 0 or cum[-1] != TOTAL_FREQ:
            raise TableInvariantError("cumulative must run from 0 to 2^16")
        if np.any(np.diff(cum) <= 0):
            raise TableInvariantError("cumulative must be strictly increasing")

    @property
    def n_intervals(self) -> int:
        return len(self.cumulative) - 1

    @property
    def n_coded(self) -> int:
        return len(self.cumulative) - 2

    @property
    def lo(self) -> int:
        return self.offset

    @property
    def hi(self) -> int:
        return self.offset + self.n_coded - 1

    @property
    def tail_slot(self) -> int:
        return self.n_coded

    def slot_for(self, symbol: int) -> int:
        j = symbol - self.offset
        if 0 <= j < self.n_coded:
            return j
        return self.tail_slot

    def freq(self, slot: int) -> int:
        return int(self.cumulative[slot + 1] - self.cumulative[slot])

    def start(self, slot: int) -> int:
        return int(self.cumulative[slot])

    def implied_bits(self, slot: int) -> float:
        return -float(np.log2(self.freq(slot) / TOTAL_FREQ))

    def __eq__(self, other):
        if not isinstance(other, QuantizedCdfTable):
            return NotImplemented
        return self.offset == other.offset and np.array_equal(self.cumulative, other.cumulative)


class CdfTableSet:
    """An ordered collection of tables plus JSON-able metadata.

    meta["family"] is one of gm/ggm/gmm/learned; grid axes or training
    provenance ride along in the remaining keys.
    """

    def __init__(self, tables, meta: dict | None = None):
        self.tables = tuple(tables)
        self.meta = dict(meta or {})
        self.meta.setdefault("family", "learned")
        if self.meta["family"] not in _FAMILY_TAGS:
            raise ValueError(f"unknown family {self.meta['family']!r}")
        self._stacked = None

    def __len__(self) -> int:
        return len(self.tables)

    def __getitem__(self, i: int) -> QuantizedCdfTable:
        return self.tables[i]

    def __iter__(self):
        return iter(self.tables)

    def __eq__(self, other):
        if not isinstance(other, CdfTableSet):
            return NotImplemented
        return self.meta == other.meta and len(self) == len(other) and all(
            a == b for a, b in zip(self.tables, other.tables)
        )

    def stacked(self):
        """(offsets, n_coded, cumulative matrix) when all tables share a length."""
        if self._stacked is None:
            lengths = {len(t.cumulative) for t in self.tables}
            if len(lengths) != 1:
                raise ValueError("table lengths differ; no stacked view")
            self._stacked = (
                np.array([t.offset for t in self.tables], dtype=np.int64),
                np.array([t.n_coded for t in self.tables], dtype=np.int64),
                np.stack([t.cumulative for t in self.tables]),
            )
        return self._stacked


def table_set_16bit_bytes(table_set: CdfTableSet) -> int:
    """Storage at 16 bits per stored cumulative entry (leading zero implicit)."""
    return sum(t.n_intervals * 2 for t in table_set)


# ---------------------------------------------------------------------------
# Quantization


def _ranks_of(keys: np.ndarray, descending: bool) -> np.ndarray:
    order = np.argsort(-keys if descending else keys, axis=-1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(
        ranks, order, np.broadcast_to(np.arange(keys.shape[-1]), order.shape).copy(), axis=-1
    )
    return ranks


def allocate_frequencies(masses: np.ndarray) -> np.ndarray:
    """Round rows of nonnegative masses to integer frequencies summing 2^16.

    Each interval gets the floor of its proportional share of 2^16, raised
    to 1 where that floor is zero.  Any counts still owed go to the largest
    fractional remainders (ties toward the earlier position); counts
    over-committed by the raise-to-1 step are taken back from the smallest
    remainders among intervals that can spare them.  Rows are independent;
    a zero row falls back to uniform.
    """
    masses = np.asarray(masses, dtype=np.float64)
    squeeze = masses.ndim == 1
    if squeeze:
        masses = masses[None, :]
    n_int = masses.shape[-1]
    if n_int > 256:
        raise CapacityError(f"{n_int} intervals exceed the 256 cap")
    total = masses.sum(axis=-1, keepdims=True)
    norm = np.where(total > 0, masses / np.where(total > 0, total, 1.0), 1.0 / n_int)
    raw = TOTAL_FREQ * norm
    base = np.floor(raw).astype(np.int64)
    frac = raw - base
    bumped = base < 1
    freqs = np.maximum(base, 1)
    deficit = TOTAL_FREQ - freqs.sum(axis=-1)
    give = np.maximum(deficit, 0)
    if np.any(give > 0):
        # bumped intervals are already over target; they sort last
        ranks = _ranks_of(np.where(bumped, -1.0, frac), descending=True)
        freqs += (ranks < give[:, None]) & ~bumped
    owe = np.maximum(-deficit, 0)
    if np.any(owe > 0):
        # take back round-robin from smallest remainders, 1 per interval per
        # round, never below 1 count: rounds solved in closed form
        cap = freqs - 1
        lo = np.zeros(len(owe), np.int64)
        hi = np.full(len(owe), TOTAL_FREQ, np.int64)
        while np.any(lo < hi):
            mid = (lo + hi + 1) >> 1
            fits = np.minimum(cap, mid[:, None]).sum(axis=-1) <= owe
            lo = np.where(fits, mid, lo)
            hi = np.where(fits, hi, mid - 1)
        take = np.minimum(cap, lo[:, None])
        rem = owe - take.sum(axis=-1)
        part = cap > lo[:, None]
        ranks = _ranks_of(np.where(part, frac, np.inf), descending=False)
        take += (ranks < rem[:, None]) & part
        freqs -= take
    return freqs[0] if squeeze else freqs


def _model_masses(model: ProbModel, radius: int) -> np.ndarray:
    ks = np.arange(-radius, radius + 1)
    p = model.params
    if model.family == "gm":
        return gaussian_integer_pmf(ks, p.sigma)
    if model.family == "ggm":
        return ggm_integer_pmf(ks, p.beta, p.alpha)
    return gmm_integer_pmf(ks, p.weights, p.means, p.sigmas)


def quantize_pmf(model: ProbModel, support_radius: int = MAX_RADIUS) -> QuantizedCdfTable:
    """Build the integer table for a model over [-radius, radius] plus tail."""
    radius = int(support_radius)
    if radius > MAX_RADIUS:
        raise CapacityError(f"radius {radius} needs {2 * radius + 1} coded symbols; cap is 255")
    if radius < 1:
        raise ValueError("support_radius must be >= 1")
    masses = _model_masses(model, radius)
    tail = max(0.0, 1.0 - float(masses.sum()))
    freqs = allocate_frequencies(np.concatenate([masses, [tail]]))
    cumulative = np.concatenate([[0], np.cumsum(freqs)])
    return QuantizedCdfTable(offset=-radius, cumulative=cumulative)


def tables_from_masses(masses: np.ndarray, radius: int) -> list[QuantizedCdfTable]:
    """Vectorized quantize_pmf: one table per row of coded-bin masses."""
    masses = np.asarray(masses, dtype=np.float64)
    tail = np.maximum(0.0, 1.0 - masses.sum(axis=-1, keepdims=True))
    freqs = allocate_frequencies(np.concatenate([masses, tail], axis=-1))
    cums = np.concatenate([np.zeros((len(freqs), 1), np.int64), np.cumsum(freqs, axis=-1)], axis=-1)
    return [QuantizedCdfTable(offset=-radius, cumulative=c) for c in cums]


# ---------------------------------------------------------------------------
# Parameter-grid LUTs


@dataclass(frozen=True)
class LutGrid:
    """Sample axes of a LUT set; table order is row-major over the axes.

    gm: one log-spaced sigma axis.  ggm: a linear beta axis (major) and a
    log-spaced alpha axis (minor), index = beta_idx * len(alphas) + alpha_idx.
    """

    family: str
    sigmas: np.ndarray | None = None
    betas: np.ndarray | None = None
    alphas: np.ndarray | None = None

    def __post_init__(self):
        if self.family == "gm":
            axes = {"sigma": self.sigmas}
        elif self.family == "ggm":
            axes = {"beta": self.betas, "alpha": self.alphas}
        else:
            raise ValueError(f"no LUT grid for family {self.family!r}")
        for name, samples in axes.items():
            if samples is None or len(samples) < 2:
                raise ValueError(f"{self.family} grid needs >= 2 {name} samples")
            if np.any(np.diff(samples) <= 0):
                raise ValueError(f"{name} samples must be sorted strictly ascending")

    @property
    def n_tables(self) -> int:
        if self.family == "gm":
            return len(self.sigmas)
        return len(self.betas) * len(self.alphas)

    def model_for(self, index: int) -> ProbModel:
        if self.family == "gm":
            return ProbModel.gaussian(float(self.sigmas[index]))
        bi, ai = divmod(index, len(self.alphas))
        return ProbModel.generalized_gaussian(float(self.betas[bi]), float(self.alphas[ai]))

    def to_meta(self) -> dict:
        if self.family == "gm":
            return {"kind": "lut", "sigmas": [float(s) for s in self.sigmas]}
        return {
            "kind": "lut",
            "betas": [float(b) for b in self.betas],
            "alphas": [float(a) for a in self.alphas],
        }

    @classmethod
    def from_meta(cls, family: str, meta: dict) -> "LutGrid":
        if family == "gm":
            return cls("gm", sigmas=np.asarray(meta["sigmas"], np.float64))
        return cls(
            "ggm",
            betas=np.asarray(meta["betas"], np.float64),
            alphas=np.asarray(meta["alphas"], np.float64),
        )


def _log_samples(lo: float, hi: float, count: int) -> np.ndarray:
    s = np.exp(np.linspace(np.log(lo), np.log(hi), count))
    s[0] = lo
    s[-1] = hi
    return s


def build_lut_gm(count: int) -> tuple[CdfTableSet, LutGrid]:
    """Log-spaced sigma grid over [0.11, 60]; one full-width table each."""
    if count < 2:
        raise ValueError("count must be >= 2")
    sigmas = _log_samples(*GM_SIGMA_RANGE, count)
    ks = np.arange(-MAX_RADIUS, MAX_RADIUS + 1)
    masses = gaussian_integer_pmf(ks[None, :], sigmas[:, None])
    tables = tables_from_masses(masses, MAX_RADIUS)
    grid = LutGrid("gm", sigmas=sigmas)
    return CdfTableSet(tables, {"family": "gm", **grid.to_meta()}), grid


def build_lut_ggm(beta_count: int, alpha_count: int) -> tuple[CdfTableSet, LutGrid]:
    """Linear beta grid on [0.5, 3] x log alpha grid on [0.01, 60], row-major."""
    if beta_count < 2 or alpha_count < 2:
        raise ValueError("counts must be >= 2")
    betas = np.linspace(*GGM_BETA_RANGE, beta_count)
    alphas = _log_samples(*GGM_ALPHA_RANGE, alpha_count)
    bb = np.repeat(betas, alpha_count)
    aa = np.tile(alphas, beta_count)
    ks = np.arange(-MAX_RADIUS, MAX_RADIUS + 1)
    masses = ggm_integer_pmf(ks[None, :], bb[:, None], aa[:, None])
    tables = tables_from_masses(masses, MAX_RADIUS)
    grid = LutGrid("ggm", betas=betas, alphas=alphas)
    return CdfTableSet(tables, {"family": "ggm", **grid.to_meta()}), grid


def _nearest_indexes(samples_metric: np.ndarray, values_metric: np.ndarray) -> np.ndarray:
    # nearest sample with ties to the smaller index: insertion into midpoints
    mids = 0.5 * (samples_metric[:-1] + samples_metric[1:])
    return np.searchsorted(mids, values_metric, side="left")


def lut_search_gm(grid: LutGrid, sigmas) -> np.ndarray:
    """Nearest sigma sample in log space; out-of-range clamps to the edge."""
    v = np.log(np.asarray(sigmas, np.float64))
    return _nearest_indexes(np.log(grid.sigmas), v)


def lut_search_ggm(grid: LutGrid, betas, alphas) -> np.ndarray:
    """Per-dimension nearest sample: beta linear, alpha in log space."""
    bi = _nearest_indexes(np.asarray(grid.betas, np.float64), np.asarray(betas, np.float64))
    ai = _nearest_indexes(np.log(grid.alphas), np.log(np.asarray(alphas, np.float64)))
    return bi * len(grid.alphas) + ai


def lut_search(grid: LutGrid, model) -> int:
    """Table index whose grid sample is nearest to the given parameters.

    Accepts a ProbModel of the grid's family or a bare parameter tuple
    ((sigma,) for gm, (beta, alpha) for ggm).
    """
    if isinstance(model, ProbModel):
        if grid.family != model.family:
            raise ValueError(f"grid family {grid.family!r} does not match model family {model.family!r}")
        params = (model.params.sigma,) if grid.family == "gm" else (model.params.beta, model.params.alpha)
    else:
        params = tuple(np.atleast_1d(np.asarray(model, np.float64)))
    if grid.family == "gm":
        (sigma,) = params
        return int(lut_search_gm(grid, sigma))
    beta, alpha = params
    return int(lut_search_ggm(grid, beta, alpha))


# ---------------------------------------------------------------------------
# Wire format


def serialize_table_set(table_set: CdfTableSet) -> bytes:
    out = [_MAGIC, struct.pack("<HBI", _VERSION, _FAMILY_TAGS[table_set.meta["family"]], len(table_set))]
    for t in table_set:
        stored = t.cumulative[1:]
        out.append(struct.pack("<iH", t.offset, len(stored)))
        out.append(stored.astype("<u4").tobytes())
    extra = {k: v for k, v in table_set.meta.items() if k != "family"}
    if extra:
        blob = json.dumps(extra, sort_keys=True, separators=(",", ":")).encode("utf-8")
        out.append(struct.pack("<I", len(blob)))
        out.append(blob)
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(f"wanted {n} bytes at {self.pos}, have {len(self.data) - self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    @property
    def remaining(self) -> int:
        return len(self.data) - self.pos


def deserialize_table_set(data: bytes) -> CdfTableSet:
    r = _Reader(data)
    if r.take(4) != _MAGIC:
        raise MagicError("bad magic; not a table-set payload")
    version, family_tag, count = struct.unpack("<HBI", r.take(7))
    if version != _VERSION:
        raise VersionError(f"unsupported version {version}")
    if family_tag not in _TAG_FAMILIES:
        raise ParseError(f"unknown family tag {family_tag}")
    tables = []
    for _ in range(count):
        offset, n_entries = struct.unpack("<iH", r.take(6))
        stored = np.frombuffer(r.take(4 * n_entries), dtype="<u4").astype(np.int64)
        cumulative = np.concatenate([[0], stored])
        try:
            tables.append(QuantizedCdfTable(offset=offset, cumulative=cumulative))
        except TableInvariantError:
            raise
        except ValueError as exc:  # pragma: no cover - defensive
            raise TableInvariantError(str(exc)) from exc
    meta = {"family": _TAG_FAMILIES[family_tag]}
    if r.remaining:
        (blob_len,) = struct.unpack("<I", r.take(4))
        blob = r.take(blob_len)
        try:
            meta.update(json.loads(blob.decode("utf-8")))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad metadata blob: {exc}") from exc
    if r.remaining:
        raise TruncatedError(f"{r.remaining} trailing bytes after metadata")
    return CdfTableSet(tables, meta)
