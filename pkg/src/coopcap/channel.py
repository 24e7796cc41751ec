"""Two-sender erasure channels defined by random binary matrices.

A channel on ``m`` bits per sender is a ``2^m x 2^m`` matrix of bits. Symbols
are 1-based: on input pair ``(x1, x2)`` the output is the pair itself when
entry ``(x1, x2)`` is 0 (a *good* entry) and the erased pair ``(E, E)`` when
it is 1 (a *bad* entry).

Matrices are drawn with i.i.d. Bernoulli(p) bad entries and accepted when
every aligned block of ``2^g`` consecutive entries in every row and in every
column contains at least one good entry. Block ``k`` of a line is the index
set ``{k * 2^g + l : l = 1..2^g}`` for ``k = 0..2^(m-g)-1``. This acceptance
check is exhaustive. A second, statistical property - sampled ``f x f``
submatrices should be more than ``1 - epsilon`` bad - is estimated and
reported, never enforced.

Bits are stored packed (eight per byte, big-endian within a byte), so a full
matrix costs ``2^(2m) / 8`` bytes. A configurable cap on ``m`` (default 14,
override with the ``COOPCAP_MAX_M`` environment variable) guards against
accidental huge allocations.

File format MACCF/1: a single ASCII header line

    MACCF 1 m=<int> p=<decimal> eps=<decimal> f=<int> g=<int> seed=<uint>

followed either by ``2^m`` text lines of ``2^m`` characters from {0, 1}
(row-major), or by the row-major bit-packed bytes of the matrix (big-endian
within each byte). Readers detect the body variant by its exact length.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChannelFormatError,
    ConstructionExhausted,
    MemoryCapExceeded,
)

__all__ = [
    "ERASURE",
    "ChannelMatrix",
    "ConstructionParams",
    "DensityReport",
    "BlockCheckResult",
    "Channel",
    "default_f",
    "default_g",
    "default_p",
    "memory_cap",
    "sample_matrix",
    "check_block_goodness",
    "estimate_bad_density",
    "construct_channel",
    "channel_from_matrix",
    "channel_apply",
    "serialize_channel",
    "deserialize_channel",
]

# Output symbol for a bad entry: both receivers see an erasure.
ERASURE: tuple[str, str] = ("E", "E")

DEFAULT_MAX_M = 14
MAX_M_ENV_VAR = "COOPCAP_MAX_M"

# Rows sampled per RNG draw while generating large matrices. The generator
# consumes its stream element-wise in row-major order, so the chunk size does
# not affect the sampled bits, only peak memory.
_SAMPLE_CHUNK_ROWS = 1 << 12


def memory_cap() -> int:
    """Largest allowed m, from COOPCAP_MAX_M or the built-in default."""
    raw = os.environ.get(MAX_M_ENV_VAR)
    if raw is None:
        return DEFAULT_MAX_M
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ValueError(f"{MAX_M_ENV_VAR} must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise ValueError(f"{MAX_M_ENV_VAR} must be >= 1, got {cap}")
    return cap


def _require_within_cap(m: int) -> None:
    cap = memory_cap()
    if m > cap:
        raise MemoryCapExceeded(
            f"m={m} needs 2^{2 * m} bits; the cap is m<={cap} "
            f"(set {MAX_M_ENV_VAR} to raise it)"
        )


def default_g(m: int) -> int:
    """Default block exponent: 2*ceil(log2 m), clamped to [1, m]."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return min(max(2 * math.ceil(math.log2(m)) if m > 1 else 1, 1), m)


def default_f(m: int) -> int:
    """Default submatrix side for density sampling: m^2, clamped to 2^m."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return min(m * m, 1 << m)


def default_p(epsilon: float) -> float:
    """Default bad-entry probability 1 - epsilon/2, inside (1 - epsilon, 1)."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    return 1.0 - epsilon / 2.0


# ----------------------------------------------------------------------
# Types
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ConstructionParams:
    """Everything needed to reproduce one channel construction.

    f_of_m and g_of_m are the schedule values already evaluated at m. The
    sampling regime the statistical density property relies on is
    1 - epsilon < p < 1; it is advisory (see density_bound_applicable), not
    enforced, so degenerate p values can be used for exercising the
    machinery.
    """

    m: int
    p: float
    epsilon: float
    f_of_m: int
    g_of_m: int
    seed: int

    def __post_init__(self):
        if not isinstance(self.m, int) or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if not 1 <= self.g_of_m <= self.m:
            raise ValueError(f"g_of_m must be in [1, m={self.m}], got {self.g_of_m}")
        if not 1 <= self.f_of_m <= (1 << self.m):
            raise ValueError(f"f_of_m must be in [1, 2^m], got {self.f_of_m}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < (1 << 64):
            raise ValueError(f"seed must be an integer in [0, 2^64), got {self.seed!r}")

    @classmethod
    def with_defaults(cls, m, epsilon=0.05, seed=0, p=None, f_of_m=None, g_of_m=None):
        return cls(
            m=m,
            p=default_p(epsilon) if p is None else p,
            epsilon=epsilon,
            f_of_m=default_f(m) if f_of_m is None else f_of_m,
            g_of_m=default_g(m) if g_of_m is None else g_of_m,
            seed=seed,
        )

    @property
    def density_bound_applicable(self) -> bool:
        """True when p sits in the interval the density failure bound needs."""
        return 1.0 - self.epsilon < self.p < 1.0


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """Square 0/1 matrix over a 2^m alphabet, bit-packed row by row.

    packed_rows has shape (2^m, ceil(2^m / 8)); bit j of row i (big-endian
    within each byte) is entry (i+1, j+1). Padding bits past column 2^m must
    be zero. Arrays are frozen after construction.
    """

    m: int
    packed_rows: np.ndarray

    def __post_init__(self):
        if not isinstance(self.m, int) or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        n = self.n
        row_bytes = (n + 7) // 8
        pk = np.ascontiguousarray(self.packed_rows, dtype=np.uint8)
        if pk.shape != (n, row_bytes):
            raise ValueError(
                f"packed_rows must have shape {(n, row_bytes)}, got {pk.shape}"
            )
        if n % 8 and np.any(np.unpackbits(pk, axis=1)[:, n:]):
            raise ValueError("padding bits past column 2^m must be zero")
        pk.flags.writeable = False
        object.__setattr__(self, "packed_rows", pk)

    @property
    def n(self) -> int:
        return 1 << self.m

    @property
    def bit_length(self) -> int:
        """Total number of matrix bits, 2^(2m)."""
        return self.n * self.n

    def bit(self, x1: int, x2: int) -> int:
        """Entry at 1-based position (x1, x2)."""
        n = self.n
        if not (1 <= x1 <= n and 1 <= x2 <= n):
            raise ValueError(f"symbols must be in [1, {n}], got ({x1}, {x2})")
        j = x2 - 1
        return int(self.packed_rows[x1 - 1, j >> 3] >> (7 - (j & 7)) & 1)

    def row_bits(self, x1: int) -> np.ndarray:
        """Row x1 (1-based) as a length-2^m 0/1 array."""
        return np.unpackbits(self.packed_rows[x1 - 1], count=self.n)

    def col_bits(self, x2: int) -> np.ndarray:
        """Column x2 (1-based) as a length-2^m 0/1 array."""
        j = x2 - 1
        return (self.packed_rows[:, j >> 3] >> (7 - (j & 7))) & 1

    def row_block_bits(self, x1: int, k: int, g: int) -> np.ndarray:
        """Bits of row x1 on aligned block k of width 2^g, without a full unpack."""
        start = k << g
        lo, hi = start >> 3, (start + (1 << g) + 7) >> 3
        bits = np.unpackbits(self.packed_rows[x1 - 1, lo:hi])
        off = start & 7
        return bits[off : off + (1 << g)]

    def col_block_bits(self, x2: int, k: int, g: int) -> np.ndarray:
        """Bits of column x2 on aligned block k of width 2^g."""
        j = x2 - 1
        rows = slice(k << g, (k + 1) << g)
        return (self.packed_rows[rows, j >> 3] >> (7 - (j & 7))) & 1

    @property
    def bits(self) -> np.ndarray:
        """Flat row-major 0/1 array of length 2^(2m). Materializes a copy."""
        return np.unpackbits(self.packed_rows, axis=1, count=self.n).reshape(-1)

    def to_dense(self) -> np.ndarray:
        """Full (2^m, 2^m) uint8 matrix. Materializes a copy."""
        return np.unpackbits(self.packed_rows, axis=1, count=self.n)

    @classmethod
    def from_dense(cls, arr) -> "ChannelMatrix":
        a = np.asarray(arr, dtype=np.uint8)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        n = a.shape[0]
        m = n.bit_length() - 1
        if n < 2 or (1 << m) != n:
            raise ValueError(f"side must be a power of two >= 2, got {n}")
        if np.any(a > 1):
            raise ValueError("entries must be 0 or 1")
        return cls(m=m, packed_rows=np.packbits(a, axis=1))

    def __eq__(self, other):
        if not isinstance(other, ChannelMatrix):
            return NotImplemented
        return self.m == other.m and np.array_equal(self.packed_rows, other.packed_rows)


@dataclass(frozen=True)
class DensityReport:
    """Sampled check that large submatrices are almost entirely bad."""

    trials: int
    violations: int
    min_bad_fraction_observed: float
    submatrix_size_used: int


@dataclass(frozen=True)
class BlockCheckResult:
    """Outcome of the exhaustive aligned-block goodness check.

    failures lists (axis, x, k) with axis "row" or "col", x the 1-based line
    index, and k the 0-based block index of a block with no good entry.
    """

    passed: bool
    failures: tuple[tuple[str, int, int], ...]


@dataclass(frozen=True)
class Channel:
    """A matrix together with its construction record."""

    matrix: ChannelMatrix
    params: ConstructionParams
    block_property_verified: bool
    density_report: DensityReport | None = None
    construction_attempts: int | None = None

    def __post_init__(self):
        if self.matrix.m != self.params.m:
            raise ValueError(
                f"matrix is for m={self.matrix.m} but params say m={self.params.m}"
            )

    @property
    def m(self) -> int:
        return self.params.m

    @property
    def n(self) -> int:
        return self.matrix.n

    @property
    def g(self) -> int:
        return self.params.g_of_m


# ----------------------------------------------------------------------
# Construction
# ----------------------------------------------------------------------


def sample_matrix(m: int, p: float, seed: int) -> ChannelMatrix:
    """Draw a 2^m x 2^m matrix with i.i.d. Bernoulli(p) bad entries.

    Deterministic in (m, p, seed); the generator is numpy's default PCG64.
    """
    if not isinstance(m, int) or m < 1:
        raise ValueError(f"m must be a positive integer, got {m!r}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    _require_within_cap(m)
    n = 1 << m
    rng = np.random.default_rng(seed)
    row_bytes = (n + 7) // 8
    packed = np.empty((n, row_bytes), dtype=np.uint8)
    for lo in range(0, n, _SAMPLE_CHUNK_ROWS):
        hi = min(lo + _SAMPLE_CHUNK_ROWS, n)
        block = rng.random((hi - lo, n)) < p
        packed[lo:hi] = np.packbits(block, axis=1)
    return ChannelMatrix(m=m, packed_rows=packed)


def check_block_goodness(matrix: ChannelMatrix, g: int) -> BlockCheckResult:
    """Exhaustively check every aligned row and column block for a good entry."""
    m, n = matrix.m, matrix.n
    if not 1 <= g <= m:
        raise ValueError(f"g must be in [1, m={m}], got {g}")
    width = 1 << g
    nblocks = n >> g
    failures: list[tuple[str, int, int]] = []
    for x in range(n):
        row = matrix.row_bits(x + 1)
        allbad = row.reshape(nblocks, width).all(axis=1)
        failures.extend(("row", x + 1, int(k)) for k in np.nonzero(allbad)[0])
    for k in range(nblocks):
        band = np.unpackbits(
            matrix.packed_rows[k * width : (k + 1) * width], axis=1, count=n
        )
        allbad = band.all(axis=0)
        failures.extend(("col", int(x) + 1, k) for x in np.nonzero(allbad)[0])
    return BlockCheckResult(passed=not failures, failures=tuple(failures))


def estimate_bad_density(
    matrix: ChannelMatrix,
    f: int,
    epsilon: float,
    trials: int,
    seed: int,
    size_pairs=None,
) -> DensityReport:
    """Sample random f x f submatrices and report how bad they are.

    A trial violates the density property when its bad fraction is not
    strictly above 1 - epsilon. size_pairs optionally replaces the square
    default with explicit (row-count, column-count) pairs, cycled over the
    trials, for rectangular sampling.
    """
    n = matrix.n
    if not 1 <= f <= n:
        raise ValueError(f"f must be in [1, 2^m={n}], got {f}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if size_pairs is not None:
        size_pairs = [(int(a), int(b)) for a, b in size_pairs]
        for a, b in size_pairs:
            if not (1 <= a <= n and 1 <= b <= n):
                raise ValueError(f"size pair {(a, b)} out of range [1, {n}]")
    rng = np.random.default_rng(seed)
    threshold = 1.0 - epsilon
    violations = 0
    min_frac = 1.0
    for t in range(trials):
        rows_f, cols_f = size_pairs[t % len(size_pairs)] if size_pairs else (f, f)
        rows = rng.choice(n, size=rows_f, replace=False)
        cols = rng.choice(n, size=cols_f, replace=False)
        sub = np.unpackbits(matrix.packed_rows[rows], axis=1, count=n)[:, cols]
        frac = float(sub.mean())
        min_frac = min(min_frac, frac)
        if frac <= threshold:
            violations += 1
    return DensityReport(
        trials=trials,
        violations=violations,
        min_bad_fraction_observed=min_frac,
        submatrix_size_used=f,
    )


def _block_failure_bound_log2(m: int, g: int, p: float) -> float:
    # Union bound: 2^(2m-g+1) blocks, each all-bad with probability p^(2^g).
    if p == 0.0:
        return -math.inf
    return (2 * m - g + 1) + (1 << g) * math.log2(p)


def construct_channel(
    params: ConstructionParams,
    max_attempts: int = 50,
    density_trials: int = 200,
) -> Channel:
    """Rejection-sample a matrix until the block property holds.

    Attempt i (0-based) uses seed + i, so runs are reproducible and the
    first attempt coincides with sample_matrix(m, p, seed). The accepted
    matrix gets a sampled density report attached (seeded past the attempt
    range so subset draws never reuse a matrix stream).
    """
    if max_attempts < 1:
        raise ValueError(f"max_attempts must be >= 1, got {max_attempts}")
    _require_within_cap(params.m)
    for attempt in range(max_attempts):
        matrix = sample_matrix(params.m, params.p, params.seed + attempt)
        result = check_block_goodness(matrix, params.g_of_m)
        if result.passed:
            report = None
            if density_trials > 0:
                report = estimate_bad_density(
                    matrix,
                    params.f_of_m,
                    params.epsilon,
                    density_trials,
                    params.seed + max_attempts + attempt + 1,
                )
            return Channel(
                matrix=matrix,
                params=params,
                block_property_verified=True,
                density_report=report,
                construction_attempts=attempt + 1,
            )
    bound = _block_failure_bound_log2(params.m, params.g_of_m, params.p)
    raise ConstructionExhausted(
        f"no acceptable matrix in {max_attempts} attempts "
        f"(m={params.m}, p={params.p}, g={params.g_of_m}); per-attempt union "
        f"bound on having a bad block: 2^{bound:.3f}"
    )


def channel_from_matrix(
    matrix: ChannelMatrix,
    g: int,
    *,
    p: float = 0.5,
    epsilon: float = 0.5,
    f_of_m: int | None = None,
    seed: int = 0,
    verify: bool = True,
) -> Channel:
    """Wrap a hand-built or loaded matrix as a Channel.

    p, epsilon, f_of_m, seed describe how the matrix was (or would have
    been) sampled; for a hand-built matrix they are nominal metadata.
    verify runs the exact block check so block_property_verified is
    never asserted blindly.
    """
    params = ConstructionParams(
        m=matrix.m,
        p=p,
        epsilon=epsilon,
        f_of_m=default_f(matrix.m) if f_of_m is None else f_of_m,
        g_of_m=g,
        seed=seed,
    )
    verified = check_block_goodness(matrix, g).passed if verify else False
    return Channel(matrix=matrix, params=params, block_property_verified=verified)


def channel_apply(channel: Channel, x1: int, x2: int):
    """Send (x1, x2) once: the pair itself on a good entry, else ERASURE."""
    return (x1, x2) if channel.matrix.bit(x1, x2) == 0 else ERASURE


# ----------------------------------------------------------------------
# Serialization (MACCF/1)
# ----------------------------------------------------------------------

_HEADER_MAGIC = "MACCF"
_HEADER_VERSION = "1"
_HEADER_KEYS = ("m", "p", "eps", "f", "g", "seed")


def _format_header(params: ConstructionParams) -> str:
    return (
        f"{_HEADER_MAGIC} {_HEADER_VERSION} m={params.m} p={params.p!r} "
        f"eps={params.epsilon!r} f={params.f_of_m} g={params.g_of_m} "
        f"seed={params.seed}\n"
    )


def serialize_channel(channel: Channel, path, *, binary: bool = False) -> None:
    """Write the channel to path in MACCF/1 text (default) or binary form."""
    matrix = channel.matrix
    n = matrix.n
    with open(path, "wb") as fh:
        fh.write(_format_header(channel.params).encode("ascii"))
        if binary:
            if n % 8 == 0:
                fh.write(matrix.packed_rows.tobytes())
            else:
                fh.write(np.packbits(matrix.bits).tobytes())
        else:
            # Stream row chunks so a large matrix never fully unpacks at once.
            chunk = max(1, (1 << 22) // n)
            for lo in range(0, n, chunk):
                dense = np.unpackbits(matrix.packed_rows[lo : lo + chunk], axis=1, count=n)
                block = np.full((dense.shape[0], n + 1), ord("\n"), dtype=np.uint8)
                block[:, :n] = dense + ord("0")
                fh.write(block.tobytes())


def _parse_header(data: bytes):
    nl = data.find(b"\n")
    if nl < 0:
        raise ChannelFormatError("missing header line", offset=len(data))
    try:
        header = data[:nl].decode("ascii")
    except UnicodeDecodeError as exc:
        raise ChannelFormatError("header is not ASCII", offset=0) from exc
    tokens = header.split(" ")
    expected = 2 + len(_HEADER_KEYS)
    offset = 0
    if len(tokens) != expected:
        raise ChannelFormatError(
            f"header must have {expected} space-separated tokens, got {len(tokens)}",
            offset=0,
        )
    if tokens[0] != _HEADER_MAGIC:
        raise ChannelFormatError(f"bad magic {tokens[0]!r}", offset=0)
    offset += len(tokens[0]) + 1
    if tokens[1] != _HEADER_VERSION:
        raise ChannelFormatError(f"unsupported version {tokens[1]!r}", offset=offset)
    offset += len(tokens[1]) + 1
    values = {}
    for key, token in zip(_HEADER_KEYS, tokens[2:]):
        prefix = key + "="
        if not token.startswith(prefix):
            raise ChannelFormatError(
                f"expected {key}=<value>, got {token!r}", offset=offset
            )
        raw = token[len(prefix):]
        try:
            values[key] = float(raw) if key in ("p", "eps") else int(raw)
        except ValueError as exc:
            raise ChannelFormatError(
                f"bad value for {key}: {raw!r}", offset=offset + len(prefix)
            ) from exc
        offset += len(token) + 1
    try:
        params = ConstructionParams(
            m=values["m"],
            p=values["p"],
            epsilon=values["eps"],
            f_of_m=values["f"],
            g_of_m=values["g"],
            seed=values["seed"],
        )
    except ValueError as exc:
        raise ChannelFormatError(f"inconsistent header: {exc}", offset=0) from exc
    return params, nl + 1


def deserialize_channel(path, *, verify: bool = True) -> Channel:
    """Read a MACCF/1 file back into a Channel.

    Round-trips matrix bits and params exactly. The block check is re-run
    when verify is true (the format does not persist verification state);
    the density report is not recomputed.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    params, body_start = _parse_header(data)
    _require_within_cap(params.m)
    n = 1 << params.m
    body = data[body_start:]
    packed_size = (n * n + 7) // 8
    if len(body) == packed_size:
        flat = np.unpackbits(np.frombuffer(body, dtype=np.uint8), count=n * n)
        matrix = ChannelMatrix(m=params.m, packed_rows=np.packbits(flat.reshape(n, n), axis=1))
    elif len(body) in (n * (n + 1), n * (n + 1) - 1):
        text = np.frombuffer(body, dtype=np.uint8)
        for i in range(n):
            line_start = i * (n + 1)
            line = text[line_start : line_start + n]
            bad = np.nonzero((line != ord("0")) & (line != ord("1")))[0]
            if len(line) < n or bad.size:
                bad_at = int(bad[0]) if bad.size else len(line)
                raise ChannelFormatError(
                    f"row {i + 1} is not {n} characters of 0/1",
                    offset=body_start + line_start + bad_at,
                )
            if line_start + n < len(text) and text[line_start + n] != ord("\n"):
                raise ChannelFormatError(
                    f"row {i + 1} not terminated by newline",
                    offset=body_start + line_start + n,
                )
        rows = text.reshape(n, n + 1)[:, :n] if len(body) == n * (n + 1) else None
        if rows is None:
            padded = np.concatenate([text, np.array([ord("\n")], dtype=np.uint8)])
            rows = padded.reshape(n, n + 1)[:, :n]
        matrix = ChannelMatrix(m=params.m, packed_rows=np.packbits(rows - ord("0"), axis=1))
    else:
        raise ChannelFormatError(
            f"body has {len(body)} bytes; expected {packed_size} (binary) or "
            f"{n * (n + 1)} / {n * (n + 1) - 1} (text)",
            offset=body_start,
        )
    verified = check_block_goodness(matrix, params.g_of_m).passed if verify else False
    return Channel(matrix=matrix, params=params, block_property_verified=verified)
