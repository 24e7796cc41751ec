"""Single-shot codes for the two-sender erasure channel.

Facilitated codes (CfCode): a helper node that sees both selected messages
broadcasts the index z of the first good entry inside one aligned block of
the matrix, and the reduced-rate sender offsets its symbol by z. Concretely,
with orientation R1_full the message sets are W1 = {1..2^m} and
W2 = {1..2^(m-g)}; the helper picks the smallest z in {1..2^g} with
entry (w1, (w2-1)*2^g + z) good, sender 1 transmits x1 = w1 and sender 2
transmits x2 = (w2-1)*2^g + z. The receiver inverts with w1 = x1 and
w2 = ceil(x2 / 2^g). When every aligned block of the matrix holds a good
entry this never erases, so every one of the 2^m * 2^(m-g) message pairs
decodes exactly and the rate pair is (m, m - g). Orientation R2_full
mirrors the roles. Only the reduced-rate sender uses z: the full-rate
encoder is the identity on its message, whatever the helper says.

Solo codes (IeCode): no helper. One sender signals alone while the other
repeats symbol 1. The active sender's codebook is the first good entry of
each aligned block of column 1 (or row 1), one per block, giving 2^(m-g)
messages at zero error and rate pair (m - g, 0) or (0, m - g).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import Channel, ERASURE, channel_apply
from .errors import InvariantViolation

__all__ = [
    "Orientation",
    "CfCode",
    "IeCode",
    "ZeroErrorReport",
    "facilitator_output",
    "cf_encode",
    "cf_decode",
    "verify_zero_error",
    "build_ie_code",
    "ie_encode",
    "ie_decode",
    "monte_carlo_error",
]


class Orientation(str, Enum):
    """Which sender keeps the full rate m; the other drops to m - g."""

    R1_FULL = "R1_full"
    R2_FULL = "R2_full"

    @classmethod
    def parse(cls, value) -> "Orientation":
        if isinstance(value, cls):
            return value
        aliases = {
            "r1": cls.R1_FULL,
            "r1_full": cls.R1_FULL,
            "r2": cls.R2_FULL,
            "r2_full": cls.R2_FULL,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown orientation {value!r}") from None


@dataclass(frozen=True)
class CfCode:
    """Facilitated single-shot code on a channel with the block property."""

    channel: Channel
    orientation: Orientation

    def __post_init__(self):
        object.__setattr__(self, "orientation", Orientation.parse(self.orientation))
        if not self.channel.block_property_verified:
            raise ValueError("channel block property is not verified")

    @property
    def m(self) -> int:
        return self.channel.m

    @property
    def g(self) -> int:
        return self.channel.g

    @property
    def message_space_sizes(self) -> tuple[int, int]:
        full, reduced = 1 << self.m, 1 << (self.m - self.g)
        if self.orientation is Orientation.R1_FULL:
            return (full, reduced)
        return (reduced, full)

    @property
    def sum_rate(self) -> float:
        """log2 of the number of message pairs per channel use: 2m - g."""
        return float(2 * self.m - self.g)


@dataclass(frozen=True)
class ZeroErrorReport:
    pairs_checked: int
    failures: int


def facilitator_output(code: CfCode, w1: int, w2: int) -> int:
    """Index z in {1..2^g} of the first good entry in the addressed block."""
    s1, s2 = code.message_space_sizes
    if not (1 <= w1 <= s1 and 1 <= w2 <= s2):
        raise ValueError(f"message pair ({w1}, {w2}) outside {s1} x {s2}")
    matrix = code.channel.matrix
    g = code.g
    if code.orientation is Orientation.R1_FULL:
        block = matrix.row_block_bits(w1, w2 - 1, g)
    else:
        block = matrix.col_block_bits(w2, w1 - 1, g)
    z = int(np.argmin(block))
    if block[z] != 0:
        raise InvariantViolation(
            f"no good entry in block for ({w1}, {w2}); "
            "the block property cannot actually hold"
        )
    return z + 1


def cf_encode(code: CfCode, w1: int, w2: int, *, z: int | None = None) -> tuple[int, int]:
    """Channel inputs for a message pair.

    z defaults to the honest helper output; pass a value to model a corrupt
    or fixed helper. The full-rate side never reads z.
    """
    if z is None:
        z = facilitator_output(code, w1, w2)
    if not 1 <= z <= (1 << code.g):
        raise ValueError(f"z must be in [1, 2^g], got {z}")
    if code.orientation is Orientation.R1_FULL:
        return (w1, (w2 - 1) * (1 << code.g) + z)
    return ((w1 - 1) * (1 << code.g) + z, w2)


def cf_decode(code: CfCode, y) -> tuple[int, int] | None:
    """Message pair from a channel output; None when the output is erased."""
    if tuple(y) == ERASURE:
        return None
    x1, x2 = y
    width = 1 << code.g
    if code.orientation is Orientation.R1_FULL:
        return (x1, (x2 + width - 1) // width)
    return ((x1 + width - 1) // width, x2)


def verify_zero_error(code: CfCode, facilitator=None) -> ZeroErrorReport:
    """Run every message pair through encode, the channel, and decode.

    facilitator overrides the helper (same signature as facilitator_output)
    so corrupted helpers can be measured; default is the honest one.
    """
    fac = facilitator_output if facilitator is None else facilitator
    s1, s2 = code.message_space_sizes
    failures = 0
    for w1 in range(1, s1 + 1):
        for w2 in range(1, s2 + 1):
            z = fac(code, w1, w2)
            x = cf_encode(code, w1, w2, z=z)
            y = channel_apply(code.channel, *x)
            if cf_decode(code, y) != (w1, w2):
                failures += 1
    return ZeroErrorReport(pairs_checked=s1 * s2, failures=failures)


@dataclass(frozen=True)
class IeCode:
    """Solo single-shot code: one active sender, the other pinned to symbol 1.

    codebook[w - 1] is the active sender's symbol for message w; it holds
    one good entry per aligned block of the scanned line, so transmissions
    never erase.
    """

    channel: Channel
    active_user: int
    codebook: tuple[int, ...]

    def __post_init__(self):
        if self.active_user not in (1, 2):
            raise ValueError(f"active_user must be 1 or 2, got {self.active_user}")

    @property
    def m(self) -> int:
        return self.channel.m

    @property
    def g(self) -> int:
        return self.channel.g

    @property
    def message_count(self) -> int:
        return len(self.codebook)

    @property
    def sum_rate(self) -> float:
        return float(self.m - self.g)


def build_ie_code(channel: Channel, user: int) -> IeCode:
    """First good entry of each aligned block of column 1 (user 1) or row 1."""
    if user not in (1, 2):
        raise ValueError(f"user must be 1 or 2, got {user}")
    matrix = channel.matrix
    g = channel.g
    line = matrix.col_bits(1) if user == 1 else matrix.row_bits(1)
    width = 1 << g
    blocks = line.reshape(-1, width)
    first = np.argmin(blocks, axis=1)
    if np.any(blocks[np.arange(blocks.shape[0]), first] != 0):
        raise InvariantViolation(
            "a block of the scanned line has no good entry; "
            "build the code on a channel with the block property"
        )
    codebook = tuple(int(k * width + z + 1) for k, z in enumerate(first))
    return IeCode(channel=channel, active_user=user, codebook=codebook)


def ie_encode(code: IeCode, w: int) -> tuple[int, int]:
    if not 1 <= w <= code.message_count:
        raise ValueError(f"message {w} outside [1, {code.message_count}]")
    x = code.codebook[w - 1]
    return (x, 1) if code.active_user == 1 else (1, x)


def ie_decode(code: IeCode, y) -> int | None:
    """Message index from a channel output; None when erased."""
    if tuple(y) == ERASURE:
        return None
    x = y[0] if code.active_user == 1 else y[1]
    width = 1 << code.g
    w = (x + width - 1) // width
    if 1 <= w <= code.message_count and code.codebook[w - 1] == x:
        return w
    return None


def monte_carlo_error(code, trials: int, seed: int, facilitator=None) -> float:
    """Empirical decode-failure rate over uniform random messages."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    failures = 0
    if isinstance(code, CfCode):
        fac = facilitator_output if facilitator is None else facilitator
        s1, s2 = code.message_space_sizes
        draws1 = rng.integers(1, s1 + 1, size=trials)
        draws2 = rng.integers(1, s2 + 1, size=trials)
        for w1, w2 in zip(draws1, draws2):
            w1, w2 = int(w1), int(w2)
            z = fac(code, w1, w2)
            y = channel_apply(code.channel, *cf_encode(code, w1, w2, z=z))
            if cf_decode(code, y) != (w1, w2):
                failures += 1
    elif isinstance(code, IeCode):
        draws = rng.integers(1, code.message_count + 1, size=trials)
        for w in draws:
            w = int(w)
            y = channel_apply(code.channel, *ie_encode(code, w))
            if ie_decode(code, y) != w:
                failures += 1
    else:
        raise TypeError(f"expected CfCode or IeCode, got {type(code).__name__}")
    return failures / trials
