"""Sum-rate quantities for independent senders on an erasure-matrix channel.

With marginals p1 and p2 the output is (X1, X2) on good entries and the
erased pair otherwise, and because the channel is deterministic the mutual
information between inputs and output is the output entropy:

    I(X1, X2; Y) = H(Y)
                 = - sum over good (i, j) of p1(i) p2(j) log2(p1(i) p2(j))
                 - (1 - gamma) log2(1 - gamma),

where gamma is the total probability of landing on a good entry. Writing
s_i = sum_j good(i, j) p2(j) and t_i = sum_j good(i, j) p2(j) log2 p2(j),

    H(Y) = - sum_i p1(i) log2(p1(i)) s_i - sum_i p1(i) t_i
           - (1 - gamma) log2(1 - gamma),      gamma = p1 . s,

so for fixed p2 the objective is an O(n) function of p1 after one pass over
the matrix, and it is concave in p1 (the output law is affine in p1 and
entropy is concave). The maximizer here alternates projected gradient
ascent over each marginal; the exhaustive grid oracle cross-checks it on
tiny alphabets.

Also here: the layered decomposition of a pmf into nested uniform
distributions, and the entropy-based bound on the probability of any fixed
small subset. All logarithms are base 2 and 0 log 0 = 0.
"""

from __future__ import annotations

import itertools
import weakref
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import Channel, ERASURE
from .errors import InvariantViolation

__all__ = [
    "ProbVector",
    "OutputStats",
    "RateTriple",
    "AltMaxResult",
    "BruteForceResult",
    "UniformDecomposition",
    "xlog2x",
    "entropy_bits",
    "project_to_simplex",
    "output_stats",
    "sum_rate",
    "rate_triple",
    "alternating_maximization",
    "maximize_sum_rate",
    "brute_force_sum_capacity",
    "decompose_into_uniforms",
    "tail_mass_bound",
]

_TINY = 1e-300  # floor inside logs; keeps gradients finite at the boundary


def xlog2x(v):
    """Elementwise v * log2(v) with the 0 log 0 = 0 convention."""
    arr = np.asarray(v, dtype=np.float64)
    out = np.zeros_like(arr)
    mask = arr > 0
    out[mask] = arr[mask] * np.log2(arr[mask])
    if out.ndim == 0:
        return float(out)
    return out


def entropy_bits(p) -> float:
    """Shannon entropy of a pmf, in bits."""
    return float(-np.sum(xlog2x(np.asarray(p, dtype=np.float64))))


@dataclass(frozen=True, eq=False)
class ProbVector:
    """Probability vector over the 1-based alphabet {1..N}.

    probs[i - 1] is the mass of symbol i. Entries must be nonnegative and
    sum to 1 within 1e-12.
    """

    probs: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.probs, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError(f"probs must be a nonempty 1-d array, got shape {arr.shape}")
        if np.any(arr < 0):
            raise ValueError("probs must be nonnegative")
        if abs(float(arr.sum()) - 1.0) > 1e-12:
            raise ValueError(f"probs must sum to 1 within 1e-12, got {arr.sum()!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)

    @classmethod
    def uniform(cls, n: int) -> "ProbVector":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, symbol: int, n: int) -> "ProbVector":
        if not 1 <= symbol <= n:
            raise ValueError(f"symbol must be in [1, {n}], got {symbol}")
        arr = np.zeros(n)
        arr[symbol - 1] = 1.0
        return cls(arr)

    def __len__(self) -> int:
        return self.probs.size

    @property
    def entropy(self) -> float:
        return entropy_bits(self.probs)

    def __eq__(self, other):
        if not isinstance(other, ProbVector):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)


def as_distribution(p, n: int | None = None) -> np.ndarray:
    """Validated float64 pmf array from a ProbVector or any sequence."""
    arr = p.probs if isinstance(p, ProbVector) else ProbVector(np.asarray(p)).probs
    if n is not None and arr.size != n:
        raise ValueError(f"distribution has {arr.size} entries, channel needs {n}")
    return arr


# ----------------------------------------------------------------------
# Matrix-side products
# ----------------------------------------------------------------------

_DENSE_LIMIT = 4096  # densify the good matrix up to this alphabet size
_STREAM_ROWS = 2048


class _GoodOps:
    """Products against the good-entry indicator of one matrix."""

    def __init__(self, matrix):
        self.matrix = matrix
        self._dense = None
        if matrix.n <= _DENSE_LIMIT:
            self._dense = (1 - matrix.to_dense()).astype(np.float64)

    def products(self, X: np.ndarray, transpose: bool = False) -> np.ndarray:
        """good @ X, or good.T @ X with transpose=True; X is (n, k)."""
        if self._dense is not None:
            return (self._dense.T if transpose else self._dense) @ X
        n = self.matrix.n
        out = np.zeros((n, X.shape[1]) if X.ndim == 2 else n, dtype=np.float64)
        for lo in range(0, n, _STREAM_ROWS):
            hi = min(lo + _STREAM_ROWS, n)
            good = 1 - np.unpackbits(self.matrix.packed_rows[lo:hi], axis=1, count=n)
            chunk = good.astype(np.float64)
            if transpose:
                out += chunk.T @ X[lo:hi]
            else:
                out[lo:hi] = chunk @ X
        return out


# keyed by id(); ChannelMatrix has content equality and no hash
_OPS_CACHE: dict = {}


def _good_ops(channel: Channel) -> _GoodOps:
    matrix = channel.matrix
    key = id(matrix)
    ops = _OPS_CACHE.get(key)
    if ops is None or ops.matrix is not matrix:
        ops = _GoodOps(matrix)
        _OPS_CACHE[key] = ops
        weakref.finalize(matrix, _OPS_CACHE.pop, key, None)
    return ops


# ----------------------------------------------------------------------
# Output statistics and rates
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OutputStats:
    """Output law of one channel use under a product input distribution.

    gamma_by_x1[i - 1] is the probability of sending symbol i and landing
    on a good entry; gamma is their sum; y_distribution maps each output
    with positive mass, including ERASURE, to its probability.
    """

    gamma_by_x1: np.ndarray
    gamma: float
    y_distribution: dict


def output_stats(channel: Channel, p1, p2) -> OutputStats:
    n = channel.n
    u = as_distribution(p1, n)
    v = as_distribution(p2, n)
    gamma_by = np.zeros(n)
    y: dict = {}
    for i in range(n):
        good = channel.matrix.row_bits(i + 1) == 0
        s_i = float(v[good].sum())
        gamma_by[i] = u[i] * s_i
        if u[i] > 0:
            for j in np.nonzero(good & (v > 0))[0]:
                y[(i + 1, int(j) + 1)] = float(u[i] * v[j])
    gamma = float(gamma_by.sum())
    erased = 1.0 - gamma
    if erased > 0:
        y[ERASURE] = erased
    return OutputStats(gamma_by_x1=gamma_by, gamma=gamma, y_distribution=y)


def _entropy_from_products(u, ul, s, t) -> float:
    gamma = float(u @ s)
    erased = min(max(1.0 - gamma, 0.0), 1.0)
    return float(-(ul @ s) - (u @ t) - xlog2x(erased))


def sum_rate(channel: Channel, p1, p2) -> float:
    """I(X1, X2; Y) = H(Y) in bits for independent inputs p1, p2."""
    n = channel.n
    u = as_distribution(p1, n)
    v = as_distribution(p2, n)
    st = _good_ops(channel).products(np.column_stack([v, xlog2x(v)]))
    return _entropy_from_products(u, xlog2x(u), st[:, 0], st[:, 1])


@dataclass(frozen=True)
class RateTriple:
    """Per-sender conditional rates and the sum rate, in bits."""

    i1: float
    i2: float
    i12: float


def rate_triple(channel: Channel, p1, p2) -> RateTriple:
    """(H(Y1|X2), H(Y2|X1), H(Y)) for independent inputs; deterministic
    channel, so each mutual information reduces to an output entropy."""
    n = channel.n
    u = as_distribution(p1, n)
    v = as_distribution(p2, n)
    ul, vl = xlog2x(u), xlog2x(v)
    ops = _good_ops(channel)
    row = ops.products(np.column_stack([v, vl]))
    col = ops.products(np.column_stack([u, ul]), transpose=True)
    i2 = float(-(u @ row[:, 1]) - u @ xlog2x(np.clip(1.0 - row[:, 0], 0.0, 1.0)))
    i1 = float(-(v @ col[:, 1]) - v @ xlog2x(np.clip(1.0 - col[:, 0], 0.0, 1.0)))
    i12 = _entropy_from_products(u, ul, row[:, 0], row[:, 1])
    tol = 1e-9
    if max(i1, i2) > i12 + tol or i12 > i1 + i2 + tol:
        raise InvariantViolation(f"rate triple out of order: {i1}, {i2}, {i12}")
    if i12 > 2 * channel.m + tol:
        raise InvariantViolation(f"sum rate {i12} above 2m = {2 * channel.m}")
    return RateTriple(i1=i1, i2=i2, i12=i12)


# ----------------------------------------------------------------------
# Alternating maximization
# ----------------------------------------------------------------------


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    n = v.size
    mu = np.sort(v)[::-1]
    cssv = np.cumsum(mu) - 1.0
    rho = np.nonzero(mu * np.arange(1, n + 1) > cssv)[0][-1]
    theta = cssv[rho] / (rho + 1.0)
    w = np.maximum(v - theta, 0.0)
    return w / w.sum()


@dataclass(frozen=True)
class AltMaxResult:
    p1: ProbVector
    p2: ProbVector
    value: float
    iterations: int
    converged: bool
    sweep_values: tuple[float, ...]


def _maximize_marginal(s, t, u0, inner_iters: int, inner_tol: float = 1e-12):
    """Projected gradient ascent of the concave one-marginal objective."""
    u = u0
    f = _entropy_from_products(u, xlog2x(u), s, t)
    step = 1.0
    for _ in range(inner_iters):
        gamma = float(u @ s)
        grad = (
            -s * np.log2(np.maximum(u, _TINY))
            - t
            + s * np.log2(max(1.0 - gamma, _TINY))
        )
        stp = step
        cand = fc = None
        for _ in range(70):  # halve until the objective improves
            trial = project_to_simplex(u + stp * grad)
            ft = _entropy_from_products(trial, xlog2x(trial), s, t)
            if ft > f:
                cand, fc = trial, ft
                break
            stp *= 0.5
            if stp < 1e-16:
                break
        if cand is None:
            break
        gain = fc - f
        u, f = cand, fc
        step = min(stp * 2.0, 64.0)
        if gain < inner_tol:
            break
    return u, f


def alternating_maximization(
    channel: Channel,
    init1=None,
    init2=None,
    max_iters: int = 100,
    tol: float = 1e-8,
    inner_iters: int = 200,
) -> AltMaxResult:
    """Alternate concave ascents over p1 and p2 until a sweep gains < tol.

    The reported value never decreases from sweep to sweep (each accepted
    step strictly improves the objective). Converges to a coordinate-wise
    optimum, which need not be the global product-distribution optimum;
    see maximize_sum_rate for restarts.
    """
    n = channel.n
    u = as_distribution(init1, n) if init1 is not None else np.full(n, 1.0 / n)
    v = as_distribution(init2, n) if init2 is not None else np.full(n, 1.0 / n)
    ops = _good_ops(channel)
    value = sum_rate(channel, u, v)
    sweep_values = []
    converged = False
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        st = ops.products(np.column_stack([v, xlog2x(v)]))
        u, _ = _maximize_marginal(st[:, 0], st[:, 1], u, inner_iters)
        st = ops.products(np.column_stack([u, xlog2x(u)]), transpose=True)
        v, new_value = _maximize_marginal(st[:, 0], st[:, 1], v, inner_iters)
        sweep_values.append(new_value)
        if new_value - value < tol:
            value = max(value, new_value)
            converged = True
            break
        value = new_value
    return AltMaxResult(
        p1=ProbVector(u / u.sum()),
        p2=ProbVector(v / v.sum()),
        value=value,
        iterations=iterations,
        converged=converged,
        sweep_values=tuple(sweep_values),
    )


def maximize_sum_rate(
    channel: Channel,
    restarts: int = 8,
    seed: int = 0,
    max_iters: int = 100,
    tol: float = 1e-8,
    inner_iters: int = 200,
) -> AltMaxResult:
    """Best alternating-maximization run from uniform plus random restarts."""
    if restarts < 0:
        raise ValueError(f"restarts must be >= 0, got {restarts}")
    best = alternating_maximization(
        channel, max_iters=max_iters, tol=tol, inner_iters=inner_iters
    )
    rng = np.random.default_rng(seed)
    n = channel.n
    for _ in range(restarts):
        init1 = rng.dirichlet(np.ones(n))
        init2 = rng.dirichlet(np.ones(n))
        run = alternating_maximization(
            channel, init1, init2, max_iters=max_iters, tol=tol, inner_iters=inner_iters
        )
        if run.value > best.value:
            best = run
    return best


# ----------------------------------------------------------------------
# Exhaustive grid oracle
# ----------------------------------------------------------------------

_BF_ALPHABET_LIMIT = 4
_BF_CHUNK = 2048
_BF_STRIP = 1 << 17


@lru_cache(maxsize=8)
def _simplex_grid(n: int, steps: int) -> np.ndarray:
    """All length-n nonnegative integer vectors summing to steps."""
    combos = itertools.combinations(range(steps + n - 1), n - 1)
    arr = np.fromiter(
        itertools.chain.from_iterable(combos), dtype=np.int64
    ).reshape(-1, n - 1)
    ext = np.empty((arr.shape[0], n + 1), dtype=np.int64)
    ext[:, 0] = -1
    ext[:, 1:n] = arr
    ext[:, n] = steps + n - 1
    grid = np.diff(ext, axis=1) - 1
    grid.flags.writeable = False
    return grid


@dataclass(frozen=True)
class BruteForceResult:
    value: float
    p1: ProbVector
    p2: ProbVector


def brute_force_sum_capacity(channel: Channel, grid_steps: int) -> BruteForceResult:
    """Exact maximum of sum_rate over all pairs of grid marginals.

    Enumerates every pair of pmfs with entries that are multiples of
    1/grid_steps. Restricted to alphabets of at most 4 symbols; the pair
    count grows like grid_steps^(2 alphabet - 2). On the grid, gamma is an
    exact rational k/grid_steps^2, so the erasure-entropy term is a table
    lookup; the scan runs in float32 (about 1e-6 slack on the argmax) and
    the winning pair is re-evaluated in float64.
    """
    n = channel.n
    if n > _BF_ALPHABET_LIMIT:
        raise ValueError(
            f"exhaustive search is limited to alphabets of {_BF_ALPHABET_LIMIT}; "
            f"this channel has 2^{channel.m} = {n} symbols"
        )
    if not 1 <= grid_steps <= 255:
        raise ValueError(f"grid_steps must be in 1..255, got {grid_steps}")
    comps = _simplex_grid(n, grid_steps)
    K = comps.shape[0]
    U = (comps / grid_steps).astype(np.float32)
    UL = xlog2x(comps / grid_steps).astype(np.float32)
    good = (1 - channel.matrix.to_dense()).astype(np.float32)
    # Left factor [ul | u], right factor [good @ u ; good @ ul] so one matmul
    # yields the two pair-dependent entropy terms at once.
    left = np.hstack([UL, U])
    right = np.vstack([good @ U.T, good @ UL.T])
    comps_f = comps.astype(np.float32)
    right_int = good @ comps_f.T  # integer-valued: gamma * steps^2 is exact
    s2 = grid_steps * grid_steps
    table = xlog2x(1.0 - np.arange(s2 + 1) / s2).astype(np.float32)
    best = np.float32(np.inf)
    best_pos = 0
    buf_b = np.empty((min(_BF_CHUNK, K), K), dtype=np.float32)
    buf_g = np.empty((min(_BF_CHUNK, K), K), dtype=np.float32)
    idx = np.empty(_BF_STRIP, dtype=np.uint16)
    tmp = np.empty(_BF_STRIP, dtype=np.float32)
    for lo in range(0, K, _BF_CHUNK):
        hi = min(lo + _BF_CHUNK, K)
        c = hi - lo
        np.matmul(left[lo:hi], right, out=buf_b[:c])
        np.matmul(comps_f[lo:hi], right_int, out=buf_g[:c])
        flat_b = buf_b[:c].reshape(-1)
        flat_g = buf_g[:c].reshape(-1)
        for s in range(0, flat_b.size, _BF_STRIP):
            e = min(s + _BF_STRIP, flat_b.size)
            w = e - s
            np.copyto(idx[:w], flat_g[s:e], casting="unsafe")
            np.take(table, idx[:w], out=tmp[:w])
            np.add(tmp[:w], flat_b[s:e], out=tmp[:w])
            j = int(np.argmin(tmp[:w]))
            if tmp[j] < best:
                best = tmp[j]
                best_pos = lo * K + s + j
    p1 = ProbVector(comps[best_pos // K] / grid_steps)
    p2 = ProbVector(comps[best_pos % K] / grid_steps)
    return BruteForceResult(value=sum_rate(channel, p1, p2), p1=p1, p2=p2)


# ----------------------------------------------------------------------
# Uniform layering and tail bound
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class UniformDecomposition:
    """A pmf written as a convex combination of nested uniform pmfs.

    supports is strictly decreasing (each a frozenset of 1-based symbols);
    weights[j] is the mass carried by the uniform pmf on supports[j].
    """

    alphabet_size: int
    weights: tuple[float, ...]
    supports: tuple[frozenset, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.supports) or not self.weights:
            raise ValueError("weights and supports must be equal-length and nonempty")
        for earlier, later in zip(self.supports, self.supports[1:]):
            if not (later < earlier):
                raise ValueError("supports must be strictly nested, widest first")
        if min(self.weights) <= 0:
            raise ValueError("weights must be positive")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")

    def reconstruct(self) -> np.ndarray:
        arr = np.zeros(self.alphabet_size)
        for w, support in zip(self.weights, self.supports):
            share = w / len(support)
            for symbol in support:
                arr[symbol - 1] += share
        return arr

    def mass_on_supports_at_most(self, size_limit: float) -> float:
        """Total weight of layers whose support has at most size_limit symbols."""
        return sum(w for w, s in zip(self.weights, self.supports) if len(s) <= size_limit)


def decompose_into_uniforms(p) -> UniformDecomposition:
    """Layer a pmf into nested uniforms by slicing at its distinct values.

    With the distinct positive masses v_1 < ... < v_k, layer j is uniform
    on S_j = {x : p(x) >= v_j} with weight |S_1| v_1 for j = 1 and
    |S_j| (v_j - v_{j-1}) after; the layers reconstruct p exactly up to
    float accumulation.
    """
    arr = as_distribution(p)
    values = np.unique(arr[arr > 0])
    weights = []
    supports = []
    prev = 0.0
    for v in values:
        members = np.nonzero(arr >= v)[0]
        weights.append(float(len(members) * (v - prev)))
        supports.append(frozenset(int(i) + 1 for i in members))
        prev = float(v)
    total = sum(weights)
    if abs(total - 1.0) > 1e-9:
        raise InvariantViolation(f"layer weights sum to {total!r}, expected 1")
    return UniformDecomposition(
        alphabet_size=arr.size, weights=tuple(weights), supports=tuple(supports)
    )


def tail_mass_bound(entropy_bits_value: float, alphabet_size: int, subset_size: int) -> float:
    """Upper bound on the mass any subset of subset_size symbols can carry,
    given only the pmf's entropy:

        bound = K * (1 - (H - 1) / log2(N)),  K = (1 - log2(|T|) / log2(N))^-1.
    """
    if not isinstance(alphabet_size, int) or alphabet_size < 2:
        raise ValueError(f"alphabet_size must be an integer >= 2, got {alphabet_size!r}")
    if not isinstance(subset_size, int) or subset_size < 1:
        raise ValueError(f"subset_size must be a positive integer, got {subset_size!r}")
    if subset_size >= alphabet_size:
        raise ValueError(
            f"subset_size must be < alphabet_size, got {subset_size} >= {alphabet_size}"
        )
    log_n = np.log2(alphabet_size)
    if not -1e-9 <= entropy_bits_value <= log_n + 1e-9:
        raise ValueError(
            f"entropy must lie in [0, log2({alphabet_size})], got {entropy_bits_value}"
        )
    k_factor = 1.0 / (1.0 - np.log2(subset_size) / log_n)
    return float(k_factor * (1.0 - (entropy_bits_value - 1.0) / log_n))
