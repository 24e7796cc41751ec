import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopcap import (
    ERASURE,
    Channel,
    ChannelMatrix,
    ConstructionParams,
    channel_apply,
    channel_from_matrix,
    check_block_goodness,
    construct_channel,
    default_f,
    default_g,
    default_p,
    deserialize_channel,
    estimate_bad_density,
    memory_cap,
    sample_matrix,
    serialize_channel,
)
from coopcap.channel import DEFAULT_MAX_M, MAX_M_ENV_VAR
from coopcap.errors import (
    ChannelFormatError,
    ConstructionExhausted,
    MemoryCapExceeded,
)


def dense_matrix(rows):
    return ChannelMatrix.from_dense(np.array(rows, dtype=np.uint8))


def random_dense(rng, m):
    n = 1 << m
    return (rng.random((n, n)) < 0.5).astype(np.uint8)


# ----------------------------------------------------------------------
# Defaults and parameters
# ----------------------------------------------------------------------


def test_default_g_schedule():
    assert default_g(1) == 1
    assert default_g(2) == 2
    assert default_g(3) == 3  # 2*ceil(log2 3) = 4 clamps to m
    assert default_g(4) == 4
    assert default_g(5) == 5
    assert default_g(8) == 6
    assert default_g(10) == 8
    assert default_g(12) == 8
    assert default_g(16) == 8
    with pytest.raises(ValueError):
        default_g(0)


def test_default_f_schedule():
    assert default_f(1) == 1
    assert default_f(2) == 4
    assert default_f(3) == 8  # m^2 = 9 clamps to 2^m
    assert default_f(4) == 16
    assert default_f(10) == 100
    with pytest.raises(ValueError):
        default_f(0)


def test_default_p():
    assert default_p(0.05) == 0.975
    assert default_p(0.5) == 0.75
    for eps in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            default_p(eps)


def test_construction_params_validation():
    good = dict(m=4, p=0.9, epsilon=0.1, f_of_m=16, g_of_m=4, seed=0)
    ConstructionParams(**good)
    for key, bad in [
        ("m", 0),
        ("m", 2.0),
        ("p", -0.1),
        ("p", 1.1),
        ("epsilon", 0.0),
        ("epsilon", 1.0),
        ("g_of_m", 0),
        ("g_of_m", 5),
        ("f_of_m", 0),
        ("f_of_m", 17),
        ("seed", -1),
        ("seed", 1 << 64),
        ("seed", "x"),
    ]:
        with pytest.raises(ValueError):
            ConstructionParams(**{**good, key: bad})


def test_with_defaults_fills_schedule():
    params = ConstructionParams.with_defaults(8, epsilon=0.2, seed=7)
    assert params.p == default_p(0.2)
    assert params.f_of_m == default_f(8)
    assert params.g_of_m == default_g(8)
    assert params.seed == 7
    explicit = ConstructionParams.with_defaults(8, p=0.5, f_of_m=10, g_of_m=3)
    assert (explicit.p, explicit.f_of_m, explicit.g_of_m) == (0.5, 10, 3)


def test_density_bound_applicable_window():
    assert ConstructionParams.with_defaults(4, epsilon=0.1).density_bound_applicable
    low = ConstructionParams.with_defaults(4, epsilon=0.1, p=0.5)
    assert not low.density_bound_applicable
    edge = ConstructionParams.with_defaults(4, epsilon=0.1, p=1.0)
    assert not edge.density_bound_applicable


# ----------------------------------------------------------------------
# ChannelMatrix
# ----------------------------------------------------------------------


def test_matrix_round_trip_and_accessors():
    rng = np.random.default_rng(0)
    for m in (1, 2, 3, 4):
        dense = random_dense(rng, m)
        mat = ChannelMatrix.from_dense(dense)
        assert mat.m == m
        assert mat.n == 1 << m
        assert mat.bit_length == 1 << (2 * m)
        assert np.array_equal(mat.to_dense(), dense)
        assert np.array_equal(mat.bits, dense.reshape(-1))
        for i in range(mat.n):
            assert np.array_equal(mat.row_bits(i + 1), dense[i])
            assert np.array_equal(mat.col_bits(i + 1), dense[:, i])
            for j in range(mat.n):
                assert mat.bit(i + 1, j + 1) == dense[i, j]


def test_matrix_block_accessors_match_dense():
    rng = np.random.default_rng(1)
    for m in (2, 3):
        dense = random_dense(rng, m)
        mat = ChannelMatrix.from_dense(dense)
        for g in range(1, m + 1):
            width = 1 << g
            for x in range(1, mat.n + 1):
                for k in range(mat.n >> g):
                    sl = slice(k * width, (k + 1) * width)
                    assert np.array_equal(
                        mat.row_block_bits(x, k, g), dense[x - 1, sl]
                    )
                    assert np.array_equal(
                        mat.col_block_bits(x, k, g), dense[sl, x - 1]
                    )


def test_matrix_bit_bounds_checked():
    mat = dense_matrix([[0, 1], [1, 0]])
    for pair in [(0, 1), (1, 0), (3, 1), (1, 3)]:
        with pytest.raises(ValueError):
            mat.bit(*pair)


def test_matrix_validation():
    with pytest.raises(ValueError):
        ChannelMatrix.from_dense(np.zeros((3, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        ChannelMatrix.from_dense(np.zeros((2, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        ChannelMatrix.from_dense(np.full((2, 2), 2, dtype=np.uint8))
    with pytest.raises(ValueError):
        ChannelMatrix(m=2, packed_rows=np.zeros((4, 2), dtype=np.uint8))
    # stray padding bits past column n
    with pytest.raises(ValueError):
        ChannelMatrix(m=1, packed_rows=np.array([[0b11100000], [0]], dtype=np.uint8))


def test_matrix_equality_by_content():
    a = dense_matrix([[0, 1], [1, 0]])
    b = dense_matrix([[0, 1], [1, 0]])
    c = dense_matrix([[0, 0], [1, 0]])
    assert a == b
    assert a != c
    assert a != "not a matrix"


def test_matrix_is_immutable():
    mat = dense_matrix([[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        mat.packed_rows[0, 0] = 255


@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_matrix_dense_pack_round_trip(m, seed):
    dense = random_dense(np.random.default_rng(seed), m)
    assert np.array_equal(ChannelMatrix.from_dense(dense).to_dense(), dense)


# ----------------------------------------------------------------------
# Sampling
# ----------------------------------------------------------------------


def test_sample_matrix_deterministic():
    a = sample_matrix(4, 0.3, seed=11)
    b = sample_matrix(4, 0.3, seed=11)
    c = sample_matrix(4, 0.3, seed=12)
    assert a == b
    assert a != c


def test_sample_matrix_extremes():
    assert not sample_matrix(3, 0.0, seed=0).bits.any()
    assert sample_matrix(3, 1.0, seed=0).bits.all()


def test_sample_matrix_density_near_p():
    mat = sample_matrix(6, 0.3, seed=5)
    frac = mat.bits.mean()
    # 64*64 draws, sigma ~ 0.0072; allow 4 sigma
    assert abs(frac - 0.3) < 0.03


def test_sample_matrix_chunk_size_does_not_change_stream(monkeypatch):
    import coopcap.channel as chmod

    whole = sample_matrix(4, 0.4, seed=9)
    monkeypatch.setattr(chmod, "_SAMPLE_CHUNK_ROWS", 3)
    chunked = sample_matrix(4, 0.4, seed=9)
    assert whole == chunked


def test_sample_matrix_validation():
    with pytest.raises(ValueError):
        sample_matrix(0, 0.5, seed=0)
    with pytest.raises(ValueError):
        sample_matrix(2, 1.5, seed=0)


def test_memory_cap_enforced(monkeypatch):
    assert memory_cap() == DEFAULT_MAX_M
    with pytest.raises(MemoryCapExceeded):
        sample_matrix(DEFAULT_MAX_M + 1, 0.5, seed=0)
    monkeypatch.setenv(MAX_M_ENV_VAR, "4")
    assert memory_cap() == 4
    with pytest.raises(MemoryCapExceeded):
        sample_matrix(5, 0.5, seed=0)
    sample_matrix(4, 0.5, seed=0)
    monkeypatch.setenv(MAX_M_ENV_VAR, "zero")
    with pytest.raises(ValueError):
        memory_cap()
    monkeypatch.setenv(MAX_M_ENV_VAR, "0")
    with pytest.raises(ValueError):
        memory_cap()


# ----------------------------------------------------------------------
# Block property check
# ----------------------------------------------------------------------


def block_check_oracle(dense, g):
    """Direct nested-loop reading of the definition."""
    n = dense.shape[0]
    width = 1 << g
    failures = []
    for x in range(n):
        for k in range(n // width):
            if dense[x, k * width : (k + 1) * width].all():
                failures.append(("row", x + 1, k))
    for k in range(n // width):
        for x in range(n):
            if dense[k * width : (k + 1) * width, x].all():
                failures.append(("col", x + 1, k))
    return failures


def test_block_check_trivial_cases():
    n = 8
    good = ChannelMatrix.from_dense(np.zeros((n, n), dtype=np.uint8))
    bad = ChannelMatrix.from_dense(np.ones((n, n), dtype=np.uint8))
    for g in (1, 2, 3):
        assert check_block_goodness(good, g).passed
        result = check_block_goodness(bad, g)
        assert not result.passed
        assert len(result.failures) == 2 * n * (n >> g)


def test_block_check_pinpoints_failure():
    dense = np.zeros((4, 4), dtype=np.uint8)
    dense[1, 2:4] = 1
    result = check_block_goodness(ChannelMatrix.from_dense(dense), 1)
    assert not result.passed
    assert result.failures == (("row", 2, 1),)


def test_block_check_checkerboard_passes():
    dense = np.fromfunction(lambda i, j: (i + j) % 2, (4, 4)).astype(np.uint8)
    assert check_block_goodness(ChannelMatrix.from_dense(dense), 1).passed


def test_block_check_validation():
    mat = dense_matrix([[0, 1], [1, 0]])
    for g in (0, 2):
        with pytest.raises(ValueError):
            check_block_goodness(mat, g)


@given(st.integers(1, 3), st.integers(0, 2**32 - 1), st.integers(1, 3))
@settings(max_examples=60, deadline=None)
def test_block_check_matches_oracle(m, seed, g):
    g = min(g, m)
    dense = (np.random.default_rng(seed).random((1 << m, 1 << m)) < 0.7).astype(
        np.uint8
    )
    result = check_block_goodness(ChannelMatrix.from_dense(dense), g)
    oracle = block_check_oracle(dense, g)
    assert sorted(result.failures) == sorted(oracle)
    assert result.passed == (not oracle)


# ----------------------------------------------------------------------
# Density estimation
# ----------------------------------------------------------------------


def test_density_all_bad_never_violates():
    mat = ChannelMatrix.from_dense(np.ones((8, 8), dtype=np.uint8))
    report = estimate_bad_density(mat, f=4, epsilon=0.2, trials=20, seed=0)
    assert report.violations == 0
    assert report.min_bad_fraction_observed == 1.0
    assert report.trials == 20
    assert report.submatrix_size_used == 4


def test_density_all_good_always_violates():
    mat = ChannelMatrix.from_dense(np.zeros((8, 8), dtype=np.uint8))
    report = estimate_bad_density(mat, f=4, epsilon=0.2, trials=20, seed=0)
    assert report.violations == 20
    assert report.min_bad_fraction_observed == 0.0


def test_density_threshold_is_strict():
    # exactly 1 - epsilon bad must count as a violation
    dense = np.ones((2, 2), dtype=np.uint8)
    dense[0, 0] = 0
    mat = ChannelMatrix.from_dense(dense)
    report = estimate_bad_density(mat, f=2, epsilon=0.25, trials=5, seed=0)
    assert report.violations == 5
    assert report.min_bad_fraction_observed == 0.75


def test_density_rectangular_size_pairs():
    dense = np.ones((4, 4), dtype=np.uint8)
    dense[0] = 0  # one clean row
    mat = ChannelMatrix.from_dense(dense)
    report = estimate_bad_density(
        mat, f=2, epsilon=0.5, trials=6, seed=3, size_pairs=[(4, 1), (1, 4)]
    )
    assert report.trials == 6
    # (4, 1) submatrices always include the clean row: bad fraction 0.75
    assert report.min_bad_fraction_observed <= 0.75
    with pytest.raises(ValueError):
        estimate_bad_density(mat, 2, 0.5, 4, 0, size_pairs=[(0, 2)])


def test_density_validation():
    mat = dense_matrix([[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        estimate_bad_density(mat, 3, 0.5, 4, 0)
    with pytest.raises(ValueError):
        estimate_bad_density(mat, 2, 0.0, 4, 0)
    with pytest.raises(ValueError):
        estimate_bad_density(mat, 2, 0.5, 0, 0)


# ----------------------------------------------------------------------
# Construction
# ----------------------------------------------------------------------


def test_construct_channel_reproducible_and_indexed():
    params = ConstructionParams(m=3, p=0.6, epsilon=0.3, f_of_m=4, g_of_m=2, seed=1)
    ch = construct_channel(params)
    assert ch.block_property_verified
    assert ch.construction_attempts >= 1
    # attempt i uses seed + i
    expected = sample_matrix(3, 0.6, params.seed + ch.construction_attempts - 1)
    assert ch.matrix == expected
    again = construct_channel(params)
    assert again.matrix == ch.matrix
    assert again.construction_attempts == ch.construction_attempts


def test_construct_channel_attaches_density_report():
    params = ConstructionParams(m=3, p=0.5, epsilon=0.4, f_of_m=4, g_of_m=3, seed=0)
    ch = construct_channel(params, density_trials=17)
    assert ch.density_report is not None
    assert ch.density_report.trials == 17
    bare = construct_channel(params, density_trials=0)
    assert bare.density_report is None


def test_construct_channel_exhaustion():
    params = ConstructionParams(m=2, p=1.0, epsilon=0.5, f_of_m=4, g_of_m=1, seed=0)
    with pytest.raises(ConstructionExhausted) as err:
        construct_channel(params, max_attempts=3)
    assert "3 attempts" in str(err.value)
    assert "2^" in str(err.value)
    with pytest.raises(ValueError):
        construct_channel(params, max_attempts=0)


def test_channel_from_matrix_verifies_honestly():
    goodmat = ChannelMatrix.from_dense(np.zeros((4, 4), dtype=np.uint8))
    assert channel_from_matrix(goodmat, g=1).block_property_verified
    badmat = ChannelMatrix.from_dense(np.ones((4, 4), dtype=np.uint8))
    assert not channel_from_matrix(badmat, g=1).block_property_verified
    assert not channel_from_matrix(goodmat, g=1, verify=False).block_property_verified


def test_channel_m_mismatch_rejected():
    mat = dense_matrix([[0, 1], [1, 0]])
    params = ConstructionParams(m=2, p=0.5, epsilon=0.5, f_of_m=4, g_of_m=1, seed=0)
    with pytest.raises(ValueError):
        Channel(matrix=mat, params=params, block_property_verified=False)


def test_channel_apply():
    ch = channel_from_matrix(dense_matrix([[0, 1], [1, 0]]), g=1)
    assert channel_apply(ch, 1, 1) == (1, 1)
    assert channel_apply(ch, 1, 2) == ERASURE
    assert channel_apply(ch, 2, 1) == ERASURE
    assert channel_apply(ch, 2, 2) == (2, 2)


# ----------------------------------------------------------------------
# Serialization
# ----------------------------------------------------------------------


def roundtrip(tmp_path, channel, binary):
    path = tmp_path / ("b.maccf" if binary else "t.maccf")
    serialize_channel(channel, path, binary=binary)
    return path, deserialize_channel(path)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
@pytest.mark.parametrize("binary", [False, True])
def test_serialize_round_trip(tmp_path, m, binary):
    params = ConstructionParams(
        m=m, p=0.4, epsilon=0.3, f_of_m=min(4, 1 << m), g_of_m=1, seed=13
    )
    channel = Channel(
        matrix=sample_matrix(m, 0.4, 13), params=params, block_property_verified=False
    )
    _, loaded = roundtrip(tmp_path, channel, binary)
    assert loaded.matrix == channel.matrix
    assert loaded.params == channel.params


def test_text_format_shape(tmp_path):
    ch = channel_from_matrix(dense_matrix([[0, 1], [1, 0]]), g=1, p=0.25, epsilon=0.5)
    path = tmp_path / "c.maccf"
    serialize_channel(ch, path)
    lines = path.read_bytes().split(b"\n")
    assert lines[0].startswith(b"MACCF 1 m=1 p=0.25 eps=0.5 ")
    assert lines[1:] == [b"01", b"10", b""]


def test_text_missing_final_newline_accepted(tmp_path):
    ch = channel_from_matrix(dense_matrix([[0, 1], [1, 0]]), g=1)
    path = tmp_path / "c.maccf"
    serialize_channel(ch, path)
    data = path.read_bytes()
    assert data.endswith(b"\n")
    path.write_bytes(data[:-1])
    assert deserialize_channel(path).matrix == ch.matrix


def test_deserialize_reverifies_block_property(tmp_path):
    badmat = ChannelMatrix.from_dense(np.ones((4, 4), dtype=np.uint8))
    ch = channel_from_matrix(badmat, g=1, verify=False)
    path = tmp_path / "bad.maccf"
    serialize_channel(ch, path)
    assert not deserialize_channel(path).block_property_verified
    assert not deserialize_channel(path, verify=False).block_property_verified
    goodmat = ChannelMatrix.from_dense(np.zeros((4, 4), dtype=np.uint8))
    path2 = tmp_path / "good.maccf"
    serialize_channel(channel_from_matrix(goodmat, g=1, verify=False), path2)
    assert deserialize_channel(path2).block_property_verified


def write_variant(tmp_path, text, body=b""):
    path = tmp_path / "x.maccf"
    path.write_bytes(text.encode() + body)
    return path


def test_deserialize_header_errors(tmp_path):
    cases = [
        ("", None),  # no newline at all
        ("MACCX 1 m=1 p=0.5 eps=0.5 f=2 g=1 seed=0\n", 0),
        ("MACCF 9 m=1 p=0.5 eps=0.5 f=2 g=1 seed=0\n", 6),
        ("MACCF 1 m=1 p=0.5 eps=0.5 f=2 g=1\n", 0),  # token count
        ("MACCF 1 q=1 p=0.5 eps=0.5 f=2 g=1 seed=0\n", 8),
        ("MACCF 1 m=one p=0.5 eps=0.5 f=2 g=1 seed=0\n", 10),
        ("MACCF 1 m=2 p=0.5 eps=0.5 f=2 g=3 seed=0\n", 0),  # g > m
    ]
    for text, offset in cases:
        path = write_variant(tmp_path, text, b"0110" if "m=1" in text else b"")
        with pytest.raises(ChannelFormatError) as err:
            deserialize_channel(path)
        if offset is not None:
            assert err.value.offset == offset, text


def test_deserialize_body_errors(tmp_path):
    header = "MACCF 1 m=1 p=0.5 eps=0.5 f=2 g=1 seed=0\n"
    with pytest.raises(ChannelFormatError, match="expected"):
        deserialize_channel(write_variant(tmp_path, header, b"01\n10\n99"))
    with pytest.raises(ChannelFormatError, match="0/1"):
        deserialize_channel(write_variant(tmp_path, header, b"0x\n10\n"))
    with pytest.raises(ChannelFormatError, match="newline"):
        deserialize_channel(write_variant(tmp_path, header, b"01010\n"))
    bad = write_variant(tmp_path, header, b"0a\n10\n")
    with pytest.raises(ChannelFormatError) as err:
        deserialize_channel(bad)
    assert err.value.offset == len(header) + 1


def test_deserialize_binary_exact_length(tmp_path):
    header = "MACCF 1 m=1 p=0.5 eps=0.5 f=2 g=1 seed=0\n"
    # 4 bits pack into 1 byte: 0b0110 -> matrix [[0,1],[1,0]]
    path = write_variant(tmp_path, header, bytes([0b01100000]))
    ch = deserialize_channel(path)
    assert np.array_equal(ch.matrix.to_dense(), [[0, 1], [1, 0]])


@given(st.integers(1, 3), st.integers(0, 2**32 - 1), st.booleans())
@settings(max_examples=25, deadline=None)
def test_serialize_round_trip_property(m, seed, binary):
    import tempfile

    params = ConstructionParams(
        m=m, p=0.5, epsilon=0.5, f_of_m=1, g_of_m=1, seed=seed % (1 << 63)
    )
    channel = Channel(
        matrix=sample_matrix(m, 0.5, seed), params=params, block_property_verified=False
    )
    with tempfile.NamedTemporaryFile(suffix=".maccf") as fh:
        serialize_channel(channel, fh.name, binary=binary)
        loaded = deserialize_channel(fh.name)
    assert loaded.matrix == channel.matrix
    assert loaded.params == channel.params
