import io
import math

import numpy as np
import pytest

import funcrate as fr
from funcrate.simulate import (
    GridSpec,
    PathBatch,
    _bulk_increments,
    dump_paths,
    load_paths,
    path_stream,
    sample_increment,
    simulate_block,
    simulate_path,
    subsample,
)

ZERO_EULER = fr.EulerDiffusion(
    drift=lambda x: 0.0 * x, diffusion=lambda x: 0.0 * x, x0=1.5
)


# ---------------------------------------------------------------------------
# GridSpec
# ---------------------------------------------------------------------------


def test_gridspec_valid():
    g = GridSpec(horizon=1.0, n_ref=2048, eval_ns=(4, 8, 16, 32))
    assert g.dt == 1.0 / 2048
    assert g.times()[0] == 0.0 and g.times()[-1] == 1.0
    assert len(g.times()) == 2049


def test_gridspec_allows_reference_level_itself():
    GridSpec(horizon=1.0, n_ref=64, eval_ns=(64,))
    GridSpec(horizon=1.0, n_ref=2048, eval_ns=(16, 32, 2048))


def test_gridspec_rejects_bad_inputs():
    with pytest.raises(ValueError):
        GridSpec(horizon=0.0, n_ref=64, eval_ns=(1,))
    with pytest.raises(ValueError):
        GridSpec(horizon=1.0, n_ref=100, eval_ns=(1,))  # not a power of two
    with pytest.raises(ValueError):
        GridSpec(horizon=1.0, n_ref=2048, eval_ns=(3,))  # 3 does not divide
    with pytest.raises(ValueError):
        GridSpec(horizon=1.0, n_ref=2048, eval_ns=(64,))  # 64*64 > 2048
    with pytest.raises(ValueError):
        GridSpec(horizon=1.0, n_ref=2048, eval_ns=(8, 4))  # not sorted
    with pytest.raises(ValueError):
        GridSpec(horizon=1.0, n_ref=2048, eval_ns=())


# ---------------------------------------------------------------------------
# increments
# ---------------------------------------------------------------------------


def test_brownian_increment_moments():
    stream = path_stream(99, 0)
    draws = _bulk_increments(fr.BrownianScaled(1.0), 1.0, 10**6, stream)
    assert abs(draws.mean()) <= 4e-3
    assert abs(draws.var() - 1.0) <= 1e-2


def test_brownian_increment_kurtosis():
    stream = path_stream(99, 1)
    z = _bulk_increments(fr.BrownianScaled(1.0), 1.0, 10**6, stream)
    kurt = np.mean(z**4) / np.mean(z**2) ** 2
    assert abs(kurt - 3.0) <= 0.05


def test_cauchy_increment_median():
    stream = path_stream(99, 2)
    draws = _bulk_increments(fr.SymmetricStable(1.0), 1.0, 10**6, stream)
    assert abs(np.median(draws)) <= 5e-3


def test_increment_determinism():
    a = sample_increment(fr.BrownianScaled(1.0), 0.5, path_stream(7, 3))
    b = sample_increment(fr.BrownianScaled(1.0), 0.5, path_stream(7, 3))
    assert a == b
    c = sample_increment(fr.SymmetricStable(1.5), 0.5, path_stream(7, 4))
    d = sample_increment(fr.SymmetricStable(1.5), 0.5, path_stream(7, 4))
    assert c == d


def test_increment_rejects_bad_dt():
    with pytest.raises(ValueError):
        sample_increment(fr.BrownianScaled(1.0), 0.0, path_stream(1, 0))


def test_stable_self_similarity_quantile_scaling():
    # 0.75-quantile of increments at dt scales as dt^(1/alpha) within 2%
    model = fr.SymmetricStable(1.5)
    qs = []
    for k, dt in enumerate([2.0**-j for j in range(5)]):
        draws = _bulk_increments(model, dt, 10**6, path_stream(1234, k))
        qs.append(np.quantile(draws, 0.75))
    for j in range(1, len(qs)):
        want = qs[0] * (2.0**-j) ** (1.0 / 1.5)
        assert qs[j] == pytest.approx(want, rel=2e-2)


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


def test_euler_zero_coefficients_constant_path():
    grid = GridSpec(horizon=1.0, n_ref=128, eval_ns=(2,))
    path = simulate_path(ZERO_EULER, grid, path_stream(5, 0))
    np.testing.assert_array_equal(path, np.full(129, 1.5))


def test_brownian_terminal_variance():
    grid = GridSpec(horizon=1.0, n_ref=64, eval_ns=(1,))
    m = 10**5
    paths = simulate_block(fr.BrownianScaled(1.0), grid, 321, 0, m)
    x_T = paths[:, -1]
    var = x_T.var(ddof=1)
    se = math.sqrt(2.0 / (m - 1))  # SE of the sample variance of N(0,1)
    assert abs(var - 1.0) <= 3.0 * se


def test_path_reproducibility():
    grid = GridSpec(horizon=1.0, n_ref=256, eval_ns=(4,))
    batch = PathBatch(fr.SymmetricStable(1.5), grid, master_seed=42, m_paths=10)
    p1 = batch.path(3)
    p2 = batch.path(3)
    np.testing.assert_array_equal(p1, p2)
    assert p1[0] == 0.0


def test_block_partition_invariance():
    # the multiset of paths is identical however the index range is split
    grid = GridSpec(horizon=1.0, n_ref=128, eval_ns=(2,))
    model = fr.BrownianScaled(1.0)
    whole = simulate_block(model, grid, 777, 0, 20)
    pieces = np.vstack(
        [simulate_block(model, grid, 777, a, b) for a, b in [(0, 7), (7, 13), (13, 20)]]
    )
    np.testing.assert_array_equal(whole, pieces)


def test_block_matches_single_paths():
    grid = GridSpec(horizon=1.0, n_ref=128, eval_ns=(2,))
    model = fr.SymmetricStable(1.2, scale=0.5, x0=2.0)
    block = simulate_block(model, grid, 99, 0, 5)
    for i in range(5):
        np.testing.assert_array_equal(
            block[i], simulate_path(model, grid, path_stream(99, i))
        )


def test_euler_block_matches_single_paths():
    model = fr.EulerDiffusion(
        drift=lambda x: -x, diffusion=lambda x: 1.0 + 0.0 * x, x0=0.5
    )
    grid = GridSpec(horizon=1.0, n_ref=128, eval_ns=(2,))
    block = simulate_block(model, grid, 31, 0, 4)
    for i in range(4):
        np.testing.assert_allclose(
            block[i], simulate_path(model, grid, path_stream(31, i)), rtol=1e-12
        )


def test_multidimensional_brownian_paths():
    model = fr.BrownianScaled(1.0, x0=(1.0, -1.0), dimension=2)
    grid = GridSpec(horizon=1.0, n_ref=128, eval_ns=(2,))
    path = simulate_path(model, grid, path_stream(8, 0))
    assert path.shape == (129, 2)
    np.testing.assert_array_equal(path[0], [1.0, -1.0])


def test_nonfinite_detection():
    blowup = fr.EulerDiffusion(
        drift=lambda x: x * x * x, diffusion=lambda x: 0.0 * x, x0=50.0
    )
    grid = GridSpec(horizon=1.0, n_ref=128, eval_ns=(2,))
    with pytest.raises(fr.NonFinite) as info, np.errstate(all="ignore"):
        simulate_block(blowup, grid, 13, 0, 3)
    assert info.value.master_seed == 13
    assert info.value.path_index is not None


# ---------------------------------------------------------------------------
# subsample
# ---------------------------------------------------------------------------


def test_subsample_identity():
    grid = GridSpec(horizon=1.0, n_ref=256, eval_ns=(4,))
    path = np.arange(257.0)
    np.testing.assert_array_equal(subsample(path, grid, 256), path)


def test_subsample_example():
    grid = GridSpec(horizon=1.0, n_ref=4, eval_ns=(4,))
    path = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    np.testing.assert_array_equal(subsample(path, grid, 2), [1.0, 3.0, 5.0])


def test_subsample_not_nested():
    grid = GridSpec(horizon=1.0, n_ref=8, eval_ns=(8,))
    with pytest.raises(fr.NotNested):
        subsample(np.arange(9.0), grid, 3)


def test_subsample_nesting_property():
    grid = GridSpec(horizon=1.0, n_ref=1024, eval_ns=(2, 4, 8, 16))
    path = np.random.default_rng(0).normal(size=1025)
    for n1, n2 in [(2, 8), (4, 16), (2, 16), (8, 16)]:
        via_n2 = subsample(subsample(path, grid, n2), grid, n1)
        direct = subsample(path, grid, n1)
        np.testing.assert_array_equal(via_n2, direct)


# ---------------------------------------------------------------------------
# binary dump
# ---------------------------------------------------------------------------


def test_dump_roundtrip(tmp_path):
    grid = GridSpec(horizon=2.0, n_ref=64, eval_ns=(1,))
    batch = PathBatch(fr.BrownianScaled(1.0, x0=0.5), grid, master_seed=5, m_paths=7)
    target = tmp_path / "paths.bin"
    dump_paths(batch, target)
    header, paths = load_paths(target)
    assert header == {
        "version": 1,
        "d": 1,
        "n_ref": 64,
        "horizon": 2.0,
        "m_paths": 7,
        "master_seed": 5,
    }
    np.testing.assert_array_equal(paths, np.stack(list(batch)))


def test_dump_format_is_little_endian():
    grid = GridSpec(horizon=1.0, n_ref=64, eval_ns=(1,))
    batch = PathBatch(fr.BrownianScaled(1.0), grid, master_seed=1, m_paths=1)
    buf = io.BytesIO()
    dump_paths(batch, buf)
    raw = buf.getvalue()
    assert raw[:8] == b"FUNCRATE"
    assert int.from_bytes(raw[8:16], "little") == 1  # version
    assert int.from_bytes(raw[16:24], "little") == 1  # d
    assert int.from_bytes(raw[24:32], "little") == 64  # n_ref
    assert np.frombuffer(raw[32:40], dtype="<f8")[0] == 1.0  # T
    assert len(raw) == 56 + 65 * 8


def test_dump_rejects_bad_magic():
    with pytest.raises(ValueError, match="magic"):
        load_paths(io.BytesIO(b"\x00" * 64))


def test_seed_validation():
    with pytest.raises(ValueError):
        path_stream(-1, 0)
    with pytest.raises(ValueError):
        path_stream(1 << 64, 0)
    with pytest.raises(ValueError):
        path_stream(1, -2)
