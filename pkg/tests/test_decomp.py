import numpy as np
import pytest

from conftest import gram, rel
from tpreg.decomp import (
    NotSymmetricError,
    RtsvdConfig,
    load_factors,
    rtsvd,
    save_factors,
    save_rtsvd,
    tevd,
    truncation_error_formula,
    tsvd,
    tubal_rank,
)
from tpreg.tcore import dft_mode3, fro_norm, identity, tprod, ttranspose


def recon(f):
    return tprod(tprod(f.U, f.S), ttranspose(f.V))


def outer(rng, l, m, n):
    return tprod(rng.standard_normal((l, 1, n)), ttranspose(rng.standard_normal((m, 1, n))))


def test_tsvd_full_reconstruction_and_invariants(rng):
    a = rng.standard_normal((7, 5, 4))
    f = tsvd(a)
    assert rel(recon(f), a) <= 1e-8
    for q in (f.U, f.V):
        assert fro_norm(tprod(ttranspose(q), q) - identity(5, 4)) <= 1e-10
    off = ~np.eye(5, dtype=bool)
    assert np.all(f.S[off] == 0.0)
    norms = f.tube_norms()
    assert np.all(np.diff(norms) <= 1e-12)


def test_tsvd_n1_matches_matrix_svd(rng):
    a = rng.standard_normal((5, 3, 1))
    f = tsvd(a)
    assert np.allclose(np.diag(f.S[:, :, 0]), np.linalg.svd(a[:, :, 0], compute_uv=False), atol=1e-10)


def test_tsvd_of_fdiagonal(rng):
    d = np.zeros((3, 3, 1))
    d[:, :, 0] = np.diag([3.0, 2.0, 1.0])
    f = tsvd(d)
    assert np.allclose(f.S, d) and np.allclose(f.U, identity(3, 1)) and np.allclose(f.V, identity(3, 1))


def test_tsvd_k_range():
    with pytest.raises(ValueError):
        tsvd(np.ones((3, 2, 2)), 3)
    with pytest.raises(ValueError):
        tsvd(np.ones((3, 2, 2)), 0)


def test_truncation_error_formula_variants(rng):
    a = rng.standard_normal((6, 4, 3))
    direct = fro_norm(a - recon(tsvd(a, 2)))
    assert abs(direct - truncation_error_formula(a, 2, squared=True)) <= 1e-8
    # the unsquared tail sum is not the Frobenius error
    assert abs(direct - truncation_error_formula(a, 2, squared=False)) > 1e-3


def test_tevd_identity_and_matrix_oracle(rng):
    f = tevd(identity(3, 4))
    assert np.allclose(f.D, identity(3, 4), atol=1e-14)
    s = rng.standard_normal((4, 4))
    s = (s + s.T)[:, :, None]
    lam = np.diag(tevd(s).D[:, :, 0])
    oracle = np.linalg.eigvalsh(s[:, :, 0])
    assert np.allclose(lam, oracle[np.argsort(-np.abs(oracle))], atol=1e-10)


def test_tevd_gram_reconstruction(rng):
    a = gram(rng, 5, 4, 3)
    f = tevd(a, 4)
    assert rel(tprod(tprod(f.W, f.D), ttranspose(f.W)), a) <= 1e-8
    d_hat = np.fft.fft(f.D, axis=2)
    assert np.all(np.diagonal(d_hat[:, :, 0]).real >= -1e-10)
    assert np.allclose(np.sort(f.tube_norms()), np.sort(tsvd(a).tube_norms()), atol=1e-8)


def test_tevd_rejects_non_symmetric(rng):
    with pytest.raises(NotSymmetricError, match="spectral slice"):
        tevd(rng.standard_normal((3, 3, 2)))


def test_tubal_rank(rng):
    assert tubal_rank(identity(4, 3)) == 4
    assert tubal_rank(np.zeros((3, 3, 2))) == 0
    assert tubal_rank(outer(rng, 5, 4, 3) + outer(rng, 5, 4, 3)) == 2
    a, b = rng.standard_normal((5, 4, 3)), outer(rng, 4, 3, 3)
    assert tubal_rank(tprod(a, b)) <= min(tubal_rank(a), tubal_rank(b))


def test_rtsvd_empty_when_epsilon_large(rng):
    a = rng.standard_normal((4, 3, 2))
    res = rtsvd(a, RtsvdConfig(epsilon=fro_norm(a)))
    assert res.r == 0 and res.factors is None
    res = rtsvd(a, RtsvdConfig(epsilon=2 * fro_norm(a)))
    assert res.r == 0 and res.factors is None


def test_rtsvd_rank_one(rng):
    a = outer(rng, 6, 5, 4)
    eps = 1e-6 * fro_norm(a)
    res = rtsvd(a, RtsvdConfig(epsilon=eps, seed=3))
    assert res.r == 1 and res.eta_trace[0] <= eps**2


def test_rtsvd_eta_tracks_residual(rng):
    a = rng.standard_normal((8, 6, 4))
    res = rtsvd(a, RtsvdConfig(epsilon=1e-8, seed=1, check_residual=True))
    na2 = fro_norm(a) ** 2
    for eta, true in zip(res.eta_trace, res.residual_trace):
        assert abs(eta - true) <= 1e-6 * na2
    assert all(x >= y - 1e-9 * na2 for x, y in zip(res.eta_trace, res.eta_trace[1:]))
    assert fro_norm(a - recon(res.factors)) ** 2 <= 1e-16 + 1e-6 * na2


def test_rtsvd_truncation_flag(rng):
    a = rng.standard_normal((6, 5, 3))
    res = rtsvd(a, RtsvdConfig(epsilon=1e-10, max_rank=2))
    assert res.r == 2 and res.truncated


def test_rtsvd_deterministic(rng):
    a = rng.standard_normal((6, 5, 3))
    r1 = rtsvd(a, RtsvdConfig(epsilon=0.5, seed=9))
    r2 = rtsvd(a, RtsvdConfig(epsilon=0.5, seed=9))
    assert r1.eta_trace == r2.eta_trace
    assert np.array_equal(r1.factors.U, r2.factors.U)


def test_rtsvd_config_validation():
    with pytest.raises(ValueError):
        RtsvdConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        RtsvdConfig(epsilon=1.0, oversample=-1)


def test_factor_serialization(tmp_path, rng):
    a = rng.standard_normal((5, 4, 3))
    f = tsvd(a, 2)
    path = save_factors(tmp_path / "f", f, seed=1)
    g, meta = load_factors(path)
    assert np.array_equal(g.U, f.U) and np.array_equal(g.S, f.S) and meta["k"] == 2
    res = rtsvd(a, RtsvdConfig(epsilon=0.1, seed=2))
    _, meta = load_factors(save_rtsvd(tmp_path / "r", res))
    assert meta["eta_trace"] == list(res.eta_trace) and meta["seed"] == 2
