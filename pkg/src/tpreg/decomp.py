"""Tensor SVD / EVD under the t-product and the fixed-precision randomized tSVD."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import t3d
from .tcore import (
    IMAG_TOL,
    _enforce_conjugate_symmetry,
    as_tensor3,
    dft_mode3,
    fro_norm,
    idft_mode3,
    normalize_spectral,
)

__all__ = [
    "TSvdFactors",
    "TEvdFactors",
    "RtsvdConfig",
    "RtsvdResult",
    "NotSymmetricError",
    "tsvd",
    "tsvd_spectral",
    "tevd",
    "tevd_spectral",
    "rtsvd",
    "tubal_rank",
    "truncation_error_formula",
    "hermitian_residual",
    "save_factors",
    "load_factors",
]

SYMMETRY_TOL = 1e-10


class NotSymmetricError(ValueError):
    pass


@dataclass(frozen=True)
class TSvdFactors:
    """``a ~= U * S * V^T`` with ``U`` l x k, ``S`` k x k f-diagonal, ``V`` m x k."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    @property
    def k(self):
        return self.S.shape[0]

    def tube_norms(self):
        return np.array([fro_norm(self.S[j, j]) for j in range(self.k)])


@dataclass(frozen=True)
class TEvdFactors:
    W: np.ndarray
    D: np.ndarray

    @property
    def k(self):
        return self.D.shape[0]

    def tube_norms(self):
        return np.array([fro_norm(self.D[j, j]) for j in range(self.k)])


def _phase_fix(vecs):
    """Rotate each column so its largest-magnitude entry is real and >= 0.

    ``vecs`` is ``(n, rows, k)``; returns the rotated stack and the phases
    applied (shape ``(n, k)``).
    """
    idx = np.argmax(np.abs(vecs), axis=1)
    pivot = np.take_along_axis(vecs, idx[:, None, :], axis=1)[:, 0, :]
    mag = np.abs(pivot)
    phase = np.where(mag > 0, np.conj(pivot) / np.where(mag > 0, mag, 1.0), 1.0)
    return vecs * phase[:, None, :], phase


def tsvd_spectral(ah, k=None):
    """Per-slice SVD of a spectral stack ``(n, l, m)``.

    Returns ``(Uh, sh, Vh)`` with ``Uh (n, l, k)``, real ``sh (n, k)``
    sorted descending per slice and ``Vh (n, m, k)``. Conjugate symmetry of
    the stack is imposed on the factors so they transform back to real
    tensors.
    """
    n, l, m = ah.shape
    kmax = min(l, m)
    k = kmax if k is None else k
    u, s, vh = np.linalg.svd(ah, full_matrices=False)
    v = np.conj(vh).transpose(0, 2, 1)
    u, v, s = u[:, :, :k], v[:, :, :k], s[:, :k]
    v, phase = _phase_fix(v)
    u = u * phase[:, None, :]
    u = _enforce_conjugate_symmetry(np.ascontiguousarray(u))
    v = _enforce_conjugate_symmetry(np.ascontiguousarray(v))
    s = _enforce_conjugate_symmetry(s.astype(complex)).real
    return u, s, v


def _diag_stack(d):
    n, k = d.shape
    out = np.zeros((n, k, k), dtype=complex)
    out[:, np.arange(k), np.arange(k)] = d
    return out


def tsvd(a, k=None):
    """Truncated tSVD: the ``k`` dominant singular triplets of every slice."""
    a = as_tensor3(a, "a")
    l, m, _ = a.shape
    kmax = min(l, m)
    if k is None:
        k = kmax
    if not 1 <= k <= kmax:
        raise ValueError(f"truncation k={k} outside [1, {kmax}]")
    uh, sh, vh = tsvd_spectral(dft_mode3(a), k)
    S = idft_mode3(_diag_stack(sh))
    off = ~np.eye(k, dtype=bool)
    S[off] = 0.0
    return TSvdFactors(idft_mode3(uh), S, idft_mode3(vh))


def truncation_error_formula(a, k, squared=False):
    """Closed-form tail sum of spectral singular values beyond index ``k``.

    ``squared=False`` sums the singular values as printed in the optimality
    theorem; ``squared=True`` sums their squares. Returned value is the
    square root of ``(1/n) * tail``.
    """
    a = as_tensor3(a, "a")
    s = np.linalg.svd(dft_mode3(a), compute_uv=False)
    tail = s[:, k:]
    if squared:
        tail = tail**2
    return float(np.sqrt(tail.sum() / a.shape[2]))


def hermitian_residual(ah):
    """Per-slice ``||A_i - A_i^H||_F / max_j ||A_j||_F`` for a spectral stack."""
    scale = max(np.linalg.norm(ah, axis=(1, 2)).max(), np.finfo(float).tiny)
    res = np.linalg.norm(ah - np.conj(ah).transpose(0, 2, 1), axis=(1, 2))
    return res / scale


def _check_symmetric(ah, tol=SYMMETRY_TOL):
    if ah.shape[1] != ah.shape[2]:
        raise NotSymmetricError(f"symmetric tensor must be square, got slices {ah.shape[1:]}")
    res = hermitian_residual(ah)
    worst = int(np.argmax(res))
    if res[worst] > tol:
        raise NotSymmetricError(
            f"tensor is not t-symmetric: spectral slice {worst} has Hermitian "
            f"residual {res[worst]:.3e} (tolerance {tol:.1e})"
        )


def tevd_spectral(ah, k=None):
    """Per-slice Hermitian eigendecomposition sorted by descending |eigenvalue|."""
    n, m, _ = ah.shape
    k = m if k is None else k
    herm = 0.5 * (ah + np.conj(ah).transpose(0, 2, 1))
    lam, w = np.linalg.eigh(herm)
    order = np.argsort(-np.abs(lam), axis=1, kind="stable")
    lam = np.take_along_axis(lam, order, axis=1)[:, :k]
    w = np.take_along_axis(w, order[:, None, :], axis=2)[:, :, :k]
    w, _ = _phase_fix(w)
    w = _enforce_conjugate_symmetry(np.ascontiguousarray(w))
    lam = _enforce_conjugate_symmetry(lam.astype(complex)).real
    return w, lam


def tevd(a, k=None):
    """Truncated tEVD of a t-symmetric tensor (every spectral slice Hermitian)."""
    a = as_tensor3(a, "a")
    ah = dft_mode3(a)
    _check_symmetric(ah)
    m = a.shape[0]
    if k is None:
        k = m
    if not 1 <= k <= m:
        raise ValueError(f"truncation k={k} outside [1, {m}]")
    wh, lam = tevd_spectral(ah, k)
    D = idft_mode3(_diag_stack(lam))
    D[~np.eye(k, dtype=bool)] = 0.0
    return TEvdFactors(idft_mode3(wh), D)


def tubal_rank(a, tol=1e-10):
    """Number of singular tubes with norm above ``tol`` times the largest."""
    a = as_tensor3(a, "a")
    s = np.linalg.svd(dft_mode3(a), compute_uv=False)
    norms = np.sqrt((s**2).sum(axis=0) / a.shape[2])
    if norms.size == 0 or norms[0] == 0.0:
        return 0
    return int(np.count_nonzero(norms > tol * norms[0]))


@dataclass(frozen=True)
class RtsvdConfig:
    """Settings for :func:`rtsvd`.

    ``epsilon`` is the absolute Frobenius tolerance on ``A - Q*B``;
    ``oversample`` is only used by the solver that picks the starting
    truncation index.
    """

    epsilon: float
    oversample: int = 10
    max_rank: int | None = None
    seed: int | None = 0
    reorth_passes: int = 1
    check_residual: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.oversample < 0:
            raise ValueError("oversample must be nonnegative")
        if self.reorth_passes < 1:
            raise ValueError("reorth_passes must be >= 1")


@dataclass(frozen=True)
class RtsvdResult:
    factors: TSvdFactors | None
    r: int
    eta_trace: tuple
    truncated: bool
    Q: np.ndarray | None = None
    B: np.ndarray | None = None
    residual_trace: tuple = field(default_factory=tuple)
    seed: int | None = None


def rtsvd(a, cfg, rng=None):
    """Fixed-precision randomized tSVD.

    Lateral slices of an orthonormal basis ``Q`` are added one Gaussian probe
    at a time until ``||A||_F^2 - ||Q^T*A||_F^2 < epsilon^2`` or
    ``cfg.max_rank`` slices have been drawn. The running error ``eta`` is
    downdated by ``||Y||_F^2`` for each new row block ``Y = Q_r^T * A`` and
    recorded in ``eta_trace``. With ``cfg.check_residual`` the explicit
    residual ``||A - Q*B||_F^2`` is recomputed at every step as well.
    """
    a = as_tensor3(a, "a")
    l, m, n = a.shape
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    max_rank = min(l, m) if cfg.max_rank is None else cfg.max_rank
    if not 0 <= max_rank <= min(l, m):
        raise ValueError(f"max_rank={max_rank} outside [0, {min(l, m)}]")
    ah = dft_mode3(a)
    eps2 = cfg.epsilon**2
    eta = fro_norm(a) ** 2
    qs, ys = [], []
    etas, resids = [], []
    # Nothing to approximate when the tolerance already covers all of A.
    if cfg.epsilon >= np.sqrt(eta):
        max_rank = 0
    while eta >= eps2 and len(qs) < max_rank:
        g = rng.standard_normal((m, 1, n))
        gh = dft_mode3(g)[:, :, 0]
        z = (ah @ gh[:, :, None])[:, :, 0]
        if qs:
            z = z - qs[-1] * np.einsum("nm,nm->n", ys[-1], gh)[:, None]
        z, _, _ = normalize_spectral(z, rng=rng)
        for _ in range(cfg.reorth_passes):
            for q in qs:
                z = z - q * np.einsum("nl,nl->n", np.conj(q), z)[:, None]
        z, _, _ = normalize_spectral(z, rng=rng)
        qs.append(z)
        # Y = Z^T * A: row block of B in the spectral domain.
        y = np.einsum("nl,nlm->nm", np.conj(z), ah)
        ys.append(y)
        eta -= np.sum(np.abs(y) ** 2) / n
        etas.append(float(eta))
        if cfg.check_residual:
            Q = np.stack(qs, axis=2)
            B = np.stack(ys, axis=1)
            resids.append(float(np.sum(np.abs(ah - Q @ B) ** 2) / n))
    truncated = eta >= eps2
    r = len(qs)
    if r == 0:
        return RtsvdResult(None, 0, (), truncated, seed=cfg.seed)
    Qh = np.stack(qs, axis=2)
    Bh = np.stack(ys, axis=1)
    uh, sh, vh = tsvd_spectral(Bh, min(r, m))
    uh = Qh @ uh
    k = sh.shape[1]
    S = idft_mode3(_diag_stack(sh))
    S[~np.eye(k, dtype=bool)] = 0.0
    factors = TSvdFactors(idft_mode3(_enforce_conjugate_symmetry(uh)), S, idft_mode3(vh))
    return RtsvdResult(
        factors,
        r,
        tuple(etas),
        bool(truncated),
        Q=idft_mode3(Qh, tol=IMAG_TOL),
        B=idft_mode3(Bh, tol=IMAG_TOL),
        residual_trace=tuple(resids),
        seed=cfg.seed,
    )


def save_factors(prefix, factors, **meta):
    """Store factors as T3D1 files plus a JSON manifest next to them."""
    tensors = {"U": factors.U, "S": factors.S, "V": factors.V}
    info = {"kind": "tsvd", "k": factors.k}
    for key, val in meta.items():
        info[key] = list(val) if isinstance(val, tuple) else val
    return t3d.save_with_manifest(prefix, tensors, info)


def load_factors(manifest_path):
    tensors, meta = t3d.load_with_manifest(manifest_path)
    return TSvdFactors(tensors["U"], tensors["S"], tensors["V"]), meta


def _json_default(o):  # pragma: no cover - used only for numpy scalars
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


def save_rtsvd(prefix, result):
    if result.factors is None:
        meta = {"kind": "rtsvd", "r": 0, "eta_trace": [], "seed": result.seed, "truncated": result.truncated}
        path = Path(f"{prefix}.json")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(meta, indent=2, default=_json_default))
        return path
    return save_factors(
        prefix,
        result.factors,
        kind="rtsvd",
        r=result.r,
        eta_trace=list(result.eta_trace),
        seed=result.seed,
        truncated=result.truncated,
    )
