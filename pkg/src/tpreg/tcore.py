"""Dense third-order tensors under the t-product.

Tensors are plain ``numpy`` arrays of shape ``(l, m, n)``: ``a[i, j, k]`` is
row ``i``, column ``j`` of frontal slice ``k``. A lateral slice (tensor
column) is an array with ``m == 1`` and a tube is an array of shape
``(1, 1, n)``; neither has a separate representation.

The spectral (Fourier) form of a tensor is stored slice-major as a complex
array of shape ``(n, l, m)`` so that facewise products are batched
``matmul`` calls over contiguous matrices.  The forward transform is the
unnormalized DFT along mode 3; the inverse divides by ``n``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RankDeficientWarning",
    "NormalizeResult",
    "dft_mode3",
    "idft_mode3",
    "conjugate_partner",
    "tprod",
    "tprod_direct",
    "ttranspose",
    "identity",
    "e1_tube",
    "fro_norm",
    "lateral_fro_norm",
    "tube_norm",
    "normalize",
    "normalize_spectral",
    "tube_is_invertible",
    "tube_inverse",
    "facewise_solve",
    "as_tensor3",
]

IMAG_TOL = 1e-10
NORMALIZE_TOL = 1e-12
INVERTIBLE_RTOL = 1e-12


class RankDeficientWarning(UserWarning):
    """A spectral slice was numerically rank deficient in a facewise solve."""


def as_tensor3(a, name="tensor"):
    a = np.asarray(a, dtype=float)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3:
        raise ValueError(f"{name} must be a third-order array, got shape {a.shape}")
    if 0 in a.shape:
        raise ValueError(f"{name} has an empty dimension: {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def dft_mode3(a):
    """DFT along the tubes; returns the ``(n, l, m)`` stack of spectral slices."""
    a = np.asarray(a)
    return np.ascontiguousarray(np.fft.fft(a, axis=2).transpose(2, 0, 1))


def idft_mode3(s, tol=IMAG_TOL):
    """Inverse of :func:`dft_mode3`, returning a real ``(l, m, n)`` tensor.

    Raises ``ValueError`` when the imaginary residue exceeds ``tol`` relative
    to the real part, since that means the spectral input was not conjugate
    symmetric.
    """
    s = np.asarray(s)
    a = np.fft.ifft(s, axis=0).transpose(1, 2, 0)
    re = np.ascontiguousarray(a.real)
    if np.iscomplexobj(a):
        scale = np.max(np.abs(re), initial=0.0)
        resid = np.max(np.abs(a.imag), initial=0.0)
        if resid > tol * max(scale, np.finfo(float).tiny):
            raise ValueError(
                f"spectral tensor is not conjugate symmetric: imaginary residue "
                f"{resid:.3e} vs real scale {scale:.3e}"
            )
    return re


def conjugate_partner(j, n):
    return (n - j) % n


def _enforce_conjugate_symmetry(s):
    """Overwrite the upper half of the spectrum with conjugates of the lower."""
    n = s.shape[0]
    for j in range(1, (n + 1) // 2):
        s[n - j] = np.conj(s[j])
    s[0] = s[0].real
    if n % 2 == 0:
        s[n // 2] = s[n // 2].real
    return s


def tprod(b, c):
    """t-product ``b * c`` of an ``l x p x n`` and a ``p x m x n`` tensor."""
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if b.ndim != 3 or c.ndim != 3:
        raise ValueError(f"t-product needs third-order tensors, got {b.shape} and {c.shape}")
    if b.shape[1] != c.shape[0] or b.shape[2] != c.shape[2]:
        raise ValueError(f"t-product dimension mismatch: {b.shape} * {c.shape}")
    return idft_mode3(dft_mode3(b) @ dft_mode3(c))


def tprod_direct(b, c):
    """t-product from the definition: sums of circular convolutions of tubes.

    Slow reference implementation used as an oracle.
    """
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if b.shape[1] != c.shape[0] or b.shape[2] != c.shape[2]:
        raise ValueError(f"t-product dimension mismatch: {b.shape} * {c.shape}")
    l, p, n = b.shape
    m = c.shape[1]
    out = np.zeros((l, m, n))
    for i in range(l):
        for j in range(m):
            for k in range(p):
                for t in range(n):
                    for s in range(n):
                        out[i, j, t] += b[i, k, s] * c[k, j, (t - s) % n]
    return out


def ttranspose(a):
    """Transpose every frontal slice and reverse the order of slices 2..n."""
    a = np.asarray(a)
    at = a.transpose(1, 0, 2)
    idx = np.r_[0, np.arange(a.shape[2] - 1, 0, -1)]
    return np.ascontiguousarray(at[:, :, idx])


def identity(m, n):
    eye = np.zeros((m, m, n))
    eye[:, :, 0] = np.eye(m)
    return eye


def e1_tube(n):
    t = np.zeros((1, 1, n))
    t[0, 0, 0] = 1.0
    return t


def fro_norm(a):
    return float(np.linalg.norm(np.ravel(a)))


def lateral_fro_norm(x):
    """Frobenius norm of a lateral slice as the square root of ``(x^T*x)^(1)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[1] != 1:
        raise ValueError(f"expected a lateral slice, got shape {x.shape}")
    g = tprod(ttranspose(x), x)
    return float(np.sqrt(max(g[0, 0, 0], 0.0)))


def tube_norm(x):
    """Tubal norm ``||x^T*x||_F / ||x||_F`` of a lateral slice (0 for x = 0)."""
    x = np.asarray(x, dtype=float)
    nx = fro_norm(x)
    if nx == 0.0:
        return 0.0
    return fro_norm(tprod(ttranspose(x), x)) / nx


@dataclass(frozen=True)
class NormalizeResult:
    direction: np.ndarray
    scale: np.ndarray
    degenerate_slices: frozenset = field(default_factory=frozenset)


def normalize_spectral(v, tol=NORMALIZE_TOL, rng=None):
    """Normalize spectral columns slice by slice.

    ``v`` has shape ``(n, l)``: column ``j`` of every spectral slice. Returns
    ``(direction, scale, degenerate)`` where ``scale`` has shape ``(n,)``.
    Slices with norm ``<= tol`` are replaced by a random unit vector and get
    scale 0; conjugate partner slices receive the conjugate vector so a real
    input stays real after the inverse transform.
    """
    v = np.array(v, dtype=complex)
    n = v.shape[0]
    a = np.linalg.norm(v, axis=1)
    degenerate = np.flatnonzero(a <= tol)
    ok = a > tol
    v[ok] /= a[ok, None]
    if degenerate.size:
        if rng is None:
            raise ValueError(
                f"spectral slices {degenerate.tolist()} are zero; "
                "a seeded generator is needed for the replacement branch"
            )
        filled = set()
        for j in degenerate:
            partner = conjugate_partner(j, n)
            if partner in filled:
                v[j] = np.conj(v[partner])
            else:
                r = rng.standard_normal(v.shape[1])
                v[j] = r / np.linalg.norm(r)
            filled.add(int(j))
        a = a.copy()
        a[degenerate] = 0.0
    return v, a.astype(complex), frozenset(int(j) for j in degenerate)


def normalize(x, tol=NORMALIZE_TOL, rng=None):
    """Split a lateral slice into a unit-norm direction and a tube scale.

    Returns :class:`NormalizeResult` with ``x = direction * scale`` whenever no
    spectral slice was degenerate.
    """
    x = as_tensor3(x, "x")
    if x.shape[1] != 1:
        raise ValueError(f"normalize expects a lateral slice, got shape {x.shape}")
    vh = dft_mode3(x)[:, :, 0]
    vh, ah, degenerate = normalize_spectral(vh, tol=tol, rng=rng)
    direction = idft_mode3(vh[:, :, None])
    scale = idft_mode3(ah[:, None, None])
    return NormalizeResult(direction, scale, degenerate)


def tube_is_invertible(t, rtol=INVERTIBLE_RTOL):
    """True when no spectral entry of the tube is below ``rtol`` times the largest."""
    spec = np.abs(np.fft.fft(np.ravel(t)))
    return _spectrum_invertible(spec, rtol)


def _spectrum_invertible(spec_abs, rtol=INVERTIBLE_RTOL):
    top = spec_abs.max(initial=0.0)
    return bool(top > 0.0 and spec_abs.min() > rtol * top)


def tube_inverse(t, rtol=1e-14):
    """Inverse tube ``b`` with ``t * b = e1``."""
    t = np.asarray(t, dtype=float).reshape(1, 1, -1)
    spec = np.fft.fft(t[0, 0])
    mag = np.abs(spec)
    if mag.max() == 0.0 or mag.min() < rtol * mag.max():
        raise ValueError("tube is not invertible: a spectral entry vanishes")
    return idft_mode3((1.0 / spec)[:, None, None])


def _solve_spectral(ch, dh, warn=True):
    """Facewise least squares on spectral stacks ``ch (n,l,m)``, ``dh (n,l,q)``.

    QR per slice; slices whose triangular factor is numerically singular are
    solved in the minimum-norm sense instead.
    """
    n, l, m = ch.shape
    if l < m:
        raise ValueError(f"facewise_solve needs l >= m, got {l} x {m}")
    q, r = np.linalg.qr(ch)
    diag = np.abs(np.diagonal(r, axis1=1, axis2=2))
    dmax = diag.max(axis=1)
    dmin = diag.min(axis=1)
    limit = 1.0 / (100.0 * np.finfo(float).eps)
    bad = (dmax == 0.0) | (dmin * limit < dmax)
    out = np.empty((n, m, dh.shape[2]), dtype=complex)
    good = ~bad
    if good.any():
        rhs = np.conj(q[good]).transpose(0, 2, 1) @ dh[good]
        out[good] = np.linalg.solve(r[good], rhs)
    bad_idx = np.flatnonzero(bad)
    for i in bad_idx:
        out[i] = np.linalg.lstsq(ch[i], dh[i], rcond=None)[0]
    if bad_idx.size and warn:
        warnings.warn(
            f"spectral slices {bad_idx.tolist()} are rank deficient; "
            "returning minimum-norm solutions",
            RankDeficientWarning,
            stacklevel=3,
        )
    return out, frozenset(int(i) for i in bad_idx)


def facewise_solve(c, d, return_info=False):
    """Least-squares solution ``y`` of ``min ||c * y - d||_F``.

    Solved independently on every spectral slice. With ``return_info`` a dict
    with key ``"rank_deficient_slices"`` is returned alongside the solution.
    """
    c = as_tensor3(c, "c")
    d = as_tensor3(d, "d")
    if c.shape[0] != d.shape[0] or c.shape[2] != d.shape[2]:
        raise ValueError(f"facewise_solve dimension mismatch: {c.shape} vs {d.shape}")
    yh, bad = _solve_spectral(dft_mode3(c), dft_mode3(d))
    y = idft_mode3(_enforce_conjugate_symmetry(yh))
    if return_info:
        return y, {"rank_deficient_slices": bad}
    return y
