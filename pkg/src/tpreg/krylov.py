"""t-product Golub-Kahan bidiagonalization and symmetric t-Lanczos.

Both processes run on the Fourier side: a t-product with ``A`` becomes one
batched matrix-vector product over spectral slices, a tube becomes an
``(n,)`` complex vector and a lateral slice an ``(n, l)`` array. The
processes are incremental objects so that solvers can grow the Krylov
dimension one step at a time; :func:`tgkb` and :func:`tlanczos` are the
one-shot wrappers returning the real-domain decompositions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decomp import _check_symmetric
from .tcore import (
    INVERTIBLE_RTOL,
    NORMALIZE_TOL,
    _spectrum_invertible,
    as_tensor3,
    dft_mode3,
    idft_mode3,
    normalize_spectral,
)

__all__ = [
    "Breakdown",
    "GkbDecomposition",
    "LanczosDecomposition",
    "GkbProcess",
    "LanczosProcess",
    "tgkb",
    "tlanczos",
    "gram_residual",
]


class StartVectorError(ValueError):
    """The starting slice is zero or its normalization tube is not invertible."""


@dataclass(frozen=True)
class Breakdown:
    step: int
    tube: str
    slices: tuple

    def __str__(self):
        return f"breakdown at step {self.step}: tube {self.tube} vanishes in spectral slices {list(self.slices)}"


def _cols(vs):
    return np.stack(vs, axis=2)


def _tube_real(t):
    return idft_mode3(np.asarray(t)[:, None, None])


def _project_out(v, basis, passes):
    for _ in range(passes):
        for q in basis:
            v = v - q * np.einsum("nl,nl->n", np.conj(q), v)[:, None]
    return v


def _vanishing(t, rtol=INVERTIBLE_RTOL):
    mag = np.abs(t)
    top = mag.max(initial=0.0)
    return tuple(int(i) for i in np.flatnonzero(mag <= rtol * top)) if top > 0 else tuple(range(t.size))


@dataclass(frozen=True)
class GkbDecomposition:
    """``A * W = Q * P_bar`` after ``k`` steps, with ``Q^T * b = e1 * z1``."""

    Q: np.ndarray
    W: np.ndarray
    P_bar: np.ndarray
    z1: np.ndarray
    k: int
    breakdown: Breakdown | None = None


@dataclass(frozen=True)
class LanczosDecomposition:
    Q: np.ndarray
    T_bar: np.ndarray
    z0: np.ndarray
    k: int
    breakdown: Breakdown | None = None

    @property
    def T(self):
        return self.T_bar[: self.k, : self.k]


class GkbProcess:
    """Incremental tGKB on ``(a, b)``.

    ``reorth_passes`` is the number of classical Gram-Schmidt sweeps against
    the existing basis per new slice (0 disables reorthogonalization). The
    random generator is only consulted when a normalization hits an exactly
    degenerate spectral slice.
    """

    def __init__(self, a, b, reorth_passes=1, tol=NORMALIZE_TOL, rng=None, a_hat=None):
        if a_hat is None:
            a = as_tensor3(a, "a")
            a_hat = dft_mode3(a)
        b = as_tensor3(b, "b")
        n, l, m = a_hat.shape
        if b.shape != (l, 1, n):
            raise ValueError(f"b must be {l} x 1 x {n}, got {b.shape}")
        if not np.any(b):
            raise StartVectorError("starting slice b is zero")
        self.ah = a_hat
        self.aht = np.conj(a_hat).transpose(0, 2, 1)
        self.n, self.l, self.m = n, l, m
        self.passes = reorth_passes
        self.tol = tol
        self.rng = rng if rng is not None else np.random.default_rng(0)
        q1, z1, deg = normalize_spectral(dft_mode3(b)[:, :, 0], tol=tol, rng=self.rng)
        if deg or not _spectrum_invertible(np.abs(z1)):
            raise StartVectorError("normalization tube of b is not invertible")
        self.qs = [q1]
        self.ws = []
        self.cs = []
        self.zs = [z1]
        self.breakdown = None

    @property
    def k(self):
        return len(self.ws)

    @property
    def max_steps(self):
        return min(self.l, self.m)

    def step(self):
        """Run one bidiagonalization step; returns False once broken down."""
        if self.breakdown is not None:
            return False
        i = self.k
        w = (self.aht @ self.qs[i][:, :, None])[:, :, 0]
        if i > 0:
            w = w - self.ws[i - 1] * self.zs[i][:, None]
        if self.passes:
            w = _project_out(w, self.ws, self.passes)
        w, c, deg = normalize_spectral(w, tol=self.tol, rng=self.rng)
        if deg or not _spectrum_invertible(np.abs(c)):
            self.breakdown = Breakdown(i + 1, f"c_{i + 1}", _vanishing(c))
            return False
        q = (self.ah @ w[:, :, None])[:, :, 0] - self.qs[i] * c[:, None]
        if self.passes:
            q = _project_out(q, self.qs, self.passes)
        q, z, deg = normalize_spectral(q, tol=self.tol, rng=self.rng)
        self.ws.append(w)
        self.cs.append(c)
        self.qs.append(q)
        self.zs.append(z)
        if deg or not _spectrum_invertible(np.abs(z)):
            self.breakdown = Breakdown(i + 1, f"z_{i + 2}", _vanishing(z))
        return True

    def extend(self, k):
        while self.k < k and self.step():
            pass
        return self.k

    def p_bar_hat(self, k=None):
        """Spectral lower-bidiagonal ``(n, k+1, k)`` projected operator."""
        k = self.k if k is None else k
        p = np.zeros((self.n, k + 1, k), dtype=complex)
        for i in range(k):
            p[:, i, i] = self.cs[i]
            p[:, i + 1, i] = self.zs[i + 1]
        return p

    def q_hat(self, k=None):
        k = self.k if k is None else k
        return _cols(self.qs[: k + 1])

    def w_hat(self, k=None):
        k = self.k if k is None else k
        return _cols(self.ws[:k])

    def decomposition(self, k=None):
        k = self.k if k is None else k
        return GkbDecomposition(
            Q=idft_mode3(self.q_hat(k)),
            W=idft_mode3(self.w_hat(k)),
            P_bar=idft_mode3(self.p_bar_hat(k)),
            z1=_tube_real(self.zs[0]),
            k=k,
            breakdown=self.breakdown,
        )


class LanczosProcess:
    """Incremental symmetric t-Lanczos on ``(a, b)``; see :class:`GkbProcess`."""

    def __init__(self, a, b, reorth_passes=1, tol=NORMALIZE_TOL, rng=None, a_hat=None, check=True):
        if a_hat is None:
            a = as_tensor3(a, "a")
            a_hat = dft_mode3(a)
        if check:
            _check_symmetric(a_hat)
        b = as_tensor3(b, "b")
        n, m, _ = a_hat.shape
        if b.shape != (m, 1, n):
            raise ValueError(f"b must be {m} x 1 x {n}, got {b.shape}")
        if not np.any(b):
            raise StartVectorError("starting slice b is zero")
        self.ah = a_hat
        self.n, self.m = n, m
        self.passes = reorth_passes
        self.tol = tol
        self.rng = rng if rng is not None else np.random.default_rng(0)
        q1, z0, deg = normalize_spectral(dft_mode3(b)[:, :, 0], tol=tol, rng=self.rng)
        if deg or not _spectrum_invertible(np.abs(z0)):
            raise StartVectorError("normalization tube of b is not invertible")
        self.qs = [q1]
        self.cs = []
        self.zs = [z0]
        self.breakdown = None

    @property
    def k(self):
        return len(self.cs)

    @property
    def max_steps(self):
        return self.m

    def step(self):
        if self.breakdown is not None:
            return False
        i = self.k
        v = (self.ah @ self.qs[i][:, :, None])[:, :, 0]
        c = np.einsum("nl,nl->n", np.conj(self.qs[i]), v)
        v = v - self.qs[i] * c[:, None]
        if i > 0:
            v = v - self.qs[i - 1] * self.zs[i][:, None]
        if self.passes:
            v = _project_out(v, self.qs, self.passes)
        q, z, deg = normalize_spectral(v, tol=self.tol, rng=self.rng)
        self.cs.append(c)
        self.qs.append(q)
        self.zs.append(z)
        if deg or not _spectrum_invertible(np.abs(z)):
            self.breakdown = Breakdown(i + 1, f"z_{i + 1}", _vanishing(z))
        return True

    def extend(self, k):
        while self.k < k and self.step():
            pass
        return self.k

    def t_bar_hat(self, k=None):
        """Spectral tridiagonal ``(n, k+1, k)`` projected operator."""
        k = self.k if k is None else k
        t = np.zeros((self.n, k + 1, k), dtype=complex)
        for i in range(k):
            t[:, i, i] = self.cs[i]
            t[:, i + 1, i] = self.zs[i + 1]
            if i + 1 < k:
                t[:, i, i + 1] = np.conj(self.zs[i + 1])
        return t

    def q_hat(self, k=None):
        k = self.k if k is None else k
        return _cols(self.qs[: k + 1])

    def decomposition(self, k=None):
        k = self.k if k is None else k
        return LanczosDecomposition(
            Q=idft_mode3(self.q_hat(k)),
            T_bar=idft_mode3(self.t_bar_hat(k)),
            z0=_tube_real(self.zs[0]),
            k=k,
            breakdown=self.breakdown,
        )


def _passes(reorth, second_pass):
    if not reorth:
        return 0
    return 2 if second_pass else 1


def tgkb(a, b, k, reorth=True, seed=0, second_pass=False, tol=NORMALIZE_TOL):
    """``k`` steps of tGKB started from lateral slice ``b``.

    Fewer steps are returned when the process breaks down; the decomposition
    then carries a :class:`Breakdown` record.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    proc = GkbProcess(a, b, _passes(reorth, second_pass), tol, np.random.default_rng(seed))
    proc.extend(min(k, proc.max_steps))
    return proc.decomposition()


def tlanczos(a, b, k, reorth=True, seed=0, second_pass=False, tol=NORMALIZE_TOL):
    """``k`` steps of symmetric t-Lanczos started from lateral slice ``b``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    proc = LanczosProcess(a, b, _passes(reorth, second_pass), tol, np.random.default_rng(seed))
    proc.extend(min(k, proc.max_steps))
    return proc.decomposition()


def gram_residual(q):
    """``||Q^T * Q - I||_F`` evaluated facewise in the spectral domain."""
    qh = dft_mode3(q)
    g = np.conj(qh).transpose(0, 2, 1) @ qh
    eye = np.eye(q.shape[1])
    return float(np.sqrt(np.sum(np.abs(g - eye) ** 2) / q.shape[2]))
