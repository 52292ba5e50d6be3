"""Regularizing solvers for ``min ||A * X - B||_F`` under the t-product.

Every solver picks its regularization parameter (a truncation index, a
Krylov dimension, or a Tikhonov weight) with the discrepancy principle
``||B - A * X_k||_F <= tau * delta`` and returns a :class:`SolveReport`.

Truncated factorizations (T-tSVD, T-tEVD, RT-tSVD) accept data with any
number of lateral slices and use one truncation index for all of them.
Krylov solvers (tGKB, t-Lanczos and their Tikhonov variants) take a single
lateral slice; :func:`solve_p` and :func:`solve_nested_tgkb_p` handle data
with ``p`` slices.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .decomp import (
    RtsvdConfig,
    _check_symmetric,
    rtsvd,
    tevd_spectral,
    tsvd_spectral,
)
from .krylov import GkbProcess, LanczosProcess, StartVectorError
from .tcore import (
    _enforce_conjugate_symmetry,
    _solve_spectral,
    as_tensor3,
    dft_mode3,
    fro_norm,
    idft_mode3,
)

__all__ = [
    "DiscrepancyConfig",
    "TikhonovConfig",
    "SolveReport",
    "relative_error",
    "solve_ttsvd",
    "solve_ttevd",
    "solve_rtsvd",
    "solve_tgkb",
    "solve_tgkb_triplet_form",
    "solve_tlanczos",
    "solve_tlanczos_eig_form",
    "solve_tikhonov_projected",
    "solve_p",
    "solve_nested_tgkb_p",
    "tikhonov_projected_solution",
    "gkb_ritz_triplets",
    "METHODS",
    "run_method",
]


@dataclass(frozen=True)
class DiscrepancyConfig:
    """Discrepancy-principle settings.

    ``tau`` is the safety factor (sometimes written ``eta``); ``k_max`` caps
    the truncation index or Krylov dimension. ``floor`` is a relative
    threshold ``floor * ||B||_F`` below which a residual counts as zero, so
    that ``delta = 0`` is usable in floating point.
    """

    delta: float
    tau: float = 1.1
    k_max: int | None = None
    floor: float = 1e-12

    def __post_init__(self):
        if not self.tau > 1:
            raise ValueError(f"tau must exceed 1, got {self.tau}")
        if self.delta < 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if self.k_max is not None and self.k_max < 1:
            raise ValueError("k_max must be >= 1")

    def threshold(self, bnorm):
        return max(self.tau * self.delta, self.floor * bnorm)


@dataclass(frozen=True)
class TikhonovConfig:
    """Bisection settings for the Tikhonov weight ``mu``.

    The penalty is ``mu**-1 * ||Y||_F^2``, so large ``mu`` means light
    regularization. Bisection runs on ``log10(mu)``.
    """

    mu_interval: tuple = (1e1, 1e7)
    bisect_tol: float = 1e-6
    max_bisect: int = 60

    def __post_init__(self):
        lo, hi = self.mu_interval
        if not 0 < lo < hi:
            raise ValueError(f"mu_interval must satisfy 0 < lo < hi, got {self.mu_interval}")


@dataclass
class SolveReport:
    method: str
    x: np.ndarray | None
    k: int | tuple | None
    residual_norm: float
    success: bool
    threshold: float = float("nan")
    relative_error: float | None = None
    mu: float | tuple | None = None
    wall_time: float = 0.0
    projected_residual: float | None = None
    k_start: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def k_label(self):
        if isinstance(self.k, tuple):
            return "(" + ",".join(str(v) for v in self.k) + ")"
        return "" if self.k is None else str(self.k)


def relative_error(x, x_true):
    x = np.asarray(x, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    if x.shape != x_true.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_true.shape}")
    nt = fro_norm(x_true)
    if nt == 0.0:
        raise ValueError("relative error undefined for a zero reference")
    return fro_norm(x - x_true) / nt


def _spec_norm(xh):
    """Frobenius norm of a real tensor from its (unnormalized) spectrum."""
    return float(np.sqrt(np.sum(np.abs(xh) ** 2) / xh.shape[0]))


def _true_residual(ah, xh, bh):
    return _spec_norm(bh - ah @ xh)


def _finish(report, x_true, t0):
    report.wall_time = time.perf_counter() - t0
    if x_true is not None and report.x is not None:
        report.relative_error = relative_error(report.x, x_true)
    return report


def _check_data(a, b):
    a = as_tensor3(a, "a")
    b = as_tensor3(b, "b")
    if b.shape[0] != a.shape[0] or b.shape[2] != a.shape[2]:
        raise ValueError(f"data shape {b.shape} incompatible with operator {a.shape}")
    return a, b


def _safe_reciprocal(s):
    """Reciprocal of spectral singular values, 0 where a value is numerically nil."""
    s = np.asarray(s)
    mag = np.abs(s)
    cut = s.shape[0] * np.finfo(float).eps * mag.max(initial=0.0)
    out = np.zeros_like(s, dtype=complex)
    keep = mag > cut
    out[keep] = 1.0 / s[keep]
    return out


# ---------------------------------------------------------------------------
# truncated factorizations


def _truncated_search(method, ah, bh, uh, sh, vh, disc, k_range, bnorm):
    """Smallest truncation index in ``k_range`` passing the discrepancy test.

    Residuals come from the projected coefficients ``U^H b`` (tail sums plus
    the part of ``b`` outside the range of ``U``); the chosen index is then
    confirmed with an explicit residual.
    """
    coef = np.conj(uh).transpose(0, 2, 1) @ bh
    outside = np.sum(np.abs(bh - uh @ coef) ** 2)
    energy = np.sum(np.abs(coef) ** 2, axis=(0, 2))
    tails = np.concatenate([np.cumsum(energy[::-1])[::-1], [0.0]])
    n = ah.shape[0]
    thr = disc.threshold(bnorm)
    inv = _safe_reciprocal(sh)
    best = None
    fast = {}
    for k in k_range:
        fast[k] = float(np.sqrt((tails[k] + outside) / n))
        if fast[k] > thr:
            if best is None or fast[k] < best[1]:
                best = (k, fast[k])
            continue
        xh = vh[:, :, :k] @ (inv[:, :k, None] * coef[:, :k])
        res = _true_residual(ah, xh, bh)
        if res <= thr:
            return k, xh, res, True, fast
        if best is None or res < best[1]:
            best = (k, res)
    if best is None:
        return None, None, float("nan"), False, fast
    k = best[0]
    xh = vh[:, :, :k] @ (inv[:, :k, None] * coef[:, :k])
    return k, xh, _true_residual(ah, xh, bh), False, fast


def solve_ttsvd(a, b, disc, x_true=None):
    """Truncated tSVD with the truncation index from the discrepancy principle.

    The full tSVD of ``a`` is computed once; the solution for index ``s`` is
    ``V_s * S_s^-1 * U_s^T * b``.
    """
    t0 = time.perf_counter()
    a, b = _check_data(a, b)
    ah, bh = dft_mode3(a), dft_mode3(b)
    uh, sh, vh = tsvd_spectral(ah)
    kmax = sh.shape[1] if disc.k_max is None else min(disc.k_max, sh.shape[1])
    k, xh, res, ok, fast = _truncated_search("ttsvd", ah, bh, uh, sh, vh, disc, range(1, kmax + 1), fro_norm(b))
    x = idft_mode3(_enforce_conjugate_symmetry(xh)) if xh is not None else None
    rep = SolveReport("ttsvd", x, k, res, ok, threshold=disc.threshold(fro_norm(b)), k_start=1,
                      diagnostics={"fast_residuals": fast})
    return _finish(rep, x_true, t0)


def solve_ttevd(a, b, disc, x_true=None):
    """Truncated tEVD of a t-symmetric operator; eigentubes sorted by magnitude."""
    t0 = time.perf_counter()
    a, b = _check_data(a, b)
    ah, bh = dft_mode3(a), dft_mode3(b)
    _check_symmetric(ah)
    wh, lam = tevd_spectral(ah)
    kmax = lam.shape[1] if disc.k_max is None else min(disc.k_max, lam.shape[1])
    k, xh, res, ok, fast = _truncated_search("ttevd", ah, bh, wh, lam, wh, disc, range(1, kmax + 1), fro_norm(b))
    x = idft_mode3(_enforce_conjugate_symmetry(xh)) if xh is not None else None
    rep = SolveReport("ttevd", x, k, res, ok, threshold=disc.threshold(fro_norm(b)), k_start=1,
                      diagnostics={"fast_residuals": fast})
    return _finish(rep, x_true, t0)


def solve_rtsvd(a, b, disc, cfg, x_true=None, rng=None):
    """Randomized truncated tSVD.

    A low tubal-rank factorization of width ``r`` is built to tolerance
    ``cfg.epsilon``; the truncation index starts at ``max(1, r - oversample)``
    and grows until the discrepancy principle holds or ``r`` is reached.
    """
    t0 = time.perf_counter()
    a, b = _check_data(a, b)
    res_r = rtsvd(a, cfg, rng=rng)
    bnorm = fro_norm(b)
    thr = disc.threshold(bnorm)
    diag = {"r": res_r.r, "eta_trace": res_r.eta_trace, "rtsvd_truncated": res_r.truncated}
    if res_r.factors is None:
        rep = SolveReport("rtsvd", None, None, float("nan"), False, threshold=thr, k_start=0,
                          diagnostics={**diag, "reason": "epsilon >= ||A||_F: empty factorization"})
        return _finish(rep, x_true, t0)
    f = res_r.factors
    ah, bh = dft_mode3(a), dft_mode3(b)
    uh, vh = dft_mode3(f.U), dft_mode3(f.V)
    sh = np.stack([np.fft.fft(f.S[j, j]) for j in range(f.k)], axis=1)
    inv = _safe_reciprocal(sh)
    coef = np.conj(uh).transpose(0, 2, 1) @ bh
    k_hi = f.k if disc.k_max is None else min(f.k, disc.k_max)
    k_start = min(max(1, res_r.r - cfg.oversample), k_hi)
    best = None
    for k in range(k_start, k_hi + 1):
        xh = vh[:, :, :k] @ (inv[:, :k, None] * coef[:, :k])
        res = _true_residual(ah, xh, bh)
        if res <= thr:
            best = (k, xh, res, True)
            break
        if best is None or res < best[2]:
            best = (k, xh, res, False)
    k, xh, res, ok = best
    if not ok:
        diag["reason"] = "discrepancy not met up to r; epsilon too large for this noise level"
    x = idft_mode3(_enforce_conjugate_symmetry(xh))
    rep = SolveReport("rtsvd", x, k, res, ok, threshold=thr, k_start=k_start, diagnostics=diag)
    return _finish(rep, x_true, t0)


# ---------------------------------------------------------------------------
# Krylov solvers


def _e1_rhs(z, k):
    rhs = np.zeros((z.shape[0], k + 1, 1), dtype=complex)
    rhs[:, 0, 0] = z
    return rhs


def _krylov_loop(proc, solve_at, disc, bnorm, fixed_k=None, early_stop=False):
    """Grow the Krylov dimension until ``solve_at(k)`` meets the discrepancy test.

    ``solve_at(k)`` returns ``(yh, projected_residual, extra)``. Returns a dict
    with the chosen ``k`` and its solution, plus the failure reason if any.
    """
    thr = disc.threshold(bnorm)
    k_cap = proc.max_steps if disc.k_max is None else min(disc.k_max, proc.max_steps)
    ks = [fixed_k] if fixed_k is not None else range(1, k_cap + 1)
    history = []
    prev = None
    for k in ks:
        if proc.extend(k) < k:
            return {"ok": False, "k": prev[0] if prev else None, "sol": prev[1] if prev else None,
                    "reason": str(proc.breakdown), "history": history}
        yh, pres, extra = solve_at(k)
        history.append(pres)
        if fixed_k is not None:
            return {"ok": pres <= thr, "k": k, "sol": (yh, pres, extra), "history": history}
        if pres <= thr:
            if early_stop and prev is not None:
                return {"ok": True, "k": prev[0], "sol": prev[1], "history": history, "early_stop": True}
            return {"ok": True, "k": k, "sol": (yh, pres, extra), "history": history}
        prev = (k, (yh, pres, extra))
    return {"ok": False, "k": prev[0] if prev else None, "sol": prev[1] if prev else None,
            "reason": f"discrepancy not satisfied up to k = {k_cap}", "history": history}


def _krylov_report(method, out, basis_at, ah, bh, thr, x_true, t0, extra_diag=None):
    diag = {"projected_history": out["history"]}
    if "reason" in out:
        diag["reason"] = out["reason"]
    if out.get("early_stop"):
        diag["early_stop"] = True
    if extra_diag:
        diag.update(extra_diag)
    if out["sol"] is None:
        rep = SolveReport(method, None, out["k"], float("nan"), False, threshold=thr, diagnostics=diag)
        return _finish(rep, x_true, t0)
    yh, pres, extra = out["sol"]
    xh = basis_at(out["k"]) @ yh
    x = idft_mode3(_enforce_conjugate_symmetry(xh))
    res = _true_residual(ah, xh, bh)
    if extra:
        diag.update(extra)
    rep = SolveReport(method, x, out["k"], res, out["ok"], threshold=thr, projected_residual=pres,
                      k_start=1, diagnostics=diag)
    return _finish(rep, x_true, t0)


def _single_slice(a, b):
    a, b = _check_data(a, b)
    if b.shape[1] != 1:
        raise ValueError(f"expected a lateral slice for b, got {b.shape}; use solve_p for p > 1")
    return a, b


def _gkb(a, b, reorth, seed, a_hat=None):
    return GkbProcess(a, b, 1 if reorth else 0, rng=np.random.default_rng(seed), a_hat=a_hat)


def solve_tgkb(a, b, disc, x_true=None, reorth=True, seed=0, k=None, early_stop=False, a_hat=None):
    """Truncated tGKB: ``X_k = W_k * Y_k`` with ``Y_k`` solving the projected problem.

    The Krylov dimension grows until the projected residual
    ``||P_bar_k * Y - e1 * z1||_F`` drops below the threshold. Passing ``k``
    skips the search and solves at that dimension.
    """
    t0 = time.perf_counter()
    a, b = _single_slice(a, b)
    ah = dft_mode3(a) if a_hat is None else a_hat
    bh = dft_mode3(b)
    proc = _gkb(a, b, reorth, seed, a_hat=ah)
    z1 = proc.zs[0]

    def solve_at(kk):
        p = proc.p_bar_hat(kk)
        rhs = _e1_rhs(z1, kk)
        yh, _ = _solve_spectral(p, rhs, warn=False)
        return yh, _spec_norm(p @ yh - rhs), None

    bnorm = fro_norm(b)
    out = _krylov_loop(proc, solve_at, disc, bnorm, fixed_k=k, early_stop=early_stop)
    return _krylov_report("tgkb", out, proc.w_hat, ah, bh, disc.threshold(bnorm), x_true, t0,
                          {"steps": proc.k})


def gkb_ritz_triplets(proc, k=None):
    """Approximate singular triplets ``(s_i, Q*U_i, W*V_i)`` from a tGKB process.

    Returns real tensors ``(S, left, right)`` with ``S`` k x k f-diagonal.
    """
    k = proc.k if k is None else k
    uh, sh, vh = tsvd_spectral(proc.p_bar_hat(k), k)
    left = proc.q_hat(k) @ uh
    right = proc.w_hat(k) @ vh
    s = np.zeros((sh.shape[0], k, k), dtype=complex)
    s[:, np.arange(k), np.arange(k)] = sh
    return idft_mode3(s), idft_mode3(_enforce_conjugate_symmetry(left)), idft_mode3(_enforce_conjugate_symmetry(right))


def solve_tgkb_triplet_form(a, b, disc, x_true=None, reorth=True, seed=0, k=None):
    """tGKB solution written through the tSVD of the projected bidiagonal tensor.

    ``X_k = (W_k * V) * S^-1 * (Q_{k+1} * U)^T * b``; algebraically equal to
    :func:`solve_tgkb` at the same ``k``.
    """
    t0 = time.perf_counter()
    a, b = _single_slice(a, b)
    ah, bh = dft_mode3(a), dft_mode3(b)
    proc = _gkb(a, b, reorth, seed, a_hat=ah)

    def solve_at(kk):
        p = proc.p_bar_hat(kk)
        uh, sh, vh = tsvd_spectral(p, kk)
        if np.any(np.abs(sh) == 0.0):
            raise ValueError(f"singular projected tensor at k = {kk}: S is not invertible")
        proj_b = np.conj(proc.q_hat(kk)).transpose(0, 2, 1) @ bh
        yh = vh @ ((1.0 / sh)[:, :, None] * (np.conj(uh).transpose(0, 2, 1) @ proj_b))
        return yh, _spec_norm(p @ yh - proj_b), None

    bnorm = fro_norm(b)
    out = _krylov_loop(proc, solve_at, disc, bnorm, fixed_k=k)
    return _krylov_report("tgkb_triplet", out, proc.w_hat, ah, bh, disc.threshold(bnorm), x_true, t0)


def _lanczos(a, b, reorth, seed, a_hat=None):
    return LanczosProcess(a, b, 1 if reorth else 0, rng=np.random.default_rng(seed), a_hat=a_hat)


def solve_tlanczos(a, b, disc, x_true=None, reorth=True, seed=0, k=None, galerkin=False, early_stop=False):
    """Truncated t-Lanczos for a t-symmetric operator.

    By default ``Y_k`` minimizes ``||T_bar_k * Y - e1 * z0||_F``. With
    ``galerkin=True`` it instead solves the square system ``T_k * Y = e1 * z0``
    (the form shared with :func:`solve_tlanczos_eig_form`).
    """
    t0 = time.perf_counter()
    a, b = _single_slice(a, b)
    ah, bh = dft_mode3(a), dft_mode3(b)
    _check_symmetric(ah)
    proc = _lanczos(a, b, reorth, seed, a_hat=ah)
    z0 = proc.zs[0]

    def solve_at(kk):
        t = proc.t_bar_hat(kk)
        rhs = _e1_rhs(z0, kk)
        if galerkin:
            yh = np.linalg.solve(t[:, :kk, :], rhs[:, :kk])
        else:
            yh, _ = _solve_spectral(t, rhs, warn=False)
        return yh, _spec_norm(t @ yh - rhs), None

    bnorm = fro_norm(b)
    out = _krylov_loop(proc, solve_at, disc, bnorm, fixed_k=k, early_stop=early_stop)
    qk = lambda kk: proc.q_hat(kk)[:, :, :kk]  # noqa: E731
    return _krylov_report("tlanczos", out, qk, ah, bh, disc.threshold(bnorm), x_true, t0,
                          {"steps": proc.k, "galerkin": galerkin})


def solve_tlanczos_eig_form(a, b, disc, x_true=None, reorth=True, seed=0, k=None):
    """t-Lanczos solution through the t-eigenpairs of the square tridiagonal ``T_k``.

    ``X_k = (Q_k * W) * D^-1 * (Q_k * W)^T * b`` with ``T_k = W * D * W^T``.
    The report carries the residual of this solution against both ``T_bar_k``
    (``projected_residual``) and the least-squares residual of the
    rectangular problem at the same ``k`` (``diagnostics["lsq_residual"]``).
    """
    t0 = time.perf_counter()
    a, b = _single_slice(a, b)
    ah, bh = dft_mode3(a), dft_mode3(b)
    _check_symmetric(ah)
    proc = _lanczos(a, b, reorth, seed, a_hat=ah)
    z0 = proc.zs[0]

    def solve_at(kk):
        tbar = proc.t_bar_hat(kk)
        wh, lam = tevd_spectral(tbar[:, :kk, :], kk)
        if np.any(lam == 0.0):
            raise ValueError(f"T_k has a zero eigenvalue at k = {kk}")
        qw = proc.q_hat(kk)[:, :, :kk] @ wh
        zh = (1.0 / lam)[:, :, None] * (np.conj(qw).transpose(0, 2, 1) @ bh)
        yh = wh @ zh
        rhs = _e1_rhs(z0, kk)
        y_lsq, _ = _solve_spectral(tbar, rhs, warn=False)
        return yh, _spec_norm(tbar @ yh - rhs), {"lsq_residual": _spec_norm(tbar @ y_lsq - rhs)}

    bnorm = fro_norm(b)
    out = _krylov_loop(proc, solve_at, disc, bnorm, fixed_k=k)
    qk = lambda kk: proc.q_hat(kk)[:, :, :kk]  # noqa: E731
    return _krylov_report("tlanczos_eig", out, qk, ah, bh, disc.threshold(bnorm), x_true, t0)


# ---------------------------------------------------------------------------
# projected Tikhonov


def _tikhonov_parts(p, rhs):
    uh, sh, vh = tsvd_spectral(p, p.shape[2])
    beta = (np.conj(uh).transpose(0, 2, 1) @ rhs)[:, :, 0]
    outside = float(np.sum(np.abs(rhs[:, :, 0] - (uh @ beta[:, :, None])[:, :, 0]) ** 2))
    return uh, sh, vh, beta, outside


def tikhonov_projected_solution(p, rhs, mu):
    """Facewise minimizer of ``||p*y - rhs||_F^2 + mu^-1 ||y||_F^2`` (spectral inputs)."""
    _, sh, vh, beta, _ = _tikhonov_parts(p, rhs)
    filt = sh / (sh**2 + 1.0 / mu)
    return vh @ (filt * beta)[:, :, None]


def _tikhonov_residual(sh, beta, outside, mu, n):
    damp = 1.0 / (1.0 + mu * sh**2)
    return float(np.sqrt((np.sum(np.abs(beta * damp) ** 2) + outside) / n))


def _bisect_mu(sh, beta, outside, n, thr, tik):
    """Weight ``mu`` in the interval whose residual meets ``thr``, or None.

    The residual decreases as ``mu`` grows; bisection keeps the upper end on
    the feasible side so the returned ``mu`` always satisfies the test.
    """
    lo, hi = tik.mu_interval
    phi = lambda mu: _tikhonov_residual(sh, beta, outside, mu, n) - thr  # noqa: E731
    if phi(hi) > 0:
        return None, 0
    if phi(lo) <= 0:
        return lo, 0
    a, b = np.log10(lo), np.log10(hi)
    it = 0
    while it < tik.max_bisect and (10**b - 10**a) > tik.bisect_tol * 10**b:
        mid = 0.5 * (a + b)
        if phi(10**mid) <= 0:
            b = mid
        else:
            a = mid
        it += 1
    return float(10**b), it


def solve_tikhonov_projected(a, b, disc, tik=None, process="tgkb", x_true=None, reorth=True, seed=0, k=None):
    """Tikhonov regularization of the projected tGKB or t-Lanczos problem.

    For each Krylov dimension ``k`` the weight ``mu`` is bisected so that
    the projected residual equals ``tau * delta``; ``k`` grows until a weight
    inside ``tik.mu_interval`` achieves it.
    """
    t0 = time.perf_counter()
    tik = TikhonovConfig() if tik is None else tik
    a, b = _single_slice(a, b)
    ah, bh = dft_mode3(a), dft_mode3(b)
    if process == "tgkb":
        proc = _gkb(a, b, reorth, seed, a_hat=ah)
        proj = proc.p_bar_hat
        basis = proc.w_hat
        method = "tgkt"
    elif process == "tlanczos":
        _check_symmetric(ah)
        proc = _lanczos(a, b, reorth, seed, a_hat=ah)
        proj = proc.t_bar_hat
        basis = lambda kk: proc.q_hat(kk)[:, :, :kk]  # noqa: E731
        method = "tlanczos_tik"
    else:
        raise ValueError(f"unknown process {process!r}")
    z = proc.zs[0]
    n = ah.shape[0]
    bnorm = fro_norm(b)
    thr = disc.threshold(bnorm)

    def solve_at(kk):
        p = proj(kk)
        rhs = _e1_rhs(z, kk)
        uh, sh, vh, beta, outside = _tikhonov_parts(p, rhs)
        mu, iters = _bisect_mu(sh, beta, outside, n, thr, tik)
        if mu is None:
            mu_eval = tik.mu_interval[1]
        else:
            mu_eval = mu
        filt = sh / (sh**2 + 1.0 / mu_eval)
        yh = vh @ (filt * beta)[:, :, None]
        pres = _tikhonov_residual(sh, beta, outside, mu_eval, n)
        if mu is None:
            pres = max(pres, np.nextafter(thr, np.inf))
        return yh, pres, {"mu": mu_eval, "bisect_iterations": iters}

    out = _krylov_loop(proc, solve_at, disc, bnorm, fixed_k=k)
    rep = _krylov_report(method, out, basis, ah, bh, thr, x_true, t0, {"steps": proc.k})
    rep.mu = rep.diagnostics.get("mu")
    return rep


# ---------------------------------------------------------------------------
# several right-hand sides


_SINGLE = {}


def _slice_seed(seed, j):
    return np.random.SeedSequence([0 if seed is None else seed, j])


def solve_p(a, B, deltas, method="tgkb", tau=1.2, k_max=None, x_true=None, seed=0, jobs=1, **kwargs):
    """Apply a single-slice solver independently to every lateral slice of ``B``.

    ``deltas[j]`` bounds the noise in slice ``j``. Slice ``j`` uses a random
    stream derived from ``(seed, j)``; with ``jobs > 1`` slices run in a
    thread pool and results do not depend on the execution order.
    """
    t0 = time.perf_counter()
    a, B = _check_data(a, B)
    p = B.shape[1]
    deltas = np.broadcast_to(np.asarray(deltas, dtype=float), (p,))
    fn = _SINGLE[method]
    ah = dft_mode3(a)

    def one(j):
        disc = DiscrepancyConfig(float(deltas[j]), tau, k_max)
        seed_j = seed if p == 1 else _slice_seed(seed, j)
        return fn(a, B[:, j : j + 1, :], disc, seed=seed_j, a_hat=ah, **kwargs)

    if jobs > 1 and p > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reps = list(pool.map(one, range(p)))
    else:
        reps = [one(j) for j in range(p)]
    failed = [j for j, r in enumerate(reps) if not r.success or r.x is None]
    ks = tuple(r.k for r in reps)
    diag = {"per_slice": reps, "failed_slices": failed}
    if any(r.x is None for r in reps):
        rep = SolveReport(f"{method}_p", None, ks, float("nan"), False, diagnostics=diag)
        return _finish(rep, x_true, t0)
    x = np.concatenate([r.x for r in reps], axis=1)
    res = fro_norm(B - idft_mode3(ah @ dft_mode3(x)))
    mus = tuple(r.mu for r in reps) if any(r.mu is not None for r in reps) else None
    rep = SolveReport(f"{method}_p", x, ks, res, not failed, mu=mus, diagnostics=diag,
                      threshold=float(np.sqrt(np.sum((tau * deltas) ** 2))))
    return _finish(rep, x_true, t0)


def _tgkb_entry(a, b, disc, seed=0, a_hat=None, **kw):
    return solve_tgkb(a, b, disc, seed=seed, a_hat=a_hat, **kw)


def _tlanczos_entry(a, b, disc, seed=0, a_hat=None, **kw):
    return solve_tlanczos(a, b, disc, seed=seed, **kw)


def _tgkt_entry(a, b, disc, seed=0, a_hat=None, **kw):
    return solve_tikhonov_projected(a, b, disc, process="tgkb", seed=seed, **kw)


def _tlanczos_tik_entry(a, b, disc, seed=0, a_hat=None, **kw):
    return solve_tikhonov_projected(a, b, disc, process="tlanczos", seed=seed, **kw)


_SINGLE.update(
    tgkb=_tgkb_entry,
    tlanczos=_tlanczos_entry,
    tgkt=_tgkt_entry,
    tlanczos_tik=_tlanczos_tik_entry,
)


def solve_nested_tgkb_p(a, B, deltas, tau=1.2, k_init=2, k_max=None, x_true=None, seed=0):
    """Nested t-Krylov recycling across the lateral slices of ``B``.

    One tGKB process is started from the first slice (with
    reorthogonalization) and only ever extended. Slice ``j`` is solved in the
    current subspace against the full projection ``Q_{k+1}^T * B_j``; the
    dimension grows while that projected residual exceeds ``tau * deltas[j]``.
    """
    t0 = time.perf_counter()
    a, B = _check_data(a, B)
    p = B.shape[1]
    deltas = np.broadcast_to(np.asarray(deltas, dtype=float), (p,))
    ah = dft_mode3(a)
    proc = GkbProcess(a, B[:, :1, :], 1, rng=np.random.default_rng(seed), a_hat=ah)
    k_cap = proc.max_steps if k_max is None else min(k_max, proc.max_steps)
    k = min(k_init, k_cap)
    ks, ys, pres_all, failed = [], [], [], []
    reason = None
    for j in range(p):
        bj = dft_mode3(B[:, j : j + 1, :])
        thr = max(tau * deltas[j], 1e-12 * fro_norm(B[:, j]))
        while True:
            if proc.extend(k) < k:
                reason = str(proc.breakdown)
                k = proc.k
            p_hat = proc.p_bar_hat(k)
            rhs = np.conj(proc.q_hat(k)).transpose(0, 2, 1) @ bj
            yh, _ = _solve_spectral(p_hat, rhs, warn=False)
            pres = _spec_norm(p_hat @ yh - rhs)
            if pres <= thr:
                break
            if k >= k_cap or reason is not None:
                failed.append(j)
                reason = reason or f"discrepancy not satisfied for slice {j} up to k = {k_cap}"
                break
            k += 1
        ks.append(k)
        ys.append(proc.w_hat(k) @ yh)
        pres_all.append(pres)
    xh = np.concatenate(ys, axis=2)
    x = idft_mode3(_enforce_conjugate_symmetry(xh))
    res = fro_norm(B - idft_mode3(ah @ dft_mode3(x)))
    true_per_slice = [fro_norm(B[:, j] - idft_mode3(ah @ dft_mode3(x[:, j : j + 1]))[:, 0]) for j in range(p)]
    diag = {
        "k_per_slice": tuple(ks),
        "projected_residuals": tuple(pres_all),
        "true_residuals": tuple(true_per_slice),
        "steps": proc.k,
        "failed_slices": failed,
    }
    if reason:
        diag["reason"] = reason
    rep = SolveReport("nested_tgkb_p", x, ks[-1], res, not failed, projected_residual=max(pres_all),
                      threshold=float(np.sqrt(np.sum((tau * deltas) ** 2))), diagnostics=diag)
    return _finish(rep, x_true, t0)


# ---------------------------------------------------------------------------
# uniform entry point


METHODS = (
    "ttsvd",
    "ttevd",
    "rtsvd",
    "tgkb",
    "tgkb_triplet",
    "tlanczos",
    "tlanczos_eig",
    "tgkt",
    "tlanczos_tik",
    "tgkb_p",
    "tlanczos_p",
    "tgkt_p",
    "tlanczos_tik_p",
    "nested_tgkb_p",
)


def run_method(method, a, b, deltas, tau=1.1, k_max=None, rtsvd_cfg=None, tik=None, seed=0, x_true=None,
               early_stop=False, jobs=1):
    """Dispatch on a method tag.

    ``deltas`` holds the per-slice noise bounds; methods that treat the
    data as a whole use their Euclidean norm.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; known: {', '.join(METHODS)}")
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    delta = float(np.sqrt(np.sum(deltas**2)))
    disc = DiscrepancyConfig(delta, tau, k_max)
    p = np.shape(b)[1]
    if method == "ttsvd":
        return solve_ttsvd(a, b, disc, x_true=x_true)
    if method == "ttevd":
        return solve_ttevd(a, b, disc, x_true=x_true)
    if method == "rtsvd":
        cfg = rtsvd_cfg if rtsvd_cfg is not None else RtsvdConfig(epsilon=10**-1.5)
        if cfg.seed is None:
            cfg = replace(cfg, seed=seed)
        return solve_rtsvd(a, b, disc, cfg, x_true=x_true)
    if method.endswith("_p"):
        if method == "nested_tgkb_p":
            return solve_nested_tgkb_p(a, b, deltas, tau=tau, k_max=k_max, x_true=x_true, seed=seed)
        base = method[:-2]
        kw = {"tik": tik} if base in ("tgkt", "tlanczos_tik") else {}
        if base in ("tgkb", "tlanczos"):
            kw["early_stop"] = early_stop
        return solve_p(a, b, deltas, base, tau=tau, k_max=k_max, x_true=x_true, seed=seed, jobs=jobs, **kw)
    if p != 1:
        raise ValueError(f"method {method!r} takes a single lateral slice; use {method}_p for p = {p}")
    if method == "tgkb":
        return solve_tgkb(a, b, disc, x_true=x_true, seed=seed, early_stop=early_stop)
    if method == "tgkb_triplet":
        return solve_tgkb_triplet_form(a, b, disc, x_true=x_true, seed=seed)
    if method == "tlanczos":
        return solve_tlanczos(a, b, disc, x_true=x_true, seed=seed, early_stop=early_stop)
    if method == "tlanczos_eig":
        return solve_tlanczos_eig_form(a, b, disc, x_true=x_true, seed=seed)
    if method == "tgkt":
        return solve_tikhonov_projected(a, b, disc, tik, "tgkb", x_true=x_true, seed=seed)
    return solve_tikhonov_projected(a, b, disc, tik, "tlanczos", x_true=x_true, seed=seed)
