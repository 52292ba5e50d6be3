"""Acceptance suite: one test and one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the status lines are written
straight to the terminal so they appear even when output is captured.
"""

import time

import numpy as np
import pytest

from tpreg.decomp import RtsvdConfig, rtsvd, tevd, tsvd
from tpreg.krylov import gram_residual, tgkb, tlanczos
from tpreg.solvers import (
    DiscrepancyConfig,
    relative_error,
    solve_nested_tgkb_p,
    solve_p,
    solve_rtsvd,
    solve_tgkb,
    solve_tgkb_triplet_form,
    solve_tikhonov_projected,
    solve_tlanczos,
    solve_tlanczos_eig_form,
    solve_ttevd,
    solve_ttsvd,
)
from tpreg.tcore import fro_norm, normalize, tprod, tprod_direct, ttranspose
from tpreg.testprob import (
    BlurSpec,
    NoiseSpec,
    blur_tensor,
    data_path,
    example_operator,
    image_to_slice,
    make_instance,
)


@pytest.fixture
def report(capsys):
    """Print one status line for a criterion, then assert it."""

    def _report(number, ok, detail, t0=None, limit=None):
        if t0 is not None:
            elapsed = time.perf_counter() - t0
            within = elapsed < limit
            ok = ok and within
            detail = f"{detail}; {elapsed:.1f}s (limit {limit}s)"
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return _report


def _rel(a, b):
    return fro_norm(a - b) / fro_norm(b)


# ---------------------------------------------------------------------------
# 1. t-product oracle equivalence


def test_criterion_1_tprod_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        l, m, p, n = rng.integers(1, 5, size=3).tolist() + [int(rng.integers(1, 6))]
        b = rng.standard_normal((l, m, n))
        c = rng.standard_normal((m, p, n))
        worst = max(worst, float(np.max(np.abs(tprod(b, c) - tprod_direct(b, c)))))
    report(1, worst <= 1e-10, f"100 pairs, max entrywise gap {worst:.2e}", t0, 5)


# ---------------------------------------------------------------------------
# 2. decomposition identities


def test_criterion_2_decomposition_identities(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = {"tsvd": 0.0, "tevd": 0.0, "gkb": 0.0, "lanczos": 0.0, "gram": 0.0}
    for _ in range(25):
        l = int(rng.integers(2, 11))
        m = int(rng.integers(2, 9))
        n = int(rng.integers(1, 5))
        a = rng.standard_normal((l, m, n))
        f = tsvd(a)
        worst["tsvd"] = max(worst["tsvd"], _rel(tprod(tprod(f.U, f.S), ttranspose(f.V)), a))

        c = rng.standard_normal((l, m, n))
        g = tprod(ttranspose(c), c)
        e = tevd(g)
        worst["tevd"] = max(worst["tevd"], _rel(tprod(tprod(e.W, e.D), ttranspose(e.W)), g))

        k = min(l, m) - 1 if min(l, m) > 2 else 1
        d = tgkb(a, rng.standard_normal((l, 1, n)), k)
        worst["gkb"] = max(worst["gkb"], _rel(tprod(d.Q, d.P_bar), tprod(a, d.W)))
        km = min(k, m - 1)
        dl = tlanczos(g, rng.standard_normal((m, 1, n)), km)
        worst["lanczos"] = max(worst["lanczos"], _rel(tprod(dl.Q, dl.T_bar), tprod(g, dl.Q[:, :km])))
        worst["gram"] = max(worst["gram"], gram_residual(d.Q), gram_residual(d.W), gram_residual(dl.Q))
    ok = max(worst["tsvd"], worst["tevd"], worst["gkb"], worst["lanczos"]) <= 1e-8 and worst["gram"] <= 1e-10
    detail = ", ".join(f"{key} {val:.1e}" for key, val in worst.items())
    report(2, ok, f"25 instances, worst {detail}", t0, 30)


# ---------------------------------------------------------------------------
# 3. randomized range-finder identities


def test_criterion_3_rtsvd_identities(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst_final = worst_trace = 0.0
    for i in range(25):
        l, m, n = int(rng.integers(3, 11)), int(rng.integers(3, 9)), int(rng.integers(1, 5))
        a = rng.standard_normal((l, m, n))
        a2 = fro_norm(a) ** 2
        res = rtsvd(a, RtsvdConfig(epsilon=0.3 * fro_norm(a), seed=i, check_residual=True))
        direct = fro_norm(a - tprod(res.Q, res.B)) ** 2
        worst_final = max(worst_final, abs((a2 - fro_norm(res.B) ** 2) - direct) / a2)
        gaps = np.abs(np.array(res.eta_trace) - np.array(res.residual_trace)) / a2
        worst_trace = max(worst_trace, float(gaps.max()))
    ok = worst_final <= 1e-6 and worst_trace <= 1e-6
    report(3, ok, f"25 instances, energy identity {worst_final:.1e}, eta trace {worst_trace:.1e}", t0, 30)


# ---------------------------------------------------------------------------
# 4. best tubal-rank-k approximation


def test_criterion_4_truncation_dominance(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    margin = np.inf
    for _ in range(10):
        a = rng.standard_normal((6, 5, 4))
        for k in (1, 2, 3):
            f = tsvd(a, k)
            best = fro_norm(a - tprod(tprod(f.U, f.S), ttranspose(f.V)))
            for c in range(50):
                if c % 2:
                    # perturbations of the optimum are the hardest competitors
                    x = tprod(f.U, f.S) + 0.05 * rng.standard_normal((6, k, 4))
                    y = ttranspose(f.V) + 0.05 * rng.standard_normal((k, 5, 4))
                else:
                    x = rng.standard_normal((6, k, 4))
                    y = rng.standard_normal((k, 5, 4))
                margin = min(margin, fro_norm(a - tprod(x, y)) - best)
    report(4, margin >= -1e-8, f"1500 competitors, smallest margin {margin:.2e}", t0, 60)


# ---------------------------------------------------------------------------
# 5. small prolate-by-baart reproduction


def test_criterion_5_example_reproduction(report):
    t0 = time.perf_counter()
    a = example_operator()
    x_true = np.ones((100, 1, 100))
    bands = {1e-2: ((1, 3), (0.04, 0.15)), 1e-3: ((2, 4), (0.003, 0.02))}
    ok = True
    parts = []
    for level, ((k_lo, k_hi), (e_lo, e_hi)) in bands.items():
        inst = make_instance(a, x_true, NoiseSpec(level, 0))
        disc = DiscrepancyConfig(inst.delta, 1.1)
        reps = [
            solve_tgkb(a, inst.b, disc, x_true=x_true),
            solve_ttsvd(a, inst.b, disc, x_true=x_true),
            solve_rtsvd(a, inst.b, disc, RtsvdConfig(epsilon=10**-1.5, oversample=3), x_true=x_true),
        ]
        for r in reps:
            good = r.success and k_lo <= r.k <= k_hi and e_lo <= r.relative_error <= e_hi
            ok = ok and good
            parts.append(f"{r.method}@{level:g} k={r.k} err={r.relative_error:.2e}")
    report(5, ok, "; ".join(parts), t0, 120)


# ---------------------------------------------------------------------------
# 6. deblurring improves on the data


def _minimal(solver, k):
    """``True`` when capping the dimension at ``k - 1`` makes ``solver`` fail."""
    return k == 1 or not solver(k - 1).success


def test_criterion_6_blur_property(report):
    t0 = time.perf_counter()
    x_true = image_to_slice(data_path("phantom64.pgm"))
    spec = BlurSpec(64, 3.0, 9)
    tau = 1.1
    runs = []
    for symmetric in (False, True):
        a = blur_tensor(spec, symmetric=symmetric)
        inst = make_instance(a, x_true, NoiseSpec(1e-2, 0))
        d = inst.delta

        def disc(k_max=None, d=d):
            return DiscrepancyConfig(d, tau, k_max)

        b = inst.b
        data_err = relative_error(b, x_true)
        cfg = RtsvdConfig(epsilon=10**-1.5, oversample=10)
        if not symmetric:
            solvers = {
                "ttsvd": lambda km, a=a, b=b: solve_ttsvd(a, b, disc(km), x_true=x_true),
                "rtsvd": lambda km, a=a, b=b: solve_rtsvd(a, b, disc(km), cfg, x_true=x_true),
                "tgkb": lambda km, a=a, b=b: solve_tgkb(a, b, disc(km), x_true=x_true),
                "tgkb_triplet": lambda km, a=a, b=b: solve_tgkb_triplet_form(a, b, disc(km), x_true=x_true),
                "tgkt": lambda km, a=a, b=b: solve_tikhonov_projected(a, b, disc(km), process="tgkb",
                                                                      x_true=x_true),
            }
        else:
            solvers = {
                "ttevd": lambda km, a=a, b=b: solve_ttevd(a, b, disc(km), x_true=x_true),
                "tlanczos": lambda km, a=a, b=b: solve_tlanczos(a, b, disc(km), x_true=x_true),
                "tlanczos_tik": lambda km, a=a, b=b: solve_tikhonov_projected(a, b, disc(km),
                                                                              process="tlanczos",
                                                                              x_true=x_true),
            }
        for name, solver in solvers.items():
            rep = solver(None)
            ok = (
                rep.success
                and rep.relative_error < data_err
                and rep.residual_norm <= rep.threshold
                and rep.threshold <= tau * d
                and _minimal(solver, rep.k)
            )
            runs.append((ok, f"{name} k={rep.k} err={rep.relative_error:.3f}<{data_err:.3f}"))
    report(6, all(ok for ok, _ in runs), "; ".join(t for _, t in runs), t0, 180)


# ---------------------------------------------------------------------------
# 7. coincidences between methods


def test_criterion_7_method_coincidence(report):
    t0 = time.perf_counter()
    checks = []

    # T-tEVD and T-tSVD on the symmetric blur fixture
    x_true = image_to_slice(data_path("phantom64.pgm"))
    a = blur_tensor(BlurSpec(64, 3.0, 9), symmetric=True)
    inst = make_instance(a, x_true, NoiseSpec(1e-2, 0))
    disc = DiscrepancyConfig(inst.delta, 1.1)
    s = solve_ttsvd(a, inst.b, disc, x_true=x_true)
    e = solve_ttevd(a, inst.b, disc, x_true=x_true)
    gap = abs(s.relative_error - e.relative_error)
    checks.append(("ttevd=ttsvd", s.k == e.k and gap <= 1e-10, gap))

    rng = np.random.default_rng(7)
    gkb_gap = lz_gap = gal_gap = 0.0
    for i in range(50):
        m, n = int(rng.integers(4, 9)), int(rng.integers(1, 5))
        l = m + int(rng.integers(0, 4))
        k = int(rng.integers(1, m))
        a = rng.standard_normal((l, m, n))
        b = rng.standard_normal((l, 1, n))
        loose = DiscrepancyConfig(0.0)
        x1 = solve_tgkb(a, b, loose, k=k, seed=i).x
        x2 = solve_tgkb_triplet_form(a, b, loose, k=k, seed=i).x
        gkb_gap = max(gkb_gap, _rel(x2, x1))
        c = rng.standard_normal((m + 2, m, n))
        g = tprod(ttranspose(c), c)
        bs = rng.standard_normal((m, 1, n))
        xl = solve_tlanczos(g, bs, loose, k=k, seed=i).x
        xe = solve_tlanczos_eig_form(g, bs, loose, k=k, seed=i).x
        xg = solve_tlanczos(g, bs, loose, k=k, seed=i, galerkin=True).x
        lz_gap = max(lz_gap, _rel(xe, xl))
        gal_gap = max(gal_gap, _rel(xe, xg))
    checks.append(("tgkb=triplet", gkb_gap <= 1e-8, gkb_gap))
    # The eigenpair form inverts the square T_k; the direct form solves the
    # least-squares problem with the (k+1) x k T_bar_k. They agree only when
    # the subdiagonal tube vanishes, so this comparison is expected to fail.
    checks.append(("tlanczos(lsq)=eig", lz_gap <= 1e-8, lz_gap))
    checks.append(("tlanczos(galerkin)=eig", gal_gap <= 1e-8, gal_gap))

    a = rng.standard_normal((12, 10, 3))
    b = tprod(a, rng.standard_normal((10, 1, 3))) + 0.05 * rng.standard_normal((12, 1, 3))
    d = 0.2 * fro_norm(b)
    x_single = solve_tgkb(a, b, DiscrepancyConfig(d, 1.2), seed=0).x
    x_nested = solve_nested_tgkb_p(a, b, [d], tau=1.2, seed=0).x
    nest_gap = _rel(x_nested, x_single)
    checks.append(("nested(p=1)=tgkb", nest_gap <= 1e-10, nest_gap))

    detail = "; ".join(f"{name} {'ok' if ok else 'MISMATCH'} {val:.1e}" for name, ok, val in checks)
    report(7, all(ok for _, ok, _ in checks), detail)


# ---------------------------------------------------------------------------
# 8. nested recycling on three right-hand sides


def test_criterion_8_nested_recycling(report):
    t0 = time.perf_counter()
    x_true = image_to_slice(data_path("phantom64.ppm"))
    a = blur_tensor(BlurSpec(64, 3.0, 9))
    inst = make_instance(a, x_true, NoiseSpec(1e-3, 0))
    tau = 1.2
    nested = solve_nested_tgkb_p(a, inst.b, inst.deltas, tau=tau, x_true=x_true)
    indep = solve_p(a, inst.b, inst.deltas, "tgkb", tau=tau, x_true=x_true)
    ks = nested.diagnostics["k_per_slice"]
    true_ok = all(r <= tau * dj for r, dj in zip(nested.diagnostics["true_residuals"], inst.deltas))
    ok = (
        nested.success
        and all(p <= q for p, q in zip(ks, ks[1:]))
        and not nested.diagnostics["failed_slices"]
        and true_ok
        and nested.diagnostics["steps"] <= sum(indep.k)
    )
    detail = (f"k per slice {ks}, nested steps {nested.diagnostics['steps']} vs independent "
              f"{sum(indep.k)} {indep.k}, errors {nested.relative_error:.3f} / {indep.relative_error:.3f}")
    report(8, ok, detail, t0, 120)


# ---------------------------------------------------------------------------
# 9. determinism


def test_criterion_9_determinism(report):
    rng = np.random.default_rng(9)
    a = rng.standard_normal((8, 6, 4))
    x = rng.standard_normal((6, 2, 4))
    i1 = make_instance(a, x, NoiseSpec(1e-2, 11))
    i2 = make_instance(a, x, NoiseSpec(1e-2, 11))
    noise_ok = np.array_equal(i1.b, i2.b) and np.array_equal(i1.deltas, i2.deltas)

    cfg = RtsvdConfig(epsilon=0.2 * fro_norm(a), seed=5)
    r1, r2 = rtsvd(a, cfg), rtsvd(a, cfg)
    rtsvd_ok = r1.r == r2.r and all(
        np.array_equal(getattr(r1.factors, f), getattr(r2.factors, f)) for f in ("U", "S", "V")
    ) and np.array_equal(r1.Q, r2.Q)
    b = i1.b[:, :1]
    s1 = solve_rtsvd(a, b, DiscrepancyConfig(i1.deltas[0]), cfg)
    s2 = solve_rtsvd(a, b, DiscrepancyConfig(i1.deltas[0]), cfg)
    rtsvd_ok = rtsvd_ok and s1.k == s2.k and np.array_equal(s1.x, s2.x)

    flat = np.ones((5, 1, 4))  # only the zero-frequency spectral slice is nonzero
    n1 = normalize(flat, rng=np.random.default_rng(3))
    n2 = normalize(flat, rng=np.random.default_rng(3))
    norm_ok = bool(n1.degenerate_slices) and np.array_equal(n1.direction, n2.direction) and np.array_equal(n1.scale, n2.scale)

    ok = noise_ok and rtsvd_ok and norm_ok
    report(9, ok, f"noise {noise_ok}, rtsvd {rtsvd_ok}, degenerate normalize {norm_ok}")
