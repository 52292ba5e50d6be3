"""Command-line front end.

Subcommands:

``gen``        build a problem instance and save it (T3D1 files plus a JSON manifest)
``solve``      run one method on an instance and write a one-row CSV
``bench``      run every (method, noise level) cell of an experiment
``sweep-eps``  RT-tSVD sensitivity to the tolerance epsilon

Settings come from an optional flat ``key = value`` config file
(``--config``); command-line flags override it.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import t3d
from .decomp import RtsvdConfig, rtsvd
from .solvers import METHODS, DiscrepancyConfig, SolveReport, TikhonovConfig, run_method, solve_rtsvd
from .testprob import (
    BlurSpec,
    NoiseSpec,
    ProblemInstance,
    blur_tensor,
    data_path,
    example_operator,
    image_to_slice,
    load_frames,
    load_matrix_fixture,
    make_instance,
    prolate_slices,
    tensor_to_image,
)

CSV_COLUMNS = ("method", "noise_level", "k", "relative_error", "cpu_seconds", "status", "diagnostics")
SWEEP_COLUMNS = ("epsilon", "r", "k", "relative_error", "status", "diagnostics")
PROBLEMS = ("example", "blur", "blur-sym")


@dataclass
class ExperimentConfig:
    problem: str = "example"
    methods: list = field(default_factory=lambda: ["tgkb", "ttsvd", "rtsvd", "tgkt"])
    noise_levels: list = field(default_factory=lambda: [1e-3, 1e-2])
    tau: float = 1.1
    kmax: int | None = None
    delta: list | None = None
    eps: float = 10**-1.5
    rho: int = 3
    mu_lo: float = 1e1
    mu_hi: float = 1e7
    seed: int = 0
    sigma: float = 3.0
    band: int = 9
    prolate_w: float = 0.46
    fixture: str | None = None
    image: str | None = None
    frames: str | None = None
    eps_grid: list = field(default_factory=lambda: [10**-2.0, 10**-1.5, 10**-1.0, 10**-0.5])
    jobs: int = 1
    early_stop: bool = False
    out: str | None = None

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {', '.join(PROBLEMS)}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown method tag(s) {bad}; known: {', '.join(METHODS)}")
        for name in ("fixture", "image", "frames"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ValueError(f"{name} {path} does not exist")
        if self.image and self.frames:
            raise ValueError("give either image or frames, not both")
        if any(v < 0 for v in self.noise_levels):
            raise ValueError("noise levels must be nonnegative")
        return self

    def tik(self):
        return TikhonovConfig(mu_interval=(self.mu_lo, self.mu_hi))

    def rtsvd_cfg(self, seed):
        return RtsvdConfig(epsilon=self.eps, oversample=self.rho, seed=seed)


def _floats(text):
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _strings(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


_PARSERS = {
    "methods": _strings,
    "noise_levels": _floats,
    "eps_grid": _floats,
    "delta": _floats,
    "tau": float,
    "eps": float,
    "mu_lo": float,
    "mu_hi": float,
    "sigma": float,
    "prolate_w": float,
    "kmax": int,
    "rho": int,
    "seed": int,
    "band": int,
    "jobs": int,
    "early_stop": lambda v: str(v).strip().lower() in ("1", "true", "yes", "on"),
}


def read_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    known = {f.name for f in fields(ExperimentConfig)}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _PARSERS.get(key, str)(val)
    return values


def derive_seed(seed, *keys):
    """Deterministic child seed for a cell identified by ``keys``."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# problems


def build_operator(cfg):
    """Operator tensor and ground truth for the configured problem."""
    if cfg.problem == "example":
        if cfg.fixture:
            inner = load_matrix_fixture(cfg.fixture)
            a = prolate_slices(inner.shape[0], cfg.prolate_w, inner)
        else:
            a = example_operator(cfg.prolate_w)
        n = a.shape[0]
        return a, np.ones((n, 1, n))
    if cfg.frames:
        x = load_frames(cfg.frames)
    else:
        x = image_to_slice(cfg.image or data_path("phantom64.pgm"))
    n = x.shape[0]
    a = blur_tensor(BlurSpec(n, cfg.sigma, cfg.band), symmetric=cfg.problem == "blur-sym")
    return a, x


def build_instance(cfg, level, noise_seed, operator=None):
    a, x = operator if operator is not None else build_operator(cfg)
    params = {"sigma": cfg.sigma, "band": cfg.band} if cfg.problem != "example" else {"w": cfg.prolate_w}
    return make_instance(a, x, NoiseSpec(level, noise_seed), tag=cfg.problem, params=params)


def _deltas(cfg, inst):
    """Per-slice noise bounds: user-supplied if given, else the injected ones."""
    p = inst.b.shape[1]
    if cfg.delta is None:
        return inst.deltas
    if len(cfg.delta) == p:
        return np.asarray(cfg.delta, dtype=float)
    if len(cfg.delta) == 1:
        return np.full(p, cfg.delta[0] / np.sqrt(p))
    raise ValueError(f"--delta needs 1 or {p} values, got {len(cfg.delta)}")


# ---------------------------------------------------------------------------
# cells


def _diag_text(rep: SolveReport):
    parts = []
    d = rep.diagnostics
    if "reason" in d:
        parts.append(str(d["reason"]))
    if "r" in d:
        parts.append(f"r={d['r']}")
    if rep.mu is not None:
        mus = rep.mu if isinstance(rep.mu, tuple) else (rep.mu,)
        parts.append("mu=" + "/".join(f"{m:.6e}" for m in mus if m is not None))
    if d.get("failed_slices"):
        parts.append(f"failed_slices={d['failed_slices']}")
    return "; ".join(parts)


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else f"{v:.10e}"


def report_row(rep, level):
    return {
        "method": rep.method if rep.method else "",
        "noise_level": repr(float(level)),
        "k": rep.k_label(),
        "relative_error": _fmt(rep.relative_error),
        "cpu_seconds": f"{rep.wall_time:.4f}",
        "status": "ok" if rep.success else "failed",
        "diagnostics": _diag_text(rep),
    }


def run_cell(cfg, method, level, inst, seed):
    try:
        rep = run_method(
            method, inst.a, inst.b, _deltas(cfg, inst), tau=cfg.tau, k_max=cfg.kmax,
            rtsvd_cfg=cfg.rtsvd_cfg(seed), tik=cfg.tik(), seed=seed, x_true=inst.x_true,
            early_stop=cfg.early_stop,
        )
        rep.method = method
    except (ValueError, np.linalg.LinAlgError) as exc:
        rep = SolveReport(method, None, None, float("nan"), False, diagnostics={"reason": str(exc)})
    return rep


def run(cfg):
    """All (method, noise level) cells; returns ``(rows, reports)``.

    The noise for level ``i`` is drawn with a seed derived from
    ``(seed, i)`` and shared by all methods; each cell's solver seed is
    derived from ``(seed, i, method index)``. Results do not depend on
    ``cfg.jobs``.
    """
    cfg.validate()
    if not cfg.methods:
        return [], []
    operator = build_operator(cfg)
    insts = [build_instance(cfg, lvl, derive_seed(cfg.seed, i), operator) for i, lvl in enumerate(cfg.noise_levels)]
    cells = [(i, j) for i in range(len(cfg.noise_levels)) for j in range(len(cfg.methods))]

    def go(cell):
        i, j = cell
        return run_cell(cfg, cfg.methods[j], cfg.noise_levels[i], insts[i], derive_seed(cfg.seed, i, j))

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            reports = list(pool.map(go, cells))
    else:
        reports = [go(c) for c in cells]
    rows = [report_row(rep, cfg.noise_levels[i]) for rep, (i, _) in zip(reports, cells)]
    return rows, reports


def sweep_rtsvd(cfg, level=None):
    """RT-tSVD over ``cfg.eps_grid`` at one noise level; one row per epsilon."""
    cfg.validate()
    level = cfg.noise_levels[0] if level is None else level
    inst = build_instance(cfg, level, derive_seed(cfg.seed, 0))
    deltas = _deltas(cfg, inst)
    disc = DiscrepancyConfig(float(np.sqrt(np.sum(deltas**2))), cfg.tau, cfg.kmax)
    rows = []
    for i, eps in enumerate(cfg.eps_grid):
        seed = derive_seed(cfg.seed, 0, i)
        try:
            rep = solve_rtsvd(inst.a, inst.b, disc, RtsvdConfig(eps, cfg.rho, seed=seed), x_true=inst.x_true)
            r = rep.diagnostics.get("r", 0)
            row = {"epsilon": repr(float(eps)), "r": str(r), "k": rep.k_label(),
                   "relative_error": _fmt(rep.relative_error), "status": "ok" if rep.success else "failed",
                   "diagnostics": rep.diagnostics.get("reason", "")}
        except ValueError as exc:
            row = {"epsilon": repr(float(eps)), "r": "", "k": "", "relative_error": "", "status": "failed",
                   "diagnostics": str(exc)}
        rows.append(row)
    return rows


def write_csv(rows, columns, out=None):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    text = buf.getvalue()
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
    return text


# ---------------------------------------------------------------------------
# argument handling


def _common(p):
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--seed", type=int)
    p.add_argument("--tau", type=float, help="discrepancy safety factor (> 1)")
    p.add_argument("--delta", type=_floats, help="noise bound: one total value or one per lateral slice")
    p.add_argument("--eps", type=float, help="RT-tSVD tolerance epsilon")
    p.add_argument("--rho", type=int, help="RT-tSVD oversampling: k starts at r - rho")
    p.add_argument("--kmax", type=int, help="cap on the truncation index / Krylov dimension")
    p.add_argument("--sigma", type=float)
    p.add_argument("--band", type=int)
    p.add_argument("--fixture", help="matrix fixture (T3D1, n = 1) replacing the bundled baart matrix")
    p.add_argument("--image", help="graymap/pixmap used as ground truth for blur problems")
    p.add_argument("--frames", help="directory of frame_%%04d.pgm files used as ground truth")
    p.add_argument("--mu-lo", type=float)
    p.add_argument("--mu-hi", type=float)
    p.add_argument("--out", help="output path (default: stdout)")


def build_parser():
    parser = argparse.ArgumentParser(prog="tpreg", description="Regularized t-product least squares")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="build and save a problem instance")
    _common(g)
    g.add_argument("--noise", type=float, help="relative noise level")

    s = sub.add_parser("solve", help="run one method")
    _common(s)
    s.add_argument("--method", choices=METHODS)
    s.add_argument("--noise", type=float, help="relative noise level")
    s.add_argument("--instance", help="manifest written by gen (overrides problem settings)")
    s.add_argument("--save-x", help="write the solution tensor (T3D1)")
    s.add_argument("--image-out", help="write the solution as a graymap/pixmap")
    s.add_argument("--early-stop", action="store_true", help="stop one step before the discrepancy test holds")

    b = sub.add_parser("bench", help="run all (method, noise level) cells")
    _common(b)
    b.add_argument("--method", dest="methods", type=_strings, help="comma-separated method tags")
    b.add_argument("--noise", dest="noise_levels", type=_floats, help="comma-separated noise levels")
    b.add_argument("--jobs", type=int, help="run cells concurrently")

    w = sub.add_parser("sweep-eps", help="RT-tSVD over a grid of tolerances")
    _common(w)
    w.add_argument("--noise", type=float, help="relative noise level")
    w.add_argument("--grid", dest="eps_grid", type=_floats, help="comma-separated epsilon values")
    return parser


def config_from_args(args):
    values = read_config(args.config) if getattr(args, "config", None) else {}
    known = {f.name for f in fields(ExperimentConfig)}
    for key, val in vars(args).items():
        if key in known and val is not None and val is not False:
            values[key] = val
    if getattr(args, "noise", None) is not None:
        values["noise_levels"] = [args.noise]
    return ExperimentConfig(**values).validate()


def _load_instance(path):
    tensors, meta = t3d.load_with_manifest(path)
    return ProblemInstance(tensors["a"], tensors["b"], tensors["b_true"], tensors["x_true"],
                           np.asarray(meta["deltas"], dtype=float), meta.get("provenance", {}))


def cmd_gen(args, cfg):
    if not args.out:
        raise ValueError("gen needs --out PREFIX")
    level = cfg.noise_levels[0]
    inst = build_instance(cfg, level, cfg.seed)
    t3d.save_with_manifest(
        args.out,
        {"a": inst.a, "b": inst.b, "b_true": inst.b_true, "x_true": inst.x_true},
        {"deltas": inst.deltas.tolist(), "provenance": inst.provenance},
    )
    return 0


def cmd_solve(args, cfg):
    method = args.method or cfg.methods[0]
    if args.instance:
        inst = _load_instance(args.instance)
        level = float(inst.provenance.get("noise_level", float("nan")))
    else:
        level = cfg.noise_levels[0]
        inst = build_instance(cfg, level, cfg.seed)
    rep = run_cell(cfg, method, level, inst, cfg.seed)
    write_csv([report_row(rep, level)], CSV_COLUMNS, cfg.out)
    if rep.x is not None:
        if args.save_x:
            t3d.save(args.save_x, rep.x)
        if args.image_out:
            tensor_to_image(rep.x, args.image_out)
    return 0 if rep.success else 1


def cmd_bench(args, cfg):
    rows, reports = run(cfg)
    write_csv(rows, CSV_COLUMNS, cfg.out)
    return 0 if all(r.success for r in reports) else 1


def cmd_sweep(args, cfg):
    rows = sweep_rtsvd(cfg)
    write_csv(rows, SWEEP_COLUMNS, cfg.out)
    return 0 if all(r["status"] == "ok" for r in rows) else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        handler = {"gen": cmd_gen, "solve": cmd_solve, "bench": cmd_bench, "sweep-eps": cmd_sweep}[args.command]
        return handler(args, cfg)
    except (ValueError, OSError) as exc:
        print(f"tpreg: error: {exc}", file=sys.stderr)
        return 2
