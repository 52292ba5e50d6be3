"""Regularized solution of third-order tensor least-squares problems under the t-product."""

from .decomp import RtsvdConfig, rtsvd, tevd, tsvd
from .krylov import tgkb, tlanczos
from .solvers import (
    DiscrepancyConfig,
    SolveReport,
    TikhonovConfig,
    relative_error,
    run_method,
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
from .tcore import facewise_solve, normalize, tprod, ttranspose
from .testprob import BlurSpec, NoiseSpec, ProblemInstance, blur_tensor, example_operator, make_instance

__version__ = "0.1.0"
