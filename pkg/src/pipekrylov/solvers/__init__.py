"""Krylov method drivers and the public solve entry point.

Fourteen method variants are organized in four families (conjugate
gradients, flexible conjugate gradients, conjugate residuals, flexible
minimal residual); :func:`solve` validates the configuration and
dispatches to the family driver.  Every driver shares the stopping,
stagnation, and breakdown-restart policy of :class:`RunControl` and logs
a :class:`TraceRow` per iteration, including a per-method-constant count
of blocking and overlappable reduction phases.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np
import scipy.sparse

from ..linalg import SparseOperator, as_vector
from ..preconditioners import Preconditioner
from . import cg as _cg
from . import cr as _cr
from . import fcg as _fcg
from . import gmres as _gmres
from .common import (
    CG_FAMILY,
    CR_FAMILY,
    FCG_FAMILY,
    GMRES_FAMILY,
    METHODS,
    STAGNATION_RTOL,
    SYMMETRIC_REQUIRED_METHODS,
    THETA_MODES,
    TRUNCATION_STRATEGIES,
    IterationTrace,
    SolveResult,
    SolverConfig,
    TraceRecorder,
    TraceRow,
    estimate_sigma,
    stabilized_m_update,
    truncation_window,
)

__all__ = [
    "CG_FAMILY",
    "FCG_FAMILY",
    "CR_FAMILY",
    "GMRES_FAMILY",
    "METHODS",
    "SYMMETRIC_REQUIRED_METHODS",
    "STAGNATION_RTOL",
    "THETA_MODES",
    "TRUNCATION_STRATEGIES",
    "REDUCTION_LEDGER",
    "SolverConfig",
    "SolveResult",
    "IterationTrace",
    "TraceRow",
    "solve",
    "run_cg_family",
    "run_fcg_family",
    "run_cr_family",
    "run_gmres_family",
    "estimate_sigma",
    "stabilized_m_update",
    "truncation_window",
]

# Per-iteration reduction-phase constants (blocking, overlappable) and the
# work each overlappable phase hides behind.  Initial rows, restart rows,
# and breakdown rows are flagged in the trace and may add one blocking
# refill phase (the naive variant's flush rows add none).
REDUCTION_LEDGER: dict[str, tuple[int, int, frozenset]] = {
    "pcg": (2, 0, frozenset()),
    "cgcg": (1, 0, frozenset()),
    "pipecg": (0, 1, frozenset({"pc", "spmv"})),
    "fcg": (2, 0, frozenset()),
    "cgfcg": (1, 0, frozenset()),
    "pipefcg_naive": (0, 1, frozenset({"pc", "spmv", "local"})),
    "pipefcg": (0, 1, frozenset({"pc", "spmv", "local"})),
    "gcr": (2, 0, frozenset()),
    "pcr": (2, 0, frozenset()),
    "pipegcr": (0, 1, frozenset({"pc", "local"})),
    "pipegcr_w": (0, 1, frozenset({"pc", "spmv", "local"})),
    "fgmres": (2, 0, frozenset()),
    "cgfgmres": (1, 0, frozenset()),
    "pipefgmres": (0, 1, frozenset({"pc", "spmv"})),
}


def solve(cfg: SolverConfig, A: SparseOperator, B: Preconditioner,
          b, x0=None, x_true=None,
          observer: Optional[Callable] = None, seed: int = 0) -> SolveResult:
    """Run the configured method on A x = b with preconditioner B.

    ``x0`` defaults to the zero vector.  ``x_true``, when known, enables
    the relative-error column of the trace.  ``observer`` receives
    ``(event, iteration, payload)`` callbacks with copies of selected
    internal vectors ("state", "direction", "basis"); it exists for
    verification and costs nothing when None.  ``seed`` feeds the power
    iteration when ``cfg.sigma_auto_power`` > 0.

    With ``cfg.prescale`` the system is symmetrically Jacobi-scaled
    first; B then applies in the scaled space (build it from the scaled
    operator when it depends on A) and the trace reports scaled
    residuals, while the returned iterate is mapped back.

    The CG and FCG families additionally assume B is linear and positive
    (and PCR linear); this is not checked, and a violating preconditioner
    surfaces as breakdown or stagnation rather than an error.
    """
    if A.n_rows != A.n_cols:
        raise ValueError("operator must be square")
    b = as_vector(b)
    if b.shape[0] != A.n_rows:
        raise ValueError(
            f"right-hand side has length {b.shape[0]}, operator has {A.n_rows} rows")
    x0 = np.zeros_like(b) if x0 is None else as_vector(x0)
    if x0.shape[0] != A.n_rows:
        raise ValueError("initial guess length does not match the operator")
    if x_true is not None:
        x_true = as_vector(x_true)
        if x_true.shape[0] != A.n_rows:
            raise ValueError("x_true length does not match the operator")
    if cfg.method in SYMMETRIC_REQUIRED_METHODS and not A.symmetric:
        raise ValueError(
            f"method {cfg.method!r} requires a symmetric-flagged operator")

    unscale = None
    A_run, b_run, x0_run, x_true_run = A, b, x0, x_true
    if cfg.prescale:
        d = A.diagonal()
        if not np.all(d > 0.0):
            raise ValueError("prescale requires a strictly positive diagonal")
        isq = 1.0 / np.sqrt(d)
        S = scipy.sparse.diags(isq)
        M = S @ A.csr @ S
        if A.symmetric:
            # the two-sided scaling rounds (isq[i]*a)*isq[j] and
            # (isq[j]*a)*isq[i] differently; average the transpose pair so
            # the scaled operator stays exactly symmetric
            M = (M + M.T) * 0.5
        A_run = SparseOperator.from_scipy(M, symmetric=A.symmetric)
        b_run = b * isq
        x0_run = x0 / isq
        x_true_run = None if x_true is None else x_true / isq
        unscale = isq

    sigma = cfg.sigma
    if cfg.method in ("cgfgmres", "pipefgmres") and cfg.sigma_auto_power > 0:
        sigma, _ = estimate_sigma(A_run, B, cfg.sigma_auto_power, seed)

    rec = TraceRecorder(A_run, b_run, x_true_run, cfg.monitor_true_residual,
                        observer)
    try:
        if cfg.method in CG_FAMILY:
            out = _cg.run(cfg, A_run, B, b_run, x0_run, rec)
        elif cfg.method in FCG_FAMILY:
            out = _fcg.run(cfg, A_run, B, b_run, x0_run, rec)
        elif cfg.method in CR_FAMILY:
            out = _cr.run(cfg, A_run, B, b_run, x0_run, rec)
        else:
            out = _gmres.run(cfg, A_run, B, b_run, x0_run, rec, sigma)
        x_run, converged, iterations, reason = out
    except FloatingPointError:
        # Non-finite state escaped the per-driver guards; report the last
        # iterate that produced a finite trace row.
        x_run = rec.last_x if rec.last_x is not None else x0_run
        converged = False
        iterations = max(len(rec.trace) - 1, 0)
        reason = "breakdown_unrecoverable"

    x_final = x_run if unscale is None else x_run * unscale
    return SolveResult(x_final=x_final, converged=converged,
                       iterations=iterations, stop_reason=reason,
                       trace=rec.trace)


def _family_runner(family: tuple, label: str):
    def runner(cfg: SolverConfig, A, B, b, x0=None, **kwargs) -> SolveResult:
        if cfg.method not in family:
            raise ValueError(f"{cfg.method!r} is not a {label} method")
        return solve(cfg, A, B, b, x0, **kwargs)
    return runner


run_cg_family = _family_runner(CG_FAMILY, "conjugate gradient")
run_fcg_family = _family_runner(FCG_FAMILY, "flexible conjugate gradient")
run_cr_family = _family_runner(CR_FAMILY, "conjugate residual")
run_gmres_family = _family_runner(GMRES_FAMILY, "flexible minimal residual")
