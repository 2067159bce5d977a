"""Shared solver plumbing: configuration, traces, stopping logic, and the
operations every method family reuses (truncation windows, the stabilized
preconditioned-direction update, and shift estimation).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..linalg import SparseOperator, dot, norm2
from ..preconditioners import Preconditioner
from ..rng import SplitMix64

__all__ = [
    "METHODS",
    "CG_FAMILY",
    "FCG_FAMILY",
    "CR_FAMILY",
    "GMRES_FAMILY",
    "SYMMETRIC_REQUIRED_METHODS",
    "STAGNATION_RTOL",
    "SolverConfig",
    "TraceRow",
    "IterationTrace",
    "SolveResult",
    "truncation_window",
    "stabilized_m_update",
    "estimate_sigma",
    "TraceRecorder",
    "RunControl",
]

CG_FAMILY = ("pcg", "cgcg", "pipecg")
FCG_FAMILY = ("fcg", "cgfcg", "pipefcg_naive", "pipefcg")
CR_FAMILY = ("gcr", "pcr", "pipegcr", "pipegcr_w")
GMRES_FAMILY = ("fgmres", "cgfgmres", "pipefgmres")
METHODS = CG_FAMILY + FCG_FAMILY + CR_FAMILY + GMRES_FAMILY

# Methods whose recurrences assume a symmetric operator (positive definite
# for the CG and FCG families, possibly indefinite for the CR family).
SYMMETRIC_REQUIRED_METHODS = CG_FAMILY + FCG_FAMILY + CR_FAMILY

# A solve stagnates when the best natural norm fails to improve by this
# relative amount over a full stagnation window.
STAGNATION_RTOL = 1e-4

TRUNCATION_STRATEGIES = ("notay_mod", "standard")
THETA_MODES = ("zero", "one", "exact")


@dataclass(frozen=True)
class SolverConfig:
    """Immutable solve parameters shared by all method families.

    ``sigma`` is the constant shift used by the single-reduction and
    pipelined GMRES variants; setting ``sigma_auto_power`` to k > 0
    replaces it with a k-step power-iteration estimate of the largest
    preconditioned eigenvalue.  ``stagnation_window = 0`` disables
    stagnation detection.
    """

    method: str
    rtol: float = 1e-8
    atol: float = 0.0
    max_it: int = 1000
    numax: int = 30
    truncation: str = "notay_mod"
    restart_len: int = 30
    sigma: float = 0.0
    sigma_auto_power: int = 0
    theta_mode: str = "one"
    monitor_true_residual: bool = True
    stagnation_window: int = 50
    prescale: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", self.method.strip().lower())
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not (0.0 < self.rtol < 1.0):
            raise ValueError("rtol must lie in (0, 1)")
        if self.atol < 0.0:
            raise ValueError("atol must be nonnegative")
        if self.max_it < 1:
            raise ValueError("max_it must be >= 1")
        if self.numax < 1:
            raise ValueError("numax must be >= 1")
        if self.truncation not in TRUNCATION_STRATEGIES:
            raise ValueError(f"unknown truncation strategy {self.truncation!r}")
        if self.restart_len < 1:
            raise ValueError("restart_len must be >= 1")
        if self.sigma_auto_power < 0:
            raise ValueError("sigma_auto_power must be >= 0")
        if self.theta_mode not in THETA_MODES:
            raise ValueError(f"unknown theta mode {self.theta_mode!r}")
        if self.stagnation_window < 0:
            raise ValueError("stagnation_window must be >= 0")


@dataclass
class TraceRow:
    """One iteration record.

    ``red_blocking``/``red_overlapped`` count reduction phases (each phase
    is one batched global reduction); ``overlap_tags`` names the work an
    overlappable phase hides behind.  ``rnorm_true`` and ``relerr`` are
    diagnostic recomputations and are not part of the reduction ledger.
    """

    iter: int
    rnorm_natural: float
    rnorm_true: Optional[float]
    relerr: Optional[float]
    nu_used: int
    red_blocking: int
    red_overlapped: int
    overlap_tags: frozenset
    breakdown: bool = False
    restarted: bool = False


class IterationTrace:
    """Ordered per-iteration records, row 0 being the initial state."""

    def __init__(self):
        self.rows: list[TraceRow] = []

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, idx):
        return self.rows[idx]

    def natural_history(self) -> np.ndarray:
        return np.array([row.rnorm_natural for row in self.rows])

    def true_history(self) -> np.ndarray:
        return np.array([np.nan if row.rnorm_true is None else row.rnorm_true
                         for row in self.rows])


@dataclass
class SolveResult:
    x_final: np.ndarray
    converged: bool
    iterations: int
    stop_reason: str
    trace: IterationTrace


def truncation_window(i: int, numax: int, strategy: str) -> int:
    """Number of retained directions the i-th new direction orthogonalizes
    against (i >= 1 counts directions built since the last restart).

    The modulo rule periodically shrinks the window to one, which bounds
    both memory and the reduction batch size; the standard rule keeps the
    most recent numax directions.  Callers clamp the result to the history
    actually available.
    """
    if i < 1:
        raise ValueError("direction index must be >= 1")
    if numax < 1:
        raise ValueError("numax must be >= 1")
    if strategy == "notay_mod":
        return min(i, (i % numax) + 1)
    if strategy == "standard":
        return min(i, numax)
    raise ValueError(f"unknown truncation strategy {strategy!r}")


def stabilized_m_update(B: Preconditioner, u_tilde: np.ndarray, w: np.ndarray,
                        r: np.ndarray, mode: str):
    """Preconditioned image of w for the pipelined flexible methods.

    mode "zero" is the naive unrolling B(w); mode "one" projects the
    recurred preconditioned residual back in, u_tilde + B(w - r); mode
    "exact" scales the projection by theta = <r, w>/<r, r>, which costs
    two extra blocking dot products and is intended as a diagnostic.

    Returns (m, theta); theta is None outside exact mode.  In exact mode
    with a zero residual theta is undefined and (None, None) is returned,
    which callers treat as a converged signal.
    """
    if mode == "zero":
        return B.apply(w), None
    if mode == "one":
        return u_tilde + B.apply(w - r), None
    if mode == "exact":
        rr = dot(r, r)
        if rr == 0.0:
            return None, None
        theta = dot(r, w) / rr
        return theta * u_tilde + B.apply(w - theta * r), theta
    raise ValueError(f"unknown theta mode {mode!r}")


def estimate_sigma(A: SparseOperator, B: Preconditioner, k: int, seed: int):
    """Power-iteration estimate of the largest eigenvalue of v -> A B(v).

    Runs k steps from a seeded random start, renormalizing each step, and
    returns (estimate, degenerate).  ``degenerate`` is True when a zero
    vector was encountered, in which case the estimate is 0.
    """
    if k < 1:
        raise ValueError("power iteration count must be >= 1")
    v = SplitMix64(seed).gaussian(A.n_cols)
    vn = norm2(v)
    if vn == 0.0:
        return 0.0, True
    v /= vn
    ratio = 0.0
    for _ in range(k):
        w = A.apply(B.apply(v))
        wn = norm2(w)
        if wn == 0.0:
            return 0.0, True
        ratio = wn
        v = w / wn
    return ratio, False


class TraceRecorder:
    """Builds the iteration trace and runs the per-row diagnostics."""

    def __init__(self, A: SparseOperator, b: np.ndarray,
                 x_true: Optional[np.ndarray], monitor_true: bool,
                 observer: Optional[Callable] = None):
        self._A = A
        self._b = b
        self._x_true = x_true
        self._x_true_norm = norm2(x_true) if x_true is not None else None
        self._monitor = monitor_true
        self._observer = observer
        self.trace = IterationTrace()
        self.last_x: Optional[np.ndarray] = None

    def log(self, i: int, x: np.ndarray, natural: float, nu_used: int,
            red_blocking: int, red_overlapped: int, tags: frozenset,
            breakdown: bool = False, restarted: bool = False) -> None:
        # rows hold plain floats; numpy scalars repr differently and would
        # leak into summaries
        natural = float(natural)
        if not np.isfinite(natural):
            raise FloatingPointError("non-finite natural residual norm")
        rnorm_true = None
        if self._monitor:
            rnorm_true = norm2(self._b - self._A.apply(x))
            if not np.isfinite(rnorm_true):
                raise FloatingPointError("non-finite true residual norm")
        relerr = None
        if self._x_true is not None and self._x_true_norm:
            relerr = norm2(x - self._x_true) / self._x_true_norm
            if not np.isfinite(relerr):
                raise FloatingPointError("non-finite relative error")
        self.trace.append(TraceRow(i, natural, rnorm_true, relerr, nu_used,
                                   red_blocking, red_overlapped, tags,
                                   breakdown, restarted))
        self.last_x = np.array(x, copy=True)

    def observe(self, event: str, i: int, **payload) -> None:
        if self._observer is not None:
            self._observer(event, i, {k: (v.copy() if isinstance(v, np.ndarray) else v)
                                      for k, v in payload.items()})


class RunControl:
    """Stopping and restart policy shared by every method driver.

    Convergence: natural norm <= max(rtol * initial natural norm, atol).
    Stagnation: the best natural norm fails to improve by STAGNATION_RTOL
    relative over ``window`` consecutive iterations (0 disables).
    Breakdown recovery: a restart is allowed only if the best natural norm
    strictly improved since the previous restart; a second consecutive
    restart without progress is unrecoverable.
    """

    def __init__(self, cfg: SolverConfig, natural0: float):
        self.threshold = max(cfg.rtol * natural0, cfg.atol)
        self._hit_reason = "atol" if cfg.atol > cfg.rtol * natural0 else "rtol"
        self._window = cfg.stagnation_window
        self.best = natural0
        self._best_hist = [natural0]
        self._best_at_restart: Optional[float] = None

    def converged(self, natural: float) -> bool:
        return natural <= self.threshold

    @property
    def converged_reason(self) -> str:
        return self._hit_reason

    def note(self, natural: float) -> Optional[str]:
        """Record one iteration; returns "stagnation" when the window trips."""
        if natural < self.best:
            self.best = natural
        self._best_hist.append(self.best)
        if self._window and len(self._best_hist) > self._window:
            ref = self._best_hist[-1 - self._window]
            if self.best > (1.0 - STAGNATION_RTOL) * ref:
                return "stagnation"
        return None

    def allow_restart(self) -> bool:
        """True when a breakdown may be answered with a restart."""
        if self._best_at_restart is not None and self.best >= self._best_at_restart:
            return False
        self._best_at_restart = self.best
        return True
