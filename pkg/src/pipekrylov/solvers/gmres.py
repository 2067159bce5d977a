"""Flexible minimal-residual variants with restart cycles.

Each cycle builds an orthonormal residual basis, a set of flexible
(preconditioned) images, and a least-squares system solved through Givens
rotations; the natural residual norm is the magnitude of the rotated
right-hand-side tail.  The iterate is materialized from the flexible
images at every iteration so the trace can monitor the true residual.

* ``fgmres``: classical Gram-Schmidt with a fresh operator application
  per column; the batched projection dots and the new-column norm form
  two blocking phases.
* ``cgfgmres``: shifted-image recurrence; projection coefficients and
  the squared column norm batch into one blocking phase, with the new
  column norm obtained from a Pythagorean identity.  A negative identity
  value signals breakdown and triggers a cycle restart.
* ``pipefgmres``: same fused reduction made overlappable by recurring
  the basis extension from images computed one iteration ahead.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular

from ..linalg import dot, maxpy, norm2
from .common import RunControl, SolverConfig, TraceRecorder

NO_TAGS = frozenset()
PIPEFGMRES_TAGS = frozenset({"pc", "spmv"})


def run(cfg: SolverConfig, A, B, b, x0, rec: TraceRecorder, sigma: float):
    if cfg.method == "fgmres":
        return _fgmres(cfg, A, B, b, x0, rec)
    if cfg.method == "cgfgmres":
        return _shifted(cfg, A, B, b, x0, rec, sigma, pipelined=False)
    return _shifted(cfg, A, B, b, x0, rec, sigma, pipelined=True)


def _apply_rotations(col: np.ndarray, cs: np.ndarray, sn: np.ndarray, upto: int) -> None:
    for j in range(upto):
        t = cs[j] * col[j] + sn[j] * col[j + 1]
        col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1]
        col[j] = t


def _materialize(x_cycle: np.ndarray, U: list, R: np.ndarray, g: np.ndarray, k: int):
    if k == 0:
        return x_cycle.copy()
    y = solve_triangular(R[:k, :k], g[:k], lower=False)
    return maxpy(x_cycle, [float(yj) for yj in y], U[:k])


def _fgmres(cfg, A, B, b, x0, rec):
    x = x0.copy()
    mlen = cfg.restart_len
    i = 0
    ctl = None
    pending = 0
    flag_restart = False
    while True:
        r = b - A.apply(x)
        beta = norm2(r)
        if ctl is None:
            ctl = RunControl(cfg, beta)
            rec.log(0, x, beta, 0, 0, 0, NO_TAGS)
            rec.observe("state", 0, x=x, r=r)
            if beta == 0.0 or ctl.converged(beta):
                return x, True, 0, ctl.converged_reason
        else:
            pending = 1
            flag_restart = True
            if not math.isfinite(beta):
                return x, False, i, "breakdown_unrecoverable"
            if beta == 0.0:
                return x, True, i, ctl.converged_reason
        V = [r / beta]
        U: list[np.ndarray] = []
        R = np.zeros((mlen + 1, mlen))
        g = np.zeros(mlen + 1)
        g[0] = beta
        cs = np.zeros(mlen)
        sn = np.zeros(mlen)
        x_cycle = x.copy()
        rec.observe("basis", i, v=V[0])
        k = 0
        while k < mlen:
            if i >= cfg.max_it:
                return x, False, i, "max_it"
            k += 1
            i += 1
            u = B.apply(V[k - 1])
            zu = A.apply(u)
            U.append(u)
            hcol = np.array([dot(zu, vj) for vj in V])  # blocking phase 1
            zbar = maxpy(zu, [-float(hj) for hj in hcol], V)
            hsub = norm2(zbar)                          # blocking phase 2
            col = np.zeros(k + 1)
            col[:k] = hcol
            col[k] = hsub
            _apply_rotations(col, cs, sn, k - 1)
            d = math.hypot(col[k - 1], col[k])
            if not math.isfinite(d):
                return x, False, i, "breakdown_unrecoverable"
            if d == 0.0:
                # the new column vanished; finalize this cycle and restart
                x = _materialize(x_cycle, U, R, g, k - 1)
                natural = abs(g[k - 1])
                rec.log(i, x, natural, k, 2 + pending, 0, NO_TAGS, restarted=flag_restart)
                rec.observe("state", i, x=x)
                pending = 0
                flag_restart = False
                if ctl.converged(natural):
                    return x, True, i, ctl.converged_reason
                stag = ctl.note(natural)
                if stag:
                    return x, False, i, stag
                break
            cs[k - 1] = col[k - 1] / d
            sn[k - 1] = col[k] / d
            col[k - 1] = d
            col[k] = 0.0
            R[: k + 1, k - 1] = col
            g[k] = -sn[k - 1] * g[k - 1]
            g[k - 1] = cs[k - 1] * g[k - 1]
            natural = abs(g[k])
            x = _materialize(x_cycle, U, R, g, k)
            rec.log(i, x, natural, k, 2 + pending, 0, NO_TAGS, restarted=flag_restart)
            rec.observe("state", i, x=x)
            pending = 0
            flag_restart = False
            if ctl.converged(natural):
                return x, True, i, ctl.converged_reason
            stag = ctl.note(natural)
            if stag:
                return x, False, i, stag
            if hsub == 0.0:
                break
            V.append(zbar / hsub)
            rec.observe("basis", i, v=V[-1])


def _shifted(cfg, A, B, b, x0, rec, sigma, pipelined):
    x = x0.copy()
    mlen = cfg.restart_len
    tags = PIPEFGMRES_TAGS if pipelined else NO_TAGS
    base_blocking = 0 if pipelined else 1
    base_overlap = 1 if pipelined else 0
    i = 0
    ctl = None
    pending = 0
    flag_restart = False
    prefetched = None
    while True:
        if prefetched is not None:
            r, beta = prefetched
            prefetched = None
        else:
            r = b - A.apply(x)
            beta = norm2(r)
            if ctl is not None:
                pending = 1
                flag_restart = True
        if ctl is None:
            ctl = RunControl(cfg, beta)
            rec.log(0, x, beta, 0, 0, 0, NO_TAGS)
            rec.observe("state", 0, x=x, r=r)
            if beta == 0.0 or ctl.converged(beta):
                return x, True, 0, ctl.converged_reason
        else:
            if not math.isfinite(beta):
                return x, False, i, "breakdown_unrecoverable"
            if beta == 0.0:
                return x, True, i, ctl.converged_reason
        V = [r / beta]
        u = B.apply(V[0])
        U = [u]
        ZB = [A.apply(u) - sigma * V[0]]
        QB: list[np.ndarray] = []
        WB: list[np.ndarray] = []
        if pipelined:
            QB.append(B.apply(ZB[0]))
            WB.append(A.apply(QB[0]))
        R = np.zeros((mlen + 1, mlen))
        g = np.zeros(mlen + 1)
        g[0] = beta
        cs = np.zeros(mlen)
        sn = np.zeros(mlen)
        x_cycle = x.copy()
        rec.observe("basis", i, v=V[0])
        k = 0
        while k < mlen:
            if i >= cfg.max_it:
                return x, False, i, "max_it"
            k += 1
            i += 1
            zprev = ZB[k - 1]
            hb = np.array([dot(vj, zprev) for vj in V])
            zeta = dot(zprev, zprev)                # batched into the same phase
            t = zeta - float(hb @ hb)
            failed = not (t >= 0.0 and math.isfinite(t))
            d = 0.0
            if not failed:
                hsub = math.sqrt(t)
                col = np.zeros(k + 1)
                col[:k] = hb
                col[k - 1] += sigma
                col[k] = hsub
                _apply_rotations(col, cs, sn, k - 1)
                d = math.hypot(col[k - 1], col[k])
                if not math.isfinite(d):
                    return x, False, i, "breakdown_unrecoverable"
            if failed or d == 0.0:
                # Pythagorean identity lost positivity, or the rotated
                # column vanished: finalize the subspace solution, refresh
                # the residual, and restart the cycle.
                x = _materialize(x_cycle, U, R, g, k - 1)
                r = b - A.apply(x)
                beta = norm2(r)
                if not math.isfinite(beta):
                    return x, False, i, "breakdown_unrecoverable"
                if ctl.converged(beta):
                    rec.log(
                        i, x, beta, k, base_blocking + 1 + pending, base_overlap,
                        tags, breakdown=failed,
                    )
                    rec.observe("state", i, x=x, r=r)
                    return x, True, i, ctl.converged_reason
                recover = (not failed) or ctl.allow_restart()
                rec.log(
                    i, x, beta, k, base_blocking + 1 + pending, base_overlap, tags,
                    breakdown=failed, restarted=recover,
                )
                rec.observe("state", i, x=x, r=r)
                pending = 0
                flag_restart = False
                if not recover:
                    return x, False, i, "breakdown_unrecoverable"
                stag = ctl.note(beta)
                if stag:
                    return x, False, i, stag
                prefetched = (r, beta)
                break
            cs[k - 1] = col[k - 1] / d
            sn[k - 1] = col[k] / d
            col[k - 1] = d
            col[k] = 0.0
            R[: k + 1, k - 1] = col
            g[k] = -sn[k - 1] * g[k - 1]
            g[k - 1] = cs[k - 1] * g[k - 1]
            natural = abs(g[k])
            x = _materialize(x_cycle, U, R, g, k)
            rec.log(
                i, x, natural, k, base_blocking + pending, base_overlap, tags,
                restarted=flag_restart,
            )
            rec.observe("state", i, x=x)
            pending = 0
            flag_restart = False
            if ctl.converged(natural):
                return x, True, i, ctl.converged_reason
            stag = ctl.note(natural)
            if stag:
                return x, False, i, stag
            if hsub == 0.0:
                break
            if k < mlen:
                v = maxpy(zprev, [-float(hj) for hj in hb], V) / hsub
                V.append(v)
                rec.observe("basis", i, v=v)
                if pipelined:
                    unew = maxpy(QB[k - 1], [-float(hj) for hj in hb], U) / hsub
                    U.append(unew)
                    shifted_prev = [ZB[j] + sigma * V[j] for j in range(k)]
                    znew = maxpy(WB[k - 1], [-float(hj) for hj in hb], shifted_prev)
                    znew = znew / hsub - sigma * v
                    ZB.append(znew)
                    QB.append(B.apply(znew))
                    WB.append(A.apply(QB[-1]))
                else:
                    unew = B.apply(v)
                    U.append(unew)
                    ZB.append(A.apply(unew) - sigma * v)
