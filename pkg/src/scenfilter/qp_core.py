"""Dense convex QP solver.

Solves

    minimize    1/2 v'Qv + c'v
    subject to  A_eq v  = b_eq
                A_in v >= b_in
                lower <= v <= upper

with a primal-dual interior-point method (Mehrotra predictor-corrector)
on the reduced dense KKT system. Infinite bounds are dropped rather than
encoded as large numbers. When the interior-point iteration cannot make
progress, a Phase-1 LP decides whether the problem is infeasible and which
constraint class is responsible.
"""
from __future__ import annotations

import enum
import json
import logging
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linprog, lsq_linear

logger = logging.getLogger(__name__)

PSD_TOL = 1e-8
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
# switch to the sparse augmented system above this size and row density
SPARSE_MIN_SIZE = 300
SPARSE_DENSITY = 0.1


class QpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"
    ITERATION_LIMIT = "IterationLimit"


def _as_matrix(a, ncols: int) -> np.ndarray:
    if a is None:
        return np.zeros((0, ncols))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return np.zeros((0, ncols))
    return a


def _as_vector(b, n: int, fill: float = 0.0) -> np.ndarray:
    if b is None:
        return np.full(n, fill)
    return np.asarray(b, dtype=float).reshape(-1)


@dataclass(frozen=True)
class QuadraticProgram:
    """Problem data. ``A_in v >= b_in`` orientation; bounds may be +-inf."""

    Q: np.ndarray
    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_in: np.ndarray
    b_in: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def build(cls, Q, c, A_eq=None, b_eq=None, A_in=None, b_in=None,
              lower=None, upper=None) -> "QuadraticProgram":
        c = np.asarray(c, dtype=float).reshape(-1)
        m = c.size
        Q = np.asarray(Q, dtype=float)
        if Q.shape != (m, m):
            raise ValueError(f"Q has shape {Q.shape}, expected {(m, m)}")
        A_eq = _as_matrix(A_eq, m)
        A_in = _as_matrix(A_in, m)
        b_eq = _as_vector(b_eq, A_eq.shape[0])
        b_in = _as_vector(b_in, A_in.shape[0])
        lower = _as_vector(lower, m, -np.inf)
        upper = _as_vector(upper, m, np.inf)
        qp = cls(Q, c, A_eq, b_eq, A_in, b_in, lower, upper)
        qp.validate()
        return qp

    @property
    def n_vars(self) -> int:
        return self.c.size

    def validate(self) -> None:
        m = self.c.size
        if self.Q.shape != (m, m):
            raise ValueError(f"Q has shape {self.Q.shape}, expected {(m, m)}")
        if self.A_eq.shape[1] != m or self.A_eq.shape[0] != self.b_eq.size:
            raise ValueError("equality system dimensions are inconsistent")
        if self.A_in.shape[1] != m or self.A_in.shape[0] != self.b_in.size:
            raise ValueError("inequality system dimensions are inconsistent")
        if self.lower.size != m or self.upper.size != m:
            raise ValueError("bound vectors must have one entry per variable")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        asym = np.max(np.abs(self.Q - self.Q.T)) if m else 0.0
        if asym > 1e-12 * max(1.0, np.max(np.abs(self.Q), initial=0.0)):
            raise ValueError(f"Q is not symmetric (max asymmetry {asym:.3e})")

    def objective(self, v: np.ndarray) -> float:
        return float(0.5 * v @ self.Q @ v + self.c @ v)

    def to_json(self) -> str:
        """Self-describing dump for failure triage."""

        def enc(a):
            return [[_enc_float(x) for x in row] for row in np.atleast_2d(a)] if np.ndim(a) == 2 \
                else [_enc_float(x) for x in a]

        doc = {
            "format": "quadratic-program",
            "version": 1,
            "n_vars": self.n_vars,
            "n_eq": int(self.A_eq.shape[0]),
            "n_in": int(self.A_in.shape[0]),
            "Q": enc(self.Q),
            "c": enc(self.c),
            "A_eq": enc(self.A_eq),
            "b_eq": enc(self.b_eq),
            "A_in": enc(self.A_in),
            "b_in": enc(self.b_in),
            "lower": enc(self.lower),
            "upper": enc(self.upper),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "QuadraticProgram":
        doc = json.loads(text)
        m = doc["n_vars"]

        def mat(key, rows):
            a = np.array([[_dec_float(x) for x in row] for row in doc[key]], dtype=float)
            return a.reshape(rows, m)

        def vec(key):
            return np.array([_dec_float(x) for x in doc[key]], dtype=float)

        return cls.build(mat("Q", m), vec("c"), mat("A_eq", doc["n_eq"]), vec("b_eq"),
                         mat("A_in", doc["n_in"]), vec("b_in"), vec("lower"), vec("upper"))


def _enc_float(x):
    x = float(x)
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _dec_float(x):
    return float(x)


@dataclass
class QpSolution:
    v: np.ndarray
    objective: float
    status: QpStatus
    y_eq: np.ndarray
    lam_in: np.ndarray
    lam_lower: np.ndarray
    lam_upper: np.ndarray
    iterations: int = 0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is QpStatus.OPTIMAL


@dataclass
class KktReport:
    stationarity: float
    primal_eq: float
    primal_in: float
    primal_bounds: float
    dual_feasibility: float
    complementarity: float

    @property
    def primal(self) -> float:
        return max(self.primal_eq, self.primal_in, self.primal_bounds)

    @property
    def max_residual(self) -> float:
        return max(self.stationarity, self.primal, self.dual_feasibility, self.complementarity)


def check_kkt(qp: QuadraticProgram, sol: QpSolution) -> KktReport:
    """Infinity-norm residual of every KKT block at ``sol``."""
    v = sol.v
    lo_fin = np.isfinite(qp.lower)
    up_fin = np.isfinite(qp.upper)
    lam_lo = np.where(lo_fin, sol.lam_lower, 0.0)
    lam_up = np.where(up_fin, sol.lam_upper, 0.0)
    grad = qp.Q @ v + qp.c - qp.A_eq.T @ sol.y_eq - qp.A_in.T @ sol.lam_in - lam_lo + lam_up
    slack_in = qp.A_in @ v - qp.b_in
    slack_lo = np.where(lo_fin, v - np.where(lo_fin, qp.lower, 0.0), 0.0)
    slack_up = np.where(up_fin, np.where(up_fin, qp.upper, 0.0) - v, 0.0)

    def inf(a):
        return float(np.max(np.abs(a))) if a.size else 0.0

    dual_neg = np.concatenate([-sol.lam_in, -lam_lo, -lam_up])
    comp = np.concatenate([sol.lam_in * slack_in, lam_lo * slack_lo, lam_up * slack_up])
    return KktReport(
        stationarity=inf(grad),
        primal_eq=inf(qp.A_eq @ v - qp.b_eq),
        primal_in=inf(np.maximum(-slack_in, 0.0)),
        primal_bounds=inf(np.concatenate([np.maximum(-slack_lo, 0.0), np.maximum(-slack_up, 0.0)])),
        dual_feasibility=inf(np.maximum(dual_neg, 0.0)),
        complementarity=inf(comp),
    )


def dual_objective(qp: QuadraticProgram, sol: QpSolution) -> float:
    """Lagrangian dual value implied by the multipliers in ``sol``."""
    lo_fin = np.isfinite(qp.lower)
    up_fin = np.isfinite(qp.upper)
    val = -0.5 * sol.v @ qp.Q @ sol.v + qp.b_eq @ sol.y_eq + qp.b_in @ sol.lam_in
    val += np.sum(sol.lam_lower[lo_fin] * qp.lower[lo_fin])
    val -= np.sum(sol.lam_upper[up_fin] * qp.upper[up_fin])
    return float(val)


def _psd_clip(Q: np.ndarray) -> tuple[np.ndarray, float]:
    """Return (Q with tiny negative eigenvalues clipped, smallest eigenvalue)."""
    if not Q.size:
        return Q, 0.0
    off = Q - np.diag(np.diag(Q))
    if not np.any(off):
        d = np.diag(Q)
        lam_min = float(d.min())
        if lam_min < 0:
            Q = np.diag(np.maximum(d, 0.0))
        return Q, lam_min
    w, U = np.linalg.eigh(Q)
    lam_min = float(w[0])
    if lam_min < 0 and lam_min >= -PSD_TOL:
        Q = (U * np.maximum(w, 0.0)) @ U.T
        Q = 0.5 * (Q + Q.T)
    return Q, lam_min


def _phase1(A_eq, b_eq, A_in, b_in, lower, upper, use_in: bool = True) -> bool:
    """Feasibility of the constraint set via an LP with zero objective."""
    m = lower.size
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(up) else up)
              for lo, up in zip(lower, upper)]
    kw = {}
    if A_eq.shape[0]:
        kw.update(A_eq=A_eq, b_eq=b_eq)
    if use_in and A_in.shape[0]:
        kw.update(A_ub=-A_in, b_ub=-b_in)
    res = linprog(np.zeros(m), bounds=bounds, method="highs", **kw)
    return res.status != 2


def _independent_rows(A: np.ndarray, b: np.ndarray, tol: float = 1e-10):
    """Drop linearly dependent equality rows; report inconsistency."""
    if A.shape[0] == 0:
        return np.arange(0), True
    if A.shape[1] == 0:
        return np.arange(0), bool(np.all(np.abs(b) <= 1e-9))
    norms = np.max(np.abs(A), axis=1)
    nz = norms > tol
    if np.any(~nz) and np.any(np.abs(b[~nz]) > 1e-9):
        return None, False
    idx = np.flatnonzero(nz)
    if idx.size == 0:
        return idx, True
    sub = A[idx]
    _, R, piv = sla.qr(sub.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(1.0, diag[0])))
    if rank == idx.size:
        return idx, True
    keep = np.sort(piv[:rank])
    kept = idx[keep]
    # consistency: b of dropped rows must match the least-squares combination
    coef, *_ = np.linalg.lstsq(A[kept].T, A[idx].T, rcond=None)
    if np.max(np.abs(coef.T @ b[kept] - b[idx])) > 1e-8 * max(1.0, np.max(np.abs(b))):
        return None, False
    return kept, True


def _failure(qp: QuadraticProgram, status: QpStatus, message: str, iters: int = 0,
             v: Optional[np.ndarray] = None) -> QpSolution:
    m = qp.n_vars
    v = np.full(m, np.nan) if v is None else v
    obj = qp.objective(v) if np.all(np.isfinite(v)) else np.nan
    return QpSolution(v=v, objective=obj, status=status,
                      y_eq=np.zeros(qp.A_eq.shape[0]), lam_in=np.zeros(qp.A_in.shape[0]),
                      lam_lower=np.zeros(m), lam_upper=np.zeros(m),
                      iterations=iters, message=message)


def _classify_infeasibility(qp: QuadraticProgram) -> Optional[str]:
    """None when feasible, otherwise the failing constraint class."""
    args = (qp.A_eq, qp.b_eq, qp.A_in, qp.b_in, qp.lower, qp.upper)
    if _phase1(*args):
        return None
    if not _phase1(*args, use_in=False):
        return "equality/bounds"
    return "inequality"


def _forcing_rows(A: np.ndarray, b: np.ndarray, lower: np.ndarray, upper: np.ndarray
                  ) -> np.ndarray:
    """Values of variables pinned by equality rows whose extreme activity equals the rhs.

    NaN marks variables that are not pinned.
    """
    val = np.full(lower.size, np.nan)
    for a, rhs in zip(A, b):
        nz = np.flatnonzero(a)
        if nz.size == 0:
            continue
        for end in (np.where(a[nz] > 0, lower[nz], upper[nz]),
                    np.where(a[nz] > 0, upper[nz], lower[nz])):
            if np.all(np.isfinite(end)) and abs(a[nz] @ end - rhs) <= 1e-12 * max(1.0, abs(rhs)):
                val[nz] = end
                break
    return val


_RECORDERS: list[list] = []


@contextmanager
def record_solves():
    """Collect every (problem, solution) pair solved inside the block."""
    log: list = []
    _RECORDERS.append(log)
    try:
        yield log
    finally:
        _RECORDERS.remove(log)


def solve_qp(qp: QuadraticProgram, *, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
             v0: Optional[np.ndarray] = None) -> QpSolution:
    """Minimize 1/2 v'Qv + c'v over the constraint set of ``qp``.

    ``v0`` is an optional primal starting point. The result is deterministic
    for identical inputs.
    """
    sol = _solve_qp(qp, tol, max_iter, v0)
    for log in _RECORDERS:
        log.append((qp, sol))
    return sol


def _solve_qp(qp: QuadraticProgram, tol: float, max_iter: int,
              v0: Optional[np.ndarray]) -> QpSolution:
    qp.validate()
    m = qp.n_vars
    Q, lam_min = _psd_clip(0.5 * (qp.Q + qp.Q.T))
    if lam_min < -PSD_TOL:
        return _failure(qp, QpStatus.NUMERICAL_FAILURE,
                        f"Q is indefinite: smallest eigenvalue {lam_min:.3e}")

    # presolve: substitute variables fixed by bounds or by forcing rows
    lower, upper = qp.lower, qp.upper
    fixed_val = _forcing_rows(qp.A_eq, qp.b_eq, lower, upper)
    bound_fixed = np.isfinite(lower) & (lower == upper) & np.isnan(fixed_val)
    fixed_val[bound_fixed] = lower[bound_fixed]
    fixed = ~np.isnan(fixed_val)
    free = np.flatnonzero(~fixed)
    fix_idx = np.flatnonzero(fixed)
    vf = fixed_val[fix_idx]

    A_eq = qp.A_eq[:, free]
    b_eq = qp.b_eq - qp.A_eq[:, fix_idx] @ vf
    A_in = qp.A_in[:, free]
    b_in = qp.b_in - qp.A_in[:, fix_idx] @ vf
    Qr = Q[np.ix_(free, free)]
    cr = qp.c[free] + Q[np.ix_(free, fix_idx)] @ vf
    rows, consistent = _independent_rows(A_eq, b_eq)
    if not consistent:
        return _failure(qp, QpStatus.INFEASIBLE, "Phase-1: equality/bounds constraints are inconsistent")
    if np.any(A_in.shape[0]) and free.size == 0 and np.any(b_in > 1e-9):
        return _failure(qp, QpStatus.INFEASIBLE, "Phase-1: inequality constraints infeasible")

    status, it, message, v, y, lam_in, lam_lo, lam_up = _ipm(
        Qr, cr, A_eq[rows], b_eq[rows], A_in, b_in, lower[free], upper[free], tol, max_iter,
        None if v0 is None else np.asarray(v0, dtype=float)[free])

    if status is not QpStatus.OPTIMAL:
        reason = _classify_infeasibility(qp)
        if reason is not None:
            return _failure(qp, QpStatus.INFEASIBLE, f"Phase-1: {reason} constraints infeasible",
                            iters=it)
        v_full = np.empty(m)
        v_full[free] = v
        v_full[fix_idx] = vf
        if status is QpStatus.ITERATION_LIMIT:
            return _failure(qp, status, f"no convergence in {max_iter} iterations", it, v_full)
        return _failure(qp, QpStatus.NUMERICAL_FAILURE, message, it, v_full)

    v_full = np.empty(m)
    v_full[free] = v
    v_full[fix_idx] = vf
    y_eq = np.zeros(qp.A_eq.shape[0])
    y_eq[rows] = y
    lam_lower = np.zeros(m)
    lam_upper = np.zeros(m)
    lam_lower[free] = lam_lo
    lam_upper[free] = lam_up
    if fix_idx.size:
        # multipliers of substituted variables from the stationarity residual
        g = (Q[fix_idx] @ v_full + qp.c[fix_idx] - qp.A_eq[:, fix_idx].T @ y_eq
             - qp.A_in[:, fix_idx].T @ lam_in)
        at_lo = np.isfinite(lower[fix_idx]) & (np.abs(vf - lower[fix_idx]) <= 1e-12)
        at_up = np.isfinite(upper[fix_idx]) & (np.abs(vf - upper[fix_idx]) <= 1e-12)
        # dropped rows touch fixed variables only; their multipliers absorb the rest
        dropped = np.setdiff1d(np.arange(qp.A_eq.shape[0]), rows)
        dropped = dropped[np.all(A_eq[dropped] == 0.0, axis=1)] if dropped.size else dropped
        if dropped.size == 0 and np.all(at_lo | (g <= 0)) and np.all(at_up | (g >= 0)):
            lam_lower[fix_idx] = np.maximum(g, 0.0)
            lam_upper[fix_idx] = np.maximum(-g, 0.0)
        else:
            k = fix_idx.size
            M = np.hstack([qp.A_eq[np.ix_(dropped, fix_idx)].T, np.eye(k)[:, at_lo],
                           -np.eye(k)[:, at_up]])
            lb = np.concatenate([np.full(dropped.size, -np.inf), np.zeros(M.shape[1] - dropped.size)])
            sol_ls = lsq_linear(M, g, bounds=(lb, np.full(M.shape[1], np.inf)))
            w = sol_ls.x
            y_eq[dropped] = w[:dropped.size]
            lam_lower[fix_idx[at_lo]] = w[dropped.size:dropped.size + at_lo.sum()]
            lam_upper[fix_idx[at_up]] = w[dropped.size + at_lo.sum():]
    return QpSolution(v=v_full, objective=qp.objective(v_full), status=status, y_eq=y_eq,
                      lam_in=lam_in, lam_lower=lam_lower, lam_upper=lam_upper,
                      iterations=it, message=message)


def _ipm(Q, c, A, b, A_in, b_in, lower, upper, tol, max_iter, v0):
    """Mehrotra predictor-corrector on the reduced problem; no fixed variables.

    Bound constraints enter the Newton system as a diagonal. Large problems
    with sparse rows keep the normal-equation matrix in sparse form.
    """
    m = c.size
    p = A.shape[0]
    N = A_in.shape[0]
    lo_idx = np.flatnonzero(np.isfinite(lower))
    up_idx = np.flatnonzero(np.isfinite(upper))
    nl, nu = lo_idx.size, up_idx.size
    NT = N + nl + nu
    G = A_in
    h = np.concatenate([b_in, lower[lo_idx], -upper[up_idx]])

    def gmul(v):
        return np.concatenate([G @ v, v[lo_idx], -v[up_idx]])

    def gtmul(w):
        out = G.T @ w[:N]
        out[lo_idx] += w[N:N + nl]
        out[up_idx] -= w[N + nl:]
        return out

    def unpack(v, y, lam):
        lam_lo = np.zeros(m)
        lam_up = np.zeros(m)
        lam_lo[lo_idx] = lam[N:N + nl]
        lam_up[up_idx] = lam[N + nl:]
        return v, y, lam[:N].copy(), lam_lo, lam_up

    if m == 0:
        return (QpStatus.OPTIMAL, 0, "", *unpack(np.zeros(0), np.zeros(p), np.zeros(NT)))

    scale_c = 1.0 + np.max(np.abs(c)) + np.max(np.abs(Q))
    scale_b = 1.0 + (np.max(np.abs(b)) if p else 0.0)
    scale_h = 1.0 + (np.max(np.abs(h)) if NT else 0.0)
    reg = 1e-13 * scale_c
    use_sparse = m >= SPARSE_MIN_SIZE and np.count_nonzero(G) < SPARSE_DENSITY * G.size
    if use_sparse:
        Q_sp = sp.csc_matrix(Q)
        G_sp = sp.csc_matrix(G)
        A_sp = sp.csc_matrix(A) if p else None

    def diag_terms(W):
        D = np.full(m, reg)
        D[lo_idx] += W[N:N + nl]
        D[up_idx] += W[N + nl:]
        return D

    def factor(W):
        D = diag_terms(W)
        if use_sparse:
            H = Q_sp + G_sp.T @ sp.diags(W[:N]) @ G_sp + sp.diags(D)
            if p:
                H = sp.bmat([[H, A_sp.T], [A_sp, sp.diags(np.full(p, -reg))]])
            return ("sparse", spla.splu(sp.csc_matrix(H), permc_spec="MMD_AT_PLUS_A"), W)
        H = Q + (G.T * W[:N]) @ G
        H[np.diag_indices_from(H)] += D
        if p == 0:
            return ("chol", sla.cho_factor(H, check_finite=False), W)
        KKT = np.empty((m + p, m + p))
        KKT[:m, :m] = H
        KKT[:m, m:] = A.T
        KKT[m:, :m] = A
        KKT[m:, m:] = 0.0
        with warnings.catch_warnings():
            # a singular pivot surfaces as non-finite iterates and is classified there
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            return ("lu", sla.lu_factor(KKT, check_finite=False), W)

    def solve(fac, r0, r2, t):
        """Solve for (dv, dy) given the bound-condensed rhs r0 and row term t.

        The condensed first block row is r0 - G'W t.
        """
        kind, f, W = fac
        if kind == "sparse":
            r1 = r0 - G_sp.T @ (W[:N] * t)
            sol = f.solve(np.concatenate([r1, r2]))
            return sol[:m], -sol[m:]
        r1 = r0 - G.T @ (W[:N] * t)
        if kind == "chol":
            return sla.cho_solve(f, r1, check_finite=False), np.zeros(0)
        sol = sla.lu_solve(f, np.concatenate([r1, r2]), check_finite=False)
        return sol[:m], -sol[m:]

    if v0 is None:
        fac = factor(np.ones(NT))
        hb = np.zeros(m)
        hb[lo_idx] += lower[lo_idx]
        hb[up_idx] += upper[up_idx]
        v, y = solve(fac, -c + hb, b, -b_in)
    else:
        v = v0.copy()
        y = np.zeros(p)
    s = gmul(v) - h
    lam = np.ones(NT)
    if NT:
        s = s + max(-1.5 * s.min(), 0.0)
        s_dot = s @ lam
        s = s + 0.5 * s_dot / lam.sum()
        lam = lam + 0.5 * s_dot / s.sum()
        s = np.maximum(s, 1e-8)

    status = QpStatus.ITERATION_LIMIT
    message = ""
    stalls = 0
    it = 0
    for it in range(1, max_iter + 1):
        r_d = Q @ v + c - A.T @ y - gtmul(lam)
        r_p = A @ v - b
        r_g = gmul(v) - s - h
        gap = s @ lam
        pobj = 0.5 * v @ Q @ v + c @ v
        res_d = np.max(np.abs(r_d))
        res_p = np.max(np.abs(r_p)) if p else 0.0
        res_g = np.max(np.abs(r_g)) if NT else 0.0
        if (res_d <= tol * scale_c and res_p <= tol * scale_b and res_g <= tol * scale_h
                and gap <= max(tol * abs(pobj), 1e-14 * scale_c)):
            status = QpStatus.OPTIMAL
            break
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(lam))):
            message = "non-finite iterate"
            status = QpStatus.NUMERICAL_FAILURE
            break
        if NT and (lam.max() > 1e12 * scale_c or np.max(np.abs(v)) > 1e12 * scale_h):
            message = "iterates diverged"
            status = QpStatus.NUMERICAL_FAILURE
            break
        W = lam / s
        try:
            fac = factor(W)
        except (sla.LinAlgError, ValueError, RuntimeError):
            message = "singular KKT system"
            status = QpStatus.NUMERICAL_FAILURE
            break
        mu = gap / NT if NT else 0.0

        def direction(r_c):
            # rows: G dv - ds = -r_g, complementarity lam ds + s dlam = -r_c
            q_full = r_c / s + W * r_g
            r0 = -r_d
            r0[lo_idx] -= q_full[N:N + nl]
            r0[up_idx] += q_full[N + nl:]
            dv, dy = solve(fac, r0, -r_p, r_c[:N] / lam[:N] + r_g[:N])
            dsl = gmul(dv) + r_g
            dl = -r_c / s - W * dsl
            return dv, dy, dsl, dl

        dv, dy, dsl, dl = direction(s * lam)
        if NT:
            a_p = _max_step(s, dsl)
            a_d = _max_step(lam, dl)
            mu_aff = (s + a_p * dsl) @ (lam + a_d * dl) / NT
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            dv, dy, dsl, dl = direction(s * lam + dsl * dl - sigma * mu)
            # one step length for both sides: Q couples v with the multipliers
            eta = 0.99 if it < 5 else 0.995
            alpha = min(1.0, eta * _max_step(s, dsl), eta * _max_step(lam, dl))
        else:
            alpha = 1.0
        if alpha < 1e-10:
            stalls += 1
            if stalls >= 3:
                message = "step length collapsed"
                status = QpStatus.NUMERICAL_FAILURE
                break
        else:
            stalls = 0
        v = v + alpha * dv
        s = s + alpha * dsl
        y = y + alpha * dy
        lam = lam + alpha * dl
    return (status, it, message, *unpack(v, y, lam))


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-x[neg] / dx[neg])))
