"""Markowitz, RMT-filtered and Power-Mapping-filtered mean-variance models."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from scenfilter.filter_models.instance import InfeasibleError, SolverError
from scenfilter.market_data import AssetStats
from scenfilter.qp_core import QpSolution, QpStatus, QuadraticProgram, solve_qp

REPAIR_EPS = 1e-10


class FloorMode(str, enum.Enum):
    INEQUALITY = "inequality"
    EQUALITY = "equality"


@dataclass(frozen=True)
class FilteredCorrelation:
    matrix: np.ndarray
    method: str  # "RMT", "PowerMapping" or "None"
    param: float | None = None
    repair_shift: float = 0.0

    def to_dict(self) -> dict:
        return {"method": self.method, "param": self.param, "repair_shift": self.repair_shift,
                "matrix": self.matrix.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def markowitz_qp(cov: np.ndarray, mu: np.ndarray, mu0: float,
                 floor_mode: FloorMode | str = FloorMode.INEQUALITY) -> QuadraticProgram:
    n = mu.size
    floor_mode = FloorMode(floor_mode)
    kw = {}
    if floor_mode is FloorMode.EQUALITY:
        A_eq = np.vstack([np.ones(n), mu])
        b_eq = [1.0, mu0]
    else:
        A_eq = np.ones((1, n))
        b_eq = [1.0]
        kw = dict(A_in=mu[None, :], b_in=[mu0])
    Q = cov + cov.T  # objective x' cov x in the 1/2 convention
    return QuadraticProgram.build(Q, np.zeros(n), A_eq, b_eq, lower=np.zeros(n), **kw)


def _solve(qp: QuadraticProgram) -> QpSolution:
    sol = solve_qp(qp)
    if sol.status is QpStatus.INFEASIBLE:
        raise InfeasibleError(f"return floor unattainable ({sol.message})")
    if not sol.optimal:
        raise SolverError(f"{sol.status.value}: {sol.message}")
    return sol


def solve_markowitz(stats: AssetStats, mu0: float,
                    floor_mode: FloorMode | str = FloorMode.INEQUALITY) -> QpSolution:
    """Long-only minimum-variance portfolio with a return floor."""
    return _solve(markowitz_qp(stats.cov, stats.mu, mu0, floor_mode))


def _eigh_desc(C: np.ndarray):
    w, U = np.linalg.eigh(C)
    order = np.argsort(-w, kind="stable")
    w, U = w[order], U[:, order]
    # largest-magnitude component of every eigenvector made positive
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivot, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return w, U * signs


def rmt_filter(stats: AssetStats, p: int = 5) -> FilteredCorrelation:
    """Keep the p largest eigenvalues of the correlation matrix, reset the diagonal to one."""
    n = stats.n_assets
    if not 1 <= p <= n:
        raise ValueError(f"p={p} must lie in [1, {n}]")
    C = 0.5 * (stats.corr + stats.corr.T)
    try:
        w, U = _eigh_desc(C)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigendecomposition failed: {exc}") from exc
    wf = w.copy()
    wf[p:] = 0.0
    Cf = (U * wf) @ U.T
    Cf = 0.5 * (Cf + Cf.T)
    np.fill_diagonal(Cf, 1.0)
    return FilteredCorrelation(Cf, "RMT", float(p))


def power_map(stats: AssetStats, q: float = 1.25) -> FilteredCorrelation:
    if not q > 0:
        raise ValueError("q must be positive")
    C = stats.corr
    Cq = np.sign(C) * np.abs(C) ** q
    Cq = 0.5 * (Cq + Cq.T)
    return FilteredCorrelation(Cq, "PowerMapping", float(q))


def psd_repair(fc: FilteredCorrelation) -> FilteredCorrelation:
    """Shift the diagonal just enough to make the matrix positive semidefinite."""
    lam_min = float(np.linalg.eigvalsh(fc.matrix)[0])
    if lam_min >= -REPAIR_EPS:
        return fc
    shift = -lam_min + REPAIR_EPS
    M = fc.matrix + shift * np.eye(fc.matrix.shape[0])
    return FilteredCorrelation(M, fc.method, fc.param, fc.repair_shift + shift)


def filtered_covariance(stats: AssetStats, fc: FilteredCorrelation) -> np.ndarray:
    return np.outer(stats.vol, stats.vol) * fc.matrix


def solve_filtered_markowitz(stats: AssetStats, fc: FilteredCorrelation, mu0: float,
                             floor_mode: FloorMode | str = FloorMode.INEQUALITY) -> QpSolution:
    return _solve(markowitz_qp(filtered_covariance(stats, fc), stats.mu, mu0, floor_mode))
