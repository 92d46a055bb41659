from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from scenfilter.market_data import ReturnScenarioMatrix


class InfeasibleError(RuntimeError):
    """The return floor cannot be met on the requested scenario set."""


class SolverError(RuntimeError):
    """A QP subproblem failed for numerical reasons."""


@dataclass(frozen=True)
class FilterInstance:
    r: ReturnScenarioMatrix
    K: int
    mu0: float

    def __post_init__(self):
        if not isinstance(self.r, ReturnScenarioMatrix):
            object.__setattr__(self, "r", ReturnScenarioMatrix(self.r))
        if not 0 <= self.K < self.r.n_scenarios:
            raise ValueError(f"K={self.K} must satisfy 0 <= K < T={self.r.n_scenarios}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "mu0", float(self.mu0))

    @property
    def n(self) -> int:
        return self.r.n_assets

    @property
    def T(self) -> int:
        return self.r.n_scenarios

    @property
    def q(self) -> float:
        return 1.0 / (self.T - self.K)

    @property
    def returns(self) -> np.ndarray:
        return self.r.returns

    def with_K(self, K: int) -> "FilterInstance":
        return FilterInstance(self.r, K, self.mu0)


@dataclass
class FilterSolution:
    x: np.ndarray
    z: np.ndarray
    filtered_mean: float
    filtered_variance: float

    @property
    def filtered(self) -> list[int]:
        """0-based indices of dropped scenarios."""
        return [int(t) for t in np.flatnonzero(self.z > 0.5)]


def evaluate_filtered_moments(x, z, inst: FilterInstance) -> tuple[float, float]:
    """Mean and variance of the portfolio over the scenarios kept by ``z``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z)
    if z.shape != (inst.T,):
        raise ValueError(f"z must have length {inst.T}")
    if int(round(z.sum())) != inst.K or np.any((z != 0) & (z != 1)):
        raise ValueError(f"z must be binary with exactly K={inst.K} ones")
    y = x @ inst.returns
    keep = 1.0 - z
    q = inst.q
    mean = float(np.sum(q * y * keep))
    var = float(np.sum(q * (y - mean) ** 2 * keep))
    return mean, var


def make_solution(x, z, inst: FilterInstance) -> FilterSolution:
    z = np.asarray(np.round(z), dtype=int)
    mean, var = evaluate_filtered_moments(x, z, inst)
    return FilterSolution(np.asarray(x, dtype=float), z, mean, var)


def z_from_dropped(dropped, T: int) -> np.ndarray:
    z = np.zeros(T, dtype=int)
    z[list(dropped)] = 1
    return z
