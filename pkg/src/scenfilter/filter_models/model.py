"""Mixed-integer model of scenario filtering.

Variable layout: ``[x (n), xt (n*T, scenario-major), z (T), d (T)]`` where
``xt[t*n + j]`` stands for x_j (1 - z_t).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from scenfilter.qp_core import QuadraticProgram

from .bigm import BigMBounds
from .cuts import CriticalCut
from .instance import FilterInstance


@dataclass(frozen=True)
class MiqpModel:
    inst: FilterInstance
    Q: np.ndarray
    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_in: np.ndarray
    b_in: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integer_vars: np.ndarray
    eq_groups: dict = field(default_factory=dict)
    in_groups: dict = field(default_factory=dict)
    m_plus: Optional[np.ndarray] = None
    m_minus: Optional[np.ndarray] = None
    cuts: tuple = ()

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_constraints(self) -> int:
        return self.A_eq.shape[0] + self.A_in.shape[0]

    # index helpers
    def ix_x(self) -> slice:
        return slice(0, self.inst.n)

    def ix_xt(self) -> slice:
        n, T = self.inst.n, self.inst.T
        return slice(n, n + n * T)

    def ix_z(self) -> slice:
        n, T = self.inst.n, self.inst.T
        return slice(n + n * T, n + n * T + T)

    def ix_d(self) -> slice:
        n, T = self.inst.n, self.inst.T
        return slice(n + n * T + T, n + n * T + 2 * T)

    def relaxation(self, z_lower: Optional[np.ndarray] = None,
                   z_upper: Optional[np.ndarray] = None) -> QuadraticProgram:
        """Continuous relaxation with optional tightened bounds on z."""
        lower = self.lower.copy()
        upper = self.upper.copy()
        if z_lower is not None:
            lower[self.ix_z()] = z_lower
        if z_upper is not None:
            upper[self.ix_z()] = z_upper
        return QuadraticProgram(self.Q, self.c, self.A_eq, self.b_eq, self.A_in, self.b_in,
                                lower, upper)

    def node_qp(self, fixed0: Sequence[int] = (), fixed1: Sequence[int] = ()) -> "NodeQp":
        """Relaxation at a branch-and-bound node with the fixed z substituted out.

        A kept scenario (z_t = 0) has xt_t = x and a dropped one (z_t = 1)
        has xt_t = 0, so only the free scenarios keep their own xt and z.
        Reduced layout: ``[x (n), xt (n*f, free scenarios), z (f), d (T), mean]``.
        Removing those columns also removes the link rows that would
        otherwise hold with equality and leave the relaxation without an
        interior.
        """
        inst = self.inst
        n, T, K, q = inst.n, inst.T, inst.K, inst.q
        r = inst.returns
        f0 = np.array(sorted(set(int(t) for t in fixed0)), dtype=int)
        f1 = np.array(sorted(set(int(t) for t in fixed1)), dtype=int)
        if np.intersect1d(f0, f1).size:
            raise ValueError("a scenario cannot be fixed both ways")
        free = np.setdiff1d(np.arange(T), np.union1d(f0, f1))
        f = free.size
        nv = n + n * f + f + T + 1
        oxt, oz, od, om = n, n + n * f, n + n * f + f, n + n * f + f + T
        m_plus = self.m_plus if self.m_plus is not None else np.zeros(T)
        m_minus = self.m_minus if self.m_minus is not None else np.zeros(T)

        # the filtered mean is a variable of its own, which keeps every row sparse
        mean_row = np.zeros(nv)
        mean_row[:n] = q * r[:, f0].sum(axis=1)
        mean_row[oxt:oz] = (q * r[:, free]).T.reshape(-1)
        mean_row[om] = -1.0

        z_of = np.full(T, -1)
        z_of[free] = np.arange(f)
        dev = np.zeros((T, nv))
        dev[:, :n] = -r.T
        dev[:, om] = 1.0
        plus = dev.copy()
        plus[np.arange(T), od + np.arange(T)] = 1.0
        minus = -dev
        minus[np.arange(T), od + np.arange(T)] = 1.0
        plus[free, oz + np.arange(f)] = m_plus[free]
        minus[free, oz + np.arange(f)] = m_minus[free]
        rhs_plus = np.zeros(T)
        rhs_minus = np.zeros(T)
        rhs_plus[f1] = -m_plus[f1]
        rhs_minus[f1] = -m_minus[f1]

        link = np.zeros((n * f, nv))
        k = np.arange(n * f)
        link[k, np.tile(np.arange(n), f)] = 1.0
        link[k, oxt + k] = -1.0
        floor = np.zeros((1, nv))
        floor[0, om] = 1.0

        cut_rows, cut_rhs = [], []
        in_f0, in_f1 = set(f0.tolist()), set(f1.tolist())
        for cut in self.cuts:
            a = np.zeros(nv)
            for t in cut.scenarios:
                if t in in_f0:
                    a[cut.asset] -= 1.0
                elif t not in in_f1:
                    a[oxt + z_of[t] * n + cut.asset] = -1.0
            cut_rows.append(a)
            cut_rhs.append(-float(cut.rhs))

        A_in = np.vstack([plus, minus, link, floor,
                          np.array(cut_rows).reshape(len(cut_rows), nv)])
        b_in = np.concatenate([rhs_plus, rhs_minus, np.zeros(n * f), [inst.mu0], cut_rhs])

        A_eq = np.zeros((f + 3, nv))
        A_eq[np.repeat(np.arange(f), n), oxt + np.arange(n * f)] = 1.0
        A_eq[np.arange(f), oz + np.arange(f)] = 1.0
        A_eq[f, :n] = 1.0
        A_eq[f + 1, oz:od] = 1.0
        A_eq[f + 2] = mean_row
        b_eq = np.concatenate([np.ones(f), [1.0, float(K - f1.size), 0.0]])

        Q = np.zeros((nv, nv))
        Q[np.arange(od, om), np.arange(od, om)] = 2.0 * q
        lower = np.zeros(nv)
        lower[om] = -np.inf
        upper = np.full(nv, np.inf)
        upper[oz:od] = 1.0
        qp = QuadraticProgram(Q, np.zeros(nv), A_eq, b_eq, A_in, b_in, lower, upper)
        return NodeQp(qp, n, T, free, f0, f1)

    def split(self, v: np.ndarray):
        n, T = self.inst.n, self.inst.T
        return (v[self.ix_x()], v[self.ix_xt()].reshape(T, n).T, v[self.ix_z()], v[self.ix_d()])


@dataclass(frozen=True)
class NodeQp:
    """Reduced node relaxation plus the map back to the full variable layout."""

    qp: QuadraticProgram
    n: int
    T: int
    free: np.ndarray
    fixed0: np.ndarray
    fixed1: np.ndarray

    def z(self, v: np.ndarray) -> np.ndarray:
        n, f = self.n, self.free.size
        z = np.zeros(self.T)
        z[self.fixed1] = 1.0
        z[self.free] = v[n + n * f: n + n * f + f]
        return z

    def expand(self, v: np.ndarray) -> np.ndarray:
        n, T, f = self.n, self.T, self.free.size
        x = v[:n]
        xt = np.zeros((T, n))
        xt[self.fixed0] = x
        xt[self.free] = v[n:n + n * f].reshape(f, n)
        d = v[n + n * f + f: n + n * f + f + T]
        return np.concatenate([x, xt.reshape(-1), self.z(v), d])


def build_miqp(inst: FilterInstance, bigm: Optional[BigMBounds] = None,
               cuts: Sequence[CriticalCut] = (), *, bigm_scale: float = 1.0) -> MiqpModel:
    n, T, K, q = inst.n, inst.T, inst.K, inst.q
    r = inst.returns
    if bigm is None:
        if K > 0:
            raise ValueError("big-M bounds are required when K >= 1")
        m_plus = m_minus = np.zeros(T)
    else:
        if bigm.m_plus.shape != (T,) or bigm.m_minus.shape != (T,):
            raise ValueError("big-M bounds do not match the instance")
        m_plus, m_minus = bigm.m_plus * bigm_scale, bigm.m_minus * bigm_scale
    for cut in cuts:
        if not 0 <= cut.asset < n or any(not 0 <= t < T for t in cut.scenarios):
            raise ValueError(f"cut {cut} does not fit an instance with n={n}, T={T}")

    nv = n + n * T + 2 * T
    ox, oxt, oz, od = 0, n, n + n * T, n + n * T + T

    def xt(j, t):
        return oxt + t * n + j

    # filtered mean as a row over xt: sum_t sum_j q r_jt xt_jt
    mean_row = np.zeros(nv)
    mean_row[oxt:oz] = (q * r).T.reshape(-1)

    in_rows, in_rhs, in_groups = [], [], {}

    def add_group(name, rows, rhs):
        start = len(in_rows)
        in_rows.extend(rows)
        in_rhs.extend(rhs)
        in_groups[name] = slice(start, len(in_rows))

    rows = []
    for tp in range(T):
        a = mean_row.copy()
        a[ox:ox + n] -= r[:, tp]
        a[od + tp] = 1.0
        a[oz + tp] = m_plus[tp]
        rows.append(a)
    add_group("bigm_plus", rows, [0.0] * T)
    rows = []
    for tp in range(T):
        a = -mean_row
        a[ox:ox + n] += r[:, tp]
        a[od + tp] = 1.0
        a[oz + tp] = m_minus[tp]
        rows.append(a)
    add_group("bigm_minus", rows, [0.0] * T)
    rows = []
    for t in range(T):
        for j in range(n):
            a = np.zeros(nv)
            a[ox + j] = 1.0
            a[xt(j, t)] = -1.0
            rows.append(a)
    add_group("link", rows, [0.0] * (n * T))
    add_group("floor", [mean_row.copy()], [inst.mu0])
    rows = []
    for cut in cuts:
        a = np.zeros(nv)
        for t in cut.scenarios:
            a[xt(cut.asset, t)] = -1.0
        rows.append(a)
    add_group("cuts", rows, [-float(cut.rhs) for cut in cuts])

    eq_rows, eq_rhs, eq_groups = [], [], {}
    for t in range(T):
        a = np.zeros(nv)
        a[oxt + t * n: oxt + (t + 1) * n] = 1.0
        a[oz + t] = 1.0
        eq_rows.append(a)
        eq_rhs.append(1.0)
    eq_groups["row_sum"] = slice(0, T)
    a = np.zeros(nv)
    a[ox:ox + n] = 1.0
    eq_rows.append(a)
    eq_rhs.append(1.0)
    eq_groups["simplex"] = slice(T, T + 1)
    a = np.zeros(nv)
    a[oz:oz + T] = 1.0
    eq_rows.append(a)
    eq_rhs.append(float(K))
    eq_groups["cardinality"] = slice(T + 1, T + 2)

    Q = np.zeros((nv, nv))
    Q[np.arange(od, od + T), np.arange(od, od + T)] = 2.0 * q
    lower = np.zeros(nv)
    upper = np.full(nv, np.inf)
    upper[oz:oz + T] = 1.0
    return MiqpModel(
        inst=inst, Q=Q, c=np.zeros(nv),
        A_eq=np.array(eq_rows), b_eq=np.array(eq_rhs),
        A_in=np.array(in_rows).reshape(len(in_rows), nv), b_in=np.array(in_rhs),
        lower=lower, upper=upper, integer_vars=np.arange(oz, oz + T),
        eq_groups=eq_groups, in_groups=in_groups,
        m_plus=np.asarray(m_plus, dtype=float), m_minus=np.asarray(m_minus, dtype=float),
        cuts=tuple(cuts),
    )
