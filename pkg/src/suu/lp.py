"""LP relaxations of the assignment programs and a dense simplex solver.

Two programs are built here.  ``build_lp1`` asks every targeted job for
log mass ``L`` while minimising the maximum machine load; ``build_lp2``
additionally bounds each chain's total job length.  Both use log failures
clamped at the target (``L`` and ``1`` respectively), and both are solved
by :func:`solve_lp`, a two-phase primal simplex on a dense tableau.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import CHAINS, Instance, UnsupportedPrecedence

FEAS_TOL = 1e-7
PIVOT_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LPIterationLimit(RuntimeError):
    pass


@dataclass
class LinearProgram:
    """``min objective @ x`` subject to ``rows`` and per-variable bounds.

    Each constraint is ``(coefficients, relation, rhs)`` with relation
    ``"<="`` or ``">="``.  ``var_index`` maps semantic names such as
    ``("x", i, j)``, ``("d", j)`` or ``("t",)`` to columns.
    """

    objective: np.ndarray
    constraints: list[tuple[np.ndarray, str, float]] = field(default_factory=list)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    var_index: dict[tuple, int] = field(default_factory=dict)
    # shape metadata, used to unpack solutions
    m: int = 0
    n: int = 0

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        k = self.objective.size
        self.lower = np.zeros(k) if self.lower is None else np.asarray(self.lower, dtype=float)
        self.upper = np.full(k, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)

    @property
    def num_vars(self) -> int:
        return self.objective.size

    def add(self, coeffs: np.ndarray, rel: str, rhs: float) -> None:
        if rel not in ("<=", ">="):
            raise ValueError(f"relation must be '<=' or '>=', got {rel!r}")
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.num_vars,):
            raise ValueError("constraint row width differs from objective")
        self.constraints.append((coeffs, rel, float(rhs)))

    def dump(self) -> str:
        """Plain-text listing, one constraint per line."""
        names = {col: "_".join(str(p) for p in key) for key, col in self.var_index.items()}

        def expr(row):
            terms = [f"{c:+g} {names.get(k, f'v{k}')}" for k, c in enumerate(row) if c != 0]
            return " ".join(terms) or "0"

        lines = [f"min {expr(self.objective)}"]
        lines += [f"{expr(row)} {rel} {rhs:g}" for row, rel, rhs in self.constraints]
        for k in range(self.num_vars):
            lo, hi = self.lower[k], self.upper[k]
            if lo != 0 or np.isfinite(hi):
                lines.append(f"{lo:g} <= {names.get(k, f'v{k}')} <= {hi:g}")
        return "\n".join(lines) + "\n"


@dataclass
class FractionalSolution:
    status: str
    values: np.ndarray | None = None
    objective: float = float("nan")
    x_star: np.ndarray | None = None
    t_star: float = float("nan")
    d_star: np.ndarray | None = None
    iterations: int = 0


# -- solver ------------------------------------------------------------------

def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    nz = np.nonzero(col)[0]
    if nz.size:
        T[nz] -= np.outer(col[nz], T[r])


def _simplex(T, basis, ncols, max_iter, rule, it0=0):
    """Optimise tableau ``T`` in place; the last row is the reduced-cost row.

    Entering columns are restricted to ``[0, ncols)``.  Dantzig pricing is
    used until a run of degenerate pivots appears, after which Bland's rule
    takes over for the rest of the phase (it cannot cycle).
    """
    it = it0
    degenerate = 0
    bland = rule == "bland"
    nrows = T.shape[0] - 1
    while True:
        cost = T[-1, :ncols]
        if bland:
            cand = np.nonzero(cost < -FEAS_TOL * 1e-2)[0]
            if cand.size == 0:
                return it, OPTIMAL
            c = int(cand[0])
        else:
            c = int(np.argmin(cost))
            if cost[c] >= -FEAS_TOL * 1e-2:
                return it, OPTIMAL
        colv = T[:nrows, c]
        pos = colv > PIVOT_TOL
        if not np.any(pos):
            return it, UNBOUNDED
        ratios = np.full(nrows, np.inf)
        ratios[pos] = T[:nrows, -1][pos] / colv[pos]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + 1e-12)[0]
        r = int(ties[np.argmin(np.asarray(basis)[ties])])
        if best <= 1e-12:
            degenerate += 1
            if degenerate > 50:
                bland = True
        else:
            degenerate = 0
        _pivot(T, r, c)
        basis[r] = c
        it += 1
        if it > max_iter:
            raise LPIterationLimit(f"simplex exceeded {max_iter} iterations")


#: tableau size (rows x columns) above which ``method="auto"`` uses HiGHS
AUTO_DENSE_LIMIT = 1_500_000


def _solve_highs(lp: LinearProgram) -> FractionalSolution:
    from scipy.optimize import linprog

    A_ub, b_ub = [], []
    for a, rel, b in lp.constraints:
        A_ub.append(a if rel == "<=" else -a)
        b_ub.append(b if rel == "<=" else -b)
    bounds = [(lo, None if not np.isfinite(hi) else hi) for lo, hi in zip(lp.lower, lp.upper)]
    res = linprog(lp.objective, A_ub=np.array(A_ub).reshape(len(A_ub), lp.num_vars) if A_ub else None,
                  b_ub=b_ub or None, bounds=bounds, method="highs")
    if res.status == 2:
        return FractionalSolution(status=INFEASIBLE)
    if res.status == 3:
        return FractionalSolution(status=UNBOUNDED)
    if res.status != 0:
        raise LPIterationLimit(f"HiGHS failed: {res.message}")
    x = np.asarray(res.x, dtype=float)
    return FractionalSolution(status=OPTIMAL, values=x, objective=float(lp.objective @ x),
                              iterations=int(getattr(res, "nit", 0)))


def solve_lp(lp: LinearProgram, *, method: str = "auto", max_iter: int | None = None,
             rule: str = "dantzig") -> FractionalSolution:
    """Solve ``lp``.

    ``method="simplex"`` runs the built-in two-phase primal simplex,
    ``"highs"`` delegates to scipy, and ``"auto"`` uses the simplex unless
    the dense tableau would be very large.  Returns status ``optimal`` with
    a primal solution, or ``infeasible`` / ``unbounded``.  Exceeding
    ``max_iter`` pivots raises :class:`LPIterationLimit`.
    """
    if method == "auto":
        nrows = len(lp.constraints) + int(np.isfinite(lp.upper).sum())
        method = "highs" if nrows * (lp.num_vars + 2 * nrows) > AUTO_DENSE_LIMIT else "simplex"
    if method == "highs":
        return _solve_highs(lp)
    if method != "simplex":
        raise ValueError(f"unknown LP method {method!r}")
    nv = lp.num_vars
    lo, hi = lp.lower, lp.upper
    if np.any(~np.isfinite(lo)):
        raise ValueError("variables need finite lower bounds")
    if np.any(hi < lo):
        return FractionalSolution(status=INFEASIBLE)

    # shift x = lo + y, y >= 0; finite upper bounds become rows
    rows, rels, rhs = [], [], []
    for a, rel, b in lp.constraints:
        rows.append(a)
        rels.append(rel)
        rhs.append(b - a @ lo)
    for k in np.nonzero(np.isfinite(hi))[0]:
        a = np.zeros(nv)
        a[k] = 1.0
        rows.append(a)
        rels.append("<=")
        rhs.append(hi[k] - lo[k])
    nr = len(rows)
    A = np.array(rows, dtype=float).reshape(nr, nv)
    b = np.array(rhs, dtype=float)
    ge = np.array([r == ">=" for r in rels], dtype=bool)
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    ge = ge ^ neg  # flipping the sign flips the relation

    n_slack = nr
    art_rows = np.nonzero(ge)[0]
    n_art = art_rows.size
    ncol = nv + n_slack + n_art
    T = np.zeros((nr + 1, ncol + 1))
    T[:nr, :nv] = A
    T[np.arange(nr), nv + np.arange(nr)] = np.where(ge, -1.0, 1.0)
    T[art_rows, nv + n_slack + np.arange(n_art)] = 1.0
    T[:nr, -1] = b
    basis = [nv + r for r in range(nr)]
    for a_k, r in enumerate(art_rows):
        basis[r] = nv + n_slack + a_k
    if max_iter is None:
        max_iter = 50 * (nr + ncol) + 1000

    it = 0
    if n_art:
        # phase 1: minimise the sum of artificials
        T[-1, :] = 0.0
        T[-1, :] -= T[art_rows].sum(axis=0)
        T[-1, nv + n_slack:ncol] = 0.0
        it, status = _simplex(T, basis, ncol, max_iter, rule)
        if -T[-1, -1] > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
            return FractionalSolution(status=INFEASIBLE, iterations=it)
        # drive zero-level artificials out of the basis
        for r in range(nr):
            if basis[r] >= nv + n_slack:
                cand = np.nonzero(np.abs(T[r, :nv + n_slack]) > PIVOT_TOL)[0]
                if cand.size:
                    _pivot(T, r, int(cand[0]))
                    basis[r] = int(cand[0])
        keep = [r for r in range(nr) if basis[r] < nv + n_slack]
        T = np.vstack([T[keep], T[-1:]])
        T = np.delete(T, np.s_[nv + n_slack:ncol], axis=1)
        basis = [basis[r] for r in keep]
        nr = len(keep)
    ncol = nv + n_slack

    # phase 2
    c = np.zeros(ncol)
    c[:nv] = lp.objective
    T[-1, :] = 0.0
    T[-1, :ncol] = c
    for r, bcol in enumerate(basis):
        if T[-1, bcol] != 0.0:
            T[-1] -= T[-1, bcol] * T[r]
    it, status = _simplex(T, basis, ncol, max_iter, rule, it)
    if status == UNBOUNDED:
        return FractionalSolution(status=UNBOUNDED, iterations=it)

    y = np.zeros(ncol)
    for r, bcol in enumerate(basis):
        y[bcol] = T[r, -1]
    x = lo + np.maximum(y[:nv], 0.0)
    x = np.minimum(x, hi)
    return FractionalSolution(status=OPTIMAL, values=x, objective=float(lp.objective @ x), iterations=it)


# -- the assignment programs -------------------------------------------------

def clamp_log_failures(ell: np.ndarray, L: float) -> np.ndarray:
    """Elementwise ``min(ell, L)``."""
    return np.minimum(np.asarray(ell, dtype=float), L)


def _job_list(inst: Instance, jobs: Iterable[int] | None) -> list[int]:
    if jobs is None:
        return list(range(inst.n))
    jobs = sorted(set(int(j) for j in jobs))
    for j in jobs:
        if not 0 <= j < inst.n:
            raise ValueError(f"unknown job id {j}")
    return jobs


def build_lp1(inst: Instance, jobs: Iterable[int] | None, L: float) -> LinearProgram:
    """Relaxed LP1: every job in ``jobs`` gets clamped log mass ``>= L``.

    Variables exist only for pairs with positive clamped log failure; the
    rest would contribute load without mass and are zero in every optimum.
    """
    if L <= 0:
        raise ValueError("target log mass L must be positive")
    jobs = _job_list(inst, jobs)
    ellc = clamp_log_failures(inst.ell, L)
    pairs = [(i, j) for j in jobs for i in range(inst.m) if ellc[i, j] > 0]
    nv = len(pairs) + 1
    t = nv - 1
    obj = np.zeros(nv)
    obj[t] = 1.0
    lp = LinearProgram(obj, m=inst.m, n=inst.n)
    lp.var_index = {("x", i, j): k for k, (i, j) in enumerate(pairs)}
    lp.var_index[("t",)] = t
    by_job: dict[int, list[int]] = {j: [] for j in jobs}
    by_machine: dict[int, list[int]] = {i: [] for i in range(inst.m)}
    for k, (i, j) in enumerate(pairs):
        by_job[j].append(k)
        by_machine[i].append(k)
    for j in jobs:
        row = np.zeros(nv)
        for k in by_job[j]:
            row[k] = ellc[pairs[k]]
        lp.add(row, ">=", L)
    for i in range(inst.m):
        row = np.zeros(nv)
        row[by_machine[i]] = 1.0
        row[t] = -1.0
        lp.add(row, "<=", 0.0)
    return lp


def chain_list(inst: Instance) -> list[tuple[int, ...]]:
    """Chains of a chain instance, with uncovered jobs as singleton chains."""
    if inst.precedence.kind != CHAINS:
        raise UnsupportedPrecedence(f"expected chains precedence, got {inst.precedence.kind}")
    chains = [tuple(c) for c in inst.precedence.chains if c]
    covered = {j for c in chains for j in c}
    chains += [(j,) for j in range(inst.n) if j not in covered]
    return chains


def build_lp2(inst: Instance) -> LinearProgram:
    """Relaxed LP2 for chains: unit clamped mass, load and chain length <= t."""
    chains = chain_list(inst)
    n, m = inst.n, inst.m
    ellc = clamp_log_failures(inst.ell, 1.0)
    pairs = [(i, j) for j in range(n) for i in range(m) if ellc[i, j] > 0]
    nx_ = len(pairs)
    nv = nx_ + n + 1
    t = nv - 1
    obj = np.zeros(nv)
    obj[t] = 1.0
    lower = np.zeros(nv)
    lower[nx_:nx_ + n] = 1.0  # d_j >= 1
    lp = LinearProgram(obj, lower=lower, m=m, n=n)
    lp.var_index = {("x", i, j): k for k, (i, j) in enumerate(pairs)}
    lp.var_index.update({("d", j): nx_ + j for j in range(n)})
    lp.var_index[("t",)] = t
    by_job: dict[int, list[int]] = {j: [] for j in range(n)}
    by_machine: dict[int, list[int]] = {i: [] for i in range(m)}
    for k, (i, j) in enumerate(pairs):
        by_job[j].append(k)
        by_machine[i].append(k)
    for j in range(n):
        row = np.zeros(nv)
        for k in by_job[j]:
            row[k] = ellc[pairs[k]]
        lp.add(row, ">=", 1.0)
    for i in range(m):
        row = np.zeros(nv)
        row[by_machine[i]] = 1.0
        row[t] = -1.0
        lp.add(row, "<=", 0.0)
    for chain in chains:
        row = np.zeros(nv)
        row[[nx_ + j for j in chain]] = 1.0
        row[t] = -1.0
        lp.add(row, "<=", 0.0)
    for k, (i, j) in enumerate(pairs):
        row = np.zeros(nv)
        row[k] = 1.0
        row[nx_ + j] = -1.0
        lp.add(row, "<=", 0.0)
    return lp


def unpack(lp: LinearProgram, sol: FractionalSolution) -> FractionalSolution:
    """Fill ``x_star``, ``t_star`` and ``d_star`` from the raw solution."""
    if sol.status != OPTIMAL:
        return sol
    x = np.zeros((lp.m, lp.n))
    d = None
    for key, col in lp.var_index.items():
        if key[0] == "x":
            x[key[1], key[2]] = sol.values[col]
        elif key[0] == "d":
            if d is None:
                d = np.zeros(lp.n)
            d[key[1]] = sol.values[col]
    sol.x_star = x
    sol.d_star = d
    sol.t_star = float(sol.values[lp.var_index[("t",)]])
    return sol


def solve_lp1(inst: Instance, jobs: Sequence[int] | None, L: float, *,
              method: str = "auto") -> FractionalSolution:
    """Build and solve LP1; ``L <= 0`` or no jobs gives the zero solution."""
    jobs = _job_list(inst, jobs)
    if L <= 0 or not jobs:
        return FractionalSolution(status=OPTIMAL, values=np.zeros(1), objective=0.0,
                                  x_star=np.zeros((inst.m, inst.n)), t_star=0.0)
    lp = build_lp1(inst, jobs, L)
    return unpack(lp, solve_lp(lp, method=method))


def solve_lp2(inst: Instance, *, method: str = "auto") -> FractionalSolution:
    lp = build_lp2(inst)
    return unpack(lp, solve_lp(lp, method=method))
