"""Linear-program container and a bundled exact solver.

The solver is a dense two-phase simplex with a Bland's-rule fallback for
anti-cycling. Dense is fine at zone scale (at most a few hundred variables per
problem) and keeps results bit-reproducible across platforms: identical input
produces the identical pivot sequence and therefore the identical solution.

External solvers can be plugged in by implementing the ``solve`` signature;
everything downstream consumes only :class:`LpSolution`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

FEASIBILITY_TOL = 1e-6
PIVOT_TOL = 1e-9
# consecutive degenerate pivots tolerated before switching to Bland's rule
DEGENERATE_STREAK = 50
MAX_ITERATIONS = 20000

INF = math.inf


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICALLY_UNSTABLE = "numerically_unstable"


class Relation(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class LpError(Exception):
    """Malformed linear program (bad coefficient, unknown variable, ...)."""


@dataclass
class Variable:
    name: str
    lower: float
    upper: float


@dataclass
class Constraint:
    name: str
    coeffs: dict[str, float]
    relation: Relation
    rhs: float


@dataclass
class Violation:
    kind: str  # "bound" or "constraint"
    name: str
    amount: float

    def __str__(self) -> str:
        return f"{self.kind} {self.name} violated by {self.amount:.3e}"


class LinearProgram:
    """Minimization LP over bounded variables with <=, >=, = row constraints."""

    def __init__(self, name: str = "lp"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[str, float] = {}
        self.objective_constant = 0.0
        self._var_index: dict[str, int] = {}

    def add_variable(self, name: str, lower: float = 0.0, upper: float = INF) -> str:
        if name in self._var_index:
            raise LpError(f"duplicate variable {name!r}")
        if math.isnan(lower) or math.isnan(upper):
            raise LpError(f"variable {name!r} has NaN bound")
        if lower > upper:
            raise LpError(f"variable {name!r} has lower > upper ({lower} > {upper})")
        self._var_index[name] = len(self.variables)
        self.variables.append(Variable(name, float(lower), float(upper)))
        return name

    def add_constraint(
        self,
        coeffs: dict[str, float],
        relation: Relation | str,
        rhs: float,
        name: str | None = None,
    ) -> str:
        relation = Relation(relation)
        if name is None:
            name = f"c{len(self.constraints)}"
        for var, c in coeffs.items():
            if var not in self._var_index:
                raise LpError(f"constraint {name!r} references unknown variable {var!r}")
            if not math.isfinite(c):
                raise LpError(f"constraint {name!r} has non-finite coefficient on {var!r}")
        if not math.isfinite(rhs):
            raise LpError(f"constraint {name!r} has non-finite rhs")
        self.constraints.append(Constraint(name, dict(coeffs), relation, float(rhs)))
        return name

    def set_objective(self, coeffs: dict[str, float], constant: float = 0.0) -> None:
        for var, c in coeffs.items():
            if var not in self._var_index:
                raise LpError(f"objective references unknown variable {var!r}")
            if not math.isfinite(c):
                raise LpError(f"objective has non-finite coefficient on {var!r}")
        self.objective = dict(coeffs)
        self.objective_constant = float(constant)

    def variable_index(self, name: str) -> int:
        return self._var_index[name]

    def to_lp_format(self) -> str:
        """Render in the textual LP file format (for debugging / export)."""

        def term(c: float, v: str, first: bool) -> str:
            sign = "-" if c < 0 else ("" if first else "+")
            mag = abs(c)
            return f"{sign} {mag:.12g} {v} ".replace("  ", " ")

        out = ["\\ " + self.name, "Minimize", " obj:"]
        line = " "
        first = True
        for v in self.variables:
            c = self.objective.get(v.name, 0.0)
            if c != 0.0:
                line += term(c, v.name, first)
                first = False
        out.append(line if not first else " 0 zero_obj")
        out.append("Subject To")
        for con in self.constraints:
            line = f" {con.name}:"
            first = True
            for v in self.variables:
                c = con.coeffs.get(v.name, 0.0)
                if c != 0.0:
                    line += " " + term(c, v.name, first).strip()
                    first = False
            if first:
                line += " 0 zero_obj"
            line += f" {con.relation.value} {con.rhs:.12g}"
            out.append(line)
        out.append("Bounds")
        for v in self.variables:
            lo = "-inf" if v.lower == -INF else f"{v.lower:.12g}"
            hi = "+inf" if v.upper == INF else f"{v.upper:.12g}"
            out.append(f" {lo} <= {v.name} <= {hi}")
        out.append("End")
        return "\n".join(out) + "\n"


@dataclass
class LpSolution:
    status: SolveStatus
    objective: float
    values: dict[str, float] = field(default_factory=dict)
    duals: dict[str, float] | None = None
    iterations: int = 0

    def value(self, name: str) -> float:
        return self.values[name]


# ---------------------------------------------------------------------------
# standard-form conversion
#
# Every variable is shifted/flipped/split to a nonnegative column; finite upper
# ranges become extra rows. Rows are sign-normalized to rhs >= 0 so phase one
# can always seed a basis from slacks and artificials.
# ---------------------------------------------------------------------------


class _StandardForm:
    def __init__(self, lp: LinearProgram):
        self.lp = lp
        ncols = 0
        # per original var: ("shift", col, lb) | ("flip", col, ub) | ("split", col_pos, col_neg)
        self.var_map: list[tuple] = []
        extra_ub_rows: list[tuple[int, float]] = []  # (col, upper-range)
        for v in lp.variables:
            if v.lower == -INF and v.upper == INF:
                self.var_map.append(("split", ncols, ncols + 1))
                ncols += 2
            elif v.lower == -INF:
                self.var_map.append(("flip", ncols, v.upper))
                ncols += 1
            else:
                self.var_map.append(("shift", ncols, v.lower))
                if v.upper < INF:
                    extra_ub_rows.append((ncols, v.upper - v.lower))
                ncols += 1

        nrows = len(lp.constraints) + len(extra_ub_rows)
        A = np.zeros((nrows, ncols))
        b = np.zeros(nrows)
        rel: list[Relation] = []
        self.row_sign = np.ones(len(lp.constraints))

        for i, con in enumerate(lp.constraints):
            shift = 0.0
            for var, c in con.coeffs.items():
                j = lp.variable_index(var)
                kind = self.var_map[j]
                if kind[0] == "shift":
                    A[i, kind[1]] += c
                    shift += c * kind[2]
                elif kind[0] == "flip":
                    A[i, kind[1]] -= c
                    shift += c * kind[2]
                else:
                    A[i, kind[1]] += c
                    A[i, kind[2]] -= c
            b[i] = con.rhs - shift
            rel.append(con.relation)

        for k, (col, rng) in enumerate(extra_ub_rows):
            i = len(lp.constraints) + k
            A[i, col] = 1.0
            b[i] = rng
            rel.append(Relation.LE)

        # normalize rhs >= 0
        for i in range(nrows):
            if b[i] < 0:
                A[i, :] *= -1.0
                b[i] *= -1.0
                if i < len(lp.constraints):
                    self.row_sign[i] = -1.0
                if rel[i] == Relation.LE:
                    rel[i] = Relation.GE
                elif rel[i] == Relation.GE:
                    rel[i] = Relation.LE

        self.A, self.b, self.rel = A, b, rel
        self.ncols = ncols
        self.nrows = nrows

        c = np.zeros(ncols)
        self.obj_shift = lp.objective_constant
        for var, coef in lp.objective.items():
            j = lp.variable_index(var)
            kind = self.var_map[j]
            if kind[0] == "shift":
                c[kind[1]] += coef
                self.obj_shift += coef * kind[2]
            elif kind[0] == "flip":
                c[kind[1]] -= coef
                self.obj_shift += coef * kind[2]
            else:
                c[kind[1]] += coef
                c[kind[2]] -= coef
        self.c = c

    def recover(self, x_std: np.ndarray) -> dict[str, float]:
        values = {}
        for v, kind in zip(self.lp.variables, self.var_map):
            if kind[0] == "shift":
                values[v.name] = kind[2] + x_std[kind[1]]
            elif kind[0] == "flip":
                values[v.name] = kind[2] - x_std[kind[1]]
            else:
                values[v.name] = x_std[kind[1]] - x_std[kind[2]]
        return values


class _Simplex:
    """Tableau simplex over A x = b, x >= 0, b >= 0."""

    def __init__(self, A: np.ndarray, b: np.ndarray, rel: list[Relation]):
        m, n = A.shape
        n_slack = sum(1 for r in rel if r != Relation.EQ)
        n_art = sum(1 for r in rel if r != Relation.LE)
        total = n + n_slack + n_art
        T = np.zeros((m, total + 1))
        T[:, :n] = A
        T[:, -1] = b
        basis = np.empty(m, dtype=int)
        s = n
        a = n + n_slack
        self.art_start = a
        for i, r in enumerate(rel):
            if r == Relation.LE:
                T[i, s] = 1.0
                basis[i] = s
                s += 1
            elif r == Relation.GE:
                T[i, s] = -1.0
                T[i, a] = 1.0
                basis[i] = a
                s += 1
                a += 1
            else:
                T[i, a] = 1.0
                basis[i] = a
                a += 1
        self.T = T
        self.basis = basis
        self.m, self.n = m, n
        self.total = total
        self.iterations = 0

    def _pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row, :] /= T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row, :])
        # keep the pivot column numerically clean
        T[:, col] = 0.0
        T[row, col] = 1.0
        self.basis[row] = col

    def _run(self, cost: np.ndarray, allowed: np.ndarray) -> str:
        """Minimize cost over the current tableau; returns 'optimal'/'unbounded'/'stalled'."""
        T = self.T
        # reduced costs: c - c_B B^-1 A, maintained incrementally across pivots
        zrow = cost - cost[self.basis] @ T[:, :-1]
        degenerate_streak = 0
        while True:
            if self.iterations >= MAX_ITERATIONS:
                return "stalled"
            self.iterations += 1
            cand = np.where(allowed & (zrow < -PIVOT_TOL))[0]
            if cand.size == 0:
                return "optimal"
            if degenerate_streak >= DEGENERATE_STREAK:
                col = int(cand[0])  # Bland: lowest index
            else:
                col = int(cand[np.argmin(zrow[cand])])
            colvals = T[:, col]
            pos = np.where(colvals > PIVOT_TOL)[0]
            if pos.size == 0:
                return "unbounded"
            ratios = T[pos, -1] / colvals[pos]
            best = np.min(ratios)
            ties = pos[np.where(ratios <= best + 1e-12)[0]]
            # deterministic leave rule: smallest basis column among ratio ties
            row = int(ties[np.argmin(self.basis[ties])])
            if best <= 1e-12:
                degenerate_streak += 1
            else:
                degenerate_streak = 0
            piv = T[row, col]
            zrow = zrow - (zrow[col] / piv) * T[row, :-1]
            zrow[col] = 0.0
            self._pivot(row, col)


def _solve_standard(sf: _StandardForm) -> tuple[str, np.ndarray | None, np.ndarray | None, int]:
    """Run two-phase simplex; returns (status, x, basis, iterations)."""
    sx = _Simplex(sf.A, sf.b, sf.rel)
    n_art = sx.total - sx.art_start

    if n_art > 0:
        cost1 = np.zeros(sx.total)
        cost1[sx.art_start :] = 1.0
        allowed = np.ones(sx.total, dtype=bool)
        status = sx._run(cost1, allowed)
        if status == "stalled":
            return "stalled", None, None, sx.iterations
        phase1_obj = float(cost1[sx.basis] @ sx.T[:, -1])
        if phase1_obj > FEASIBILITY_TOL * max(1.0, float(np.max(np.abs(sf.b))) if sf.b.size else 1.0):
            return "infeasible", None, None, sx.iterations
        # drive remaining artificials out of the basis where possible
        for i in range(sx.m):
            if sx.basis[i] >= sx.art_start:
                row = sx.T[i, : sx.art_start]
                nz = np.where(np.abs(row) > PIVOT_TOL)[0]
                if nz.size:
                    sx._pivot(i, int(nz[0]))
        # any artificial still basic sits on a redundant zero row and simply
        # stays there; it can never re-enter once blocked below
    allowed = np.ones(sx.total, dtype=bool)
    allowed[sx.art_start :] = False

    cost2 = np.zeros(sx.total)
    cost2[: sf.ncols] = sf.c
    status = sx._run(cost2, allowed)
    if status == "stalled":
        return "stalled", None, None, sx.iterations
    if status == "unbounded":
        return "unbounded", None, None, sx.iterations
    x = np.zeros(sx.total)
    x[sx.basis] = sx.T[:, -1]
    return "optimal", x[: sf.ncols], sx.basis.copy(), sx.iterations


def _compute_duals(sf: _StandardForm, basis: np.ndarray) -> dict[str, float] | None:
    """Dual values per original constraint row from the optimal basis."""
    try:
        n_user = len(sf.lp.constraints)
        # rebuild the full standard-form matrix with slack/artificial columns
        sx = _Simplex(sf.A, sf.b, sf.rel)
        full = sx.T[:, :-1]
        cost = np.zeros(sx.total)
        cost[: sf.ncols] = sf.c
        B = full[:, basis]
        y = np.linalg.solve(B.T, cost[basis])
        duals = {}
        for i in range(n_user):
            duals[sf.lp.constraints[i].name] = float(y[i] * sf.row_sign[i])
        return duals
    except np.linalg.LinAlgError:
        return None


def solve(lp: LinearProgram, compute_duals: bool = True) -> LpSolution:
    """Solve a minimization LP exactly; deterministic for identical input.

    Numerical trouble (cycling guard exhausted, singular bases) triggers one
    retry on an equilibrated copy; if that also fails the status is
    ``numerically_unstable`` — deliberately distinct from ``infeasible``.
    """
    if not lp.variables:
        return LpSolution(SolveStatus.OPTIMAL, lp.objective_constant, {}, {}, 0)

    sf = _StandardForm(lp)
    status, x, basis, iters = _solve_standard(sf)

    rescaled = False
    if status == "stalled":
        scaled, _ = _equilibrated_copy(lp)
        sf2 = _StandardForm(scaled)
        status, x, basis, iters2 = _solve_standard(sf2)
        iters += iters2
        if status == "optimal":
            sf = sf2
            rescaled = True
        elif status == "stalled":
            return LpSolution(SolveStatus.NUMERICALLY_UNSTABLE, math.nan, {}, None, iters)

    if status == "infeasible":
        return LpSolution(SolveStatus.INFEASIBLE, math.nan, {}, None, iters)
    if status == "unbounded":
        return LpSolution(SolveStatus.UNBOUNDED, -math.inf, {}, None, iters)
    if status != "optimal":
        return LpSolution(SolveStatus.NUMERICALLY_UNSTABLE, math.nan, {}, None, iters)

    values = sf.recover(x)
    obj = sf.obj_shift + float(np.dot(sf.c, x))
    # duals from a row-rescaled solve would need unscaling; skip them there
    duals = _compute_duals(sf, basis) if compute_duals and not rescaled else None
    return LpSolution(SolveStatus.OPTIMAL, obj, values, duals, iters)


def _equilibrated_copy(lp: LinearProgram) -> tuple[LinearProgram, dict[str, float]]:
    """Row-scaled copy of the LP (same solution set, same argmin)."""
    out = LinearProgram(lp.name + ":scaled")
    for v in lp.variables:
        out.add_variable(v.name, v.lower, v.upper)
    scales: dict[str, float] = {}
    for con in lp.constraints:
        mx = max((abs(c) for c in con.coeffs.values()), default=1.0)
        s = 1.0 / mx if mx > 0 else 1.0
        scales[con.name] = s
        out.add_constraint(
            {k: c * s for k, c in con.coeffs.items()}, con.relation, con.rhs * s, con.name
        )
    out.set_objective(dict(lp.objective), lp.objective_constant)
    return out, scales


def check_solution(lp: LinearProgram, values: dict[str, float], tol: float = FEASIBILITY_TOL) -> list[Violation]:
    """Every bound/constraint violated beyond tol (scaled); empty list = feasible."""
    report: list[Violation] = []
    for v in lp.variables:
        if v.name not in values:
            raise LpError(f"solution is missing a value for {v.name!r}")
        x = values[v.name]
        scale = max(1.0, abs(v.lower) if v.lower != -INF else 1.0, abs(v.upper) if v.upper != INF else 1.0)
        if v.lower != -INF and x < v.lower - tol * scale:
            report.append(Violation("bound", v.name, v.lower - x))
        if v.upper != INF and x > v.upper + tol * scale:
            report.append(Violation("bound", v.name, x - v.upper))
    for con in lp.constraints:
        lhs = sum(c * values[var] for var, c in con.coeffs.items())
        scale = max(1.0, abs(con.rhs))
        gap = lhs - con.rhs
        if con.relation == Relation.LE and gap > tol * scale:
            report.append(Violation("constraint", con.name, gap))
        elif con.relation == Relation.GE and gap < -tol * scale:
            report.append(Violation("constraint", con.name, -gap))
        elif con.relation == Relation.EQ and abs(gap) > tol * scale:
            report.append(Violation("constraint", con.name, abs(gap)))
    return report
