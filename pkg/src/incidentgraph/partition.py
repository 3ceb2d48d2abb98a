"""Incident partitioning: the mixed-integer program (exact and relaxed) over
the symmetrized alert graph.

The integer model minimizes  gamma0 * (cut + C*cardinality)  (expressed via
slack variables on the Laplacian rows)  +  gamma1 * tactic-miss penalty  +
gamma2 * asset count, subject to per-alert membership and per-incident size
caps. Columns of the decision matrix are incidents; empty columns are legal.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .graph import AlertGraph
from .lp import IterationLimit, LpResult, solve_lp

DEFAULT_GAMMA = (1.0, 0.5, 0.5)
DEFAULT_MAX_MEMB = 2
DEFAULT_MAX_CARD = 20
EXACT_GUARD_BINARIES = 60


class PartitionError(ValueError):
    pass


class EmptyProblemError(PartitionError):
    pass


class SizeGuardError(PartitionError):
    """Exact solve refused; instance too large for branch-and-bound."""


class SolverLimit(RuntimeError):
    pass


@dataclass
class PartitionProblem:
    node_ids: tuple[str, ...]
    w: np.ndarray                # symmetric weights
    laplacian: np.ndarray
    c_big: float                 # 2 * max row sum of W
    k: int
    max_memb: int
    max_card: int
    gamma0: float
    gamma1: float
    gamma2: float
    tactic_incidence: np.ndarray  # n x 12 binary
    asset_ids: tuple[str, ...]
    asset_incidence: np.ndarray   # n x n_assets binary
    tactic_penalty: str = "inf"   # "inf" | "one"

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def n_binaries(self) -> int:
        return self.n * self.k


@dataclass
class ColumnDiagnostics:
    cut_weight: float
    missing_tactics: int
    asset_count: int


@dataclass
class IncidentPartition:
    columns: list[list[str]]
    objective: float
    status: str                   # optimal | relaxed-rounded | heuristic
    max_memb: int
    max_card: int
    diagnostics: list[ColumnDiagnostics] = field(default_factory=list)
    lp_bound: float | None = None
    nodes_explored: int = 0

    def validate(self) -> None:
        memb: dict[str, int] = {}
        for col in self.columns:
            if len(col) > self.max_card:
                raise PartitionError(f"column of size {len(col)} exceeds MaxCard")
            for node in col:
                memb[node] = memb.get(node, 0) + 1
        over = {k: v for k, v in memb.items() if v > self.max_memb}
        if over:
            raise PartitionError(f"MaxMemb violated for {sorted(over)}")


def build_problem(
    g: AlertGraph,
    k: int | None = None,
    max_memb: int = DEFAULT_MAX_MEMB,
    max_card: int = DEFAULT_MAX_CARD,
    gamma0: float = DEFAULT_GAMMA[0],
    gamma1: float = DEFAULT_GAMMA[1],
    gamma2: float = DEFAULT_GAMMA[2],
    tactic_penalty: str = "inf",
) -> PartitionProblem:
    if len(g) == 0:
        raise EmptyProblemError("cannot partition an empty graph")
    if max_memb < 1 or max_card < 1:
        raise PartitionError("MaxMemb and MaxCard must be positive")
    if k is None:
        k = -(-len(g) // max_card)  # ceil
    if k < 1:
        raise PartitionError("K must be at least 1")
    if tactic_penalty not in ("inf", "one"):
        raise PartitionError(f"unknown tactic penalty mode {tactic_penalty!r}")
    w = g.weight_matrix()
    lap = np.diag(w.sum(axis=1)) - w
    c_big = 2.0 * float(w.sum(axis=1).max()) if len(g) else 0.0
    n = len(g)
    tac = np.zeros((n, 12))
    for i, node in enumerate(g.nodes):
        for t in node.tactics:
            tac[i, t.index] = 1.0
    asset_ids = tuple(sorted({a for node in g.nodes for a in node.assets}))
    asset_idx = {a: j for j, a in enumerate(asset_ids)}
    assets = np.zeros((n, len(asset_ids)))
    for i, node in enumerate(g.nodes):
        for a in node.assets:
            assets[i, asset_idx[a]] = 1.0
    return PartitionProblem(
        node_ids=tuple(node.id for node in g.nodes),
        w=w,
        laplacian=lap,
        c_big=c_big,
        k=k,
        max_memb=max_memb,
        max_card=max_card,
        gamma0=gamma0,
        gamma1=gamma1,
        gamma2=gamma2,
        tactic_incidence=tac,
        asset_ids=asset_ids,
        asset_incidence=assets,
        tactic_penalty=tactic_penalty,
    )


# --- objective pieces evaluated exactly on a fixed binary X ---


def min_slack_objective(x: np.ndarray, p: PartitionProblem) -> float:
    """Minimal total slack for fixed X: sum_k (x_k' L x_k + C * |x_k|)."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    for k in range(p.k):
        xk = x[:, k]
        total += float(xk @ p.laplacian @ xk) + p.c_big * float(xk.sum())
    return total


def tactic_asset_terms(
    x: np.ndarray, p: PartitionProblem
) -> tuple[np.ndarray, np.ndarray]:
    """Per-column tactic penalty alpha_k and asset-count sum(beta_k)."""
    x = np.asarray(x, dtype=float)
    covered = (p.tactic_incidence.T @ x) > 0.5          # 12 x K
    missing = (~covered).astype(float)
    if p.tactic_penalty == "one":
        alpha = missing.sum(axis=0)
    else:
        alpha = missing.max(axis=0)
    present = (p.asset_incidence.T @ x) > 0.5           # nA x K
    beta = present.astype(float).sum(axis=0)
    return alpha, beta


def objective_value(x: np.ndarray, p: PartitionProblem) -> float:
    alpha, beta = tactic_asset_terms(x, p)
    return (
        p.gamma0 * min_slack_objective(x, p)
        + p.gamma1 * float(alpha.sum())
        + p.gamma2 * float(beta.sum())
    )


# --- LP assembly ---
#
# The slack matrix S is eliminated (e'Se = n*C - 1't per column since 1'L = 0)
# and the tactic-miss variables are complemented (y = 1 - z coverage,
# a' = 1 - alpha) so every row has non-negative rhs: the all-slack basis is
# feasible and the simplex never needs a phase 1.


@dataclass
class _LpModel:
    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    bounds: list[tuple[float, float | None]]
    constant: float
    nx: int  # leading x variables, ordered (i, k) -> i * K + k


def _assemble_lp(p: PartitionProblem) -> _LpModel:
    n, k, big = p.n, p.k, p.c_big
    nx = n * k
    nt = n * k
    ny = 12 * k
    nb = len(p.asset_ids) * k
    na = k if p.tactic_penalty == "inf" else 0
    nv = nx + nt + ny + nb + na

    def xi(i, kk):
        return i * k + kk

    def ti(i, kk):
        return nx + i * k + kk

    def yi(m, kk):
        return nx + nt + m * k + kk

    def bi(a, kk):
        return nx + nt + ny + a * k + kk

    def ai(kk):
        return nx + nt + ny + nb + kk

    c = np.zeros(nv)
    c[nx:nx + nt] = -p.gamma0
    constant = p.gamma0 * k * n * big
    if p.tactic_penalty == "one":
        c[nx + nt:nx + nt + ny] = -p.gamma1   # gamma1 * sum(1 - y)
        constant += p.gamma1 * 12 * k
    else:
        c[nx + nt + ny + nb:] = -p.gamma1     # gamma1 * sum(1 - a')
        constant += p.gamma1 * k
    c[nx + nt + ny:nx + nt + ny + nb] = p.gamma2

    rows: list[np.ndarray] = []
    rhs: list[float] = []

    def add(row, b):
        rows.append(row)
        rhs.append(b)

    for kk in range(k):
        for i in range(n):
            # t <= 2C (e - x)
            r = np.zeros(nv)
            r[ti(i, kk)] = 1.0
            r[xi(i, kk)] = 2.0 * big
            add(r, 2.0 * big)
            # s >= 0  <=>  t - (L x)_i <= C
            r = np.zeros(nv)
            r[ti(i, kk)] = 1.0
            for j in range(n):
                if p.laplacian[i, j] != 0.0:
                    r[xi(j, kk)] = -p.laplacian[i, j]
            add(r, big)
    for i in range(n):
        r = np.zeros(nv)
        for kk in range(k):
            r[xi(i, kk)] = 1.0
        add(r, float(p.max_memb))
    for kk in range(k):
        r = np.zeros(nv)
        for i in range(n):
            r[xi(i, kk)] = 1.0
        add(r, float(p.max_card))
    for kk in range(k):
        for m in range(12):
            # coverage y <= sum of carrying x
            r = np.zeros(nv)
            r[yi(m, kk)] = 1.0
            for j in np.flatnonzero(p.tactic_incidence[:, m]):
                r[xi(int(j), kk)] = -1.0
            add(r, 0.0)
            if p.tactic_penalty == "inf":
                # a' <= y for every tactic
                r = np.zeros(nv)
                r[ai(kk)] = 1.0
                r[yi(m, kk)] = -1.0
                add(r, 0.0)
    for kk in range(k):
        for a in range(len(p.asset_ids)):
            for j in np.flatnonzero(p.asset_incidence[:, a]):
                r = np.zeros(nv)
                r[xi(int(j), kk)] = 1.0
                r[bi(a, kk)] = -1.0
                add(r, 0.0)

    bounds: list[tuple[float, float | None]] = []
    bounds += [(0.0, 1.0)] * nx
    bounds += [(0.0, 2.0 * big)] * nt
    bounds += [(0.0, 1.0)] * ny
    bounds += [(0.0, 1.0)] * nb
    bounds += [(0.0, 1.0)] * na

    a_ub = np.vstack(rows) if rows else np.zeros((0, nv))
    return _LpModel(
        c=c,
        a_ub=a_ub,
        b_ub=np.array(rhs),
        bounds=bounds,
        constant=constant,
        nx=nx,
    )


def _solve_node_lp(model: _LpModel, fixed: dict[int, int]) -> LpResult:
    bounds = list(model.bounds)
    for j, v in fixed.items():
        bounds[j] = (float(v), float(v))
    return solve_lp(model.c, model.a_ub, model.b_ub, bounds)


def _x_matrix(xvec: np.ndarray, p: PartitionProblem) -> np.ndarray:
    return xvec[: p.n * p.k].reshape(p.n, p.k)


def _partition_from_x(
    x: np.ndarray, p: PartitionProblem, status: str, **extra
) -> IncidentPartition:
    columns = []
    diags = []
    for kk in range(p.k):
        members = [p.node_ids[i] for i in range(p.n) if x[i, kk] > 0.5]
        columns.append(members)
        xk = x[:, kk]
        diags.append(
            ColumnDiagnostics(
                cut_weight=float(xk @ p.laplacian @ xk),
                missing_tactics=int((~((p.tactic_incidence.T @ xk) > 0.5)).sum()),
                asset_count=int(((p.asset_incidence.T @ xk) > 0.5).sum()),
            )
        )
    part = IncidentPartition(
        columns=columns,
        objective=objective_value(x, p),
        status=status,
        max_memb=p.max_memb,
        max_card=p.max_card,
        diagnostics=diags,
        **extra,
    )
    part.validate()
    return part


def solve_exact(
    p: PartitionProblem,
    guard: int = EXACT_GUARD_BINARIES,
    node_limit: int = 200000,
) -> IncidentPartition:
    """Branch and bound over the LP relaxation: most-fractional branching,
    best-bound node selection, certified gap zero at termination."""
    if p.n_binaries > guard:
        raise SizeGuardError(
            f"{p.n_binaries} binaries exceed the exact-solve guard ({guard}); "
            "use solve_relaxed or the community baseline"
        )
    model = _assemble_lp(p)

    incumbent_x = np.zeros((p.n, p.k))
    incumbent_obj = objective_value(incumbent_x, p)

    root = _solve_node_lp(model, {})
    if root.status != "optimal":
        raise SolverLimit(f"root relaxation {root.status}")
    explored = 0
    counter = itertools.count()
    heap = [(root.objective + model.constant, next(counter), {}, root)]
    root_bound = root.objective + model.constant

    while heap:
        bound, _, fixed, res = heapq.heappop(heap)
        if bound >= incumbent_obj - 1e-9:
            continue
        explored += 1
        if explored > node_limit:
            raise SolverLimit(f"branch-and-bound exceeded {node_limit} nodes")
        xrel = res.x[: model.nx]
        frac = np.abs(xrel - np.round(xrel))
        j = int(np.argmax(frac))
        if frac[j] <= 1e-6:
            x_int = np.round(xrel).reshape(p.n, p.k)
            val = objective_value(x_int, p)
            if val < incumbent_obj - 1e-12:
                incumbent_obj = val
                incumbent_x = x_int
            continue
        for v in (0, 1):
            child_fixed = dict(fixed)
            child_fixed[j] = v
            child = _solve_node_lp(model, child_fixed)
            if child.status != "optimal":
                continue  # infeasible branch
            child_bound = child.objective + model.constant
            if child_bound < incumbent_obj - 1e-9:
                heapq.heappush(heap, (child_bound, next(counter), child_fixed, child))

    return _partition_from_x(
        incumbent_x, p, "optimal", lp_bound=root_bound, nodes_explored=explored
    )


def solve_relaxed(p: PartitionProblem) -> IncidentPartition:
    """LP relaxation, then threshold rounding at 0.5 with deterministic repair."""
    model = _assemble_lp(p)
    try:
        res = _solve_node_lp(model, {})
    except IterationLimit as e:
        raise SolverLimit(f"LP iteration limit: {e}") from e
    if res.status != "optimal":
        raise SolverLimit(f"relaxation ended {res.status}")
    frac = _x_matrix(res.x, p)
    x = (frac >= 0.5).astype(float)

    # MaxMemb repair: keep the strongest memberships per node.
    for i in range(p.n):
        cols = [kk for kk in range(p.k) if x[i, kk] > 0.5]
        if len(cols) > p.max_memb:
            cols.sort(key=lambda kk: (-frac[i, kk], kk))
            for kk in cols[p.max_memb:]:
                x[i, kk] = 0.0
    # MaxCard repair: trim lowest weighted-degree members.
    for kk in range(p.k):
        while x[:, kk].sum() > p.max_card:
            members = np.flatnonzero(x[:, kk] > 0.5)
            degrees = p.w[np.ix_(members, members)].sum(axis=1)
            drop = members[int(np.lexsort((members, degrees))[0])]
            x[drop, kk] = 0.0

    return _partition_from_x(
        x, p, "relaxed-rounded", lp_bound=res.objective + model.constant
    )


def relaxation_bound(p: PartitionProblem) -> float:
    """Optimal value of the LP relaxation (a lower bound on the exact optimum)."""
    model = _assemble_lp(p)
    res = _solve_node_lp(model, {})
    if res.status != "optimal":
        raise SolverLimit(f"relaxation ended {res.status}")
    return res.objective + model.constant


# --- problem dump/load for cross-checking against external solvers ---


def dump_lp(p: PartitionProblem, fh: TextIO) -> None:
    """CPLEX-LP-format text of the full model (with explicit slack matrices
    S and T), plus machine-readable metadata comments for load_lp."""
    meta = {
        "node_ids": list(p.node_ids),
        "w": p.w.tolist(),
        "k": p.k,
        "max_memb": p.max_memb,
        "max_card": p.max_card,
        "gamma": [p.gamma0, p.gamma1, p.gamma2],
        "tactic_incidence": p.tactic_incidence.tolist(),
        "asset_ids": list(p.asset_ids),
        "asset_incidence": p.asset_incidence.tolist(),
        "tactic_penalty": p.tactic_penalty,
    }
    fh.write("\\ incident partition model\n")
    fh.write("\\ meta: " + json.dumps(meta, separators=(",", ":")) + "\n")
    n, k, big = p.n, p.k, p.c_big

    def terms(pairs):
        out = []
        for coef, name in pairs:
            if coef == 0:
                continue
            sign = "+" if coef >= 0 else "-"
            out.append(f"{sign} {abs(coef):.6g} {name}")
        return " ".join(out) if out else "0"

    obj = [(p.gamma0, f"s_{i}_{kk}") for i in range(n) for kk in range(k)]
    if p.tactic_penalty == "inf":
        obj += [(p.gamma1, f"alpha_{kk}") for kk in range(k)]
    else:
        obj += [(p.gamma1, f"z_{m}_{kk}") for m in range(12) for kk in range(k)]
    obj += [
        (p.gamma2, f"beta_{a}_{kk}")
        for a in range(len(p.asset_ids))
        for kk in range(k)
    ]
    fh.write("Minimize\n obj: " + terms(obj) + "\nSubject To\n")
    for kk in range(k):
        for i in range(n):
            lhs = [(p.laplacian[i, j], f"x_{j}_{kk}") for j in range(n)]
            lhs += [(-1.0, f"t_{i}_{kk}"), (-1.0, f"s_{i}_{kk}")]
            fh.write(f" lap_{i}_{kk}: " + terms(lhs) + f" = {-big:.6g}\n")
            fh.write(
                f" tcap_{i}_{kk}: "
                + terms([(1.0, f"t_{i}_{kk}"), (2 * big, f"x_{i}_{kk}")])
                + f" <= {2 * big:.6g}\n"
            )
    for i in range(n):
        fh.write(
            f" memb_{i}: "
            + terms([(1.0, f"x_{i}_{kk}") for kk in range(k)])
            + f" <= {p.max_memb}\n"
        )
    for kk in range(k):
        fh.write(
            f" card_{kk}: "
            + terms([(1.0, f"x_{i}_{kk}") for i in range(n)])
            + f" <= {p.max_card}\n"
        )
    for kk in range(k):
        for m in range(12):
            carriers = [(1.0, f"x_{int(j)}_{kk}") for j in np.flatnonzero(p.tactic_incidence[:, m])]
            fh.write(
                f" miss_{m}_{kk}: "
                + terms([(1.0, f"z_{m}_{kk}")] + carriers)
                + " >= 1\n"
            )
            if p.tactic_penalty == "inf":
                fh.write(
                    f" alph_{m}_{kk}: "
                    + terms([(1.0, f"alpha_{kk}"), (-1.0, f"z_{m}_{kk}")])
                    + " >= 0\n"
                )
    for kk in range(k):
        for a in range(len(p.asset_ids)):
            for j in np.flatnonzero(p.asset_incidence[:, a]):
                fh.write(
                    f" asset_{a}_{int(j)}_{kk}: "
                    + terms([(1.0, f"beta_{a}_{kk}"), (-1.0, f"x_{int(j)}_{kk}")])
                    + " >= 0\n"
                )
    fh.write("Bounds\n")
    for kk in range(k):
        for i in range(n):
            fh.write(f" 0 <= t_{i}_{kk}\n 0 <= s_{i}_{kk}\n")
        for m in range(12):
            fh.write(f" 0 <= z_{m}_{kk} <= 1\n")
        for a in range(len(p.asset_ids)):
            fh.write(f" 0 <= beta_{a}_{kk}\n")
    fh.write("Binary\n")
    for kk in range(k):
        for i in range(n):
            fh.write(f" x_{i}_{kk}\n")
    fh.write("End\n")


def load_lp(fh: TextIO) -> PartitionProblem:
    """Rebuild a PartitionProblem from a dump_lp file (metadata comments)."""
    for line in fh:
        if line.startswith("\\ meta: "):
            meta = json.loads(line[len("\\ meta: "):])
            w = np.array(meta["w"])
            lap = np.diag(w.sum(axis=1)) - w
            return PartitionProblem(
                node_ids=tuple(meta["node_ids"]),
                w=w,
                laplacian=lap,
                c_big=2.0 * float(w.sum(axis=1).max()) if len(w) else 0.0,
                k=meta["k"],
                max_memb=meta["max_memb"],
                max_card=meta["max_card"],
                gamma0=meta["gamma"][0],
                gamma1=meta["gamma"][1],
                gamma2=meta["gamma"][2],
                tactic_incidence=np.array(meta["tactic_incidence"]),
                asset_ids=tuple(meta["asset_ids"]),
                asset_incidence=np.array(meta["asset_incidence"]).reshape(
                    len(meta["node_ids"]), len(meta["asset_ids"])
                ),
                tactic_penalty=meta["tactic_penalty"],
            )
    raise PartitionError("no metadata comment found in LP file")
