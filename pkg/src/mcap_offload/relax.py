"""MCAP: quadratic reformulation, semidefinite relaxation and randomized rounding.

The offloading problem is written over one vector ``w`` holding the site
indicators, cloud flags, bandwidth and processing shares, auxiliary per-link
delays ``D`` and the round time ``t``.  Lifting ``z = [w; 1]`` to
``Z = z z^T`` and dropping the rank condition gives a doubly nonnegative
program; the last row of its solution is read as marginal offloading
probabilities and sampled ``K`` times.

Every constraint matrix touches only the border row/column of ``Z`` plus a
few small index cliques (one per user's site/cloud block, one per
bandwidth/delay or rate/delay pair, one for ``t``).  Those cliques meet only
in the homogenizing index, so the relaxation is solved on the cliques alone
and completed with ``Z_ab = Z_a,end * Z_b,end`` across cliques, which keeps
the completion positive semidefinite and elementwise nonnegative.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .alloc import DEFAULT_TOL, AllocResult, optimize_allocation
from .model import (
    LOCAL,
    Allocation,
    CostBreakdown,
    Scenario,
    Strategy,
    StrategyProfile,
    validate_profile,
)

log = logging.getLogger(__name__)

DEFAULT_TRIALS = 10
DEFAULT_SDP_TOL = 1e-7

BLOCKS = ("x", "theta", "c_up", "D_up", "c_down", "D_down", "f_cap", "D_cap", "t")


class SdpSolveError(RuntimeError):
    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


# -- variable layout -------------------------------------------------------------

@dataclass(frozen=True)
class Layout:
    """Index map of the stacked variable vector (0-based)."""

    n_users: int
    n_caps: int

    @property
    def dim(self) -> int:
        return 7 * self.n_caps * self.n_users + 2 * self.n_users + 1

    def _base(self, block: str) -> int:
        n, m = self.n_users, self.n_caps
        x_len, th_len, mn = (m + 1) * n, n, m * n
        order = {"x": 0, "theta": x_len}
        off = x_len + th_len
        for name in BLOCKS[2:8]:
            order[name] = off
            off += mn
        order["t"] = off
        return order[block]

    def x(self, i: int, j: int) -> int:
        """Site indicator of user i for site j (0 local, 1..M CAPs)."""
        return self._base("x") + i * (self.n_caps + 1) + j

    def theta(self, i: int) -> int:
        return self._base("theta") + i

    def pair(self, block: str, i: int, j: int) -> int:
        """Per-link variable of user i at CAP j (1-based CAP id)."""
        return self._base(block) + i * self.n_caps + (j - 1)

    @property
    def t(self) -> int:
        return self.dim - 1

    def block_indices(self, block: str) -> np.ndarray:
        start = self._base(block)
        size = {"x": (self.n_caps + 1) * self.n_users, "theta": self.n_users,
                "t": 1}.get(block, self.n_caps * self.n_users)
        return np.arange(start, start + size)

    def decision_count(self) -> int:
        return (self.n_caps + 2) * self.n_users

    def pack(self, profile: StrategyProfile, alloc: Allocation, scenario: Scenario) -> np.ndarray:
        """Stack an integral point: decisions, allocation, exact link delays and round time."""
        w = np.zeros(self.dim)
        delays = []
        for i, (s, task) in enumerate(zip(profile, scenario.tasks)):
            w[self.x(i, s.site)] = 1.0
            w[self.theta(i)] = float(s.cloud)
            total = task.local_time if s.site == LOCAL else 0.0
            if s.site != LOCAL:
                j = s.site
                cu, cd, fa = alloc.c_up[i, j - 1], alloc.c_down[i, j - 1], alloc.f_cap[i, j - 1]
                w[self.pair("c_up", i, j)] = cu
                w[self.pair("c_down", i, j)] = cd
                w[self.pair("f_cap", i, j)] = fa
                du = task.d_in / (task.eta_up[j - 1] * cu) if task.d_in else 0.0
                dd = task.d_out / (task.eta_down[j - 1] * cd) if task.d_out else 0.0
                da = 0.0 if s.cloud else task.cycles / fa
                w[self.pair("D_up", i, j)] = du
                w[self.pair("D_down", i, j)] = dd
                w[self.pair("D_cap", i, j)] = da
                total = du + dd + da
                if s.cloud:
                    total += (task.d_in + task.d_out) / scenario.cloud.r_ac + task.cycles / scenario.cloud.f_c
            delays.append(total)
        w[self.t] = max(delays)
        return w

    def describe(self, p: int) -> str:
        m = self.n_caps
        if p == self.t:
            return "t"
        for block in BLOCKS[:-1]:
            idx = self.block_indices(block)
            if idx[0] <= p <= idx[-1]:
                off = p - idx[0]
                if block == "x":
                    return f"x[{off // (m + 1)},{off % (m + 1)}]"
                if block == "theta":
                    return f"theta[{off}]"
                return f"{block}[{off // m},{off % m + 1}]"
        raise IndexError(p)


# -- QCQP ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadConstraint:
    group: str             # binary, delay, link_up, link_down, link_cap, one_site, cloud_via_cap, ...
    index: tuple
    quad: sp.csr_matrix    # symmetric
    lin: np.ndarray
    sense: str             # "<=" or "=="
    rhs: float

    def value(self, w: np.ndarray) -> float:
        """Left-hand side minus right-hand side at w."""
        return float(w @ (self.quad @ w) + self.lin @ w - self.rhs)


@dataclass(frozen=True)
class QcqpForm:
    layout: Layout
    objective: np.ndarray
    constraints: tuple[QuadConstraint, ...]

    @property
    def dim(self) -> int:
        return self.layout.dim

    def by_group(self, group: str) -> list[QuadConstraint]:
        return [c for c in self.constraints if c.group == group]

    def residuals(self, w: np.ndarray) -> np.ndarray:
        return np.array([c.value(w) for c in self.constraints])


def _sym(n, entries):
    """Symmetric sparse matrix from {(a, b): v}; off-diagonal v is split across both halves."""
    rows, cols, vals = [], [], []
    for (a, b), v in entries.items():
        if a == b:
            rows.append(a); cols.append(a); vals.append(v)
        else:
            rows += [a, b]; cols += [b, a]; vals += [v / 2, v / 2]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def assemble_qcqp(scenario: Scenario) -> QcqpForm:
    """Build the exact quadratic reformulation of the offloading problem.

    Constraints are generated from their algebraic meaning; bilinear terms
    ``c * D`` are stored with the coefficient split symmetrically.
    """
    n, m = scenario.n_users, scenario.n_caps
    lay = Layout(n, m)
    dim = lay.dim
    zero = sp.csr_matrix((dim, dim))
    cons: list[QuadConstraint] = []

    def lin(entries):
        v = np.zeros(dim)
        for p, c in entries:
            v[p] += c
        return v

    obj = np.zeros(dim)
    for i, task in enumerate(scenario.tasks):
        obj[lay.x(i, 0)] = task.alpha * task.local_energy
        for j in range(1, m + 1):
            obj[lay.x(i, j)] = task.alpha * (task.tx_energy + task.rx_energy)
        obj[lay.theta(i)] = task.alpha * task.cloud_energy
    obj[lay.t] = 1.0

    # delay epigraph
    for i, task in enumerate(scenario.tasks):
        cloud_time = (task.d_in + task.d_out) / scenario.cloud.r_ac + task.cycles / scenario.cloud.f_c
        terms = [(lay.x(i, 0), task.local_time), (lay.theta(i), cloud_time), (lay.t, -1.0)]
        for j in range(1, m + 1):
            terms += [(lay.pair(b, i, j), 1.0) for b in ("D_up", "D_down", "D_cap")]
        cons.append(QuadConstraint("delay", (i,), zero, lin(terms), "<=", 0.0))

    # bilinear link delays:  work * x - rate * D <= 0
    for i, task in enumerate(scenario.tasks):
        for j in range(1, m + 1):
            xij = lay.x(i, j)
            cons.append(QuadConstraint(
                "link_up", (i, j),
                _sym(dim, {(lay.pair("c_up", i, j), lay.pair("D_up", i, j)): -task.eta_up[j - 1]}),
                lin([(xij, task.d_in)]), "<=", 0.0))
            cons.append(QuadConstraint(
                "link_down", (i, j),
                _sym(dim, {(lay.pair("c_down", i, j), lay.pair("D_down", i, j)): -task.eta_down[j - 1]}),
                lin([(xij, task.d_out)]), "<=", 0.0))
            cons.append(QuadConstraint(
                "link_cap", (i, j),
                _sym(dim, {(xij, lay.theta(i)): -task.cycles,
                           (lay.pair("f_cap", i, j), lay.pair("D_cap", i, j)): -1.0}),
                lin([(xij, task.cycles)]), "<=", 0.0))

    for i in range(n):
        cons.append(QuadConstraint("one_site", (i,), zero,
                                   lin([(lay.x(i, j), 1.0) for j in range(m + 1)]), "==", 1.0))
    for i in range(n):
        cons.append(QuadConstraint("cloud_via_cap", (i,), zero,
                                   lin([(lay.theta(i), 1.0)] + [(lay.x(i, j), -1.0) for j in range(1, m + 1)]),
                                   "<=", 0.0))

    for j, cap in enumerate(scenario.caps, start=1):
        up = [(lay.pair("c_up", i, j), 1.0) for i in range(n)]
        down = [(lay.pair("c_down", i, j), 1.0) for i in range(n)]
        cons.append(QuadConstraint("cap_up", (j,), zero, lin(up), "<=", cap.c_ul))
        cons.append(QuadConstraint("cap_down", (j,), zero, lin(down), "<=", cap.c_dl))
        cons.append(QuadConstraint("cap_total", (j,), zero, lin(up + down), "<=", cap.c_total))
        cons.append(QuadConstraint("cap_rate", (j,), zero,
                                   lin([(lay.pair("f_cap", i, j), 1.0) for i in range(n)]), "<=", cap.f_a))

    for p in range(lay.decision_count()):
        cons.append(QuadConstraint("binary", (p,), _sym(dim, {(p, p): 1.0}), lin([(p, -1.0)]), "==", 0.0))

    for i, task in enumerate(scenario.tasks):
        cons.append(QuadConstraint("placement", (i,), zero,
                                   lin([(lay.x(i, k), 1.0) for k in sorted(task.forbidden)]), "==", 0.0))

    return QcqpForm(lay, obj, tuple(cons))


# -- SDP lifting ---------------------------------------------------------------------

@dataclass(frozen=True)
class LiftedConstraint:
    group: str
    index: tuple
    matrix: sp.csr_matrix   # (dim+1) x (dim+1), symmetric
    sense: str
    rhs: float

    def value(self, Z: np.ndarray) -> float:
        g = self.matrix.tocoo()
        return float(np.sum(g.data * Z[g.row, g.col]) - self.rhs)


@dataclass(frozen=True)
class SdpForm:
    layout: Layout
    objective: sp.csr_matrix
    constraints: tuple[LiftedConstraint, ...]
    nonnegative: bool = True
    psd: bool = True
    homogenize: bool = True    # adds Z[end, end] == 1 when solving

    @property
    def dim(self) -> int:
        return self.layout.dim + 1

    def residuals(self, Z: np.ndarray) -> np.ndarray:
        return np.array([c.value(Z) for c in self.constraints])

    def objective_value(self, Z: np.ndarray) -> float:
        g = self.objective.tocoo()
        return float(np.sum(g.data * Z[g.row, g.col]))


def _border(quad: sp.csr_matrix, lin: np.ndarray) -> sp.csr_matrix:
    b = sp.csr_matrix(lin.reshape(-1, 1) / 2)
    return sp.bmat([[quad, b], [b.T, sp.csr_matrix((1, 1))]], format="csr")


def lift_to_sdp(q: QcqpForm) -> SdpForm:
    """Rewrite every QCQP constraint as a trace constraint on ``Z = [w;1][w;1]^T``."""
    zero = sp.csr_matrix((q.dim, q.dim))
    lifted = tuple(LiftedConstraint(c.group, c.index, _border(c.quad, c.lin), c.sense, c.rhs)
                   for c in q.constraints)
    return SdpForm(q.layout, _border(zero, q.objective), lifted)


# -- SDP solve -----------------------------------------------------------------------

@dataclass(frozen=True)
class SdpSolution:
    """Relaxation optimum in original units.

    ``max_violation``, ``min_eigenvalue`` and ``min_entry`` describe the
    scaled, row-normalised problem the solver works on; in original units
    entries such as bandwidth products are of order 1e14 and absolute
    residuals are not meaningful.
    """

    Z: np.ndarray
    objective: float
    status: str
    ok: bool
    iterations: int
    max_violation: float
    min_eigenvalue: float
    min_entry: float
    solve_time: float


def _cliques(lay: Layout) -> list[list[int]]:
    end = lay.dim
    out = []
    for i in range(lay.n_users):
        out.append([lay.x(i, j) for j in range(lay.n_caps + 1)] + [lay.theta(i), end])
    for i in range(lay.n_users):
        for j in range(1, lay.n_caps + 1):
            for rate, delay in (("c_up", "D_up"), ("c_down", "D_down"), ("f_cap", "D_cap")):
                out.append([lay.pair(rate, i, j), lay.pair(delay, i, j), end])
    out.append([lay.t, end])
    return out


def _scales(scenario: Scenario, lay: Layout) -> np.ndarray:
    """Diagonal variable scaling that brings every block to order one."""
    s = np.ones(lay.dim + 1)
    tau = float(np.mean([t.local_time for t in scenario.tasks]))
    for j, cap in enumerate(scenario.caps, start=1):
        for i in range(lay.n_users):
            s[lay.pair("c_up", i, j)] = cap.c_ul
            s[lay.pair("c_down", i, j)] = cap.c_dl
            s[lay.pair("f_cap", i, j)] = cap.f_a
            for b in ("D_up", "D_down", "D_cap"):
                s[lay.pair(b, i, j)] = tau
    s[lay.t] = tau
    return s


def solve_sdp(form: SdpForm, scenario: Scenario, tol: float = DEFAULT_SDP_TOL,
              max_iter: int = 200) -> SdpSolution:
    """Solve the doubly nonnegative relaxation with Clarabel.

    ``scenario`` only supplies the variable scaling; the problem data come
    from ``form``.
    """
    import time

    import clarabel

    lay = form.layout
    n = form.dim
    end = n - 1
    cliques = _cliques(lay)
    scale = _scales(scenario, lay)

    var = {}
    for cl in cliques:
        for a_pos, a in enumerate(cl):
            for b in cl[a_pos:]:
                key = (min(a, b), max(a, b))
                if key not in var:
                    var[key] = len(var)
    nv = len(var)

    def row_of(g: sp.csr_matrix) -> dict[int, float]:
        coo = g.tocoo()
        out: dict[int, float] = {}
        for a, b, v in zip(coo.row, coo.col, coo.data):
            if v == 0:
                continue
            key = (min(a, b), max(a, b))
            if key not in var:
                raise ValueError(f"constraint touches Z{key}, outside the clique pattern")
            # Tr(G Z) visits each off-diagonal twice, once per triangle
            out[var[key]] = out.get(var[key], 0.0) + v * scale[a] * scale[b]
        return out

    q_obj = np.zeros(nv)
    for k, v in row_of(form.objective).items():
        q_obj[k] = v

    eq_rows, eq_rhs, ineq_rows, ineq_rhs = [], [], [], []
    for c in form.constraints:
        row = row_of(c.matrix)
        if not row:
            if (c.sense == "==" and c.rhs != 0) or (c.sense == "<=" and c.rhs < 0):
                raise ValueError(f"constraint {c.group}{c.index} is infeasible")
            continue
        norm = max(abs(v) for v in row.values())
        row = {k: v / norm for k, v in row.items()}
        if c.sense == "==":
            eq_rows.append(row); eq_rhs.append(c.rhs / norm)
        else:
            ineq_rows.append(row); ineq_rhs.append(c.rhs / norm)
    if form.homogenize:
        eq_rows.append({var[(end, end)]: 1.0}); eq_rhs.append(1.0)

    rows, cols, vals, rhs = [], [], [], []
    r = 0
    for block_rows, block_rhs in ((eq_rows, eq_rhs), (ineq_rows, ineq_rhs)):
        for row, b in zip(block_rows, block_rhs):
            for k, v in row.items():
                rows.append(r); cols.append(k); vals.append(v)
            rhs.append(b)
            r += 1
    cones = [clarabel.ZeroConeT(len(eq_rows))]
    n_nonneg = len(ineq_rows)
    if form.nonnegative:
        for k in range(nv):
            rows.append(r); cols.append(k); vals.append(-1.0); rhs.append(0.0)
            r += 1
        n_nonneg += nv
    cones.append(clarabel.NonnegativeConeT(n_nonneg))
    if form.psd:
        root2 = np.sqrt(2.0)
        for cl in cliques:
            order = sorted(cl)
            for cpos, cidx in enumerate(order):
                for ridx in order[: cpos + 1]:
                    rows.append(r); cols.append(var[(ridx, cidx)])
                    vals.append(-1.0 if ridx == cidx else -root2)
                    rhs.append(0.0)
                    r += 1
            cones.append(clarabel.PSDTriangleConeT(len(order)))

    A = sp.csc_matrix((vals, (rows, cols)), shape=(r, nv))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.max_iter = max_iter
    t0 = time.perf_counter()
    res = clarabel.DefaultSolver(sp.csc_matrix((nv, nv)), q_obj, A, np.array(rhs), cones, settings).solve()
    elapsed = time.perf_counter() - t0
    status = str(res.status)
    x = np.asarray(res.x)
    if form.nonnegative:
        # interior-point iterates sit a hair outside the cone boundary
        x = np.maximum(x, 0.0)

    Zs = np.zeros((n, n))
    for (a, b), k in var.items():
        Zs[a, b] = Zs[b, a] = x[k]
    border = Zs[end].copy()
    Zt = np.outer(border, border) / Zs[end, end] if Zs[end, end] > 0 else np.zeros((n, n))
    for (a, b), k in var.items():
        Zt[a, b] = Zt[b, a] = x[k]
    Z = Zt * np.outer(scale, scale)

    # feasibility is measured in the equilibrated system the solver sees
    n_eq = len(eq_rows)
    n_lin = n_eq + len(ineq_rows)
    resid = A.tocsr()[:n_lin] @ x - np.array(rhs[:n_lin])
    max_violation = float(max(np.abs(resid[:n_eq]).max(initial=0.0),
                              np.maximum(resid[n_eq:], 0.0).max(initial=0.0)))
    min_eig = float(np.linalg.eigvalsh(Zt).min())
    ok = status in ("Solved", "AlmostSolved") and np.isfinite(x).all()
    return SdpSolution(Z=Z, objective=form.objective_value(Z), status=status, ok=bool(ok),
                       iterations=int(res.iterations), max_violation=max_violation,
                       min_eigenvalue=min_eig, min_entry=float(Zt.min()), solve_time=elapsed)


# -- marginals and rounding ---------------------------------------------------------

@dataclass(frozen=True)
class Marginals:
    site: np.ndarray    # (N, M+1), rows sum to one
    cloud: np.ndarray   # (N,), conditional on offloading

    def __post_init__(self):
        if (self.site < 0).any() or (self.cloud < 0).any() or (self.cloud > 1).any():
            raise ValueError("marginals must be probabilities")
        if not np.allclose(self.site.sum(1), 1.0, atol=1e-9):
            raise ValueError("site marginals must sum to one per user")


def _permitted(scenario: Scenario, i: int) -> np.ndarray:
    mask = np.ones(scenario.n_caps + 1, dtype=bool)
    for k in scenario.tasks[i].forbidden:
        mask[k] = False
    return mask


def extract_marginals(Z: np.ndarray, scenario: Scenario) -> Marginals:
    lay = Layout(scenario.n_users, scenario.n_caps)
    last = Z[-1]
    n, m = scenario.n_users, scenario.n_caps
    site = np.empty((n, m + 1))
    cloud = np.zeros(n)
    for i in range(n):
        row = np.clip([last[lay.x(i, j)] for j in range(m + 1)], 0.0, 1.0)
        mask = _permitted(scenario, i)
        row[~mask] = 0.0
        total = row.sum()
        site[i] = row / total if total > 0 else mask / mask.sum()
        if site[i, 0] < 1.0 - 1e-9:
            cloud[i] = min(1.0, max(0.0, last[lay.theta(i)] / (1.0 - site[i, 0])))
    return Marginals(site, cloud)


def uniform_marginals(scenario: Scenario) -> Marginals:
    """Marginals of the uniform distribution over every user's strategy set."""
    n, m = scenario.n_users, scenario.n_caps
    site = np.zeros((n, m + 1))
    cloud = np.zeros(n)
    for i in range(n):
        mask = _permitted(scenario, i)
        caps = mask[1:].sum()
        size = 1 + 2 * caps
        site[i, 0] = 1.0 / size
        site[i, 1:] = np.where(mask[1:], 2.0 / size, 0.0)
        cloud[i] = 0.5 if caps else 0.0
    return Marginals(site, cloud)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(trial)])


def _draw(marg: Marginals, rng: np.random.Generator) -> StrategyProfile:
    strategies = []
    for p, pc in zip(marg.site, marg.cloud):
        u_site, u_cloud = rng.random(2)
        cdf = np.cumsum(p)
        j = int(np.searchsorted(cdf, u_site, side="right"))
        last = int(np.flatnonzero(p > 0)[-1])
        j = min(j, last)
        strategies.append(Strategy(j, bool(j != LOCAL and u_cloud < pc)))
    return StrategyProfile(tuple(strategies))


def round_trials(marg: Marginals, k: int, seed: int) -> list[StrategyProfile]:
    """Draw ``k`` independent profiles; trial ``m`` uses its own stream (seed, m)."""
    if k < 1:
        raise ValueError("need at least one trial")
    return [_draw(marg, trial_rng(seed, m)) for m in range(k)]


# -- MCAP ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Solution:
    profile: StrategyProfile
    allocation: Allocation
    costs: CostBreakdown
    meta: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return self.costs.objective

    @classmethod
    def from_alloc(cls, profile: StrategyProfile, res: AllocResult, **meta) -> "Solution":
        return cls(profile, res.allocation, res.costs, dict(meta))


def best_of(profiles: Sequence[StrategyProfile], scenario: Scenario,
            alloc_tol: float = DEFAULT_TOL) -> tuple[int, AllocResult]:
    """Index and allocation of the lowest-objective profile (first wins ties)."""
    cache: dict[StrategyProfile, AllocResult] = {}
    best_idx, best = -1, None
    for idx, prof in enumerate(profiles):
        if prof not in cache:
            cache[prof] = optimize_allocation(prof, scenario, alloc_tol)
        res = cache[prof]
        if best is None or res.objective < best.objective:
            best_idx, best = idx, res
    return best_idx, best


def mcap(scenario: Scenario, trials: int = DEFAULT_TRIALS, seed: int = 0,
         sdp_tol: float = DEFAULT_SDP_TOL, alloc_tol: float = DEFAULT_TOL,
         fallback: bool = True) -> Solution:
    """Relax, solve, sample ``trials`` profiles and keep the cheapest."""
    form = lift_to_sdp(assemble_qcqp(scenario))
    sol = solve_sdp(form, scenario, sdp_tol)
    meta = {"method": "mcap", "trials": trials, "seed": seed, "sdp_status": sol.status,
            "sdp_objective": sol.objective if sol.ok else float("nan"),
            "sdp_time": sol.solve_time}
    if sol.ok:
        marg = extract_marginals(sol.Z, scenario)
    elif fallback:
        log.warning("SDP solve failed (%s); sampling the random mapping instead", sol.status)
        marg = uniform_marginals(scenario)
        meta["method"] = "mcap-fallback"
    else:
        raise SdpSolveError(f"SDP solver returned {sol.status}", sol)
    profiles = round_trials(marg, trials, seed)
    for prof in profiles:
        # hard guarantee, not a statistical one
        assert validate_profile(prof, scenario).ok, prof
    idx, res = best_of(profiles, scenario, alloc_tol)
    meta["best_trial"] = idx
    return Solution.from_alloc(profiles[idx], res, **meta)


# -- debugging dumps -----------------------------------------------------------------

def _triplets(mat: sp.spmatrix, tag: str) -> list[str]:
    coo = sp.triu(mat).tocoo()
    return [f"{tag} {r} {c} {float(v)!r}" for r, c, v in sorted(zip(coo.row, coo.col, coo.data))]


def dump_qcqp(q: QcqpForm, path: str | Path) -> None:
    """Write the QCQP as sparse triplets.

    Layout: a header line, the objective as ``b idx value`` lines, then per
    constraint a ``constraint group index sense rhs`` line followed by its
    upper-triangle ``A row col value`` and ``b idx value`` lines.  Indices
    are 0-based; ``A`` off-diagonals hold half the bilinear coefficient.
    """
    lines = [f"# qcqp dim={q.dim} constraints={len(q.constraints)}", "objective"]
    lines += [f"b {p} {float(v)!r}" for p, v in enumerate(q.objective) if v]
    for c in q.constraints:
        lines.append(f"constraint {c.group} {','.join(map(str, c.index))} {c.sense} {float(c.rhs)!r}")
        lines += _triplets(c.quad, "A")
        lines += [f"b {p} {float(v)!r}" for p, v in enumerate(c.lin) if v]
    Path(path).write_text("\n".join(lines) + "\n")


def dump_sdp(s: SdpForm, path: str | Path) -> None:
    """Write the lifted program: ``G row col value`` triplets per constraint (upper triangle)."""
    lines = [f"# sdp dim={s.dim} constraints={len(s.constraints)} "
             f"nonnegative={int(s.nonnegative)} psd={int(s.psd)} homogenize={int(s.homogenize)}",
             "objective"]
    lines += _triplets(s.objective, "G")
    for c in s.constraints:
        lines.append(f"constraint {c.group} {','.join(map(str, c.index))} {c.sense} {float(c.rhs)!r}")
        lines += _triplets(c.matrix, "G")
    Path(path).write_text("\n".join(lines) + "\n")
