"""Scenario approximation: sample sizes, draws, reduction, dispatch LP.

A scenario set turns the chance constraint into finitely many shifted
copies of the polytope rows, which collapse to one offset per row
(reduce_scenarios). The dispatch LP optimises generator outputs against
those offsets, optionally intersected with the margin-tightened offsets,
with the generator at the slack bus absorbing the power balance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .grid import FeasibilityPolytope, GridCase, GridMatrices, build_matrices, build_polytope
from .margins import GaussianSpec, compute_margins, tightened_polytope
from .sampler import MixtureSampler, build_mixture, sample_mixture_batch

# Constraint rows with at most this much slack at the optimum are
# reported as active.
ACTIVE_TOL = 1e-7


class SolverError(RuntimeError):
    """LP solver failed for reasons other than infeasible/unbounded."""


# ---------------------------------------------------------------------------
# sample size bounds

def _size(epsilon: float, delta: float, d: int, scale: float) -> int:
    raw = (
        2.0 * scale * math.log(1.0 / delta) / epsilon
        + 2.0 * d
        + 2.0 * d * scale * math.log(2.0 * scale / epsilon) / epsilon
    )
    return max(0, math.ceil(raw))

def _check_size_args(epsilon: float, delta: float, d: int):
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"violation level must lie in (0, 1), got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"confidence delta must lie in (0, 1), got {delta}")
    if d < 1:
        raise ValueError(f"decision dimension must be at least 1, got {d}")


def sample_size_cc(epsilon: float, delta: float, d: int) -> int:
    """Scenario count guaranteeing the chance constraint classically.

    Smallest N with (2/eps) ln(1/delta) + 2d + (2d/eps) ln(2/eps) <= N,
    for violation level eps, confidence 1 - delta, and d decision
    variables.
    """
    _check_size_args(epsilon, delta, d)
    return _size(epsilon, delta, d, 1.0)


def sample_size_filtered(eta: float, delta: float, d: int, pi: float) -> int:
    """Scenario count when a mass-pi inner set is already covered.

    The classical bound at level eta shrinks by 1 - pi on its
    eta-dependent terms; pi = 0 recovers sample_size_cc exactly.
    """
    _check_size_args(eta, delta, d)
    if not 0.0 <= pi < 1.0:
        raise ValueError(f"covered mass pi must lie in [0, 1), got {pi}")
    return _size(eta, delta, d, 1.0 - pi)


def sample_size_is(eta: float, delta: float, d: int, pi: float, M: float) -> int:
    """Scenario count under importance sampling with ratio bound M.

    The filtered bound picks up the likelihood-ratio factor M; M = 1
    recovers sample_size_filtered exactly.
    """
    _check_size_args(eta, delta, d)
    if not 0.0 <= pi < 1.0:
        raise ValueError(f"covered mass pi must lie in [0, 1), got {pi}")
    if M < 1.0:
        raise ValueError(f"likelihood ratio bound must be at least 1, got {M}")
    return _size(eta, delta, d, M * (1.0 - pi))


# ---------------------------------------------------------------------------
# scenario sets

@dataclass(frozen=True)
class ScenarioSet:
    """Batch of injection deviations (p.u.), at least one row.

    origin records how the rows were produced: 'gaussian' for plain
    draws, 'mixture' for importance-sampled draws (components then holds
    the mixture component per row), 'nominal' for the single zero
    deviation standing in for an empty set.
    """

    scenarios: np.ndarray
    origin: str
    seed: int | None
    components: np.ndarray | None = None

    def __post_init__(self):
        if self.scenarios.ndim != 2 or self.scenarios.shape[0] < 1:
            raise ValueError(
                f"scenarios must be a non-empty 2-D array, got shape "
                f"{self.scenarios.shape}"
            )
        if self.origin not in ("gaussian", "mixture", "nominal"):
            raise ValueError(f"unknown origin {self.origin!r}")
        if self.components is not None and self.components.shape[0] != self.scenarios.shape[0]:
            raise ValueError("one component per scenario required")
        self.scenarios.setflags(write=False)
        if self.components is not None:
            self.components.setflags(write=False)

    @property
    def n(self) -> int:
        return self.scenarios.shape[0]


def nominal_scenario_set(n_buses: int, seed: int | None = None) -> ScenarioSet:
    """The single zero deviation; reduces every row offset to itself."""
    return ScenarioSet(scenarios=np.zeros((1, n_buses)), origin="nominal", seed=seed)


def draw_gaussian_scenarios(g: GaussianSpec, n: int, seed: int | None) -> ScenarioSet:
    """n deviations straight from the uncertainty model."""
    if n < 1:
        raise ValueError(f"need at least one scenario, got {n}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, g.cov_half.shape[1]))
    return ScenarioSet(scenarios=z @ g.cov_half.T, origin="gaussian", seed=seed)


def draw_mixture_scenarios(ms: MixtureSampler, n: int, seed: int | None) -> ScenarioSet:
    """n deviations from the tail mixture, components recorded."""
    if n < 1:
        raise ValueError(f"need at least one scenario, got {n}")
    rng = np.random.default_rng(seed)
    xi, comps = sample_mixture_batch(ms, n, rng)
    return ScenarioSet(scenarios=xi, origin="mixture", seed=seed, components=comps)


def reduce_scenarios(poly: FeasibilityPolytope, scen: ScenarioSet) -> np.ndarray:
    """Collapse scenario constraints to one offset per row.

    Row i of W(x + xi_t) <= b for all t is equivalent to
    w_i' x <= b_i - max_t w_i' xi_t; the returned vector holds those
    right-hand sides.
    """
    if scen.scenarios.shape[1] != poly.n_buses:
        raise ValueError(
            f"scenarios over {scen.scenarios.shape[1]} buses, polytope over "
            f"{poly.n_buses}"
        )
    worst = np.max(scen.scenarios @ poly.normals.T, axis=0)
    return poly.offsets - worst


# ---------------------------------------------------------------------------
# dispatch LP

@dataclass(frozen=True)
class LinearProgram:
    """Dispatch LP over non-residual generator outputs (p.u.).

    One generator at the slack bus is the residual: its output follows
    from power balance and never appears as a decision. cost is in $/h
    per p.u. with cost_offset restoring the residual generator's bill.
    injection_map and injection_fixed give bus injections as an affine
    function of the decisions. labels annotates constraint rows.
    """

    cost: np.ndarray
    cost_offset: float
    a_ub: np.ndarray
    b_ub: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    labels: tuple[tuple[str, int], ...]
    injection_map: np.ndarray
    injection_fixed: np.ndarray
    base_mva: float
    decision_gens: tuple[int, ...]
    residual_gen: int
    residual_at_zero: float
    n_gens: int

    def __post_init__(self):
        d = self.cost.shape[0]
        if self.a_ub.shape != (self.b_ub.shape[0], d):
            raise ValueError("constraint matrix shape mismatch")
        if self.lower.shape != (d,) or self.upper.shape != (d,):
            raise ValueError("bounds must match the decision count")
        if len(self.labels) != self.b_ub.shape[0]:
            raise ValueError("one label per constraint row required")
        for arr in (self.cost, self.a_ub, self.b_ub, self.lower, self.upper,
                    self.injection_map, self.injection_fixed):
            arr.setflags(write=False)


@dataclass(frozen=True)
class DispatchSolution:
    """Solved dispatch: outputs in MW, objective in $/h.

    x_g lists every generator in case order, the residual included.
    status is 'optimal', 'infeasible' or 'unbounded'; non-optimal
    solutions carry nan objective and no dispatch. active_rows indexes
    LP rows with slack at most ACTIVE_TOL.
    """

    x_g: np.ndarray | None
    objective: float
    status: str
    active_rows: tuple[int, ...]
    injection_pu: np.ndarray | None = None

    def __post_init__(self):
        if self.x_g is not None:
            self.x_g.setflags(write=False)
        if self.injection_pu is not None:
            self.injection_pu.setflags(write=False)


def _dispatch_structure(case: GridCase):
    """Decision layout: every generator but the slack-bus residual."""
    slack_bus = case.buses[case.slack_index].id
    slack_gens = [j for j, gen in enumerate(case.generators) if gen.bus == slack_bus]
    if not slack_gens:
        raise ValueError(
            f"slack bus {slack_bus} carries no generator; dispatch cannot "
            "balance the system"
        )
    residual = slack_gens[0]
    decisions = tuple(j for j in range(len(case.generators)) if j != residual)
    return slack_bus, residual, decisions


def assemble(
    case: GridCase,
    mat: GridMatrices,
    poly: FeasibilityPolytope,
    scen: ScenarioSet,
    pm: FeasibilityPolytope | None = None,
) -> LinearProgram:
    """Build the dispatch LP for a scenario set and optional margins.

    Row offsets are the scenario-reduced ones, intersected elementwise
    with the margin-tightened polytope pm when given (same normals, so
    the intersection is a minimum of offsets). Generator boxes apply to
    the nominal dispatch and enter as decision bounds; bus-level limits
    under deviations are already polytope rows.
    """
    if pm is not None and pm.n_rows != poly.n_rows:
        raise ValueError("tightened polytope must match the original row for row")
    slack_bus, residual, decisions = _dispatch_structure(case)
    index = case.index
    base = case.base_mva
    n, d = case.n, len(decisions)

    total_load_mw = sum(bus.load_mw for bus in case.buses)
    residual_at_zero = total_load_mw / base

    inj_map = np.zeros((n, d))
    slack_row = case.slack_index
    for col, j in enumerate(decisions):
        gen = case.generators[j]
        inj_map[index[gen.bus], col] += 1.0
        inj_map[slack_row, col] -= 1.0  # residual backs off one for one
    inj_fixed = np.array([-bus.load_mw / base for bus in case.buses])
    inj_fixed[slack_row] += residual_at_zero

    res_cost = case.generators[residual].cost
    cost = np.array([(case.generators[j].cost - res_cost) * base for j in decisions])
    offset = res_cost * total_load_mw

    lower = np.array([case.generators[j].p_min_mw / base for j in decisions])
    upper = np.array([case.generators[j].p_max_mw / base for j in decisions])

    offsets = reduce_scenarios(poly, scen)
    if pm is not None:
        offsets = np.minimum(offsets, pm.offsets)

    a_ub = poly.normals @ inj_map
    b_ub = offsets - poly.normals @ inj_fixed
    labels = list(poly.labels)

    slack_bus_gens = [j for j, gen in enumerate(case.generators) if gen.bus == slack_bus]
    if len(slack_bus_gens) > 1:
        # residual output rz - sum(d) must respect its own box; with a
        # single slack generator the bus injection rows already do this
        res_gen = case.generators[residual]
        ones = np.ones((1, d))
        a_ub = np.vstack([a_ub, -ones, ones])
        b_ub = np.concatenate(
            [
                b_ub,
                [res_gen.p_max_mw / base - residual_at_zero],
                [residual_at_zero - res_gen.p_min_mw / base],
            ]
        )
        labels += [("residual-upper", slack_bus), ("residual-lower", slack_bus)]

    return LinearProgram(
        cost=cost,
        cost_offset=offset,
        a_ub=a_ub,
        b_ub=b_ub,
        lower=lower,
        upper=upper,
        labels=tuple(labels),
        injection_map=inj_map,
        injection_fixed=inj_fixed,
        base_mva=base,
        decision_gens=decisions,
        residual_gen=residual,
        residual_at_zero=residual_at_zero,
        n_gens=len(case.generators),
    )


def solve(lp: LinearProgram) -> DispatchSolution:
    """Minimise dispatch cost subject to the assembled constraints.

    Returns a DispatchSolution with status 'optimal', 'infeasible' or
    'unbounded'. Solver breakdowns (iteration or time limits, numerical
    failure) raise SolverError instead of masquerading as infeasibility.
    """
    d = lp.cost.shape[0]
    if d == 0:
        # nothing to decide: the residual covers the load; feasibility is
        # a direct check of the constant rows
        feasible = bool(np.all(lp.b_ub >= -ACTIVE_TOL))
        if not feasible:
            return DispatchSolution(
                x_g=None, objective=math.nan, status="infeasible", active_rows=()
            )
        return _package_solution(lp, np.zeros(0))

    res = linprog(
        c=lp.cost,
        A_ub=lp.a_ub,
        b_ub=lp.b_ub,
        bounds=list(zip(lp.lower, lp.upper)),
        method="highs",
    )
    if res.status == 0:
        return _package_solution(lp, np.asarray(res.x))
    if res.status == 2:
        return DispatchSolution(
            x_g=None, objective=math.nan, status="infeasible", active_rows=()
        )
    if res.status == 3:
        return DispatchSolution(
            x_g=None, objective=math.nan, status="unbounded", active_rows=()
        )
    raise SolverError(f"LP solver failed (status {res.status}): {res.message}")


def _package_solution(lp: LinearProgram, decisions: np.ndarray) -> DispatchSolution:
    x_g = np.empty(lp.n_gens)
    for col, j in enumerate(lp.decision_gens):
        x_g[j] = decisions[col] * lp.base_mva
    residual_pu = lp.residual_at_zero - float(np.sum(decisions))
    x_g[lp.residual_gen] = residual_pu * lp.base_mva

    objective = float(lp.cost @ decisions) + lp.cost_offset
    injections = lp.injection_map @ decisions + lp.injection_fixed
    slack = lp.b_ub - lp.a_ub @ decisions if decisions.size else lp.b_ub
    active = tuple(int(i) for i in np.nonzero(slack <= ACTIVE_TOL)[0])
    return DispatchSolution(
        x_g=x_g,
        objective=objective,
        status="optimal",
        active_rows=active,
        injection_pu=injections,
    )


# ---------------------------------------------------------------------------
# end-to-end runs

def run_sa(
    case: GridCase,
    g: GaussianSpec,
    eta: float,
    n_scenarios: int,
    seed: int | None,
) -> DispatchSolution:
    """Plain scenario approximation: Gaussian draws, no margins.

    eta is validated for interface symmetry with run_sa_is but does not
    change the optimisation; it drives the scenario count bound when one
    is requested upstream. n_scenarios = 0 solves the nominal problem
    via the single zero deviation.
    """
    if not 0.0 < eta <= 0.5:
        raise ValueError(f"eta must lie in (0, 0.5], got {eta}")
    if n_scenarios < 0:
        raise ValueError(f"scenario count must be non-negative, got {n_scenarios}")
    mat = build_matrices(case)
    poly = build_polytope(case, mat)
    if n_scenarios == 0:
        scen = nominal_scenario_set(case.n, seed)
    else:
        scen = draw_gaussian_scenarios(g, n_scenarios, seed)
    return solve(assemble(case, mat, poly, scen, pm=None))


def run_sa_is(
    case: GridCase,
    g: GaussianSpec,
    eta: float,
    n_scenarios: int,
    seed: int | None,
) -> DispatchSolution:
    """Margin-tightened scenario approximation with tail sampling.

    Hard rows come from the margin-tightened polytope; scenarios come
    from the tail mixture and reduce against the original rows, the
    final offsets being the elementwise minimum. With no stochastic rows
    (degenerate uncertainty) or n_scenarios = 0 the scenario part
    collapses to the zero deviation.
    """
    if n_scenarios < 0:
        raise ValueError(f"scenario count must be non-negative, got {n_scenarios}")
    mat = build_matrices(case)
    poly = build_polytope(case, mat)
    m = compute_margins(poly, g, eta)
    pm = tightened_polytope(poly, m)
    if n_scenarios == 0 or not bool(np.any(m.stochastic)):
        scen = nominal_scenario_set(case.n, seed)
    else:
        ms = build_mixture(poly, m, g)
        scen = draw_mixture_scenarios(ms, n_scenarios, seed)
    return solve(assemble(case, mat, poly, scen, pm=pm))
