"""Independent numerical oracles and lemma checkers.

Everything here validates the closed-form policy by a second route:

* a convex-optimization oracle (exponentiated-gradient over the leaf
  simplex) recomputes the entropy minimizer without the weight recursion;
* deactivation and growth trajectories realize the two analysis phases in
  closed form, and central finite differences validate their dynamics, the
  movement-cost bound, the growth-rate bound, and the leaf-decay rate;
* a linear-programming transport solver cross-checks couplings;
* the potential inequality is monitored over full policy runs.

Checkers return the measured statistic and raise :class:`CheckFailed` when
a bound is violated; they never loosen tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from random import Random
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import linprog

from .adversaries import MaxMassAdversary, gen_alternating, gen_random, gen_star
from .configuration import Configuration, ot_cost, ot_coupling
from .entropic import explicit_argmin
from .errors import CheckFailed, ContractError, ConvergenceError
from .harness import RunConfig, Trace, derive_seed, run_fractional
from .tree import ROOT, LayeredTree

#: relative tolerance for finite-difference checks, with an absolute floor
#: of 1e-9 folded into the denominator cushion (1e-4 * 1e-5 = 1e-9)
FD_REL_TOL = 1e-4
FD_DENOM_CUSHION = 1e-5

INEQ_SLACK = 1e-6
ORACLE_PHI_TOL = 1e-8
ORACLE_COND_TOL = 1e-6
IDENTITY_TOL = 1e-10
OT_ORACLE_TOL = 1e-8
Y_BOUND_TOL = 1e-12


# -- convex-optimization oracle ----------------------------------------------


def oracle_argmin(
    tree: LayeredTree,
    heights: Mapping[int, float] | None = None,
    gamma: Mapping[int, float] | None = None,
    max_iters: int = 40000,
    tol: float = 1e-15,
) -> Configuration:
    """Minimize the entropic objective by iterative multiplicative updates.

    Works on the leaf simplex: internal masses are linear images of the leaf
    masses, and the objective sum((h_p - h_u) x_u ln x_u) + <gamma, x_L> is
    convex there.  Exponentiated-gradient steps with backtracking keep the
    iterate strictly positive; the loop stops once an accepted step improves
    the objective by less than ``tol``.

    Deliberately independent of the closed-form weight recursion.
    """
    if len(tree.active) > 200:
        raise ContractError("the oracle is for small trees (<= 200 active nodes)")
    if heights is None:
        heights = tree.heights()
    gamma = dict(gamma) if gamma else {}
    if tree.current_layer == 0:
        return Configuration.root_only()

    leaves = tree.frontier()
    nodes = [u for u in sorted(tree.active) if u != ROOT]
    row_of = {u: i for i, u in enumerate(nodes)}
    coef = np.array([heights[tree.parent[u]] - heights[u] for u in nodes])
    member = np.zeros((len(nodes), len(leaves)))
    for j, leaf in enumerate(leaves):
        u = leaf
        while u != ROOT:
            member[row_of[u], j] = 1.0
            u = tree.parent[u]
    bias = np.array([gamma.get(leaf, 0.0) for leaf in leaves])

    def objective(x_leaf):
        x_nodes = member @ x_leaf
        ent = np.where(x_nodes > 0.0, x_nodes * np.log(np.maximum(x_nodes, 1e-320)), 0.0)
        return float(coef @ ent + bias @ x_leaf)

    def gradient(x_leaf):
        x_nodes = member @ x_leaf
        return member.T @ (coef * (1.0 + np.log(x_nodes))) + bias

    x = np.full(len(leaves), 1.0 / len(leaves))
    value = objective(x)
    eta = 0.5
    for _ in range(max_iters):
        g = gradient(x)
        g = g - float(g @ x)  # center; any constant shift is feasible-invariant
        step_ok = False
        for _ in range(60):
            z = x * np.exp(np.clip(-eta * g, -50.0, 50.0))
            candidate = z / z.sum()
            cand_value = objective(candidate)
            if cand_value <= value:
                step_ok = True
                break
            eta *= 0.5
        if not step_ok:
            break  # no improving step representable: converged to precision
        improvement = value - cand_value
        x, value = candidate, cand_value
        eta = min(eta * 1.3, 4.0)
        if improvement < tol:
            break
    else:
        g = gradient(x)
        residual = float(np.max(np.abs(g - g @ x)) if len(g) else 0.0)
        raise ConvergenceError(
            f"oracle stopped after {max_iters} iterations; "
            f"last improvement {improvement:.3e}, KKT residual {residual:.3e}"
        )

    mass = {ROOT: 1.0}
    for i, u in enumerate(nodes):
        mass[u] = float(member[i] @ x)
    cond = {}
    for u in nodes:
        cond[u] = mass[u] / mass[tree.parent[u]]
    return Configuration(cond=cond, mass=mass, leaves=tuple(leaves))


# -- analysis trajectories -----------------------------------------------------


def deactivation_trajectory(tree: LayeredTree, leaf: int, s: float) -> Configuration:
    """Configuration at bias value ``s`` of the continuous leaf deactivation."""
    if s < 0:
        raise ContractError("deactivation requires s >= 0")
    if leaf not in set(tree.frontier()):
        raise ContractError(f"{leaf} is not an active leaf")
    return explicit_argmin(tree, None, {leaf: s})[0]


def growth_heights(tree: LayeredTree, s: float) -> dict[int, float]:
    """Interpolated heights: previous-layer profile plus s, new leaves at 0."""
    t = tree.current_layer
    return {u: 0.0 if tree.layer_of[u] == t else (t - 1 - tree.layer_of[u]) + s for u in tree.active}


def growth_trajectory(tree: LayeredTree, s: float) -> Configuration:
    """Configuration at instant ``s`` of the growth interpolation.

    The tree must already be advanced to the new layer with dead ends
    pruned.  At s=0 the previous-layer conditionals match the
    post-deactivation optimum with new leaves split equally; at s=1 this is
    the new layer's optimizer.
    """
    if not 0.0 <= s <= 1.0:
        raise ContractError("growth requires s in [0, 1]")
    if tree.current_layer < 1:
        raise ContractError("growth needs at least one revealed layer")
    return explicit_argmin(tree, growth_heights(tree, s))[0]


def _trajectory(tree: LayeredTree, kind: str, leaf: int | None) -> Callable[[float], Configuration]:
    # FD evaluation may step slightly outside the public domains, which is
    # well-defined for the closed form, so this bypasses the wrappers.
    if kind == "deactivation":
        if leaf is None:
            raise ContractError("deactivation trajectory needs a leaf")
        return lambda s: explicit_argmin(tree, None, {leaf: s})[0]
    if kind == "growth":
        return lambda s: explicit_argmin(tree, growth_heights(tree, s))[0]
    raise ContractError(f"unknown trajectory kind {kind!r}")


def _dynamics_inputs(tree, kind, s, leaf):
    config = _trajectory(tree, kind, leaf)(s)
    if kind == "deactivation":
        heights = tree.heights()
        gamma = {leaf: 1.0}
    else:
        heights = growth_heights(tree, s)
        # normal-cone reduction: ln(x_l) drives the same dynamics as 1 + ln(x_l)
        gamma = {l: math.log(config.mass[l]) for l in config.leaves}
    return config, heights, gamma


def dynamics_rhs(
    tree: LayeredTree,
    config: Configuration,
    heights: Mapping[int, float],
    gamma: Mapping[int, float],
) -> dict[int, float]:
    """Predicted derivative of every conditional under the continuous dynamics."""
    acc = {u: 0.0 for u in tree.active}
    for leaf, g in gamma.items():
        acc[leaf] = config.mass[leaf] * g
    for u in tree.active_by_layer_desc():
        if u != ROOT:
            acc[tree.parent[u]] += acc[u]
    out = {}
    for u, c in config.cond.items():
        p = tree.parent[u]
        denom = heights[p] * config.mass[p]
        if denom <= 0.0:
            raise ContractError(f"dynamics undefined at node {u} (h_p*x_p = {denom})")
        out[u] = (c * acc[p] - acc[u]) / denom
    return out


# -- finite-difference checkers ------------------------------------------------


def check_dynamics_fd(
    tree: LayeredTree,
    kind: str,
    s: float,
    fd_step: float = 1e-5,
    leaf: int | None = None,
) -> float:
    """Compare FD derivatives of all conditionals against the dynamics formula.

    Returns the worst relative error; raises :class:`CheckFailed` above the
    1e-4 tolerance (an absolute floor for near-zero derivatives is folded
    into the denominator cushion).
    """
    config, heights, gamma = _dynamics_inputs(tree, kind, s, leaf)
    rhs = dynamics_rhs(tree, config, heights, gamma)
    traj = _trajectory(tree, kind, leaf)
    hi, lo = traj(s + fd_step), traj(s - fd_step)
    worst = 0.0
    for u, predicted in rhs.items():
        fd = (hi.cond[u] - lo.cond[u]) / (2.0 * fd_step)
        rel = abs(fd - predicted) / (abs(predicted) + FD_DENOM_CUSHION)
        worst = max(worst, rel)
    if worst > FD_REL_TOL:
        raise CheckFailed(f"dynamics FD relative error {worst:.3e} exceeds {FD_REL_TOL}")
    return worst


def _fd_mass_rates(traj, s, fd_step) -> dict[int, float]:
    hi, lo = traj(s + fd_step), traj(s - fd_step)
    keys = set(hi.mass) | set(lo.mass)
    return {
        u: (hi.mass.get(u, 0.0) - lo.mass.get(u, 0.0)) / (2.0 * fd_step)
        for u in keys
        if u != ROOT
    }


def check_movement_bound(
    tree: LayeredTree,
    kind: str,
    s: float,
    fd_step: float = 1e-5,
    leaf: int | None = None,
) -> tuple[float, float]:
    """Instantaneous cost (FD) against twice the negative conditional rates.

    During growth both sums range over the previous tree's nodes only: the
    agent does not advance while the heights interpolate, so redistribution
    among the new sibling leaves moves nothing it pays for.
    """
    config, heights, gamma = _dynamics_inputs(tree, kind, s, leaf)
    if kind == "growth":
        cutoff = tree.current_layer
        counted = lambda u: tree.layer_of[u] < cutoff
    else:
        counted = lambda u: True
    dyn = dynamics_rhs(tree, config, heights, gamma)
    rhs = 0.0
    for u, rate in dyn.items():
        if not counted(u):
            continue
        p = tree.parent[u]
        rhs += heights[p] * config.mass[p] * max(-rate, 0.0)
    rhs *= 2.0
    rates = _fd_mass_rates(_trajectory(tree, kind, leaf), s, fd_step)
    lhs = sum(abs(r) for u, r in rates.items() if counted(u))
    if lhs > rhs + INEQ_SLACK:
        raise CheckFailed(f"movement bound violated: {lhs} > {rhs}")
    return lhs, rhs


def check_growth_rate_bound(
    tree: LayeredTree, s: float, width: int, fd_step: float = 1e-5
) -> tuple[float, float]:
    """Instantaneous growth cost on the previous tree against 2(1+ln w)^2.

    Only mass movement among previous-layer nodes counts: the agent does not
    advance during growth, so redistribution among the new leaves is free.
    """
    t = tree.current_layer
    rates = _fd_mass_rates(_trajectory(tree, "growth", None), s, fd_step)
    measured = sum(abs(r) for u, r in rates.items() if tree.layer_of[u] < t)
    bound = 2.0 * (1.0 + math.log(width)) ** 2
    if measured > bound + INEQ_SLACK:
        raise CheckFailed(f"growth rate bound violated: {measured} > {bound}")
    return measured, bound


def check_deactivation_decay(
    tree: LayeredTree, leaf: int, s: float, fd_step: float = 1e-5
) -> bool:
    """The dying leaf's mass decays at rate at least x/(2 d)."""
    if s <= 0:
        raise ContractError("decay check requires s > 0")
    if len(tree.frontier()) < 2:
        raise ContractError("decay check needs a surviving sibling leaf")
    d = tree.exclusive_chain_length(leaf)
    traj = _trajectory(tree, "deactivation", leaf)
    x = traj(s).mass[leaf]
    hi, lo = traj(s + fd_step), traj(s - fd_step)
    rate = (hi.mass[leaf] - lo.mass[leaf]) / (2.0 * fd_step)
    if rate > -x / (2.0 * d) + INEQ_SLACK:
        raise CheckFailed(f"decay too slow: xdot={rate}, threshold={-x / (2.0 * d)}")
    return True


# -- algebraic and transport oracles --------------------------------------------


def check_entropy_identity(
    tree: LayeredTree, config: Configuration, heights: Mapping[int, float]
) -> float:
    """Gap between the node-entropy and conditional-entropy expressions."""
    node_form = sum(
        m * math.log(m) for u, m in config.mass.items() if u != ROOT and m > 0.0
    )
    cond_form = sum(
        heights[tree.parent[u]] * config.mass[u] * math.log(c)
        for u, c in config.cond.items()
        if config.mass[u] > 0.0
    )
    return abs(node_form - cond_form)


def brute_force_ot(tree: LayeredTree, config_a: Configuration, config_b: Configuration) -> float:
    """Exact min-cost transport between the two leaf distributions, by LP."""
    mu = config_a.leaf_distribution()
    nu = config_b.leaf_distribution()
    sources, targets = sorted(mu), sorted(nu)
    n_s, n_t = len(sources), len(targets)
    cost = np.array(
        [[tree.distance(a, b) for b in targets] for a in sources], dtype=float
    ).reshape(-1)
    a_eq = np.zeros((n_s + n_t, n_s * n_t))
    b_eq = np.zeros(n_s + n_t)
    for i, src in enumerate(sources):
        a_eq[i, i * n_t : (i + 1) * n_t] = 1.0
        b_eq[i] = mu[src]
    for j, tgt in enumerate(targets):
        a_eq[n_s + j, j::n_t] = 1.0
        b_eq[n_s + j] = nu[tgt]
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise ConvergenceError(f"transport LP failed: {res.message}")
    return float(res.fun)


def check_potential_inequality(trace: Trace) -> float:
    """Worst potential slack over a monitored trace; must stay above -1e-6 t."""
    worst = trace.worst_potential_slack()
    if worst is None:
        raise ContractError("trace was produced without potential monitoring")
    t_final = trace.steps[-1].t
    if worst < -INEQ_SLACK * t_final:
        raise CheckFailed(f"potential inequality violated: slack {worst} at horizon {t_final}")
    return worst


def check_y_bounds(weights: Mapping[int, float], leaf_counts: Mapping[int, int]) -> bool:
    """With no leaf bias, every recursion weight lies in [1, |leaves below|]."""
    for u, y in weights.items():
        if y < 1.0 - Y_BOUND_TOL or y > leaf_counts[u] + Y_BOUND_TOL:
            raise CheckFailed(f"y[{u}]={y} outside [1, {leaf_counts[u]}]")
    return True


# -- sweeps ---------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    instances: int
    worst: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name:<28} instances={self.instances:<5} worst={self.worst: .3e}  {status}"


def random_tree(
    rng: Random,
    max_width: int,
    depth: int,
    node_cap: int | None = None,
    min_leaves: int = 1,
) -> LayeredTree:
    """A replayed random instance; retried until it fits the requested shape."""
    for _ in range(200):
        seed = rng.randrange(2**31)
        width = rng.randint(2, max_width)
        d = rng.randint(2, depth)
        inst = gen_random(width, d, seed, split_prob=0.4, kill_prob=0.15)
        tree = inst.replay()
        if node_cap is not None and len(tree.active) > node_cap:
            continue
        if len(tree.frontier()) >= min_leaves:
            return tree
    raise ContractError("could not draw a random tree under the node cap")


def random_configuration(rng: Random, tree: LayeredTree) -> Configuration:
    """A strictly positive random point of the active polytope."""
    cond = {}
    for u in tree.active:
        kids = tree.active_children(u)
        if not kids:
            continue
        weights = [0.05 + rng.random() for _ in kids]
        total = sum(weights)
        for v, w in zip(kids, weights):
            cond[v] = w / total
    return Configuration.from_conditionals(tree, cond)


def _pick_leaf(rng: Random, tree: LayeredTree) -> int:
    return rng.choice(tree.frontier())


def sweep_lemma1(seed: int, trees: int = 100) -> list[CheckResult]:
    rng = Random(derive_seed(seed, "lemma1"))
    worst_phi = worst_cond = worst_y = 0.0
    all_y_ok = True
    for _ in range(trees):
        tree = random_tree(rng, max_width=4, depth=6, node_cap=30)
        explicit, weights = explicit_argmin(tree)
        oracle = oracle_argmin(tree)
        phi_explicit = sum(
            m * math.log(m) for u, m in explicit.mass.items() if u != ROOT and m > 0
        )
        phi_oracle = sum(
            m * math.log(m) for u, m in oracle.mass.items() if u != ROOT and m > 0
        )
        worst_phi = max(worst_phi, abs(phi_explicit - phi_oracle))
        worst_cond = max(
            worst_cond,
            max(abs(explicit.cond[u] - oracle.cond[u]) for u in explicit.cond),
        )
        counts = tree.subtree_leaf_counts()
        try:
            check_y_bounds(weights, counts)
        except CheckFailed:
            all_y_ok = False
        worst_y = max(
            worst_y,
            max(max(1.0 - y, y - counts[u], 0.0) for u, y in weights.items()),
        )
    return [
        CheckResult("lemma1/phi-gap", trees, worst_phi, worst_phi <= ORACLE_PHI_TOL),
        CheckResult("lemma1/cond-gap", trees, worst_cond, worst_cond <= ORACLE_COND_TOL),
        CheckResult("lemma1/y-bounds", trees, worst_y, all_y_ok and worst_y <= Y_BOUND_TOL),
    ]


def sweep_dynamics(seed: int, trees: int = 50, points: int = 5) -> list[CheckResult]:
    rng = Random(derive_seed(seed, "dynamics"))
    deact_points = [0.0, 0.3, 0.8, 1.5, 3.0][:points]
    growth_points = [0.1, 0.3, 0.5, 0.7, 0.9][:points]
    decay_points = [0.05, 0.3, 0.8, 1.5, 3.0][:points]
    worst_d = worst_g = 0.0
    worst_decay_margin = -math.inf
    ok = True
    n = 0
    for _ in range(trees):
        tree = random_tree(rng, max_width=16, depth=12, node_cap=150, min_leaves=2)
        leaf = _pick_leaf(rng, tree)
        n += 1
        try:
            for s in deact_points:
                worst_d = max(worst_d, check_dynamics_fd(tree, "deactivation", s, leaf=leaf))
            for s in growth_points:
                worst_g = max(worst_g, check_dynamics_fd(tree, "growth", s))
            d = tree.exclusive_chain_length(leaf)
            traj = _trajectory(tree, "deactivation", leaf)
            for s in decay_points:
                check_deactivation_decay(tree, leaf, s)
                x = traj(s).mass[leaf]
                hi, lo = traj(s + 1e-5), traj(s - 1e-5)
                rate = (hi.mass[leaf] - lo.mass[leaf]) / 2e-5
                worst_decay_margin = max(worst_decay_margin, rate + x / (2.0 * d))
        except CheckFailed:
            ok = False
    return [
        CheckResult("dynamics/deactivation-fd", n, worst_d, ok and worst_d <= FD_REL_TOL),
        CheckResult("dynamics/growth-fd", n, worst_g, ok and worst_g <= FD_REL_TOL),
        CheckResult(
            "dynamics/leaf-decay", n, worst_decay_margin, ok and worst_decay_margin <= INEQ_SLACK
        ),
    ]


def sweep_movement(seed: int, trees: int = 50, points: int = 5) -> list[CheckResult]:
    rng = Random(derive_seed(seed, "movement"))
    worst_deact = worst_growth = -math.inf
    ok = True
    n = 0
    for _ in range(trees):
        tree = random_tree(rng, max_width=16, depth=12, node_cap=150, min_leaves=2)
        leaf = _pick_leaf(rng, tree)
        n += 1
        try:
            for s in [0.0, 0.4, 1.0, 2.0, 4.0][:points]:
                lhs, rhs = check_movement_bound(tree, "deactivation", s, leaf=leaf)
                worst_deact = max(worst_deact, lhs - rhs)
            for s in [0.1, 0.3, 0.5, 0.7, 0.9][:points]:
                lhs, rhs = check_movement_bound(tree, "growth", s)
                worst_growth = max(worst_growth, lhs - rhs)
        except CheckFailed:
            ok = False
    return [
        CheckResult("movement/deactivation", n, worst_deact, ok and worst_deact <= INEQ_SLACK),
        CheckResult("movement/growth", n, worst_growth, ok and worst_growth <= INEQ_SLACK),
    ]


def sweep_growth(seed: int, trees: int = 30, points: int = 5) -> list[CheckResult]:
    rng = Random(derive_seed(seed, "growth"))
    worst = -math.inf
    ok = True
    for _ in range(trees):
        tree = random_tree(rng, max_width=16, depth=12, node_cap=200)
        # the sharpest valid width is the size of the newest layer
        width = max(len(tree.frontier()), 2)
        try:
            for s in [0.1, 0.3, 0.5, 0.7, 0.9][:points]:
                measured, bound = check_growth_rate_bound(tree, s, width)
                worst = max(worst, measured - bound)
        except CheckFailed:
            ok = False
    return [CheckResult("growth/rate-bound", trees, worst, ok and worst <= INEQ_SLACK)]


def sweep_potential(seed: int) -> list[CheckResult]:
    runs = [
        ("entropic", gen_star(8, 200)),
        ("entropic", gen_alternating(200)),
        ("entropic", gen_random(8, 150, derive_seed(seed, "potential-random") % 2**31)),
        ("entropic", MaxMassAdversary(16, 150)),
    ]
    worst_norm = math.inf
    ok = True
    for policy, source in runs:
        trace = run_fractional(policy, source, RunConfig(seed=seed, potential_monitor=True))
        try:
            slack = check_potential_inequality(trace)
        except CheckFailed:
            ok = False
            slack = trace.worst_potential_slack()
        worst_norm = min(worst_norm, slack / max(trace.steps[-1].t, 1))
    return [CheckResult("potential/entropic-runs", len(runs), worst_norm, ok)]


def sweep_identity(seed: int, configs: int = 1000) -> list[CheckResult]:
    rng = Random(derive_seed(seed, "identity"))
    worst_gap = 0.0
    for _ in range(configs):
        tree = random_tree(rng, max_width=8, depth=8, node_cap=80)
        config = random_configuration(rng, tree)
        worst_gap = max(worst_gap, check_entropy_identity(tree, config, tree.heights()))

    worst_ot = 0.0
    pairs = 0
    rng2 = Random(derive_seed(seed, "identity-ot"))
    while pairs < 40:
        inst = gen_random(
            rng2.randint(2, 4), rng2.randint(2, 6), rng2.randrange(2**31),
            split_prob=0.45, kill_prob=0.1,
        )
        final = inst.replay()
        if len(final.frontier()) > 8 or inst.depth < 2:
            continue
        previous = inst.replay(upto=inst.depth - 1)
        if len(previous.frontier()) > 8:
            continue
        config_a = random_configuration(rng2, previous)
        config_b = random_configuration(rng2, final)
        plan = ot_coupling(final, config_a, config_b)
        exact = brute_force_ot(final, config_a, config_b)
        worst_ot = max(worst_ot, abs(plan.cost - exact), abs(ot_cost(config_a, config_b) - exact))
        pairs += 1
    return [
        CheckResult("identity/two-forms", configs, worst_gap, worst_gap <= IDENTITY_TOL),
        CheckResult("identity/ot-oracle", pairs, worst_ot, worst_ot <= OT_ORACLE_TOL),
    ]


SUITES: dict[str, Callable[[int], list[CheckResult]]] = {
    "lemma1": sweep_lemma1,
    "dynamics": sweep_dynamics,
    "movement": sweep_movement,
    "growth": sweep_growth,
    "potential": sweep_potential,
    "identity": sweep_identity,
}


def run_suite(suite: str, seed: int = 42) -> list[CheckResult]:
    """Run one named suite (or all of them) and return per-checker results."""
    if suite == "all":
        results = []
        for name in SUITES:
            results.extend(SUITES[name](seed))
        return results
    if suite not in SUITES:
        raise ContractError(f"unknown suite {suite!r}; expected all|{'|'.join(SUITES)}")
    return SUITES[suite](seed)
