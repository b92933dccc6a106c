"""Runs policies against instances or adversaries and writes reports.

A fractional run replays the revelation sequence, lets the policy adopt a
configuration per layer, and charges optimal transport (or walked edges for
the deterministic DFS agent).  A randomized run samples agents through the
per-layer optimal couplings; by construction its expected cost equals the
fractional cost.  OPT for an unweighted layered instance is the layer index
itself, so the reported ratio is cumulative cost over t.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from random import Random
from typing import Union

from .adversaries import Instance, MaxMassAdversary
from .baselines import DfsPolicy, make_policy
from .configuration import ot_coupling, sample_transition
from .entropic import PotentialBreakdown, potential
from .errors import ContractError, LgtError
from .tree import ROOT, DeactivationRecord, LayeredTree

#: per-step tolerance on the potential slack, relative to the layer index
MONITOR_SLACK_TOL = 1e-6


@dataclass
class RunConfig:
    mode: str = "fractional"
    trials: int = 100
    seed: int = 0
    potential_monitor: bool | None = None  # None: on for the entropic policy only
    width_source: str = "instance"  # "instance" or "running_max"

    def __post_init__(self):
        if self.mode not in ("fractional", "randomized"):
            raise ContractError(f"unknown mode {self.mode!r}")
        if self.width_source not in ("instance", "running_max"):
            raise ContractError(f"unknown width source {self.width_source!r}")
        if self.mode == "randomized" and self.trials < 1:
            raise ContractError("randomized mode requires trials >= 1")


@dataclass
class StepRecord:
    t: int
    layer_size: int
    deactivations: list[DeactivationRecord]
    deactivated_edges: int
    cost_delta: float
    cumulative_cost: float
    opt: int
    ratio: float
    potential: PotentialBreakdown | None = None


@dataclass
class Trace:
    run_id: str
    policy: str
    instance: str
    mode: str
    seed: int
    declared_width: int
    width_source: str
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def total_cost(self) -> float:
        return self.steps[-1].cumulative_cost if self.steps else 0.0

    @property
    def final_ratio(self) -> float:
        return self.steps[-1].ratio if self.steps else 0.0

    def worst_potential_slack(self) -> float | None:
        slacks = [
            s.potential.total - s.cumulative_cost for s in self.steps if s.potential is not None
        ]
        return min(slacks) if slacks else None

    def monitor_ok(self) -> bool:
        worst = self.worst_potential_slack()
        if worst is None:
            return True
        t_final = self.steps[-1].t
        return worst >= -MONITOR_SLACK_TOL * t_final


@dataclass
class RandomizedStats:
    run_id: str
    policy: str
    instance: str
    mode: str
    seed: int
    trials: int
    opt: int
    mean_cost: float
    stderr: float
    per_trial: list[float]


def derive_seed(root_seed: int, name: str) -> int:
    """Stable named substream: identical across platforms and processes."""
    digest = hashlib.sha256(f"{root_seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


Source = Union[Instance, MaxMassAdversary]


def _updates(source: Source, policy):
    if isinstance(source, Instance):
        yield from source.layers
    else:
        for _ in range(source.horizon):
            yield source.next_update(policy.config)


def run_fractional(policy_kind: str, source: Source, config: RunConfig | None = None) -> Trace:
    """Run one policy fractionally and return its full per-step trace."""
    config = config or RunConfig()
    policy = make_policy(policy_kind)
    adaptive = not isinstance(source, Instance)
    if adaptive and isinstance(policy, DfsPolicy):
        raise ContractError("adaptive adversaries pair with fractional policies only")
    monitor = (
        config.potential_monitor
        if config.potential_monitor is not None
        else policy_kind == "entropic"
    )
    width_source = "running_max" if adaptive else config.width_source
    tree = LayeredTree()
    policy.start(tree)
    trace = Trace(
        run_id=f"{policy_kind}:{source.name}:fractional:s{config.seed}",
        policy=policy_kind,
        instance=source.name,
        mode="fractional",
        seed=config.seed,
        declared_width=source.width,
        width_source=width_source,
        steps=[],
    )
    cumulative = 0.0
    for update in _updates(source, policy):
        records = tree.apply_layer(update)
        t = tree.current_layer
        try:
            _, cost = policy.step(tree)
        except LgtError as e:
            raise type(e)(f"step {t}: {e}") from e
        cumulative += cost
        breakdown = None
        if monitor:
            width = tree.max_layer_size if width_source == "running_max" else source.width
            breakdown = potential(tree, policy.config, width)
        trace.steps.append(
            StepRecord(
                t=t,
                layer_size=len(tree.frontier()),
                deactivations=records,
                deactivated_edges=tree.deactivated_edges,
                cost_delta=cost,
                cumulative_cost=cumulative,
                opt=t,
                ratio=cumulative / t,
                potential=breakdown,
            )
        )
    return trace


def run_randomized(policy_kind: str, instance: Instance, config: RunConfig | None = None) -> RandomizedStats:
    """Sample walking agents through the per-layer optimal couplings.

    The fractional trajectory is computed once; each trial then walks one
    agent, drawing its next position from the coupling conditioned on its
    current one.  Deterministic policies yield zero variance.
    """
    config = config or RunConfig(mode="randomized")
    if not isinstance(instance, Instance):
        raise ContractError("randomized mode requires an offline instance")
    trials = max(config.trials, 1)

    if policy_kind == "dfs":
        trace = run_fractional("dfs", instance, RunConfig(seed=config.seed))
        per_trial = [trace.total_cost] * trials
    else:
        policy = make_policy(policy_kind)
        tree = LayeredTree()
        policy.start(tree)
        plans = []
        for update in instance.layers:
            previous = policy.config
            tree.apply_layer(update)
            t = tree.current_layer
            try:
                new, _ = policy.step(tree)
            except LgtError as e:
                raise type(e)(f"step {t}: {e}") from e
            plans.append(ot_coupling(tree, previous, new))
        per_trial = []
        for i in range(trials):
            rng = Random(derive_seed(config.seed, f"trial-{i}"))
            position = ROOT
            total = 0.0
            for plan in plans:
                target = sample_transition(plan, position, rng)
                total += tree.distance(position, target)
                position = target
            per_trial.append(total)

    mean = sum(per_trial) / len(per_trial)
    if len(per_trial) > 1:
        var = sum((c - mean) ** 2 for c in per_trial) / (len(per_trial) - 1)
        stderr = math.sqrt(var / len(per_trial))
    else:
        stderr = 0.0
    return RandomizedStats(
        run_id=f"{policy_kind}:{instance.name}:randomized:s{config.seed}",
        policy=policy_kind,
        instance=instance.name,
        mode="randomized",
        seed=config.seed,
        trials=trials,
        opt=instance.depth,
        mean_cost=mean,
        stderr=stderr,
        per_trial=per_trial,
    )


CSV_COLUMNS = [
    "run_id",
    "policy",
    "instance",
    "t",
    "layer_size",
    "deactivated_edges",
    "cost_delta",
    "cumulative_cost",
    "opt",
    "ratio",
    "potential_total",
    "potential_slack",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report(traces: list[Trace], fmt: str, path: str):
    """Write traces as CSV (fixed columns) or JSON (trace structure verbatim)."""
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for trace in traces:
                for s in trace.steps:
                    total = s.potential.total if s.potential else None
                    slack = total - s.cumulative_cost if total is not None else None
                    writer.writerow(
                        [
                            trace.run_id,
                            trace.policy,
                            trace.instance,
                            s.t,
                            s.layer_size,
                            s.deactivated_edges,
                            _fmt(s.cost_delta),
                            _fmt(s.cumulative_cost),
                            s.opt,
                            _fmt(s.ratio),
                            _fmt(total),
                            _fmt(slack),
                        ]
                    )
    elif fmt == "json":
        payload = {"runs": [asdict(trace) for trace in traces]}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        raise ContractError(f"unknown report format {fmt!r}")


def report_stats(stats: list[RandomizedStats], fmt: str, path: str):
    """Write randomized-run statistics (per-trial costs plus summary)."""
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["run_id", "policy", "instance", "trial", "cost"])
            for st in stats:
                for i, cost in enumerate(st.per_trial):
                    writer.writerow([st.run_id, st.policy, st.instance, i, _fmt(cost)])
    elif fmt == "json":
        payload = {"stats": [asdict(st) for st in stats]}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        raise ContractError(f"unknown report format {fmt!r}")
