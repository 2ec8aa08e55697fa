"""Builders for the UAV-vs-ground-robot experiment family.

A six-node graph world hosts a UAV (the controlled agent) and a ground
robot of hidden type (nominal or adversarial). Both move on the same
graph; the robot follows a fixed per-type policy and parks at its goal
nodes. The UAV's camera reads the robot's node only when co-located,
with a given detection probability, and emits the null observation
otherwise. The surveillance-or-interdiction task is monitored by a
five-state DFA whose secret states mark the adversarial branch.

The exact edge structure and the nominal robot's goal mix are a
reconstruction; every number here can be overridden through the scenario
JSON file.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import json

import numpy as np

from .automata import Dfa, Symbol, canon_symbol
from .errors import ConfigError
from .gradient import _batch_posteriors, _binary_entropy_vec
from .model import LabeledPomdp, ProductPomdp, build_product
from .objective import ObjectiveReport
from .oomodel import build_operators
from .policy import FscPolicy, softmax_table
from .sampler import BatchSampler, RngSpec, SamplingTables

TYPES = ("nominal", "adversarial")


@dataclass(frozen=True, eq=False)
class GraphWorld:
    """Shared movement graph plus the two robot types' fixed behavior."""

    n_nodes: int
    actions: tuple[str, ...]
    uav_dyn: np.ndarray                 # (nodes, actions, nodes)
    robot_dyn: np.ndarray               # (nodes, actions, nodes)
    robot_policy_nominal: np.ndarray    # (nodes, actions)
    robot_policy_adversarial: np.ndarray
    goals_nominal: frozenset[int]
    goals_adversarial: frozenset[int]

    def robot_policy(self, ty: int) -> np.ndarray:
        return self.robot_policy_nominal if ty == 0 else self.robot_policy_adversarial

    def goals(self, ty: int) -> frozenset[int]:
        return self.goals_nominal if ty == 0 else self.goals_adversarial


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything about a run that is not the movement graph."""

    detection_prob: float = 0.9
    prior: tuple[float, float] = (0.5, 0.5)   # (nominal, adversarial)
    variant: str = "overlapping"
    uav_start: int = 5
    robot_start: int = 0

    def __post_init__(self):
        if not 0.0 <= self.detection_prob <= 1.0:
            raise ConfigError("detection probability must lie in [0, 1]")
        if abs(sum(self.prior) - 1.0) > 1e-9 or any(p < 0 for p in self.prior):
            raise ConfigError(f"type prior {self.prior} is not a distribution")


def validate_world(world: GraphWorld) -> None:
    n, na = world.n_nodes, len(world.actions)
    for name, dyn in (("uav_dyn", world.uav_dyn), ("robot_dyn", world.robot_dyn)):
        if dyn.shape != (n, na, n):
            raise ConfigError(f"{name} has shape {dyn.shape}, expected {(n, na, n)}")
        if (dyn < 0).any() or np.abs(dyn.sum(axis=-1) - 1.0).max() > 1e-9:
            raise ConfigError(f"{name} rows must be probability distributions")
    for ty, tyname in enumerate(TYPES):
        polt = world.robot_policy(ty)
        if polt.shape != (n, na):
            raise ConfigError(f"{tyname} robot policy has shape {polt.shape}")
        if (polt < 0).any() or np.abs(polt.sum(axis=-1) - 1.0).max() > 1e-9:
            raise ConfigError(f"{tyname} robot policy rows must be distributions")
        kernel = np.einsum("ga,gah->gh", polt, world.robot_dyn)
        for g in world.goals(ty):
            if abs(kernel[g, g] - 1.0) > 1e-9:
                raise ConfigError(
                    f"goal node {g} is not absorbing under the {tyname} robot policy")


def paper_world(variant: str = "overlapping") -> GraphWorld:
    """The six-node reconstruction with its two goal configurations.

    Nominal goals are {3, 4} (overlapping with the adversary's {4}) or {3}
    (non-overlapping). The nominal robot routes through node 1 or 2 at
    random; in the overlapping variant it settles at node 3 most of the
    time but sometimes at the shared node 4. Node 0 has the one stochastic
    edge (a slip between nodes 1 and 2).
    """
    if variant not in ("overlapping", "nonoverlapping"):
        raise ConfigError(f"unknown variant {variant!r}")
    actions = ("a", "b", "c")
    edges = {
        0: {"a": {1: 0.8, 2: 0.2}, "b": {2: 0.8, 1: 0.2}, "c": {0: 1.0}},
        1: {"a": {3: 1.0}, "b": {4: 1.0}, "c": {1: 1.0}},
        2: {"a": {4: 1.0}, "b": {3: 1.0}, "c": {2: 1.0}},
        3: {"a": {1: 1.0}, "b": {4: 1.0}, "c": {3: 1.0}},
        4: {"a": {2: 1.0}, "b": {3: 1.0}, "c": {4: 1.0}},
        5: {"a": {2: 1.0}, "b": {1: 1.0}, "c": {5: 1.0}},
    }
    dyn = np.zeros((6, 3, 6))
    for node, by_action in edges.items():
        for ai, act in enumerate(actions):
            for target, p in by_action[act].items():
                dyn[node, ai, target] = p

    def policy(rows: dict[int, dict[str, float]]) -> np.ndarray:
        table = np.zeros((6, 3))
        for node, dist in rows.items():
            for act, p in dist.items():
                table[node, actions.index(act)] = p
        return table

    adversarial = policy({0: {"a": 0.5, "b": 0.5}, 1: {"b": 1.0}, 2: {"a": 1.0},
                          3: {"c": 1.0}, 4: {"c": 1.0}, 5: {"c": 1.0}})
    if variant == "overlapping":
        nominal = policy({0: {"a": 0.5, "b": 0.5},
                          1: {"a": 0.9, "b": 0.1}, 2: {"b": 0.9, "a": 0.1},
                          3: {"c": 1.0}, 4: {"c": 1.0}, 5: {"c": 1.0}})
        goals_nominal = frozenset({3, 4})
    else:
        nominal = policy({0: {"a": 0.5, "b": 0.5}, 1: {"a": 1.0}, 2: {"b": 1.0},
                          3: {"c": 1.0}, 4: {"c": 1.0}, 5: {"c": 1.0}})
        goals_nominal = frozenset({3})
    return GraphWorld(n_nodes=6, actions=actions, uav_dyn=dyn, robot_dyn=dyn,
                      robot_policy_nominal=nominal, robot_policy_adversarial=adversarial,
                      goals_nominal=goals_nominal, goals_adversarial=frozenset({4}))


def build_scenario_pomdp(cfg: ScenarioConfig, world: GraphWorld) -> LabeledPomdp:
    """Joint (robot, UAV, type) POMDP controlled by the UAV's actions.

    The robot's type-conditioned step is folded into the transition
    kernel; the type component never changes. The camera emission is
    identical across UAV actions.
    """
    validate_world(world)
    n = world.n_nodes
    for name, node in (("uav_start", cfg.uav_start), ("robot_start", cfg.robot_start)):
        if not 0 <= node < n:
            raise ConfigError(f"{name} {node} is not a node of the {n}-node world")
    na = len(world.actions)
    states = tuple(f"g{g}_u{u}_{ty}" for g in range(n) for u in range(n) for ty in TYPES)
    observations = tuple(str(v) for v in range(n)) + ("n",)
    ns = len(states)

    def sidx(g: int, u: int, ty: int) -> int:
        return (g * n + u) * 2 + ty

    robot_kernel = np.stack([
        np.einsum("ga,gah->gh", world.robot_policy(ty), world.robot_dyn)
        for ty in range(2)])                                    # (2, nodes, nodes)

    trans = np.zeros((ns, na, ns))
    emit = np.zeros((ns, na, n + 1))
    for g in range(n):
        for u in range(n):
            for ty in range(2):
                s = sidx(g, u, ty)
                for a in range(na):
                    block = robot_kernel[ty, g][:, None] * world.uav_dyn[u, a][None, :]
                    trans[s, a].reshape(n, n, 2)[:, :, ty] = block
                if g == u:
                    emit[s, :, g] = cfg.detection_prob
                    emit[s, :, n] = 1.0 - cfg.detection_prob
                else:
                    emit[s, :, n] = 1.0

    init = np.zeros(ns)
    init[sidx(cfg.robot_start, cfg.uav_start, 0)] = cfg.prior[0]
    init[sidx(cfg.robot_start, cfg.uav_start, 1)] = cfg.prior[1]

    label = tuple(
        canon_symbol((["tau"] if ty == 1 else [])
                     + (["a"] if u == 2 else [])
                     + (["p"] if g == u else []))
        for g in range(n) for u in range(n) for ty in range(2))
    return LabeledPomdp(states=states, observations=observations,
                        actions=world.actions, trans=trans, emit=emit, init=init,
                        aps=frozenset({"tau", "a", "p"}), label=label)


def build_task_dfa(variant: str = "overlapping") -> Dfa:
    """Five-state monitor for surveillance-if-nominal, interdiction-if-adversarial.

    The first symbol routes on the type proposition; the nominal branch
    accepts once the surveillance proposition holds, the adversarial
    (secret) branch accepts once the co-location proposition holds. The
    task formula does not depend on the goal variant, so both labels
    return the same automaton.
    """
    if variant not in ("overlapping", "nonoverlapping"):
        raise ConfigError(f"unknown variant {variant!r}")
    states = ("q0", "q1", "q2", "q3", "q4")
    alphabet = tuple(canon_symbol(sym) for sym in (
        [], ["a"], ["p"], ["a", "p"], ["tau"], ["a", "tau"], ["p", "tau"],
        ["a", "p", "tau"]))
    delta: dict[tuple[str, Symbol], str] = {}
    for sigma in alphabet:
        has = set(sigma)
        if "tau" in has:
            delta[("q0", sigma)] = "q4" if "p" in has else "q2"
        else:
            delta[("q0", sigma)] = "q3" if "a" in has else "q1"
        delta[("q1", sigma)] = "q3" if "a" in has else "q1"
        delta[("q2", sigma)] = "q4" if "p" in has else "q2"
        delta[("q3", sigma)] = "q3"
        delta[("q4", sigma)] = "q4"
    return Dfa(states=states, alphabet=alphabet, delta=delta, initial="q0",
               final=frozenset({"q3", "q4"}), secret=frozenset({"q2", "q4"}))


def scenario_product(cfg: ScenarioConfig, world: GraphWorld) -> ProductPomdp:
    return build_product(build_scenario_pomdp(cfg, world), build_task_dfa(cfg.variant))


PRIOR_PRESETS = {
    "mixed": (0.5, 0.5),
    "nominal": (1.0, 0.0),
    "adversarial": (0.0, 1.0),
}


def evaluate_under_prior(pol: FscPolicy, world: GraphWorld, cfg: ScenarioConfig,
                         T: int, prior: tuple[float, float] | str | None = None,
                         M: int = 100_000, seed: int = 0, alpha: float = 1.0,
                         log_base: str = "e", workers: int = 1,
                         dfa: Dfa | None = None) -> ObjectiveReport:
    """Monte-Carlo estimate of entropy and success under an overridden prior.

    Rebuilds the product with the given type prior (presets: "mixed",
    "nominal", "adversarial"), then averages per-trajectory posterior
    entropies and success posteriors over M fresh rollouts, with standard
    errors of the means.
    """
    if M < 1:
        raise ConfigError("evaluation sample count M must be >= 1")
    if isinstance(prior, str):
        try:
            prior = PRIOR_PRESETS[prior]
        except KeyError:
            raise ConfigError(f"unknown prior preset {prior!r}; "
                              f"choose from {sorted(PRIOR_PRESETS)}") from None
    cfg = replace(cfg, prior=tuple(prior) if prior is not None else cfg.prior)
    if dfa is None:
        dfa = build_task_dfa(cfg.variant)
    oo = build_operators(build_product(build_scenario_pomdp(cfg, world), dfa))
    psi = softmax_table(pol.theta)
    with BatchSampler(SamplingTables.from_operators(oo), pol, T, RngSpec(seed),
                      workers=workers) as sampler:
        _, acts, obs, _ = sampler.sample(psi, 0, M)
    sec, fin = _batch_posteriors(oo, obs, acts)
    hvals = _binary_entropy_vec(sec, log_base)
    entropy = float(hvals.mean())
    success = float(fin.mean())
    return ObjectiveReport(
        entropy=entropy, success_prob=success,
        objective=entropy - alpha * success, alpha=alpha,
        entropy_se=float(hvals.std(ddof=1) / np.sqrt(M)) if M > 1 else None,
        success_se=float(fin.std(ddof=1) / np.sqrt(M)) if M > 1 else None,
        n_samples=M)


def load_scenario(path: str) -> tuple[GraphWorld, ScenarioConfig]:
    """Read a scenario JSON: movement graph, robot behavior, and run settings."""
    with open(path) as fh:
        raw = json.load(fh)
    try:
        w = raw["world"]
        n = int(w["nodes"])
        actions = tuple(w["actions"])

        def dyn(node_map) -> np.ndarray:
            out = np.zeros((n, len(actions), n))
            for node, by_action in node_map.items():
                for act, dist in by_action.items():
                    for target, p in dist.items():
                        out[int(node), actions.index(act), int(target)] = p
            return out

        def poltable(node_map) -> np.ndarray:
            out = np.zeros((n, len(actions)))
            for node, dist in node_map.items():
                for act, p in dist.items():
                    out[int(node), actions.index(act)] = p
            return out

        world = GraphWorld(
            n_nodes=n, actions=actions,
            uav_dyn=dyn(w["uav_dyn"]), robot_dyn=dyn(w["robot_dyn"]),
            robot_policy_nominal=poltable(w["robot_policy_nominal"]),
            robot_policy_adversarial=poltable(w["robot_policy_adversarial"]),
            goals_nominal=frozenset(w["goals_nominal"]),
            goals_adversarial=frozenset(w["goals_adversarial"]))
        prior = raw["prior"]
        cfg = ScenarioConfig(detection_prob=float(raw["detection_prob"]),
                             prior=(float(prior["nominal"]), float(prior["adversarial"])),
                             variant=raw["variant"],
                             uav_start=int(raw["uav_start"]),
                             robot_start=int(raw["robot_start"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed scenario file ({exc})") from None
    validate_world(world)
    return world, cfg


def save_scenario(world: GraphWorld, cfg: ScenarioConfig, path: str) -> None:
    def dyn_map(dyn: np.ndarray) -> dict:
        return {str(node): {act: {str(t): float(p)
                                  for t, p in enumerate(dyn[node, ai]) if p}
                            for ai, act in enumerate(world.actions)
                            if dyn[node, ai].any()}
                for node in range(world.n_nodes)}

    def pol_map(table: np.ndarray) -> dict:
        return {str(node): {act: float(p)
                            for act, p in zip(world.actions, table[node]) if p}
                for node in range(world.n_nodes)}

    raw = {
        "world": {
            "nodes": world.n_nodes,
            "actions": list(world.actions),
            "uav_dyn": dyn_map(world.uav_dyn),
            "robot_dyn": dyn_map(world.robot_dyn),
            "robot_policy_nominal": pol_map(world.robot_policy_nominal),
            "robot_policy_adversarial": pol_map(world.robot_policy_adversarial),
            "goals_nominal": sorted(world.goals_nominal),
            "goals_adversarial": sorted(world.goals_adversarial),
        },
        "detection_prob": cfg.detection_prob,
        "prior": {"nominal": cfg.prior[0], "adversarial": cfg.prior[1]},
        "variant": cfg.variant,
        "uav_start": cfg.uav_start,
        "robot_start": cfg.robot_start,
    }
    with open(path, "w") as fh:
        json.dump(raw, fh, indent=1)
        fh.write("\n")
