"""Goal model: decompositions, design alternatives, satisfaction evaluation.

A model is a tree of softgoals, goals and tasks.  AND decompositions require
all children; an XOR group names mutually exclusive design alternatives,
each one a task binding concrete safety-rule parameters.  Leaves carry
either a metric binding (their satisfaction is read off a measured value)
or a parameter binding (they configure the rule and count as satisfied by
construction).  Contribution links add a weighted source value on top of a
node's decomposition value, clamped to [0, 1].
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .scenario import SafetyRuleParams

KIND_SOFTGOAL = "softgoal"
KIND_GOAL = "goal"
KIND_TASK = "task"
NODE_KINDS = (KIND_SOFTGOAL, KIND_GOAL, KIND_TASK)

DECOMP_AND = "and"
DECOMP_XOR = "xor"


class ParseError(ValueError):
    """Document is not syntactically a goal model."""


class ValidationError(ValueError):
    """Document parses but violates a structural invariant."""


class MissingMetric(KeyError):
    """A bound metric was not supplied to the evaluation."""


@dataclass(frozen=True)
class GoalNode:
    node_id: str
    kind: str
    label: str
    parameter_binding: dict[str, float] | None = None
    metric: str | None = None


@dataclass(frozen=True)
class Decomposition:
    kind: str  # DECOMP_AND | DECOMP_XOR
    parent: str
    children: tuple[str, ...]


@dataclass(frozen=True)
class Contribution:
    source: str
    target: str
    weight: float


@dataclass(frozen=True)
class DesignAlternative:
    """One XOR selection per group, resolved to concrete rule parameters."""

    alternative_id: str
    index: int
    selections: dict[str, str]  # xor parent -> selected child
    resolved_params: SafetyRuleParams

    def to_dict(self) -> dict:
        return {"id": self.alternative_id, "index": self.index,
                "selections": dict(self.selections),
                "params": self.resolved_params.to_dict()}


@dataclass
class GoalModel:
    name: str
    nodes: tuple[GoalNode, ...]
    decompositions: tuple[Decomposition, ...]
    contributions: tuple[Contribution, ...]
    rule_defaults: dict[str, float]
    _by_id: dict[str, GoalNode] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self._by_id = {n.node_id: n for n in self.nodes}

    def node(self, node_id: str) -> GoalNode:
        return self._by_id[node_id]

    def children_of(self, node_id: str) -> tuple[str, ...]:
        for d in self.decompositions:
            if d.parent == node_id:
                return d.children
        return ()

    def xor_groups(self) -> tuple[Decomposition, ...]:
        return tuple(d for d in self.decompositions if d.kind == DECOMP_XOR)

    def leaves(self) -> tuple[GoalNode, ...]:
        parents = {d.parent for d in self.decompositions}
        return tuple(n for n in self.nodes if n.node_id not in parents)


def _parse(doc: dict) -> GoalModel:
    try:
        nodes = tuple(
            GoalNode(node_id=n["id"], kind=n["kind"], label=n.get("label", n["id"]),
                     parameter_binding={k: float(v) for k, v in n["parameter_binding"].items()}
                     if n.get("parameter_binding") else None,
                     metric=n.get("metric"))
            for n in doc["nodes"])
        decomps = tuple(
            Decomposition(kind=e["kind"], parent=e["parent"], children=tuple(e["children"]))
            for e in doc.get("edges", []))
        contribs = tuple(
            Contribution(source=c["source"], target=c["target"], weight=float(c["weight"]))
            for c in doc.get("contributions", []))
        return GoalModel(name=doc.get("name", "goal-model"), nodes=nodes,
                         decompositions=decomps, contributions=contribs,
                         rule_defaults={k: float(v) for k, v in doc.get("rule_defaults", {}).items()})
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"malformed goal-model document: {exc}") from exc


def _validate(model: GoalModel) -> None:
    ids = [n.node_id for n in model.nodes]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate node ids")
    known = set(ids)
    seen_parents: set[str] = set()
    for d in model.decompositions:
        if d.kind not in (DECOMP_AND, DECOMP_XOR):
            raise ValidationError(f"unknown decomposition kind {d.kind!r}")
        if d.parent not in known or any(c not in known for c in d.children):
            raise ValidationError(f"decomposition under {d.parent!r} references unknown nodes")
        if d.parent in seen_parents:
            raise ValidationError(f"node {d.parent!r} has more than one decomposition")
        seen_parents.add(d.parent)
        if not d.children:
            raise ValidationError(f"decomposition under {d.parent!r} has no children")
        if d.kind == DECOMP_XOR and len(d.children) < 2:
            raise ValidationError(f"XOR group under {d.parent!r} needs at least 2 children")
    for c in model.contributions:
        if c.source not in known or c.target not in known:
            raise ValidationError("contribution references unknown nodes")
        if not -1.0 <= c.weight <= 1.0:
            raise ValidationError(f"contribution weight {c.weight} outside [-1, 1]")
    for n in model.nodes:
        if n.kind not in NODE_KINDS:
            raise ValidationError(f"node {n.node_id!r} has unknown kind {n.kind!r}")
    # leaf obligations
    leaf_ids = {n.node_id for n in model.leaves()}
    for n in model.nodes:
        if n.parameter_binding is not None:
            if n.kind != KIND_TASK or n.node_id not in leaf_ids:
                raise ValidationError(
                    f"parameter binding on {n.node_id!r}: only allowed on task leaves")
        if n.metric is not None and n.node_id not in leaf_ids:
            raise ValidationError(f"metric binding on non-leaf {n.node_id!r}")
        if n.node_id in leaf_ids and n.metric is None and n.parameter_binding is None:
            raise ValidationError(
                f"leaf {n.node_id!r} carries neither a metric nor a parameter binding")
    # acyclicity over decomposition + contribution edges
    edges: dict[str, set[str]] = {i: set() for i in known}
    for d in model.decompositions:
        for c in d.children:
            edges[c].add(d.parent)  # value flows child -> parent
    for c in model.contributions:
        edges[c.source].add(c.target)
    state: dict[str, int] = {}

    def visit(nid: str, stack: list[str]) -> None:
        mark = state.get(nid, 0)
        if mark == 1:
            raise ValidationError(f"cycle through {' -> '.join(stack + [nid])}")
        if mark == 2:
            return
        state[nid] = 1
        for nxt in edges[nid]:
            visit(nxt, stack + [nid])
        state[nid] = 2

    for nid in known:
        visit(nid, [])


def load_goal_model(source: str | Path | dict) -> GoalModel:
    """Load and validate a goal model from a dict, packaged name, or file path."""
    if isinstance(source, dict):
        doc = source
    else:
        ref = str(source)
        if "/" not in ref and not ref.endswith(".json") and not Path(ref).exists():
            try:
                text = resources.files("warehouse_twin.data").joinpath(f"{ref}_goals.json").read_text()
            except FileNotFoundError:
                raise ParseError(f"unknown packaged goal model {ref!r}")
        else:
            path = Path(ref)
            if not path.exists():
                raise ParseError(f"goal-model file not found: {ref}")
            text = path.read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"goal-model document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("goal-model document must be a JSON object")
    version = doc.get("version", 1)
    if version != 1:
        raise ParseError(f"unsupported goal-model format version {version!r}")
    model = _parse(doc)
    _validate(model)
    return model


def default_goal_model() -> GoalModel:
    return load_goal_model("default")


def enumerate_alternatives(model: GoalModel) -> list[DesignAlternative]:
    """Cartesian product of XOR selections, resolved to rule parameters.

    Order is deterministic: groups and children in document order.  A model
    with no XOR group yields the single baseline alternative.
    """
    groups = model.xor_groups()
    always_on = [n for n in model.leaves()
                 if n.parameter_binding is not None and not any(n.node_id in g.children for g in groups)]
    alternatives: list[DesignAlternative] = []
    combos = itertools.product(*(g.children for g in groups)) if groups else [()]
    for index, combo in enumerate(combos):
        params = dict(model.rule_defaults)
        for n in always_on:
            params.update(n.parameter_binding)
        for child_id in combo:
            binding = model.node(child_id).parameter_binding
            if binding:
                params.update(binding)
        alt_id = "+".join(combo) if combo else "baseline"
        alternatives.append(DesignAlternative(
            alternative_id=alt_id,
            index=index,
            selections={g.parent: child for g, child in zip(groups, combo)},
            resolved_params=SafetyRuleParams.from_dict(params),
        ))
    return alternatives


def evaluate_satisfaction(model: GoalModel, metric_values: dict[str, float],
                          alternative: DesignAlternative | None = None) -> dict[str, float]:
    """Propagate leaf values to every node; all outputs clamped to [0, 1].

    Leaves with a metric binding take the measured value; parameter-only
    leaves count as 1.  AND parents take the minimum of their children, XOR
    parents the selected child (first child when no alternative is given).
    """
    selections = dict(alternative.selections) if alternative else {}
    incoming: dict[str, list[Contribution]] = {}
    for c in model.contributions:
        incoming.setdefault(c.target, []).append(c)

    values: dict[str, float] = {}

    def value_of(node_id: str) -> float:
        if node_id in values:
            return values[node_id]
        node = model.node(node_id)
        children = model.children_of(node_id)
        if not children:
            if node.metric is not None:
                if node.metric not in metric_values:
                    raise MissingMetric(node.metric)
                base = float(metric_values[node.metric])
            else:
                base = 1.0
        else:
            decomp = next(d for d in model.decompositions if d.parent == node_id)
            if decomp.kind == DECOMP_AND:
                base = min(value_of(c) for c in children)
            else:
                chosen = selections.get(node_id, children[0])
                base = value_of(chosen)
        for contrib in incoming.get(node_id, ()):
            base += contrib.weight * value_of(contrib.source)
        base = min(1.0, max(0.0, base))
        values[node_id] = base
        return base

    for n in model.nodes:
        value_of(n.node_id)
    return values
