"""Core data model and two-phase update scheduler for cognitive hierarchies.

A hierarchy is a DAG of nodes over a distinguished world node. Observations
flow up the sensing graph (world node is the unique source) and task
parameters plus context flow back down the converse prediction graph (world
node is the unique sink). One tick of the process model is a full sensing
sweep followed by a full prediction sweep.

Everything here is functional: update operations take an ``ActiveHierarchy``
and return a new one, so a failed tick leaves the caller's state untouched.
Values exchanged between nodes travel as tagged payloads; the kernel checks
the tag against the receiving node's declared value spaces and never looks
at the payload itself.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable, Iterator, Mapping


# ---------------------------------------------------------------------------
# Errors


class KernelError(Exception):
    """Base class for kernel failures."""


class InvalidHierarchyError(KernelError):
    """Raised when an invalid hierarchy is activated."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        lines = "; ".join(v.detail for v in report.violations)
        super().__init__(f"hierarchy is not well-formed: {lines}")


class OperatorError(KernelError):
    """An operator or edge function failed; the tick was aborted.

    Carries the node whose update was in progress and, when the failure
    happened while evaluating an edge function, the (lower, upper) pair.
    """

    def __init__(self, message: str, node: str, edge: tuple[str, str] | None = None):
        self.node = node
        self.edge = edge
        where = f"node {node!r}" + (f", edge {edge!r}" if edge else "")
        super().__init__(f"{message} ({where})")


class TagMismatchError(OperatorError):
    """An edge function emitted a payload with the wrong tag."""


# ---------------------------------------------------------------------------
# Tagged payloads


@dataclass(frozen=True)
class Tagged:
    """A value labelled with the kind of slot it is destined for."""

    tag: str
    value: Any


def emit_nothing(*_args: Any) -> tuple:
    """Edge function of any arity that contributes no values."""
    return ()


# ---------------------------------------------------------------------------
# Static model


@dataclass(frozen=True)
class NodeValueSpaces:
    """Per-node tags for the five value kinds a node exchanges."""

    belief_space: str
    action_space: str
    task_param_space: str
    observation_space: str
    context_space: str


def default_spaces(node_id: str) -> NodeValueSpaces:
    """Distinct per-node tags derived from the node id."""
    return NodeValueSpaces(
        belief_space=f"belief:{node_id}",
        action_space=f"action:{node_id}",
        task_param_space=f"task:{node_id}",
        observation_space=f"obs:{node_id}",
        context_space=f"ctx:{node_id}",
    )


@dataclass(frozen=True)
class CognitiveNodeSpec:
    """A node's operator bundle.

    ``policies`` maps policy ids to functions from belief to an iterable of
    action values. ``policy_selector`` maps a tuple of task parameters to a
    policy id and must return ``initial_policy`` for the empty tuple.
    ``observation_update(observations, belief)`` folds a tuple of observation
    values into the belief; ``prediction_update(contexts, actions, belief)``
    folds downward context and the node's own fresh actions into the belief.
    All operators must be deterministic.

    For the world node the kernel calls
    ``prediction_update(contexts, task_params, world_state)`` and stores the
    result as the new world state; see :func:`make_world_node_spec`.
    """

    node_id: str
    spaces: NodeValueSpaces
    policies: Mapping[str, Callable[[Any], Iterable[Any]]]
    policy_selector: Callable[[tuple], str]
    observation_update: Callable[[tuple, Any], Any]
    prediction_update: Callable[[tuple, tuple, Any], Any]
    initial_belief: Any
    initial_policy: str


def make_world_node_spec(
    node_id: str,
    actuate: Callable[[tuple, Any], Any] | None = None,
    spaces: NodeValueSpaces | None = None,
) -> CognitiveNodeSpec:
    """Build the opaque world node.

    The world node never senses and never runs a policy. During the
    prediction sweep the kernel hands it the task parameters gathered from
    its upper neighbours; ``actuate(task_params, world_state)`` must return
    the new world state. Without ``actuate`` the world state is left alone.
    """

    def _update(contexts: tuple, task_params: tuple, world_state: Any) -> Any:
        del contexts
        if actuate is None:
            return world_state
        return actuate(task_params, world_state)

    return CognitiveNodeSpec(
        node_id=node_id,
        spaces=spaces or default_spaces(node_id),
        policies={"idle": lambda _belief: ()},
        policy_selector=lambda _task_params: "idle",
        observation_update=lambda _obs, belief: belief,
        prediction_update=_update,
        initial_belief=None,
        initial_policy="idle",
    )


@dataclass(frozen=True)
class EdgeTriple:
    """Functions linking a lower node to an upper node.

    ``sensing_fn(lower_belief)`` emits observations for the upper node;
    ``task_param_fn(upper_actions)`` emits task parameters for the lower
    node; ``context_fn(upper_belief)`` emits context for the lower node.
    Emitted values must be :class:`Tagged` with the receiving node's tag for
    that slot. For edges whose lower node is the world, ``sensing_fn``
    receives the world state instead of a belief.
    """

    lower: str
    upper: str
    sensing_fn: Callable[[Any], Iterable[Tagged]]
    task_param_fn: Callable[[tuple], Iterable[Tagged]] = emit_nothing
    context_fn: Callable[[Any], Iterable[Tagged]] = emit_nothing


@dataclass(frozen=True)
class Hierarchy:
    """A set of node specs plus the edge triples wiring them together."""

    nodes: tuple[CognitiveNodeSpec, ...]
    world_node: str
    edges: tuple[EdgeTriple, ...]

    def __post_init__(self) -> None:
        by_id = {spec.node_id: spec for spec in self.nodes}
        into: dict[str, list[EdgeTriple]] = {nid: [] for nid in by_id}
        above: dict[str, list[EdgeTriple]] = {nid: [] for nid in by_id}
        for edge in self.edges:
            if edge.upper in into:
                into[edge.upper].append(edge)
            if edge.lower in above:
                above[edge.lower].append(edge)
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(
            self, "_into", {k: tuple(sorted(v, key=lambda e: e.lower)) for k, v in into.items()}
        )
        object.__setattr__(
            self, "_above", {k: tuple(sorted(v, key=lambda e: e.upper)) for k, v in above.items()}
        )

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(self._by_id)

    def node(self, node_id: str) -> CognitiveNodeSpec:
        return self._by_id[node_id]

    def sensing_sources(self, node_id: str) -> tuple[EdgeTriple, ...]:
        """Edges delivering observations to ``node_id``, sorted by source."""
        return self._into[node_id]

    def upper_edges(self, node_id: str) -> tuple[EdgeTriple, ...]:
        """Edges connecting ``node_id`` to its upper neighbours, sorted."""
        return self._above[node_id]


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def format_lines(self) -> list[str]:
        return [f"{v.kind}: {v.detail}" for v in self.violations]


def validate(hierarchy: Hierarchy) -> ValidationReport:
    """Check well-formedness; violations are data, not exceptions."""
    found: list[Violation] = []
    ids = [spec.node_id for spec in hierarchy.nodes]
    seen: set[str] = set()
    for nid in ids:
        if nid in seen:
            found.append(Violation("duplicate_node", f"node id {nid!r} declared twice"))
        seen.add(nid)
    world = hierarchy.world_node
    if world not in seen:
        found.append(Violation("world_missing", f"world node {world!r} is not among the nodes"))

    pairs: set[tuple[str, str]] = set()
    usable_edges: list[EdgeTriple] = []
    for edge in hierarchy.edges:
        bad = False
        for end in (edge.lower, edge.upper):
            if end not in seen:
                found.append(Violation("unknown_node", f"edge references unknown node {end!r}"))
                bad = True
        if edge.lower == edge.upper:
            found.append(Violation("self_edge", f"edge from {edge.lower!r} to itself"))
            bad = True
        if (edge.lower, edge.upper) in pairs:
            found.append(
                Violation("duplicate_edge", f"more than one edge for ({edge.lower!r}, {edge.upper!r})")
            )
            bad = True
        pairs.add((edge.lower, edge.upper))
        if not bad:
            usable_edges.append(edge)

    if world in seen:
        preceded: dict[str, set[str]] = {nid: set() for nid in seen}
        for edge in usable_edges:
            preceded[edge.upper].add(edge.lower)
        cyclic = _cycle_members(set(seen), preceded)
        if cyclic:
            found.append(
                Violation("cycle", "sensing graph has a cycle through " + ", ".join(sorted(cyclic)))
            )
        if preceded[world]:
            found.append(
                Violation(
                    "unique_source",
                    f"world node {world!r} has incoming sensing edges from "
                    + ", ".join(sorted(preceded[world])),
                )
            )
        for nid in sorted(seen - {world}):
            if not preceded[nid]:
                found.append(
                    Violation(
                        "unique_source",
                        f"node {nid!r} has no incoming sensing edge; world must be the only source",
                    )
                )
        reachable = {world}
        frontier = [world]
        children: dict[str, list[str]] = {nid: [] for nid in seen}
        for edge in usable_edges:
            children[edge.lower].append(edge.upper)
        while frontier:
            cur = frontier.pop()
            for nxt in children[cur]:
                if nxt not in reachable:
                    reachable.add(nxt)
                    frontier.append(nxt)
        for nid in sorted(seen - reachable):
            found.append(
                Violation("unreachable", f"node {nid!r} is not reachable from the world node")
            )

    for spec in hierarchy.nodes:
        if spec.initial_policy not in spec.policies:
            found.append(
                Violation(
                    "initial_policy",
                    f"node {spec.node_id!r}: initial policy {spec.initial_policy!r} is not a known policy",
                )
            )
        try:
            default = spec.policy_selector(())
        except Exception as exc:  # selector is user code
            found.append(
                Violation(
                    "policy_default",
                    f"node {spec.node_id!r}: policy selector failed on the empty set: {exc}",
                )
            )
        else:
            if default != spec.initial_policy:
                found.append(
                    Violation(
                        "policy_default",
                        f"node {spec.node_id!r}: policy selector maps the empty set to "
                        f"{default!r}, expected the initial policy {spec.initial_policy!r}",
                    )
                )
    return ValidationReport(tuple(found))


def _cycle_members(ids: set[str], preceded: Mapping[str, set[str]]) -> set[str]:
    """Kahn elimination; whatever cannot be scheduled lies on a cycle."""
    remaining = {nid: set(pre) for nid, pre in preceded.items()}
    ready = [nid for nid, pre in remaining.items() if not pre]
    while ready:
        nid = ready.pop()
        del remaining[nid]
        for other, pre in remaining.items():
            if nid in pre:
                pre.discard(nid)
                if not pre:
                    ready.append(other)
    return set(remaining)


# ---------------------------------------------------------------------------
# Topological ordering


def canonical_topological_order(
    ids: Iterable[str], preceded: Mapping[str, set[str]]
) -> tuple[str, ...]:
    """Deterministic Kahn order; ties broken by sorting node ids."""
    remaining = {nid: set(preceded.get(nid, ())) & set(ids) for nid in ids}
    order: list[str] = []
    while remaining:
        ready = sorted(nid for nid, pre in remaining.items() if not pre)
        if not ready:
            raise ValueError("dependency graph has a cycle")
        for nid in ready:
            order.append(nid)
            del remaining[nid]
        for pre in remaining.values():
            pre.difference_update(ready)
    return tuple(order)


def all_topological_orders(
    ids: Iterable[str], preceded: Mapping[str, set[str]]
) -> Iterator[tuple[str, ...]]:
    """Yield every linearisation of the partial order (small graphs only)."""
    ids = set(ids)
    preceded = {nid: set(preceded.get(nid, ())) & ids for nid in ids}

    def rec(done: tuple[str, ...], left: set[str]) -> Iterator[tuple[str, ...]]:
        if not left:
            yield done
            return
        for nid in sorted(left):
            if preceded[nid] <= set(done):
                yield from rec(done + (nid,), left - {nid})

    yield from rec((), ids)


def sensing_dependencies(hierarchy: Hierarchy) -> dict[str, set[str]]:
    """lower-before-upper constraints among non-world nodes."""
    world = hierarchy.world_node
    deps: dict[str, set[str]] = {nid: set() for nid in hierarchy.node_ids if nid != world}
    for edge in hierarchy.edges:
        if edge.lower != world and edge.upper != world:
            deps[edge.upper].add(edge.lower)
    return deps


def prediction_dependencies(hierarchy: Hierarchy) -> dict[str, set[str]]:
    """upper-before-lower constraints over all nodes, world included."""
    deps: dict[str, set[str]] = {nid: set() for nid in hierarchy.node_ids}
    for edge in hierarchy.edges:
        deps[edge.lower].add(edge.upper)
    return deps


def _check_order(
    order: Iterable[str], ids: set[str], preceded: Mapping[str, set[str]], what: str
) -> tuple[str, ...]:
    order = tuple(order)
    if set(order) != ids or len(order) != len(ids):
        raise ValueError(f"{what} order must cover each node exactly once")
    position = {nid: i for i, nid in enumerate(order)}
    for nid, pre in preceded.items():
        for p in pre:
            if position[p] > position[nid]:
                raise ValueError(f"{what} order violates {p!r} before {nid!r}")
    return order


# ---------------------------------------------------------------------------
# Runtime state


@dataclass(frozen=True)
class ActiveNode:
    """Mutable-per-tick facet of one node: belief, policy, actions."""

    node_id: str
    belief: Any
    policy: str
    actions: tuple


@dataclass(frozen=True)
class ActiveHierarchy:
    """Snapshot of the whole system between (or during) ticks."""

    hierarchy: Hierarchy
    active: Mapping[str, ActiveNode]
    world_state: Any

    def node(self, node_id: str) -> ActiveNode:
        return self.active[node_id]


def with_world_state(ah: ActiveHierarchy, world_state: Any) -> ActiveHierarchy:
    return replace(ah, world_state=world_state)


def init_active(hierarchy: Hierarchy, world_state: Any) -> ActiveHierarchy:
    """Activate a hierarchy: initial beliefs and policies, no actions yet."""
    report = validate(hierarchy)
    if not report.ok:
        raise InvalidHierarchyError(report)
    active = {
        spec.node_id: ActiveNode(spec.node_id, spec.initial_belief, spec.initial_policy, ())
        for spec in hierarchy.nodes
    }
    return ActiveHierarchy(hierarchy, active, world_state)


# ---------------------------------------------------------------------------
# Update operations


def _call(fn: Callable, args: tuple, node: str, edge: tuple[str, str] | None = None) -> Any:
    try:
        return fn(*args)
    except KernelError:
        raise
    except Exception as exc:
        raise OperatorError(f"operator failed: {exc}", node=node, edge=edge) from exc


def _collect(
    emitted: Iterable[Tagged], expected_tag: str, node: str, edge: tuple[str, str]
) -> list[Any]:
    values = []
    for item in emitted:
        if not isinstance(item, Tagged):
            raise TagMismatchError(
                f"edge emitted an untagged payload of type {type(item).__name__}",
                node=node,
                edge=edge,
            )
        if item.tag != expected_tag:
            raise TagMismatchError(
                f"edge emitted tag {item.tag!r}, node expects {expected_tag!r}",
                node=node,
                edge=edge,
            )
        values.append(item.value)
    return values


def _lower_state(ah: ActiveHierarchy, node_id: str) -> Any:
    if node_id == ah.hierarchy.world_node:
        return ah.world_state
    return ah.active[node_id].belief


def sensing_node_update(ah: ActiveHierarchy, node_id: str) -> ActiveHierarchy:
    """Fold the observations from all incoming sensing edges into one node.

    Observations arrive as the multiset union over the node's incoming
    edges, ordered by source node id. Only this node's belief changes.
    """
    hierarchy = ah.hierarchy
    if node_id == hierarchy.world_node:
        raise ValueError("the world node does not perform sensing updates")
    spec = hierarchy.node(node_id)
    observations: list[Any] = []
    for edge in hierarchy.sensing_sources(node_id):
        pair = (edge.lower, edge.upper)
        emitted = _call(edge.sensing_fn, (_lower_state(ah, edge.lower),), node_id, pair)
        observations.extend(_collect(emitted, spec.spaces.observation_space, node_id, pair))
    current = ah.active[node_id]
    belief = _call(spec.observation_update, (tuple(observations), current.belief), node_id)
    active = dict(ah.active)
    active[node_id] = replace(current, belief=belief)
    return replace(ah, active=active)


def prediction_node_update(ah: ActiveHierarchy, node_id: str) -> ActiveHierarchy:
    """Select a policy, fire it, and fold context plus actions into belief.

    With no upper neighbours the policy is kept and fires with empty
    context. Otherwise task parameters gathered from the uppers' current
    actions select the policy, the policy fires on the current belief, and
    context gathered from the uppers' current beliefs joins the fresh
    actions in the prediction update. For the world node the gathered task
    parameters are folded into the world state instead.
    """
    hierarchy = ah.hierarchy
    spec = hierarchy.node(node_id)
    uppers = hierarchy.upper_edges(node_id)

    task_params: list[Any] = []
    contexts: list[Any] = []
    for edge in uppers:
        pair = (edge.lower, edge.upper)
        upper_active = ah.active[edge.upper]
        emitted = _call(edge.task_param_fn, (upper_active.actions,), node_id, pair)
        task_params.extend(_collect(emitted, spec.spaces.task_param_space, node_id, pair))
        emitted = _call(edge.context_fn, (upper_active.belief,), node_id, pair)
        contexts.extend(_collect(emitted, spec.spaces.context_space, node_id, pair))

    if node_id == hierarchy.world_node:
        world_state = _call(
            spec.prediction_update, (tuple(contexts), tuple(task_params), ah.world_state), node_id
        )
        return replace(ah, world_state=world_state)

    current = ah.active[node_id]
    if not uppers:
        policy_id = current.policy
    else:
        policy_id = _call(spec.policy_selector, (tuple(task_params),), node_id)
        if policy_id not in spec.policies:
            raise OperatorError(f"selector chose unknown policy {policy_id!r}", node=node_id)
    actions = tuple(_call(spec.policies[policy_id], (current.belief,), node_id))
    belief = _call(spec.prediction_update, (tuple(contexts), actions, current.belief), node_id)
    active = dict(ah.active)
    active[node_id] = ActiveNode(node_id, belief, policy_id, actions)
    return replace(ah, active=active)


def sensing_process_update(
    ah: ActiveHierarchy, order: Iterable[str] | None = None
) -> ActiveHierarchy:
    """Sweep observations up: every non-world node, sources before sinks."""
    preceded = sensing_dependencies(ah.hierarchy)
    ids = set(preceded)
    if order is None:
        order = canonical_topological_order(ids, preceded)
    else:
        order = _check_order(order, ids, preceded, "sensing")
    for node_id in order:
        ah = sensing_node_update(ah, node_id)
    return ah


def prediction_process_update(
    ah: ActiveHierarchy, order: Iterable[str] | None = None
) -> ActiveHierarchy:
    """Sweep task parameters and context down: uppers first, world last."""
    preceded = prediction_dependencies(ah.hierarchy)
    ids = set(preceded)
    if order is None:
        order = canonical_topological_order(ids, preceded)
    else:
        order = _check_order(order, ids, preceded, "prediction")
    for node_id in order:
        ah = prediction_node_update(ah, node_id)
    return ah


def process_update(ah: ActiveHierarchy) -> ActiveHierarchy:
    """One tick: a full sensing sweep, then a full prediction sweep."""
    return prediction_process_update(sensing_process_update(ah))


# ---------------------------------------------------------------------------
# Structural comparison helpers (exact and approximate)


def payloads_equal(a: Any, b: Any) -> bool:
    """Exact structural equality over nested tuples, arrays and scalars."""
    import numpy as np

    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        a_arr, b_arr = np.asarray(a), np.asarray(b)
        return a_arr.shape == b_arr.shape and bool(np.array_equal(a_arr, b_arr))
    if isinstance(a, (tuple, list)) and isinstance(b, (tuple, list)):
        return len(a) == len(b) and all(payloads_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(payloads_equal(a[k], b[k]) for k in a)
    return bool(a == b)


def payloads_close(a: Any, b: Any, atol: float) -> bool:
    """Like :func:`payloads_equal` but numeric leaves may differ by atol."""
    import numpy as np

    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        return a_arr.shape == b_arr.shape and bool(np.allclose(a_arr, b_arr, rtol=0.0, atol=atol))
    if isinstance(a, (tuple, list)) and isinstance(b, (tuple, list)):
        return len(a) == len(b) and all(payloads_close(x, y, atol) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(payloads_close(a[k], b[k], atol) for k in a)
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return abs(float(a) - float(b)) <= atol
    return bool(a == b)


def active_states_equal(a: ActiveHierarchy, b: ActiveHierarchy) -> bool:
    """Bit-identical comparison of two runtime states (world state included)."""
    if a.active.keys() != b.active.keys():
        return False
    for nid in a.active:
        x, y = a.active[nid], b.active[nid]
        if x.policy != y.policy:
            return False
        if not payloads_equal(x.actions, y.actions):
            return False
        if not payloads_equal(x.belief, y.belief):
            return False
    return payloads_equal(a.world_state, b.world_state)
