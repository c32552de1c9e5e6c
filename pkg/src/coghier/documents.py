"""Declarative hierarchy documents.

A hierarchy's topology can be described in JSON: node ids bound to
registered operator bundles, edges bound to registered function bundles,
and a world node id. The operator bundles themselves are code, registered
under string keys; documents only wire keys to topology.

Document shape::

    {
      "world_node": "N0",
      "nodes": [{"id": "N1", "operators": "some.key"}, ...],
      "edges": [{"lower": "N0", "upper": "N1", "functions": "other.key"}, ...]
    }
"""

from __future__ import annotations

from typing import Any, Callable

from . import bp, servo
from .kernel import (
    CognitiveNodeSpec,
    EdgeTriple,
    Hierarchy,
    default_spaces,
    emit_nothing,
    make_world_node_spec,
)

NodeBuilder = Callable[[str], CognitiveNodeSpec]
EdgeBuilder = Callable[[str, str], tuple[Callable, Callable, Callable]]


class DocumentError(Exception):
    """A document could not be interpreted."""


class OperatorRegistry:
    """String keys to node-spec and edge-function builders."""

    def __init__(self) -> None:
        self._nodes: dict[str, NodeBuilder] = {}
        self._edges: dict[str, EdgeBuilder] = {}

    def register_node(self, key: str, builder: NodeBuilder) -> None:
        self._nodes[key] = builder

    def register_edge(self, key: str, builder: EdgeBuilder) -> None:
        self._edges[key] = builder

    def build_node(self, key: str, node_id: str) -> CognitiveNodeSpec:
        if key not in self._nodes:
            raise DocumentError(f"unknown node operator bundle {key!r}")
        return self._nodes[key](node_id)

    def build_edge(self, key: str, lower: str, upper: str) -> EdgeTriple:
        if key not in self._edges:
            raise DocumentError(f"unknown edge function bundle {key!r}")
        sensing, task, context = self._edges[key](lower, upper)
        return EdgeTriple(
            lower=lower, upper=upper, sensing_fn=sensing, task_param_fn=task, context_fn=context
        )


def load_hierarchy_document(doc: Any, registry: OperatorRegistry | None = None) -> Hierarchy:
    """Build a hierarchy from a parsed document; topology only, unvalidated."""
    if registry is None:
        registry = default_registry()
    if not isinstance(doc, dict):
        raise DocumentError("hierarchy document must be a JSON object")
    try:
        world = doc["world_node"]
        node_records = doc["nodes"]
        edge_records = doc["edges"]
    except KeyError as exc:
        raise DocumentError(f"hierarchy document is missing {exc.args[0]!r}") from None
    if not isinstance(node_records, list) or not isinstance(edge_records, list):
        raise DocumentError("'nodes' and 'edges' must be lists")

    nodes = []
    for rec in node_records:
        try:
            nid, key = rec["id"], rec["operators"]
        except (TypeError, KeyError):
            raise DocumentError(f"bad node record: {rec!r}") from None
        spec = registry.build_node(key, nid)
        if spec.node_id != nid:
            raise DocumentError(
                f"bundle {key!r} built node {spec.node_id!r}, document says {nid!r}"
            )
        nodes.append(spec)
    edges = []
    for rec in edge_records:
        try:
            lower, upper, key = rec["lower"], rec["upper"], rec["functions"]
        except (TypeError, KeyError):
            raise DocumentError(f"bad edge record: {rec!r}") from None
        edges.append(registry.build_edge(key, lower, upper))
    return Hierarchy(nodes=tuple(nodes), world_node=world, edges=tuple(edges))


def document_kind(doc: Any) -> str:
    """Classify a parsed document as 'hierarchy' or 'tree'."""
    if isinstance(doc, dict):
        if "processors" in doc:
            return "tree"
        if "nodes" in doc and "edges" in doc:
            return "hierarchy"
    raise DocumentError("document is neither a hierarchy nor a causal tree")


# ---------------------------------------------------------------------------
# Built-in bundles


def _inert_node(node_id: str) -> CognitiveNodeSpec:
    return CognitiveNodeSpec(
        node_id=node_id,
        spaces=default_spaces(node_id),
        policies={"idle": lambda _belief: ()},
        policy_selector=lambda _task_params: "idle",
        observation_update=lambda _obs, belief: belief,
        prediction_update=lambda _ctx, _actions, belief: belief,
        initial_belief=None,
        initial_policy="idle",
    )


def default_registry() -> OperatorRegistry:
    """Registry with the built-in bundles: noop, word/letter demo, servo."""
    registry = OperatorRegistry()
    registry.register_node("noop.node", _inert_node)
    registry.register_node("noop.world", lambda nid: make_world_node_spec(nid))
    registry.register_edge("noop.edge", lambda lower, upper: (emit_nothing, emit_nothing, emit_nothing))

    thecat = bp.encode(bp.thecat_tree())
    for nid in thecat.node_ids:
        registry.register_node(f"thecat.{nid}", _exact_node(thecat, nid))
    registry.register_edge("thecat.edge", _exact_edge(thecat, "thecat"))

    servo_h = servo.build_servo_hierarchy(servo.ServoParams())
    for nid in servo_h.node_ids:
        registry.register_node(f"servo.{nid}", _exact_node(servo_h, nid))
    registry.register_edge("servo.edge", _exact_edge(servo_h, "servo"))
    return registry


def _exact_node(hierarchy: Hierarchy, node_id: str) -> NodeBuilder:
    def build(nid: str) -> CognitiveNodeSpec:
        if nid != node_id:
            raise DocumentError(f"bundle is bound to node {node_id!r}, not {nid!r}")
        return hierarchy.node(node_id)

    return build


def _exact_edge(hierarchy: Hierarchy, bundle: str) -> EdgeBuilder:
    table = {(e.lower, e.upper): e for e in hierarchy.edges}

    def build(lower: str, upper: str) -> tuple[Callable, Callable, Callable]:
        edge = table.get((lower, upper))
        if edge is None:
            raise DocumentError(f"{bundle} has no edge ({lower!r}, {upper!r})")
        return edge.sensing_fn, edge.task_param_fn, edge.context_fn

    return build


def thecat_document() -> dict:
    """Document form of the word/letter demo hierarchy."""
    hierarchy = bp.encode(bp.thecat_tree())
    return {
        "world_node": hierarchy.world_node,
        "nodes": [{"id": nid, "operators": f"thecat.{nid}"} for nid in sorted(hierarchy.node_ids)],
        "edges": [
            {"lower": e.lower, "upper": e.upper, "functions": "thecat.edge"}
            for e in sorted(hierarchy.edges, key=lambda e: (e.lower, e.upper))
        ],
    }


def servo_document() -> dict:
    """Document form of the tracking-controller hierarchy (default params)."""
    hierarchy = servo.build_servo_hierarchy(servo.ServoParams())
    return {
        "world_node": hierarchy.world_node,
        "nodes": [{"id": nid, "operators": f"servo.{nid}"} for nid in sorted(hierarchy.node_ids)],
        "edges": [
            {"lower": e.lower, "upper": e.upper, "functions": "servo.edge"}
            for e in sorted(hierarchy.edges, key=lambda e: (e.lower, e.upper))
        ],
    }
