"""Causal-tree belief propagation and its embedding into a hierarchy.

``bp_propagate`` is the reference engine: one message pass up the tree and
one pass down, after Pearl. ``encode`` turns the same tree into a
:mod:`coghier.kernel` hierarchy whose single-tick behaviour reproduces those
beliefs; ``equivalence_check`` runs both and compares.

Conventions: a processor's conditional matrix ``M`` has rows indexed by
parent values and columns by its own values, with rows summing to one, so
``M @ d`` carries a child-space diagnostic into parent space and ``v @ M``
carries a parent-space context into child space. "No evidence" is the
all-ones external input. Every emitted support vector is renormalised; an
all-zero product means contradictory evidence and is reported as degenerate
rather than divided by zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import product
from typing import Mapping

import numpy as np

from . import kernel
from .kernel import (
    CognitiveNodeSpec,
    EdgeTriple,
    Hierarchy,
    KernelError,
    Tagged,
    default_spaces,
    emit_nothing,
    make_world_node_spec,
)


class DegenerateBeliefError(KernelError):
    """A support product collapsed to the zero vector."""

    def __init__(self, where: str):
        super().__init__(f"contradictory evidence: zero belief product at {where}")
        self.where = where


# ---------------------------------------------------------------------------
# Trees


@dataclass(frozen=True)
class Processor:
    """One tree node: supports, conditional matrix, external evidence.

    ``cond_matrix`` is required for every non-root processor and gives
    P(own value | parent value) with parent values indexing rows. The root
    carries its prior in ``causal``.
    """

    id: str
    feature_dim: int
    parent: str | None = None
    children: tuple[str, ...] = ()
    cond_matrix: np.ndarray | None = None
    diagnostic: np.ndarray | None = None
    causal: np.ndarray | None = None
    external_input: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = self.feature_dim
        uniform = np.full(n, 1.0 / n)
        if self.diagnostic is None:
            object.__setattr__(self, "diagnostic", uniform.copy())
        if self.causal is None:
            object.__setattr__(self, "causal", uniform.copy())
        if self.external_input is None:
            object.__setattr__(self, "external_input", np.ones(n))
        for name in ("diagnostic", "causal", "external_input"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.cond_matrix is not None:
            object.__setattr__(self, "cond_matrix", np.asarray(self.cond_matrix, dtype=float))


@dataclass(frozen=True)
class CausalTree:
    processors: Mapping[str, Processor]
    root: str

    def depth(self) -> int:
        def rec(pid: str) -> int:
            kids = self.processors[pid].children
            return 1 + max((rec(k) for k in kids), default=-1)

        return rec(self.root)

    def topological_ids(self) -> tuple[str, ...]:
        """Parents before children."""
        order: list[str] = []
        stack = [self.root]
        while stack:
            pid = stack.pop()
            order.append(pid)
            stack.extend(reversed(self.processors[pid].children))
        return tuple(order)


def tree_violations(tree: CausalTree) -> list[str]:
    """Structural checks; empty list means the tree is usable."""
    bad: list[str] = []
    procs = tree.processors
    if tree.root not in procs:
        return [f"root {tree.root!r} is not a processor"]
    seen: set[str] = set()
    stack = [tree.root]
    while stack:
        pid = stack.pop()
        if pid in seen:
            bad.append(f"cycle: processor {pid!r} reached twice")
            continue
        seen.add(pid)
        p = procs[pid]
        if p.feature_dim < 2:
            bad.append(f"{pid!r}: feature_dim must be at least 2")
        for vec_name in ("diagnostic", "causal", "external_input"):
            vec = getattr(p, vec_name)
            if vec.shape != (p.feature_dim,):
                bad.append(f"{pid!r}: {vec_name} has shape {vec.shape}, expected ({p.feature_dim},)")
            elif np.any(vec < 0):
                bad.append(f"{pid!r}: {vec_name} has negative entries")
        for child in p.children:
            if child not in procs:
                bad.append(f"{pid!r} lists unknown child {child!r}")
                continue
            c = procs[child]
            if c.parent != pid:
                bad.append(f"{child!r}: parent link does not match {pid!r}")
            if c.cond_matrix is None:
                bad.append(f"{child!r}: non-root processor without a conditional matrix")
            else:
                expected = (p.feature_dim, c.feature_dim)
                if c.cond_matrix.shape != expected:
                    bad.append(f"{child!r}: conditional matrix shape {c.cond_matrix.shape}, expected {expected}")
                elif np.any(np.abs(c.cond_matrix.sum(axis=1) - 1.0) > 1e-12):
                    bad.append(f"{child!r}: conditional matrix rows do not sum to 1")
                elif np.any(c.cond_matrix < 0):
                    bad.append(f"{child!r}: conditional matrix has negative entries")
            stack.append(child)
    if procs[tree.root].parent is not None:
        bad.append(f"root {tree.root!r} has a parent link")
    orphans = set(procs) - seen
    for pid in sorted(orphans):
        bad.append(f"processor {pid!r} is not reachable from the root")
    return bad


# ---------------------------------------------------------------------------
# Reference propagation


@dataclass(frozen=True)
class BeliefTable:
    """Per-processor normalised beliefs; degenerate ids have no entry."""

    beliefs: Mapping[str, np.ndarray]
    degenerate: frozenset[str] = frozenset()


def _normalize(vec: np.ndarray) -> np.ndarray | None:
    total = float(vec.sum())
    if total <= 0.0:
        return None
    return vec / total


def bp_propagate(tree: CausalTree) -> BeliefTable:
    """Exact single-pass message propagation over the tree.

    Upward: each processor's total diagnostic is its external input times
    the matrix-mapped diagnostics of its children. Downward: each child
    receives the product of its parent's external input, sibling messages
    and causal support, carried through its own conditional matrix. Belief
    is the normalised product of total diagnostic and causal support.
    """
    procs = tree.processors
    order = tree.topological_ids()

    up_msg: dict[str, np.ndarray] = {}
    lam: dict[str, np.ndarray] = {}
    for pid in reversed(order):
        p = procs[pid]
        total = p.external_input.copy()
        for child in p.children:
            total = total * up_msg[child]
        lam[pid] = total
        if p.parent is not None:
            msg = procs[pid].cond_matrix @ total
            normed = _normalize(msg)
            up_msg[pid] = msg if normed is None else normed

    causal_in: dict[str, np.ndarray] = {}
    root_prior = _normalize(procs[tree.root].causal)
    causal_in[tree.root] = (
        procs[tree.root].causal if root_prior is None else root_prior
    )
    for pid in order:
        p = procs[pid]
        for child in p.children:
            others = p.external_input * causal_in[pid]
            for sibling in p.children:
                if sibling != child:
                    others = others * up_msg[sibling]
            msg = others @ procs[child].cond_matrix
            normed = _normalize(msg)
            causal_in[child] = msg if normed is None else normed

    beliefs: dict[str, np.ndarray] = {}
    degenerate: set[str] = set()
    for pid in order:
        bel = _normalize(lam[pid] * causal_in[pid])
        if bel is None:
            degenerate.add(pid)
        else:
            beliefs[pid] = bel
    return BeliefTable(beliefs, frozenset(degenerate))


def enumerate_joint_beliefs(tree: CausalTree) -> BeliefTable:
    """Brute-force marginals from the explicit joint distribution.

    Sums prior(root) * prod P(child | parent) * prod evidence over every
    assignment of values to processors. Exponential; for small trees only.
    """
    procs = tree.processors
    order = tree.topological_ids()
    dims = [procs[pid].feature_dim for pid in order]
    index = {pid: i for i, pid in enumerate(order)}
    root_prior = procs[tree.root].causal / procs[tree.root].causal.sum()

    marginals = [np.zeros(d) for d in dims]
    for assignment in product(*(range(d) for d in dims)):
        weight = root_prior[assignment[index[tree.root]]]
        for pid in order:
            p = procs[pid]
            weight *= p.external_input[assignment[index[pid]]]
            if p.parent is not None:
                weight *= p.cond_matrix[assignment[index[p.parent]], assignment[index[pid]]]
        for i, val in enumerate(assignment):
            marginals[i][val] += weight

    beliefs: dict[str, np.ndarray] = {}
    degenerate: set[str] = set()
    for pid, marg in zip(order, marginals):
        normed = _normalize(marg)
        if normed is None:
            degenerate.add(pid)
        else:
            beliefs[pid] = normed
    return BeliefTable(beliefs, frozenset(degenerate))


# ---------------------------------------------------------------------------
# Embedding into a hierarchy


def _as_vectors(belief: tuple) -> tuple[tuple[np.ndarray, ...], np.ndarray]:
    slots, causal = belief
    return tuple(np.asarray(s, dtype=float) for s in slots), np.asarray(causal, dtype=float)


def node_belief(belief_state: tuple) -> np.ndarray:
    """Normalised product of all diagnostic slots and the causal support."""
    slots, causal = _as_vectors(belief_state)
    total = causal.copy()
    for slot in slots:
        total = total * slot
    normed = _normalize(total)
    if normed is None:
        raise DegenerateBeliefError("belief state")
    return normed


def _obs_tuple(n_slots: int, dim: int, slot: int, vec: np.ndarray) -> tuple[np.ndarray, ...]:
    out = [np.zeros(dim) for _ in range(n_slots)]
    out[slot] = vec
    return tuple(out)


def encode(tree: CausalTree, world_id: str = "N0") -> Hierarchy:
    """Build the hierarchy whose process update mirrors tree propagation.

    Each processor with m children becomes a node whose belief is a pair of
    (m + 1 diagnostic slots, causal support); slot 0 holds the externally
    sensed evidence and slot k the k-th child's contribution. Sensing edges
    emit zero vectors in every other slot so the observation update can sum
    its inputs; exactly one payload arrives per slot per tick. The world
    state is a mapping from processor id to its external input vector.
    """
    if tree_violations(tree):
        raise ValueError("cannot encode an ill-formed tree")
    procs = tree.processors
    nodes: list[CognitiveNodeSpec] = [make_world_node_spec(world_id)]
    edges: list[EdgeTriple] = []

    for pid in tree.topological_ids():
        p = procs[pid]
        m = len(p.children)
        nodes.append(_processor_node(p, m))
        edges.append(
            EdgeTriple(
                lower=world_id,
                upper=pid,
                sensing_fn=_external_sensing_fn(p, m),
            )
        )
        for k, child_id in enumerate(p.children, start=1):
            child = procs[child_id]
            edges.append(
                EdgeTriple(
                    lower=child_id,
                    upper=pid,
                    sensing_fn=_child_sensing_fn(p, m, k, child),
                    task_param_fn=emit_nothing,
                    context_fn=_context_fn(p, k, child),
                )
            )
    return Hierarchy(nodes=tuple(nodes), world_node=world_id, edges=tuple(edges))


def _processor_node(p: Processor, m: int) -> CognitiveNodeSpec:
    n_slots = m + 1

    def observation_update(observations: tuple, belief: tuple) -> tuple:
        slots, causal = _as_vectors(belief)
        if not observations:
            return belief
        summed = [np.zeros(p.feature_dim) for _ in range(n_slots)]
        for obs in observations:
            if len(obs) != n_slots:
                raise ValueError(f"observation has {len(obs)} slots, expected {n_slots}")
            for i, vec in enumerate(obs):
                summed[i] = summed[i] + np.asarray(vec, dtype=float)
        return tuple(summed), causal

    def prediction_update(contexts: tuple, actions: tuple, belief: tuple) -> tuple:
        del actions
        slots, causal = _as_vectors(belief)
        if not contexts:
            return slots, causal
        if len(contexts) != 1:
            raise ValueError(f"expected a single context value, got {len(contexts)}")
        return slots, np.asarray(contexts[0], dtype=float)

    initial = (tuple(p.diagnostic.copy() for _ in range(n_slots)), p.causal.copy())
    return CognitiveNodeSpec(
        node_id=p.id,
        spaces=default_spaces(p.id),
        policies={"idle": lambda _belief: ()},
        policy_selector=lambda _task_params: "idle",
        observation_update=observation_update,
        prediction_update=prediction_update,
        initial_belief=initial,
        initial_policy="idle",
    )


def _external_sensing_fn(p: Processor, m: int):
    obs_tag = default_spaces(p.id).observation_space

    def sensing(world_state: Mapping[str, np.ndarray]) -> tuple[Tagged, ...]:
        raw = np.asarray(world_state[p.id], dtype=float)
        vec = _normalize(raw)
        if vec is None:
            raise DegenerateBeliefError(f"external input of {p.id!r}")
        return (Tagged(obs_tag, _obs_tuple(m + 1, p.feature_dim, 0, vec)),)

    return sensing


def _child_sensing_fn(parent: Processor, m: int, k: int, child: Processor):
    obs_tag = default_spaces(parent.id).observation_space
    matrix = child.cond_matrix

    def sensing(belief: tuple) -> tuple[Tagged, ...]:
        slots, _causal = _as_vectors(belief)
        prod = slots[0].copy()
        for slot in slots[1:]:
            prod = prod * slot
        msg = _normalize(matrix @ prod)
        if msg is None:
            raise DegenerateBeliefError(f"upward message from {child.id!r}")
        return (Tagged(obs_tag, _obs_tuple(m + 1, parent.feature_dim, k, msg)),)

    return sensing


def _context_fn(parent: Processor, k: int, child: Processor):
    ctx_tag = default_spaces(child.id).context_space
    matrix = child.cond_matrix

    def context(belief: tuple) -> tuple[Tagged, ...]:
        slots, causal = _as_vectors(belief)
        prod = causal.copy()
        for i, slot in enumerate(slots):
            if i != k:
                prod = prod * slot
        msg = _normalize(prod @ matrix)
        if msg is None:
            raise DegenerateBeliefError(f"context for {child.id!r}")
        return (Tagged(ctx_tag, msg),)

    return context


def initial_world_state(tree: CausalTree) -> dict[str, np.ndarray]:
    return {pid: p.external_input.copy() for pid, p in tree.processors.items()}


# ---------------------------------------------------------------------------
# Equivalence harness


@dataclass(frozen=True)
class EquivalenceReport:
    passed: bool
    max_deviation: float
    ticks: int
    converged: bool
    tolerance: float
    degenerate: tuple[str, ...] = ()
    detail: str = ""


def equivalence_check(tree: CausalTree, tolerance: float = 1e-9) -> EquivalenceReport:
    """Propagate both ways and compare per-node beliefs.

    The encoded hierarchy is ticked until two consecutive states agree to
    1e-12 (a fixpoint), bounded by tree depth plus a confirming tick. The
    reference beliefs come from :func:`bp_propagate`.
    """
    oracle = bp_propagate(tree)
    if oracle.degenerate:
        return EquivalenceReport(
            passed=False,
            max_deviation=math.inf,
            ticks=0,
            converged=False,
            tolerance=tolerance,
            degenerate=tuple(sorted(oracle.degenerate)),
            detail="reference propagation hit contradictory evidence",
        )

    hierarchy = encode(tree)
    ah = kernel.init_active(hierarchy, initial_world_state(tree))
    max_ticks = tree.depth() + 2
    converged = False
    ticks = 0
    previous = None
    try:
        for ticks in range(1, max_ticks + 1):
            ah = kernel.process_update(ah)
            current = {pid: ah.node(pid).belief for pid in tree.processors}
            if previous is not None and kernel.payloads_close(previous, current, 1e-12):
                converged = True
                break
            previous = current
        deviation = 0.0
        for pid in tree.processors:
            bel = node_belief(ah.node(pid).belief)
            deviation = max(deviation, float(np.max(np.abs(bel - oracle.beliefs[pid]))))
    except DegenerateBeliefError as exc:
        return EquivalenceReport(
            passed=False,
            max_deviation=math.inf,
            ticks=ticks,
            converged=False,
            tolerance=tolerance,
            degenerate=(str(exc.where),),
            detail=str(exc),
        )
    passed = converged and deviation < tolerance
    detail = "" if converged else f"no fixpoint within {max_ticks} ticks"
    return EquivalenceReport(
        passed=passed,
        max_deviation=deviation,
        ticks=ticks,
        converged=converged,
        tolerance=tolerance,
        detail=detail,
    )


# ---------------------------------------------------------------------------
# Fixtures and generators


def thecat_tree() -> CausalTree:
    """Two-layer word/letter disambiguation fixture.

    A word recogniser with equal prior over the two candidate words sits
    above three letter recognisers. The outer letters are read unambiguously
    while the middle sensor cannot tell its two candidates apart; identity
    conditional matrices tie letter positions to words.
    """
    eye = np.eye(2)
    procs = {
        "N4": Processor(
            id="N4",
            feature_dim=2,
            children=("N1", "N2", "N3"),
            causal=np.array([0.5, 0.5]),
        ),
        "N1": Processor(
            id="N1", feature_dim=2, parent="N4", cond_matrix=eye,
            external_input=np.array([0.0, 1.0]),
        ),
        "N2": Processor(
            id="N2", feature_dim=2, parent="N4", cond_matrix=eye,
            external_input=np.array([0.5, 0.5]),
        ),
        "N3": Processor(
            id="N3", feature_dim=2, parent="N4", cond_matrix=eye,
            external_input=np.array([0.0, 1.0]),
        ),
    }
    return CausalTree(processors=procs, root="N4")


def random_tree(
    rng: np.random.Generator,
    max_depth: int = 4,
    max_branching: int = 3,
    dims: tuple[int, int] = (2, 5),
) -> CausalTree:
    """Seeded random tree with strictly positive evidence and priors."""
    n = int(rng.integers(dims[0], dims[1] + 1))

    def rand_vec() -> np.ndarray:
        return rng.uniform(0.05, 1.0, n)

    def rand_matrix() -> np.ndarray:
        m = rng.uniform(0.05, 1.0, (n, n))
        return m / m.sum(axis=1, keepdims=True)

    procs: dict[str, Processor] = {}
    counter = 0

    def build(parent: str | None, depth: int) -> str:
        nonlocal counter
        pid = f"P{counter}"
        counter += 1
        n_children = int(rng.integers(0, max_branching + 1)) if depth < max_depth else 0
        child_ids = []
        procs[pid] = Processor(
            id=pid,
            feature_dim=n,
            parent=parent,
            cond_matrix=None if parent is None else rand_matrix(),
            causal=rand_vec() if parent is None else None,
            external_input=rand_vec(),
        )
        for _ in range(n_children):
            child_ids.append(build(pid, depth + 1))
        procs[pid] = replace(procs[pid], children=tuple(child_ids))
        return pid

    root = build(None, 0)
    return CausalTree(processors=procs, root=root)


# ---------------------------------------------------------------------------
# Document format


def tree_to_document(tree: CausalTree) -> dict:
    """JSON-ready description: one record per processor, row-major matrix."""
    records = []
    for pid in tree.topological_ids():
        p = tree.processors[pid]
        rec: dict = {
            "id": p.id,
            "n": p.feature_dim,
            "parent": p.parent,
            "external_input": [float(x) for x in p.external_input],
        }
        if p.parent is None:
            rec["prior"] = [float(x) for x in p.causal]
        else:
            rec["matrix"] = [float(x) for x in p.cond_matrix.reshape(-1)]
        records.append(rec)
    return {"processors": records}


def tree_from_document(doc: dict) -> CausalTree:
    records = doc.get("processors")
    if not isinstance(records, list) or not records:
        raise ValueError("document must contain a non-empty 'processors' list")
    children: dict[str, list[str]] = {}
    roots = []
    for rec in records:
        if rec.get("parent") is None:
            roots.append(rec["id"])
        else:
            children.setdefault(rec["parent"], []).append(rec["id"])
    if len(roots) != 1:
        raise ValueError(f"document must have exactly one root processor, found {len(roots)}")

    procs: dict[str, Processor] = {}
    for rec in records:
        pid = rec["id"]
        n = int(rec["n"])
        parent = rec.get("parent")
        matrix = None
        causal = None
        if parent is None:
            prior = rec.get("prior")
            causal = None if prior is None else np.asarray(prior, dtype=float)
        else:
            flat = rec.get("matrix")
            if flat is None:
                raise ValueError(f"processor {pid!r} needs a conditional matrix")
            matrix = np.asarray(flat, dtype=float).reshape(n, n)
        ext = rec.get("external_input")
        procs[pid] = Processor(
            id=pid,
            feature_dim=n,
            parent=parent,
            children=tuple(children.get(pid, ())),
            cond_matrix=matrix,
            causal=causal,
            external_input=None if ext is None else np.asarray(ext, dtype=float),
        )
    return CausalTree(processors=procs, root=roots[0])


def beliefs_to_document(table: BeliefTable) -> dict:
    doc = {pid: [float(x) for x in vec] for pid, vec in sorted(table.beliefs.items())}
    if table.degenerate:
        doc["_degenerate"] = sorted(table.degenerate)
    return doc
