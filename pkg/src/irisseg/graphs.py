"""Architecture graphs and the two-pass merge procedure.

Parent networks are simple chains of convolution/pool operations. The
merge labels every node with (op, distance-from-input), contracts equal
labels, assigns longest-path distance-to-output, and contracts again on
(op, distance-to-output). Skip connections emerge where chains of
different depth share kernel sizes; back-translation turns multiple
predecessors into channel concatenations.
"""

from __future__ import annotations

import heapq
import json
import re
from dataclasses import dataclass, replace
from typing import Callable, Hashable, Iterable

from .errors import (
    ContractionCycle,
    InvalidParent,
    MissingChannel,
    ParseError,
    ValidationError,
)
from .netspec import INPUT_ID, OUTPUT_ID, LayerSpec, NetworkSpec

_OP_RE = re.compile(r"^(\d+)([CP])$")

SOURCE_LABEL = ("__source__",)
SINK_LABEL = ("__sink__",)


@dataclass(frozen=True)
class Op:
    """A layer operation: kC = k-by-k convolution, kP = k-by-k pooling."""

    kind: str  # "C" or "P"
    size: int

    def __post_init__(self):
        if self.kind == "C":
            if self.size < 1 or self.size % 2 == 0:
                raise ValidationError(f"conv kernel must be positive odd, got {self.size}")
        elif self.kind == "P":
            if self.size < 2:
                raise ValidationError(f"pool window must be >= 2, got {self.size}")
        else:
            raise ValidationError(f"unknown op kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "Op":
        m = _OP_RE.match(text.strip())
        if not m:
            raise ParseError(f"bad op string {text!r} (expected e.g. '7C' or '2P')")
        return cls(kind=m.group(2), size=int(m.group(1)))

    def __str__(self) -> str:
        return f"{self.size}{self.kind}"


@dataclass(frozen=True)
class GraphNode:
    id: str
    op: Op | None  # None only for source/sink
    dist_in: int | None = None
    dist_out: int | None = None


@dataclass(frozen=True)
class ArchGraph:
    nodes: dict
    edges: frozenset
    source_id: str
    sink_id: str

    def preds(self, node_id: str) -> list[str]:
        return sorted(a for a, b in self.edges if b == node_id)

    def succs(self, node_id: str) -> list[str]:
        return sorted(b for a, b in self.edges if a == node_id)

    def internal_ids(self) -> list[str]:
        return [i for i in self.nodes if i not in (self.source_id, self.sink_id)]

    def op_of(self, node_id: str) -> Op:
        op = self.nodes[node_id].op
        if op is None:
            raise ValidationError(f"node {node_id} carries no op")
        return op


def make_graph(nodes: Iterable[GraphNode], edges: Iterable[tuple], source_id: str,
               sink_id: str) -> ArchGraph:
    node_map: dict = {}
    for n in nodes:
        if n.id in node_map:
            raise ValidationError(f"duplicate node id {n.id!r}")
        node_map[n.id] = n
    g = ArchGraph(node_map, frozenset(edges), source_id, sink_id)
    validate_graph(g)
    return g


def validate_graph(g: ArchGraph) -> None:
    if g.source_id not in g.nodes or g.sink_id not in g.nodes:
        raise ValidationError("source/sink missing from node set")
    for a, b in g.edges:
        if a not in g.nodes or b not in g.nodes:
            raise ValidationError(f"edge ({a!r}, {b!r}) references undefined node")
        if a == b:
            raise ValidationError(f"self-loop on {a!r}")
    indeg = {i: 0 for i in g.nodes}
    outdeg = {i: 0 for i in g.nodes}
    for a, b in g.edges:
        outdeg[a] += 1
        indeg[b] += 1
    for i in g.nodes:
        if i != g.source_id and indeg[i] == 0:
            raise ValidationError(f"node {i!r} has no in-edges but is not the source")
        if i != g.sink_id and outdeg[i] == 0:
            raise ValidationError(f"node {i!r} has no out-edges but is not the sink")
    if indeg[g.source_id] != 0:
        raise ValidationError("source has in-edges")
    if outdeg[g.sink_id] != 0:
        raise ValidationError("sink has out-edges")
    # Kahn's algorithm; leftovers mean a cycle.
    ready = [i for i in g.nodes if indeg[i] == 0]
    remaining = dict(indeg)
    seen = 0
    while ready:
        n = ready.pop()
        seen += 1
        for s in g.succs(n):
            remaining[s] -= 1
            if remaining[s] == 0:
                ready.append(s)
    if seen != len(g.nodes):
        raise ValidationError("graph contains a cycle")


def chain(ops: Iterable, prefix: str = "n") -> ArchGraph:
    """Chain graph in -> op1 -> ... -> opd -> out."""
    op_list = [o if isinstance(o, Op) else Op.parse(str(o)) for o in ops]
    if not op_list:
        raise InvalidParent("a parent chain needs at least one operation")
    nodes = [GraphNode(INPUT_ID, None, dist_in=0)]
    edges = []
    prev = INPUT_ID
    for i, op in enumerate(op_list, start=1):
        nid = f"{prefix}{i}"
        nodes.append(GraphNode(nid, op, dist_in=i))
        edges.append((prev, nid))
        prev = nid
    nodes.append(GraphNode(OUTPUT_ID, None))
    edges.append((prev, OUTPUT_ID))
    return make_graph(nodes, edges, INPUT_ID, OUTPUT_ID)


def chain_ops(g: ArchGraph) -> list[Op]:
    """Op sequence of a chain graph; InvalidParent if g is not a chain."""
    seq = []
    cur = g.source_id
    visited = {cur}
    while cur != g.sink_id:
        succs = g.succs(cur)
        if len(succs) != 1:
            raise InvalidParent(f"node {cur!r} has out-degree {len(succs)}; parents must be chains")
        nxt = succs[0]
        if len(g.preds(nxt)) != 1 or nxt in visited:
            raise InvalidParent(f"node {nxt!r} breaks the chain structure")
        visited.add(nxt)
        if nxt != g.sink_id:
            seq.append(g.op_of(nxt))
        cur = nxt
    if len(visited) != len(g.nodes):
        raise InvalidParent("parent has nodes off the source→sink path")
    if not seq:
        raise InvalidParent("a parent chain needs at least one operation")
    return seq


def label_by_input_distance(parents: list[ArchGraph]) -> ArchGraph:
    """Union of parent chains under shared source/sink, dist_in set."""
    if not parents:
        raise InvalidParent("empty parent set")
    nodes = [GraphNode(INPUT_ID, None, dist_in=0), GraphNode(OUTPUT_ID, None)]
    edges = []
    for pi, parent in enumerate(parents):
        ops = chain_ops(parent)
        prev = INPUT_ID
        for di, op in enumerate(ops, start=1):
            nid = f"p{pi}.{di}"
            nodes.append(GraphNode(nid, op, dist_in=di))
            edges.append((prev, nid))
            prev = nid
        edges.append((prev, OUTPUT_ID))
    return make_graph(nodes, edges, INPUT_ID, OUTPUT_ID)


def contract_by_label(g: ArchGraph, label_of: Callable[[GraphNode], Hashable]) -> ArchGraph:
    """Merge all internal nodes sharing a label, keeping every connection.

    Source and sink carry reserved labels, so they never merge with
    internal nodes. Merged node ids join the member ids with '+'; op must
    agree within a group; dist fields survive only when unanimous.
    """
    def full_label(node: GraphNode) -> Hashable:
        if node.id == g.source_id:
            return SOURCE_LABEL
        if node.id == g.sink_id:
            return SINK_LABEL
        return label_of(node)

    groups: dict = {}
    for node in g.nodes.values():
        groups.setdefault(full_label(node), []).append(node)

    new_id: dict = {}
    new_nodes = []
    for label, members in groups.items():
        members.sort(key=lambda n: n.id)
        if label == SOURCE_LABEL:
            nid = g.source_id
        elif label == SINK_LABEL:
            nid = g.sink_id
        else:
            nid = "+".join(n.id for n in members)
        ops = {n.op for n in members}
        if len(ops) != 1:
            raise ValidationError(f"label {label!r} groups nodes with different ops: {ops}")
        d_in = {n.dist_in for n in members}
        d_out = {n.dist_out for n in members}
        new_nodes.append(
            GraphNode(
                nid,
                members[0].op,
                dist_in=d_in.pop() if len(d_in) == 1 else None,
                dist_out=d_out.pop() if len(d_out) == 1 else None,
            )
        )
        for n in members:
            new_id[n.id] = nid

    new_edges = set()
    for a, b in g.edges:
        na, nb = new_id[a], new_id[b]
        if na == nb:
            raise ContractionCycle(f"label merges adjacent nodes {a!r} -> {b!r}")
        new_edges.add((na, nb))

    node_map = {n.id: n for n in new_nodes}
    result = ArchGraph(node_map, frozenset(new_edges), g.source_id, g.sink_id)
    try:
        validate_graph(result)
    except ValidationError as exc:
        if "cycle" in str(exc):
            raise ContractionCycle("contraction would create a cycle") from exc
        raise
    return result


def assign_output_distance(g: ArchGraph) -> ArchGraph:
    """dist_out = longest directed path length to the sink (sink = 0)."""
    order = topo_order(g)
    dist = {g.sink_id: 0}
    for nid in reversed(order):
        if nid == g.sink_id:
            continue
        dist[nid] = 1 + max(dist[s] for s in g.succs(nid))
    nodes = {nid: replace(n, dist_out=dist[nid]) for nid, n in g.nodes.items()}
    return ArchGraph(nodes, g.edges, g.source_id, g.sink_id)


def topo_order(g: ArchGraph) -> list[str]:
    """Kahn's algorithm; ties broken by dist_out descending then id."""
    indeg = {i: 0 for i in g.nodes}
    for _, b in g.edges:
        indeg[b] += 1

    def key(nid: str):
        d = g.nodes[nid].dist_out
        return (-(d if d is not None else 0), nid)

    heap = [key(i) for i in g.nodes if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, nid = heapq.heappop(heap)
        order.append(nid)
        for s in g.succs(nid):
            indeg[s] -= 1
            if indeg[s] == 0:
                heapq.heappush(heap, key(s))
    if len(order) != len(g.nodes):
        raise ValidationError("graph contains a cycle")
    return order


def spdnn_merge(parents: list[ArchGraph]) -> ArchGraph:
    """Full merge: label by dist_in, contract, label by dist_out, contract.

    Internal nodes of the result are renamed L01, L02, ... in emission
    (topological) order; dist_out values are preserved from the second
    labeling pass.
    """
    union = label_by_input_distance(parents)
    first = contract_by_label(union, lambda n: (n.op, n.dist_in))
    with_dist = assign_output_distance(first)
    merged = contract_by_label(with_dist, lambda n: (n.op, n.dist_out))
    order = [i for i in topo_order(merged) if i not in (merged.source_id, merged.sink_id)]
    rename = {old: f"L{k:02d}" for k, old in enumerate(order, start=1)}
    rename[merged.source_id] = merged.source_id
    rename[merged.sink_id] = merged.sink_id
    nodes = {rename[i]: replace(n, id=rename[i]) for i, n in merged.nodes.items()}
    edges = frozenset((rename[a], rename[b]) for a, b in merged.edges)
    return ArchGraph(nodes, edges, merged.source_id, merged.sink_id)


def order_preservation_check(parents: list[ArchGraph], merged: ArchGraph) -> bool:
    """True iff every parent's op sequence is a subsequence of some
    source→sink path of the merged graph."""
    order = topo_order(merged)
    for parent in parents:
        seq = chain_ops(parent)
        d = len(seq)
        reach = {nid: set() for nid in merged.nodes}
        reach[merged.source_id].add(0)
        for nid in order:
            for m in sorted(reach[nid]):
                for s in merged.succs(nid):
                    node = merged.nodes[s]
                    reach[s].add(m)
                    if node.op is not None and m < d and node.op == seq[m]:
                        reach[s].add(m + 1)
        if d not in reach[merged.sink_id]:
            return False
    return True


def graph_to_network(g: ArchGraph, channels: dict) -> NetworkSpec:
    """Back-translate a graph into a sized NetworkSpec.

    `channels` maps every node id (source, sink, internal) to its output
    channel count. Multiple predecessors become a channel concatenation
    in emission order. Pool nodes attach as pool_after markers on their
    single convolutional predecessor.
    """
    for nid in g.nodes:
        if nid not in channels:
            raise MissingChannel(f"node {nid!r} has no channel assignment")

    sink_preds = g.preds(g.sink_id)
    if len(sink_preds) != 1:
        raise ValidationError(
            f"graph must have exactly one node feeding the output, got {len(sink_preds)}"
        )

    # Resolve pool nodes: kP attaches to its single conv predecessor.
    pooled: set = set()
    bypass: dict = {}  # pool node -> its predecessor
    for nid in g.internal_ids():
        op = g.op_of(nid)
        if op.kind != "P":
            continue
        if op.size != 2:
            raise ValidationError(f"only 2P pooling is supported, got {op}")
        preds, succs = g.preds(nid), g.succs(nid)
        if len(preds) != 1 or len(succs) != 1:
            raise ValidationError(f"pool node {nid!r} must have exactly one pred and succ")
        p = preds[0]
        if p == g.source_id or g.op_of(p).kind != "C":
            raise ValidationError(f"pool node {nid!r} must follow a convolution")
        if succs[0] == g.sink_id:
            raise ValidationError(f"pool node {nid!r} may not feed the output directly")
        pooled.add(p)
        bypass[nid] = p
    for p in pooled:
        stray = [s for s in g.succs(p) if bypass.get(s) != p]
        if stray:
            raise ValidationError(
                f"pooled convolution {p!r} also feeds {stray}; consumers would "
                "disagree on its spatial size"
            )

    def effective_preds(nid: str) -> list[str]:
        return [bypass.get(p, p) for p in g.preds(nid)]

    order = [
        i for i in topo_order(g)
        if i not in (g.source_id, g.sink_id) and i not in bypass
    ]
    emit_index = {nid: k for k, nid in enumerate(order)}
    layers = []
    for nid in order:
        op = g.op_of(nid)
        preds = effective_preds(nid)
        preds.sort(key=lambda p: (-1 if p == g.source_id else emit_index[p], p))
        sources = tuple(INPUT_ID if p == g.source_id else p for p in preds)
        in_ch = sum(channels[p] for p in preds)
        layers.append(
            LayerSpec(
                id=nid,
                kernel=op.size,
                in_channels=in_ch,
                out_channels=channels[nid],
                activation="sigmoid" if nid == sink_preds[0] else "relu",
                input_sources=sources,
                pool_after=nid in pooled,
            )
        )
    spec = NetworkSpec(layers)
    spec.validate()
    return spec


# ---- JSON encoding ----

def graph_to_dict(g: ArchGraph) -> dict:
    order = topo_order(g)
    nodes = [
        {"id": nid, "op": str(g.nodes[nid].op)}
        for nid in order
        if nid not in (g.source_id, g.sink_id)
    ]
    edges = sorted([a, b] for a, b in g.edges)
    return {"nodes": nodes, "edges": edges, "input": g.source_id, "output": g.sink_id}


def graph_to_json(g: ArchGraph) -> str:
    return json.dumps(graph_to_dict(g), indent=2)


def graph_from_dict(doc: dict) -> ArchGraph:
    try:
        raw_nodes = doc["nodes"]
        raw_edges = doc["edges"]
        source_id = doc["input"]
        sink_id = doc["output"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"graph document missing field: {exc}") from exc
    if source_id == sink_id:
        raise ValidationError("input and output ids must differ")
    nodes = [GraphNode(source_id, None, dist_in=0), GraphNode(sink_id, None)]
    for rn in raw_nodes:
        try:
            nid, op_text = rn["id"], rn["op"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad node entry {rn!r}") from exc
        if nid in (source_id, sink_id):
            raise ValidationError(f"node id {nid!r} collides with input/output")
        nodes.append(GraphNode(str(nid), Op.parse(str(op_text))))
    edges = []
    for re_ in raw_edges:
        if not isinstance(re_, (list, tuple)) or len(re_) != 2:
            raise ParseError(f"bad edge entry {re_!r}")
        edges.append((str(re_[0]), str(re_[1])))
    return make_graph(nodes, edges, source_id, sink_id)


def parse_arch_graph(text: str) -> ArchGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return graph_from_dict(doc)


def parse_parent_set(text: str) -> list[ArchGraph]:
    """Parent-set document: {"parents": [graph, ...]} or a bare list."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if isinstance(doc, dict) and "parents" in doc:
        doc = doc["parents"]
    if not isinstance(doc, list):
        raise ParseError("parent set must be a list of graphs or {'parents': [...]}")
    if not doc:
        raise InvalidParent("empty parent set")
    return [graph_from_dict(d) for d in doc]
