"""Sized network specifications.

A NetworkSpec is the bridge between architecture graphs and the runtime
engine: a topologically ordered list of convolution layers with concrete
channel widths, concatenation inputs, and optional pool/unpool/batch-norm
markers (used by the SegNet-basic baseline).

JSON encoding matches the architecture-graph encoding (nodes/edges/input/
output) plus `channels` and `concat_inputs`; the optional per-node fields
`activation`, `pool_after`, `unpool_before`, `batch_norm` extend it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import ParseError, ValidationError

INPUT_ID = "in"
OUTPUT_ID = "out"
ACTIVATIONS = ("relu", "sigmoid", "none")


@dataclass(frozen=True)
class LayerSpec:
    id: str
    kernel: int
    in_channels: int
    out_channels: int
    activation: str = "relu"
    input_sources: tuple[str, ...] = (INPUT_ID,)
    pool_after: bool = False
    unpool_before: bool = False
    batch_norm: bool = False


@dataclass
class NetworkSpec:
    layers: list[LayerSpec] = field(default_factory=list)

    @property
    def input_channels(self) -> int:
        return self.layers[0].in_channels if self.layers else 1

    @property
    def output_id(self) -> str:
        return self.layers[-1].id

    def layer(self, layer_id: str) -> LayerSpec:
        for ls in self.layers:
            if ls.id == layer_id:
                return ls
        raise KeyError(layer_id)

    def validate(self) -> None:
        if not self.layers:
            raise ValidationError("empty NetworkSpec")
        out_of: dict[str, int] = {}
        consumers: dict[str, int] = {}
        first = self.layers[0]
        for ls in self.layers:
            if ls.id in out_of or ls.id == INPUT_ID:
                raise ValidationError(f"duplicate layer id {ls.id!r}")
            if ls.kernel < 1 or ls.kernel % 2 == 0:
                raise ValidationError(f"layer {ls.id}: kernel must be odd, got {ls.kernel}")
            if ls.activation not in ACTIVATIONS:
                raise ValidationError(f"layer {ls.id}: unknown activation {ls.activation!r}")
            total = 0
            for src in ls.input_sources:
                if src == INPUT_ID:
                    total += first.in_channels if ls is first else self.input_channels
                elif src in out_of:
                    total += out_of[src]
                    consumers[src] = consumers.get(src, 0) + 1
                else:
                    raise ValidationError(
                        f"layer {ls.id}: source {src!r} not defined before it"
                    )
            if ls is first:
                if ls.input_sources != (INPUT_ID,):
                    raise ValidationError("first layer must read exactly the network input")
            elif total != ls.in_channels:
                raise ValidationError(
                    f"layer {ls.id}: in_channels {ls.in_channels} != "
                    f"sum of source channels {total}"
                )
            out_of[ls.id] = ls.out_channels
        last = self.layers[-1]
        if last.out_channels != 1:
            raise ValidationError("final layer must emit 1 channel")
        if last.activation != "sigmoid":
            raise ValidationError("final layer must use sigmoid activation")
        if consumers.get(last.id):
            raise ValidationError("final layer output may not feed another layer")

    # ---- JSON (graph-style encoding) ----

    def to_dict(self) -> dict:
        nodes = []
        edges: list[list[str]] = []
        channels: dict[str, int] = {INPUT_ID: self.input_channels}
        concat: dict[str, list[str]] = {}
        for ls in self.layers:
            node: dict = {"id": ls.id, "op": f"{ls.kernel}C"}
            if ls.activation != "relu":
                node["activation"] = ls.activation
            if ls.pool_after:
                node["pool_after"] = True
            if ls.unpool_before:
                node["unpool_before"] = True
            if ls.batch_norm:
                node["batch_norm"] = True
            nodes.append(node)
            channels[ls.id] = ls.out_channels
            for src in ls.input_sources:
                edges.append([src if src != INPUT_ID else INPUT_ID, ls.id])
            if len(ls.input_sources) > 1:
                concat[ls.id] = list(ls.input_sources)
        edges.append([self.output_id, OUTPUT_ID])
        channels[OUTPUT_ID] = 1
        return {
            "nodes": nodes,
            "edges": edges,
            "input": INPUT_ID,
            "output": OUTPUT_ID,
            "channels": channels,
            "concat_inputs": concat,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkSpec":
        try:
            nodes = doc["nodes"]
            edges = [tuple(e) for e in doc["edges"]]
            input_id = doc["input"]
            output_id = doc["output"]
            channels = doc["channels"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"network spec missing field: {exc}") from exc
        concat = doc.get("concat_inputs", {})
        preds: dict[str, list[str]] = {}
        for frm, to in edges:
            preds.setdefault(to, []).append(frm)
        layers = []
        out_pred = preds.get(output_id, [])
        if len(out_pred) != 1:
            raise ValidationError("network spec must have exactly one edge into the output")
        for node in nodes:
            nid = node["id"]
            op = str(node.get("op", ""))
            if not op.endswith("C"):
                raise ParseError(f"node {nid}: network specs may only contain C nodes")
            try:
                kernel = int(op[:-1])
            except ValueError as exc:
                raise ParseError(f"node {nid}: bad op {op!r}") from exc
            sources = concat.get(nid) or preds.get(nid, [])
            if not sources:
                raise ValidationError(f"layer {nid} has no inputs")
            sources = tuple(INPUT_ID if s == input_id else s for s in sources)
            if nid not in channels:
                raise ValidationError(f"layer {nid} has no channel assignment")
            in_ch = 0
            for s in sources:
                key = input_id if s == INPUT_ID else s
                if key not in channels:
                    raise ValidationError(f"layer {nid}: source {s!r} has no channels")
                in_ch += channels[key]
            default_act = "sigmoid" if nid == out_pred[0] else "relu"
            layers.append(
                LayerSpec(
                    id=nid,
                    kernel=kernel,
                    in_channels=in_ch,
                    out_channels=int(channels[nid]),
                    activation=node.get("activation", default_act),
                    input_sources=sources,
                    pool_after=bool(node.get("pool_after", False)),
                    unpool_before=bool(node.get("unpool_before", False)),
                    batch_norm=bool(node.get("batch_norm", False)),
                )
            )
        spec = cls(layers)
        spec.validate()
        return spec

    @classmethod
    def from_json(cls, text: str) -> "NetworkSpec":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(doc)


def with_input_channels(spec: NetworkSpec, in_channels: int) -> NetworkSpec:
    """Copy of spec with the first layer reading `in_channels` channels."""
    first = replace(spec.layers[0], in_channels=in_channels)
    return NetworkSpec([first] + list(spec.layers[1:]))
