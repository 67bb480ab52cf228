"""Built-in named architectures.

`paper-parents`: four fully convolutional chains whose merge yields the
flagship 13-layer skip network (kernels 3,5,7,9,11,13,15,13,11,9,7,5,3
with three concatenation joins).

`paper-merged`: that merged graph, produced by actually running the merge
on the parents.

`segnet-basic`: the eight-layer 7x7/64-channel encoder-decoder baseline
with 2x2 max pooling after each encoder layer, index-passing unpooling
before each decoder layer, and batch normalization everywhere except the
output layer. It is a NetworkSpec, not a graph: the op grammar has no
unpool token.
"""

from __future__ import annotations

from .budget import DEFAULT_RULE, ChannelRule, assign_channels
from .errors import ParseError
from .graphs import ArchGraph, chain, graph_to_network, spdnn_merge
from .netspec import INPUT_ID, LayerSpec, NetworkSpec

PARENT_KERNELS = (
    (3, 5, 7, 9, 7, 5, 3),
    (3, 5, 7, 9, 11, 9, 7, 5, 3),
    (3, 5, 7, 9, 11, 13, 11, 9, 7, 5, 3),
    (3, 5, 7, 9, 11, 13, 15, 13, 11, 9, 7, 5, 3),
)


def paper_parent_graphs() -> list[ArchGraph]:
    return [
        chain([f"{k}C" for k in kernels], prefix=f"p{i}.")
        for i, kernels in enumerate(PARENT_KERNELS)
    ]


def paper_merged_graph() -> ArchGraph:
    return spdnn_merge(paper_parent_graphs())


def paper_merged_spec(chp: int = 10, rule: ChannelRule = DEFAULT_RULE,
                      input_channels: int = 1) -> NetworkSpec:
    g = paper_merged_graph()
    return graph_to_network(g, assign_channels(g, rule, chp, input_channels))


def segnet_basic_spec(channels: int = 64) -> NetworkSpec:
    layers = []
    prev = INPUT_ID
    for i in range(1, 5):
        nid = f"enc{i}"
        layers.append(
            LayerSpec(
                id=nid,
                kernel=7,
                in_channels=1 if i == 1 else channels,
                out_channels=channels,
                activation="relu",
                input_sources=(prev,),
                pool_after=True,
                batch_norm=True,
            )
        )
        prev = nid
    for i in range(1, 5):
        nid = f"dec{i}"
        last = i == 4
        layers.append(
            LayerSpec(
                id=nid,
                kernel=7,
                in_channels=channels,
                out_channels=1 if last else channels,
                activation="sigmoid" if last else "relu",
                input_sources=(prev,),
                unpool_before=True,
                batch_norm=not last,
            )
        )
        prev = nid
    spec = NetworkSpec(layers)
    spec.validate()
    return spec


def named_spec(name: str, chp: int = 10) -> NetworkSpec:
    if name == "paper-merged":
        return paper_merged_spec(chp)
    if name == "segnet-basic":
        return segnet_basic_spec()
    raise ParseError(f"unknown builtin spec {name!r} (try paper-merged or segnet-basic)")
