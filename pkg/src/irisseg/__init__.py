"""irisseg: architecture merging, budget sizing, a small convolution
engine, degradation augmentation, and segmentation metrics for binary
iris maps."""

__version__ = "0.1.0"

from .budget import (
    DEFAULT_RULE,
    BudgetPolynomial,
    ChannelRule,
    assign_channels,
    budget_polynomial,
    count_params,
    count_segnet_basic,
    f_map,
    solve_channel_base,
    symbolic_template,
)
from .builtins import (
    named_spec,
    paper_merged_graph,
    paper_merged_spec,
    paper_parent_graphs,
    segnet_basic_spec,
)
from .graphs import (
    ArchGraph,
    GraphNode,
    Op,
    assign_output_distance,
    chain,
    contract_by_label,
    graph_to_network,
    label_by_input_distance,
    order_preservation_check,
    parse_arch_graph,
    spdnn_merge,
)
from .netspec import LayerSpec, NetworkSpec
