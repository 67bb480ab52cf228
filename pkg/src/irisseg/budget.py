"""Parameter counting, the channel-base polynomial, and channel sizing.

A convolution layer holds in_channels * out_channels * k^2 weights;
biases and batch-norm parameters exist at runtime but are excluded from
budget arithmetic. Channel widths derive from one free integer (the
channel base) through per-kernel multipliers; summing the per-layer
counts symbolically gives a quadratic a*base^2 + b*base whose root under
a reference budget picks the base.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NonLinearChannel, UnknownKernel
from .graphs import ArchGraph, graph_to_network, topo_order
from .netspec import NetworkSpec


@dataclass(frozen=True)
class ChannelRule:
    """Kernel side -> channel multiplier."""

    multiplier_of_kernel: dict

    def multiplier(self, kernel: int) -> int:
        try:
            return self.multiplier_of_kernel[kernel]
        except KeyError:
            raise UnknownKernel(f"no channel multiplier for kernel {kernel}") from None


DEFAULT_RULE = ChannelRule({3: 1, 5: 1, 7: 2, 9: 2, 11: 3, 13: 3, 15: 4})


class ChannelExpr:
    """coef * base + const, the symbolic channel width of a layer.

    Compares equal to a plain integer when coef == 0, so symbolic
    NetworkSpecs pass the same structural validation as concrete ones.
    """

    __slots__ = ("coef", "const")

    def __init__(self, coef: int, const: int = 0):
        self.coef = coef
        self.const = const

    def __add__(self, other):
        if isinstance(other, ChannelExpr):
            return ChannelExpr(self.coef + other.coef, self.const + other.const)
        if isinstance(other, int):
            return ChannelExpr(self.coef, self.const + other)
        return NotImplemented

    __radd__ = __add__

    def __eq__(self, other):
        if isinstance(other, ChannelExpr):
            return (self.coef, self.const) == (other.coef, other.const)
        if isinstance(other, int):
            return self.coef == 0 and self.const == other
        return NotImplemented

    def __hash__(self):
        return hash((self.coef, self.const)) if self.coef else hash(self.const)

    def __repr__(self):
        if self.coef == 0:
            return str(self.const)
        if self.const == 0:
            return f"{self.coef}*base"
        return f"{self.coef}*base+{self.const}"

    def eval(self, base: int) -> int:
        return self.coef * base + self.const


@dataclass(frozen=True)
class LayerTerm:
    layer_id: str
    kernel: int
    quad: int
    lin: int


@dataclass(frozen=True)
class BudgetPolynomial:
    a: int
    b: int
    terms: tuple = ()

    def eval(self, base: int) -> int:
        return self.a * base * base + self.b * base


def f_map(ci: int, co: int, k: int) -> int:
    """Weight count of one convolution layer (no bias term)."""
    if ci < 1 or co < 1 or k < 1:
        raise ValueError("channel counts and kernel side must be >= 1")
    return ci * co * k * k


def count_segnet_basic() -> int:
    """Weight count of the eight-layer 7x7/64-channel baseline."""
    return f_map(1, 64, 7) + f_map(64, 1, 7) + 6 * f_map(64, 64, 7)


def assign_channels(g: ArchGraph, rule: ChannelRule = DEFAULT_RULE, chp: int = 10,
                    input_channels: int = 1) -> dict:
    """Node id -> output channel count.

    Internal conv nodes get multiplier(kernel) * chp, except nodes feeding
    the sink, which emit the 1-channel output map. Pool nodes pass their
    predecessor's width through.
    """
    channels = {g.source_id: input_channels, g.sink_id: 1}
    for nid in topo_order(g):
        if nid in channels:
            continue
        op = g.op_of(nid)
        if op.kind == "P":
            preds = g.preds(nid)
            if len(preds) != 1:
                raise UnknownKernel(f"pool node {nid!r} needs a single predecessor")
            channels[nid] = channels[preds[0]]
        elif (nid, g.sink_id) in g.edges:
            channels[nid] = 1
        else:
            channels[nid] = rule.multiplier(op.size) * chp
    return channels


def _symbolic_channels(g: ArchGraph, rule: ChannelRule, input_channels: int) -> dict:
    channels = {g.source_id: ChannelExpr(0, input_channels), g.sink_id: ChannelExpr(0, 1)}
    for nid in topo_order(g):
        if nid in channels:
            continue
        op = g.op_of(nid)
        if op.kind == "P":
            preds = g.preds(nid)
            if len(preds) != 1:
                raise UnknownKernel(f"pool node {nid!r} needs a single predecessor")
            channels[nid] = channels[preds[0]]
        elif (nid, g.sink_id) in g.edges:
            channels[nid] = ChannelExpr(0, 1)
        else:
            channels[nid] = ChannelExpr(rule.multiplier(op.size), 0)
    return channels


def symbolic_template(g: ArchGraph, rule: ChannelRule = DEFAULT_RULE,
                      input_channels: int = 1) -> NetworkSpec:
    """NetworkSpec whose channel fields are ChannelExpr values."""
    return graph_to_network(g, _symbolic_channels(g, rule, input_channels))


def _as_expr(value) -> ChannelExpr:
    if isinstance(value, ChannelExpr):
        return value
    if isinstance(value, int):
        return ChannelExpr(0, value)
    raise NonLinearChannel(f"channel {value!r} is neither symbolic nor an integer")


def budget_polynomial(template: NetworkSpec) -> BudgetPolynomial:
    """Sum the per-layer weight counts of a symbolic template into
    a*base^2 + b*base; a constant contribution has no representation and
    raises NonLinearChannel."""
    a = b = 0
    terms = []
    for ls in template.layers:
        ci = _as_expr(ls.in_channels)
        co = _as_expr(ls.out_channels)
        k2 = ls.kernel * ls.kernel
        quad = ci.coef * co.coef * k2
        lin = (ci.coef * co.const + ci.const * co.coef) * k2
        const = ci.const * co.const * k2
        if const != 0:
            raise NonLinearChannel(
                f"layer {ls.id}: {ci!r} x {co!r} leaves a constant term {const}"
            )
        a += quad
        b += lin
        terms.append(LayerTerm(ls.id, ls.kernel, quad, lin))
    return BudgetPolynomial(a, b, tuple(terms))


def solve_channel_base(poly: BudgetPolynomial, budget: int) -> tuple[float, int]:
    """Positive root of the polynomial against the budget, and the chosen
    integer base.

    The root follows the reference arithmetic sqrt(budget / a) (the linear
    term is negligible against the quadratic one); the integer choice is
    exact: the largest n with a*n^2 + b*n <= budget.
    """
    if poly.a <= 0:
        raise ValueError("quadratic coefficient must be positive")
    if budget <= 0:
        raise ValueError("budget must be positive")
    root = math.sqrt(budget / poly.a)
    n = max(0, int(root))
    while poly.eval(n + 1) <= budget:
        n += 1
    while n > 0 and poly.eval(n) > budget:
        n -= 1
    return root, n


def count_params(spec: NetworkSpec, include_bias: bool = False) -> int:
    total = 0
    for ls in spec.layers:
        total += f_map(int(ls.in_channels), int(ls.out_channels), ls.kernel)
        if include_bias:
            total += int(ls.out_channels)
    return total
