"""Numerical masking: strip computed values out of a reasoning graph.

Only labels are rewritten; node ids and edge topology are never touched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .mermaid import GraphEdge, GraphNode, ReasoningGraph

# optional sign, optional currency, number body, optional percent
_LITERAL = re.compile(
    r"(?P<sign>[-+])?"
    r"(?P<cur>[$€£¥])?"
    r"(?P<num>[0-9]{1,3}(?:,[0-9]{3})+(?:\.[0-9]+)?|[0-9]+(?:\.[0-9]+)?|\.[0-9]+)"
    r"(?P<pct>%)?"
)
_DIGITS = re.compile(r"[0-9]+")
_JOINERS = set("-._")
_FORBIDDEN_IN_PLACEHOLDER = set('[](){}"|;\n\r')


@dataclass(frozen=True)
class MaskingConfig:
    placeholder: str = "_"
    mask_edge_labels: bool = True
    strict_digits: bool = False

    def __post_init__(self):
        if not self.placeholder:
            raise ValueError("placeholder must be nonempty")
        if _DIGITS.search(self.placeholder):
            raise ValueError("placeholder must not contain digits")
        if _FORBIDDEN_IN_PLACEHOLDER & set(self.placeholder):
            raise ValueError("placeholder contains Mermaid syntax characters")


@dataclass(frozen=True)
class MaskingOutcome:
    graph: ReasoningGraph
    literals_masked: int


def _word_bounds(text: str, start: int, end: int) -> tuple[int, int]:
    """Widen [start, end) across alphanumerics and joiner characters."""
    while start > 0 and (text[start - 1].isalnum() or text[start - 1] in _JOINERS):
        start -= 1
    while end < len(text) and (text[end].isalnum() or text[end] in _JOINERS):
        end += 1
    return start, end


def _literal_spans(text: str) -> list[tuple[int, int]]:
    spans = []
    for m in _LITERAL.finditer(text):
        start, end = m.span()
        if m.group("sign"):
            prev = text[start - 1] if start > 0 else ""
            if prev and not (prev.isspace() or prev == "("):
                start += 1
        lo, hi = _word_bounds(text, m.start("num"), m.end("num"))
        if any(ch.isalpha() for ch in text[lo:hi]):
            continue
        spans.append((start, end))
    return spans


def is_numerical_literal(token: str) -> bool:
    """True when ``token`` as a whole is one masked literal (e.g. ``$12.50``, ``35%``)."""
    return _literal_spans(token) == [(0, len(token))] if token else False


def count_literals(text: str) -> int:
    return len(_literal_spans(text))


def mask_text(text: str, config: MaskingConfig = MaskingConfig()) -> tuple[str, int]:
    pieces = []
    last = 0
    count = 0
    for start, end in _literal_spans(text):
        pieces.append(text[last:start])
        pieces.append(config.placeholder)
        last = end
        count += 1
    pieces.append(text[last:])
    masked = "".join(pieces)
    if config.strict_digits:
        masked, extra = _DIGITS.subn(config.placeholder, masked)
        count += extra
    return masked, count


def mask_numerals(graph: ReasoningGraph, config: MaskingConfig = MaskingConfig()) -> MaskingOutcome:
    total = 0
    nodes: list[GraphNode] = []
    for node in graph.nodes:
        label, n = mask_text(node.label, config)
        total += n
        nodes.append(replace(node, label=label))
    edges: list[GraphEdge] = []
    for edge in graph.edges:
        if config.mask_edge_labels and edge.label is not None:
            label, n = mask_text(edge.label, config)
            total += n
            edges.append(replace(edge, label=label))
        else:
            edges.append(edge)
    masked = ReasoningGraph(nodes=tuple(nodes), edges=tuple(edges), direction=graph.direction)
    return MaskingOutcome(masked, total)


def has_unmasked_digits(text: str, config: MaskingConfig = MaskingConfig()) -> bool:
    """Digits remaining that the literal rule would still mask."""
    if config.strict_digits:
        return bool(_DIGITS.search(text))
    return count_literals(text) > 0
