"""Parser, serializer, validator and linter for the `flowchart TD` dialect.

The accepted grammar is deliberately small::

    document  := "flowchart TD" [";"] (sep statement)* [sep]
    statement := node (link node)*
    node      := ID [ "[" text "]" | "(" text ")" | "{" text "}" ]
    link      := "-->" [ "|" text "|" ]
               | "--" ws* ( '"' text '"' | text ) ws* "-->"
    sep       := ";" | newline

Subgraphs, styling directives and click handlers are rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

HEADER = "flowchart TD"

_ID_CHARS = re.compile(r"[A-Za-z0-9_]+")
_SHAPES = {"[": "]", "(": ")", "{": "}"}
_UNSUPPORTED = {
    "subgraph", "end", "style", "classDef", "class", "click", "linkStyle",
    "direction", "flowchart", "graph",
}


class MermaidError(ValueError):
    """Base class for every parse diagnostic."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingHeader(MermaidError):
    pass


class MermaidSyntaxError(MermaidError):
    pass


class DuplicateConflict(MermaidError):
    pass


@dataclass(frozen=True)
class GraphNode:
    id: str
    label: str = ""
    shape: str = "["


@dataclass(frozen=True)
class GraphEdge:
    source: str
    target: str
    label: str | None = None


@dataclass(frozen=True)
class ReasoningGraph:
    nodes: tuple[GraphNode, ...] = ()
    edges: tuple[GraphEdge, ...] = ()
    direction: str = "TD"

    def node(self, node_id: str) -> GraphNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def successors(self, node_id: str) -> list[str]:
        return [e.target for e in self.edges if e.source == node_id]

    def out_edges(self, node_id: str) -> list[GraphEdge]:
        return [e for e in self.edges if e.source == node_id]

    def in_degree(self) -> dict[str, int]:
        deg = {n.id: 0 for n in self.nodes}
        for e in self.edges:
            if e.target in deg:
                deg[e.target] += 1
        return deg

    def roots(self) -> list[str]:
        return [k for k, v in self.in_degree().items() if v == 0]

    def terminals(self) -> list[str]:
        sources = {e.source for e in self.edges}
        return [n.id for n in self.nodes if n.id not in sources]


# ---------------------------------------------------------------------------
# parsing


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.nodes: dict[str, GraphNode] = {}
        self.order: list[str] = []
        self.edges: list[GraphEdge] = []

    @property
    def line(self) -> int:
        return self.text.count("\n", 0, self.pos) + 1

    def error(self, message: str) -> MermaidSyntaxError:
        return MermaidSyntaxError(message, self.line)

    def peek(self, n: int = 1) -> str:
        return self.text[self.pos:self.pos + n]

    def skip_inline_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r":
            self.pos += 1

    def skip_separators(self) -> None:
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in " \t\r\n;":
                self.pos += 1
            elif self.text.startswith("%%", self.pos):
                end = self.text.find("\n", self.pos)
                self.pos = len(self.text) if end < 0 else end
            else:
                break

    def run(self) -> ReasoningGraph:
        stripped = self.text.lstrip("﻿ \t\r\n")
        if not stripped.startswith(HEADER):
            raise MissingHeader(f"graph must begin with '{HEADER}'")
        self.pos = len(self.text) - len(stripped) + len(HEADER)
        nxt = self.peek()
        if nxt and nxt not in " \t\r\n;":
            raise MissingHeader(f"graph must begin with '{HEADER}'")
        while True:
            self.skip_separators()
            if self.pos >= len(self.text):
                break
            self.statement()
            self.skip_inline_ws()
            if self.pos < len(self.text) and self.peek() not in ";\n":
                raise self.error(f"unexpected {self.peek()!r} after statement")
        nodes = tuple(self.nodes[i] for i in self.order)
        return ReasoningGraph(nodes=nodes, edges=tuple(self.edges))

    def statement(self) -> None:
        source = self.node_ref()
        while True:
            self.skip_inline_ws()
            if not self.peek(2) == "--":
                return
            label = self.link()
            self.skip_inline_ws()
            target = self.node_ref()
            self.edges.append(GraphEdge(source, target, label))
            source = target

    def node_id(self) -> str:
        m = _ID_CHARS.match(self.text, self.pos)
        if not m:
            found = self.peek() or "end of input"
            raise self.error(f"expected node id, found {found!r}")
        self.pos = m.end()
        return m.group()

    def node_ref(self) -> str:
        node_id = self.node_id()
        if node_id in _UNSUPPORTED:
            raise self.error(f"unsupported directive {node_id!r}")
        opener = self.peek()
        if opener in _SHAPES:
            closer = _SHAPES[opener]
            start = self.pos + 1
            end = start
            while end < len(self.text) and self.text[end] != closer:
                if self.text[end] == "\n":
                    raise self.error(f"unterminated label for node {node_id!r}")
                end += 1
            if end >= len(self.text):
                raise self.error(f"unterminated label for node {node_id!r}")
            self.pos = end + 1
            label = self.text[start:end].strip()
            self.declare(node_id, label, opener if label else None)
        else:
            self.declare(node_id, "", None)
        return node_id

    def declare(self, node_id: str, label: str, shape: str | None) -> None:
        existing = self.nodes.get(node_id)
        if existing is None:
            self.nodes[node_id] = GraphNode(node_id, label, shape or "[")
            self.order.append(node_id)
            return
        if shape is None:
            return
        if existing.label == "" and existing.shape == "[":
            self.nodes[node_id] = GraphNode(node_id, label, shape)
        elif existing.label != label or existing.shape != shape:
            raise DuplicateConflict(
                f"node {node_id!r} redeclared with a different label", self.line
            )

    def link(self) -> str | None:
        if self.text.startswith("-->", self.pos):
            self.pos += 3
            if self.peek() == "|":
                end = self.text.find("|", self.pos + 1)
                nl = self.text.find("\n", self.pos + 1)
                if end < 0 or (0 <= nl < end):
                    raise self.error("unterminated |edge label|")
                label = self.text[self.pos + 1:end].strip()
                self.pos = end + 1
                if '"' in label:
                    raise self.error("quotes are not allowed inside edge labels")
                return label or None
            return None
        # "--" followed by a condition label then "-->"
        self.pos += 2
        if self.peek() in ("-", ".", "="):
            raise self.error("unsupported link style")
        self.skip_inline_ws()
        if self.peek() == '"':
            end = self.text.find('"', self.pos + 1)
            nl = self.text.find("\n", self.pos + 1)
            if end < 0 or (0 <= nl < end):
                raise self.error("unterminated quoted edge label")
            label = self.text[self.pos + 1:end]
            self.pos = end + 1
            self.skip_inline_ws()
            if not self.text.startswith("-->", self.pos):
                raise self.error("expected '-->' after edge label")
            self.pos += 3
        else:
            end = self.text.find("-->", self.pos)
            nl = self.text.find("\n", self.pos)
            if end < 0 or (0 <= nl < end):
                raise self.error("expected '-->' to close edge label")
            label = self.text[self.pos:end]
            self.pos = end + 3
            if '"' in label:
                raise self.error("quotes are not allowed inside edge labels")
        return label.strip() or None


def parse_flowchart(text: str) -> ReasoningGraph:
    """Parse Mermaid source into a :class:`ReasoningGraph`.

    Raises a :class:`MermaidError` subclass for anything outside the dialect.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MermaidError(f"input is not valid UTF-8: {exc}") from None
    if not text or not text.strip():
        raise MissingHeader(f"graph must begin with '{HEADER}'")
    return _Parser(text).run()


# ---------------------------------------------------------------------------
# serialization

def _node_decl(node: GraphNode) -> str:
    if not node.label:
        return node.id
    return f"{node.id}{node.shape}{node.label}{_SHAPES[node.shape]}"


def serialize(graph: ReasoningGraph) -> str:
    lines = [f"{HEADER};"]
    lines.extend(f"{_node_decl(n)};" for n in graph.nodes)
    for e in graph.edges:
        if e.label is None:
            lines.append(f"{e.source} --> {e.target};")
        else:
            lines.append(f'{e.source} -- "{e.label}" --> {e.target};')
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Finding:
    rule: str
    severity: str
    locus: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity.upper()} {self.rule} at {self.locus}: {self.message}"


@dataclass
class ValidationResult:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings


def validate(graph: ReasoningGraph) -> ValidationResult:
    """Structural checks. Cycles are legal (verification feedback loops)."""
    result = ValidationResult()
    seen: set[str] = set()
    for n in graph.nodes:
        if not _ID_CHARS.fullmatch(n.id):
            result.findings.append(Finding("InvalidId", "error", n.id, "malformed node id"))
        if n.id in seen:
            result.findings.append(Finding("DuplicateId", "error", n.id, "node declared twice"))
        seen.add(n.id)
    for i, e in enumerate(graph.edges):
        for end in (e.source, e.target):
            if end not in seen:
                result.findings.append(Finding(
                    "DanglingEndpoint", "error", f"edge {i}",
                    f"endpoint {end!r} is not a declared node",
                ))
    if not graph.nodes:
        result.findings.append(Finding("EmptyGraph", "warning", "graph", "graph has no nodes"))
    return result


# ---------------------------------------------------------------------------
# linting


def count_label_tokens(label: str) -> int:
    return len(label.split())


@dataclass(frozen=True)
class LintConfig:
    atomicity: bool = True
    branching: bool = True
    verification: bool = True
    leakage: bool = True
    max_label_tokens: int = 15
    max_quoted_tokens: int = 10
    # graphs below this size are too small to need a critic phase
    verification_min_nodes: int = 3
    check_prefix: str = "Check"


@dataclass
class LintReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def by_rule(self, rule: str) -> list[Finding]:
        return [f for f in self.findings if f.rule == rule]


_QUOTED = re.compile(r'"([^"]*)"|“([^”]*)”')


def _ancestors(graph: ReasoningGraph, node_id: str) -> set[str]:
    preds: dict[str, list[str]] = {}
    for e in graph.edges:
        preds.setdefault(e.target, []).append(e.source)
    seen = {node_id}
    stack = [node_id]
    while stack:
        for p in preds.get(stack.pop(), ()):
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen


def lint_graph(graph: ReasoningGraph, config: LintConfig = LintConfig()) -> LintReport:
    report = LintReport()
    add = report.findings.append

    if config.atomicity:
        for n in graph.nodes:
            count = count_label_tokens(n.label)
            if count >= config.max_label_tokens:
                add(Finding("ATOMICITY", "warning", n.id,
                            f"label has {count} tokens (limit {config.max_label_tokens})"))

    if config.branching:
        for n in graph.nodes:
            out = graph.out_edges(n.id)
            unlabeled = [e for e in out if not e.label]
            if len(out) >= 2 and unlabeled:
                targets = ", ".join(e.target for e in unlabeled)
                add(Finding("BRANCHING", "warning", n.id,
                            f"{len(out)}-way branch with unlabeled edge(s) to {targets}"))

    if config.verification and len(graph.nodes) >= config.verification_min_nodes:
        checks = {n.id for n in graph.nodes if n.label.startswith(config.check_prefix)}
        for t in graph.terminals():
            if not checks & _ancestors(graph, t):
                add(Finding("VERIFICATION", "info", t,
                            f"no '{config.check_prefix}' node on any path into terminal"))

    if config.leakage:
        for n in graph.nodes:
            for m in _QUOTED.finditer(n.label):
                span = m.group(1) if m.group(1) is not None else m.group(2)
                count = count_label_tokens(span)
                if count >= config.max_quoted_tokens:
                    add(Finding("LEAKAGE", "warning", n.id,
                                f"quoted span of {count} tokens looks like answer text"))
    return report


def iter_labels(graph: ReasoningGraph) -> Iterable[str]:
    for n in graph.nodes:
        yield n.label
    for e in graph.edges:
        if e.label is not None:
            yield e.label
