from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from braid.mermaid import (
    DuplicateConflict,
    GraphEdge,
    GraphNode,
    LintConfig,
    MermaidError,
    MermaidSyntaxError,
    MissingHeader,
    ReasoningGraph,
    count_label_tokens,
    lint_graph,
    parse_flowchart,
    serialize,
    validate,
)

LYRICS = Path(__file__).parent / "fixtures" / "lyrics_plan.mmd"


def test_two_node_graph():
    g = parse_flowchart("flowchart TD;\nA[Read];\nB[Answer];\nA --> B;")
    assert [n.id for n in g.nodes] == ["A", "B"]
    assert g.edges == (GraphEdge("A", "B"),)
    assert validate(g).ok
    assert lint_graph(g).findings == []


def test_header_required():
    with pytest.raises(MissingHeader, match="flowchart TD"):
        parse_flowchart("A --> B;")
    with pytest.raises(MissingHeader):
        parse_flowchart("")


def test_header_variants():
    for header in ("flowchart TD", "flowchart TD;", "  flowchart TD  \n"):
        g = parse_flowchart(header + "\nA[x];")
        assert g.node_ids == ["A"]
    with pytest.raises(MermaidError):
        parse_flowchart("graph LR\nA-->B")


def test_semicolon_inside_label_kept():
    g = parse_flowchart("flowchart TD;\nA[Say hi; then stop];")
    assert g.node("A").label == "Say hi; then stop"


def test_edge_label_forms():
    text = 'flowchart TD\nA -- "yes" --> B\nA --"no"--> C\nB -- maybe --> D\nC -->|later| D\n'
    g = parse_flowchart(text)
    assert [e.label for e in g.edges] == ["yes", "no", "maybe", "later"]


def test_chained_edges():
    g = parse_flowchart("flowchart TD\nA[a] --> B[b] --> C[c]")
    assert [(e.source, e.target) for e in g.edges] == [("A", "B"), ("B", "C")]
    assert g.node("B").label == "b"


def test_implicit_node_filled_by_later_declaration():
    g = parse_flowchart("flowchart TD\nA --> B\nB[Later label]")
    assert g.node("B").label == "Later label"
    assert g.node_ids == ["A", "B"]


def test_conflicting_redeclaration():
    with pytest.raises(DuplicateConflict):
        parse_flowchart("flowchart TD\nA[one]\nA[two]")
    g = parse_flowchart("flowchart TD\nA[same]\nA[same]")
    assert len(g.nodes) == 1


def test_comments_and_blank_lines_ignored():
    g = parse_flowchart("flowchart TD\n%% a comment\n\nA[x]\n  %% another\nA --> B\n")
    assert g.node_ids == ["A", "B"]


@pytest.mark.parametrize("bad", [
    "flowchart TD\nA[unterminated",
    "flowchart TD\nA[x] -.-> B",
    "flowchart TD\nA ==> B",
    "flowchart TD\nsubgraph S\nA\nend",
    "flowchart TD\nclassDef red fill:#f00",
    "flowchart TD\nstyle A fill:#f00",
    "flowchart TD\nA[line\nbreak]",
    "flowchart TD\nA -->|bad \"quote\"| B",
])
def test_syntax_errors(bad):
    with pytest.raises(MermaidError):
        parse_flowchart(bad)


def test_syntax_error_reports_line():
    with pytest.raises(MermaidSyntaxError) as exc:
        parse_flowchart("flowchart TD\nA[ok]\nB[oops")
    assert exc.value.line == 3


def test_shapes_preserved_in_roundtrip():
    g = parse_flowchart("flowchart TD\nA(round)\nB{decide}\nC[box]\nA --> B\nB --> C")
    assert [n.shape for n in g.nodes] == ["(", "{", "["]
    assert parse_flowchart(serialize(g)) == g


def test_lyrics_fixture_shape():
    g = parse_flowchart(LYRICS.read_text())
    assert len(g.nodes) == 23
    assert len(g.edges) == 26
    assert validate(g).ok


def test_validate_dangling_and_duplicate():
    g = ReasoningGraph(nodes=(GraphNode("A", "a"), GraphNode("A", "b")),
                       edges=(GraphEdge("A", "Z"),))
    rules = sorted(f.rule for f in validate(g).findings)
    assert rules == ["DanglingEndpoint", "DuplicateId"]
    assert validate(g).findings[-1].locus == "edge 0"


def test_cycles_are_valid():
    g = parse_flowchart("flowchart TD\nA[draft] --> B[Check draft]\nB --> A")
    assert validate(g).ok


def test_empty_graph_warns():
    res = validate(parse_flowchart("flowchart TD"))
    assert [f.rule for f in res.findings] == ["EmptyGraph"]


# ---------------------------------------------------------------------------
# lint rules


def _chain(labels):
    nodes = "\n".join(f"N{i}[{lab}]" for i, lab in enumerate(labels))
    edges = "\n".join(f"N{i} --> N{i + 1}" for i in range(len(labels) - 1))
    return parse_flowchart(f"flowchart TD\n{nodes}\n{edges}")


def test_atomicity_threshold():
    assert count_label_tokens("a  b\tc") == 3
    g14 = _chain([" ".join(["w"] * 14)])
    g15 = _chain([" ".join(["w"] * 15)])
    assert not lint_graph(g14).by_rule("ATOMICITY")
    assert len(lint_graph(g15).by_rule("ATOMICITY")) == 1
    assert not lint_graph(g15, LintConfig(max_label_tokens=16)).by_rule("ATOMICITY")


def test_branching_requires_unlabeled_fanout():
    unlabeled = parse_flowchart("flowchart TD\nA[x] --> B[y]\nA --> C[z]")
    labeled = parse_flowchart('flowchart TD\nA[x] -- "yes" --> B[y]\nA -- "no" --> C[z]')
    single = parse_flowchart("flowchart TD\nA[x] --> B[y]")
    assert [f.locus for f in lint_graph(unlabeled).by_rule("BRANCHING")] == ["A"]
    assert not lint_graph(labeled).by_rule("BRANCHING")
    assert not lint_graph(single).by_rule("BRANCHING")


def test_verification_is_info_only():
    g = _chain(["Read", "Compute", "Answer"])
    report = lint_graph(g)
    assert [(f.rule, f.severity, f.locus) for f in report.findings] == [("VERIFICATION", "info", "N2")]
    checked = _chain(["Read", "Check sum", "Answer"])
    assert not lint_graph(checked).by_rule("VERIFICATION")


def test_leakage_on_long_quoted_span():
    quote = " ".join(["word"] * 10)
    g = parse_flowchart(f"flowchart TD\nA[Write “{quote}”]")
    assert len(lint_graph(g).by_rule("LEAKAGE")) == 1
    short = parse_flowchart("flowchart TD\nA[Write “two words”]")
    assert not lint_graph(short).by_rule("LEAKAGE")


def test_rules_can_be_disabled():
    g = parse_flowchart("flowchart TD\nA[x] --> B[y]\nA --> C[z]")
    assert not lint_graph(g, LintConfig(branching=False, verification=False)).findings


# ---------------------------------------------------------------------------
# properties

_ids = st.from_regex(r"[A-Za-z][A-Za-z0-9_]{0,5}", fullmatch=True).filter(
    lambda s: s.lower() not in {"end", "subgraph", "style", "classdef", "class", "click", "linkstyle"})
_label_text = st.text(
    alphabet=st.characters(blacklist_characters='[](){}|"%\n\r\t', blacklist_categories=("Cs", "Cc")),
    min_size=1, max_size=30,
).map(lambda s: " ".join(s.split())).filter(bool)


@st.composite
def graphs(draw):
    ids = draw(st.lists(_ids, min_size=1, max_size=8, unique=True))
    nodes = tuple(GraphNode(i, draw(_label_text), draw(st.sampled_from("[({"))) for i in ids)
    edges = tuple(
        GraphEdge(draw(st.sampled_from(ids)), draw(st.sampled_from(ids)),
                  draw(st.one_of(st.none(), _label_text)))
        for _ in range(draw(st.integers(0, 10)))
    )
    return ReasoningGraph(nodes=nodes, edges=edges)


@settings(max_examples=300, deadline=None)
@given(graphs())
def test_roundtrip_is_identity(g):
    text = serialize(g)
    assert parse_flowchart(text) == g
    assert serialize(parse_flowchart(text)) == text


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=80))
def test_parser_total_on_arbitrary_text(text):
    try:
        g = parse_flowchart("flowchart TD\n" + text)
    except MermaidError:
        return
    assert parse_flowchart(serialize(g)) == g
