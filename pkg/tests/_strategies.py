"""Hypothesis strategies for labeled graphs with a known literal count.

Each label is assembled from tokens whose literal count is known by
construction; that count is the oracle for masking tests.
"""

import string

from hypothesis import strategies as st

from braid.mermaid import GraphEdge, GraphNode, ReasoningGraph

_int = st.integers(0, 10**7).map(str)
_grouped = st.integers(1000, 10**9).map(lambda n: f"{n:,}")
_dec = st.tuples(st.integers(0, 999), st.integers(0, 999)).map(lambda t: f"{t[0]}.{t[1]}")
_bare_dec = st.integers(0, 999).map(lambda n: f".{n}")
_body = st.one_of(_int, _grouped, _dec, _bare_dec)


@st.composite
def literal_token(draw):
    body = draw(_body)
    if body.startswith("."):
        cur = ""
    else:
        cur = draw(st.sampled_from(["", "", "$", "€", "£", "¥"]))
    pct = draw(st.sampled_from(["", "", "%"]))
    sign = draw(st.sampled_from(["", "", "-", "+"]))
    return sign + cur + body + pct


_word = st.text(alphabet=string.ascii_letters, min_size=1, max_size=8)
# alphanumeric identifiers: the literal rule leaves these alone
_ident = st.one_of(
    st.tuples(_word, st.integers(0, 99)).map(lambda t: f"{t[0]}{t[1]}"),
    st.tuples(_word, st.integers(0, 99)).map(lambda t: f"{t[0]}-{t[1]}"),
    st.tuples(st.integers(0, 99), _word).map(lambda t: f"{t[0]}{t[1]}"),
    st.tuples(_word, st.integers(0, 9), _word).map(lambda t: f"{t[0]}-{t[1]}-{t[2]}"),
)
_suffix = st.sampled_from(["", "", "", ",", ":", "?", "!"])


@st.composite
def label(draw):
    parts, count = [], 0
    for _ in range(draw(st.integers(1, 7))):
        kind = draw(st.sampled_from(["lit", "word", "ident"]))
        if kind == "lit":
            tok = draw(literal_token())
            count += 1
        elif kind == "word":
            tok = draw(_word)
        else:
            tok = draw(_ident)
        parts.append(tok + draw(_suffix))
    return " ".join(parts), count


@st.composite
def labeled_graphs(draw):
    n = draw(st.integers(1, 6))
    ids = [f"N{i}" for i in range(n)]
    nodes, expected = [], 0
    for i in ids:
        text, c = draw(label())
        nodes.append(GraphNode(i, text))
        expected += c
    edges = []
    for _ in range(draw(st.integers(0, 6))):
        lab = None
        if draw(st.booleans()):
            lab, c = draw(label())
            expected += c
        edges.append(GraphEdge(draw(st.sampled_from(ids)), draw(st.sampled_from(ids)), lab))
    return ReasoningGraph(tuple(nodes), tuple(edges)), expected


def scan_remaining_digits_ok(text: str) -> bool:
    """Independent scanner: every digit left must sit in a token that has a letter."""
    for token in text.split():
        core = token.strip(",:?!%$€£¥+-")
        if any(ch.isdigit() for ch in core) and not any(ch.isalpha() for ch in core):
            return False
    return True


