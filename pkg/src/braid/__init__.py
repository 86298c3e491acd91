"""Reasoning-graph generation, masking, solving and cost accounting for LLM evaluation."""

from .economics import PriceSheet, TokenUsage, amortized_cost, cost_of_usage, ppd, solve_only_cost
from .gateway import ChatRequest, ModelSpec, RetryPolicy, StubGateway
from .masking import MaskingConfig, mask_numerals, mask_text
from .mermaid import LintConfig, ReasoningGraph, lint_graph, parse_flowchart, serialize, validate
from .pipeline import BraidArtifact, Question, generate_braid, judge, solve_classic, solve_with_braid

__all__ = [
    "BraidArtifact", "ChatRequest", "LintConfig", "MaskingConfig", "ModelSpec", "PriceSheet",
    "Question", "ReasoningGraph", "RetryPolicy", "StubGateway", "TokenUsage",
    "amortized_cost", "cost_of_usage", "generate_braid", "judge", "lint_graph", "mask_numerals",
    "mask_text", "parse_flowchart", "ppd", "serialize", "solve_classic", "solve_only_cost",
    "solve_with_braid", "validate",
]
