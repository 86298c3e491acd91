"""The two-stage protocol: generate a reasoning graph, solve with it, judge.

Generation and solve usage are kept apart on purpose; pricing them and
deciding how to amortize generation is the economics layer's job.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from .economics import TokenUsage
from .gateway import ChatRequest, Gateway, ModelSpec, RetryPolicy
from .masking import MaskingConfig, mask_numerals
from .mermaid import MermaidError, parse_flowchart, serialize
from .prompts import DEFAULT_PROMPTS, REFORMAT_INSTRUCTION, PromptSet, render_conversation

DATASETS = ("gsm_hard", "multichallenge", "advanced_if")


class MalformedGraph(ValueError):
    def __init__(self, message: str, raw: str, usage: TokenUsage | None = None):
        super().__init__(message)
        self.raw = raw
        self.usage = usage


class UnparseableVerdict(ValueError):
    def __init__(self, message: str, raw: str, usage: TokenUsage | None = None):
        super().__init__(message)
        self.raw = raw
        self.usage = usage


class AlreadyMasked(ValueError):
    pass


@dataclass(frozen=True)
class Question:
    id: str
    dataset: str
    conversation: tuple[tuple[str, str], ...]
    ground_truth: Any

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}")
        if not self.conversation:
            raise ValueError("conversation must be nonempty")

    @property
    def key(self) -> str:
        return f"{self.dataset}/{self.id}"

    def ground_truth_text(self) -> str:
        gt = self.ground_truth
        if isinstance(gt, (list, tuple)):
            return "\n".join(f"- {item}" for item in gt)
        if isinstance(gt, Mapping):
            return "\n".join(f"{k}: {v}" for k, v in gt.items())
        return str(gt)


@dataclass(frozen=True)
class BraidArtifact:
    graph_text: str
    generator: ModelSpec
    generation_usage: TokenUsage
    masked: bool
    prompt_template_hash: str
    question_key: str = ""
    literals_masked: int = 0

    def to_dict(self) -> dict:
        return {
            "question_key": self.question_key,
            "generator": self.generator.to_dict(),
            "generation_usage": self.generation_usage.to_dict(),
            "masked": self.masked,
            "literals_masked": self.literals_masked,
            "prompt_template_hash": self.prompt_template_hash,
        }

    @classmethod
    def from_dict(cls, meta: Mapping[str, Any], graph_text: str) -> "BraidArtifact":
        return cls(
            graph_text=graph_text,
            generator=ModelSpec.from_dict(meta["generator"]),
            generation_usage=TokenUsage.from_dict(meta["generation_usage"]),
            masked=bool(meta["masked"]),
            prompt_template_hash=meta["prompt_template_hash"],
            question_key=meta.get("question_key", ""),
            literals_masked=int(meta.get("literals_masked", 0)),
        )


@dataclass(frozen=True)
class SolveResult:
    answer: str
    solver: ModelSpec
    usage: TokenUsage
    mode: str
    artifact: BraidArtifact | None = None

    def __post_init__(self):
        if self.mode not in ("braid", "classic"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "braid" and self.artifact is None:
            raise ValueError("braid-mode results must reference their artifact")


@dataclass(frozen=True)
class Verdict:
    correct: bool
    judge: ModelSpec
    rationale: str
    usage: TokenUsage = field(default_factory=TokenUsage)


_FENCE = re.compile(r"\A\s*```[ \t]*(?:mermaid)?[ \t]*\n(.*?)\n?[ \t]*```\s*\Z", re.DOTALL | re.IGNORECASE)


def strip_fences(text: str) -> str:
    m = _FENCE.match(text)
    return m.group(1) if m else text


def generate_braid(question: Question, generator: ModelSpec, gateway: Gateway,
                   policy: RetryPolicy = RetryPolicy(),
                   prompts: PromptSet = DEFAULT_PROMPTS) -> BraidArtifact:
    prompt = prompts.render_generation(question.conversation)
    response = gateway.complete(generator, ChatRequest(turns=(("user", prompt),)), policy)
    try:
        graph = parse_flowchart(strip_fences(response.text))
    except MermaidError as exc:
        raise MalformedGraph(f"generator {generator.label} returned an unparseable graph: {exc}",
                             response.text, response.usage) from exc
    return BraidArtifact(
        graph_text=serialize(graph),
        generator=generator,
        generation_usage=response.usage,
        masked=False,
        prompt_template_hash=prompts.generation_hash,
        question_key=question.key,
    )


def apply_masking(artifact: BraidArtifact, config: MaskingConfig = MaskingConfig()) -> BraidArtifact:
    if artifact.masked:
        raise AlreadyMasked("artifact is already masked")
    outcome = mask_numerals(parse_flowchart(artifact.graph_text), config)
    return replace(artifact, graph_text=serialize(outcome.graph), masked=True,
                   literals_masked=outcome.literals_masked)


def braid_request(question: Question, artifact: BraidArtifact,
                  prompts: PromptSet = DEFAULT_PROMPTS) -> ChatRequest:
    return ChatRequest(turns=question.conversation,
                       system=f"{prompts.solver_frame}\n{artifact.graph_text}")


def solve_with_braid(question: Question, artifact: BraidArtifact, solver: ModelSpec,
                     gateway: Gateway, policy: RetryPolicy = RetryPolicy(),
                     prompts: PromptSet = DEFAULT_PROMPTS) -> SolveResult:
    parse_flowchart(artifact.graph_text)
    response = gateway.complete(solver, braid_request(question, artifact, prompts), policy)
    return SolveResult(response.text, solver, response.usage, "braid", artifact)


def solve_classic(question: Question, solver: ModelSpec, gateway: Gateway,
                  policy: RetryPolicy = RetryPolicy()) -> SolveResult:
    response = gateway.complete(solver, ChatRequest(turns=question.conversation), policy)
    return SolveResult(response.text, solver, response.usage, "classic")


_VERDICT_LINE = re.compile(r"^[\s*_`>#-]*VERDICT\s*:\s*(CORRECT|INCORRECT)[\s*_`.]*$")


def parse_verdict(text: str) -> tuple[bool, str] | None:
    """Return (correct, rationale) from the last strict verdict line, if any."""
    lines = text.strip().splitlines()
    for i in range(len(lines) - 1, -1, -1):
        m = _VERDICT_LINE.match(lines[i])
        if m:
            rationale = "\n".join(lines[:i] + lines[i + 1:]).strip()
            return m.group(1) == "CORRECT", rationale
    return None


def judge(question: Question, answer: str, judge_spec: ModelSpec, gateway: Gateway,
          policy: RetryPolicy = RetryPolicy(), prompts: PromptSet = DEFAULT_PROMPTS) -> Verdict:
    if not answer or not answer.strip():
        raise ValueError("cannot judge an empty answer")
    prompt = prompts.render_judge(question.dataset, render_conversation(question.conversation),
                                  question.ground_truth_text(), answer)
    turns: tuple[tuple[str, str], ...] = (("user", prompt),)
    usage = TokenUsage()
    for attempt in range(2):
        response = gateway.complete(judge_spec, ChatRequest(turns=turns), policy)
        usage = usage + response.usage
        parsed = parse_verdict(response.text)
        if parsed is not None:
            correct, rationale = parsed
            if not correct and not rationale:
                rationale = "judge gave no rationale"
            return Verdict(correct, judge_spec, rationale, usage)
        turns = turns + (("assistant", response.text), ("user", REFORMAT_INSTRUCTION))
    raise UnparseableVerdict("judge output has no VERDICT line after one retry",
                             response.text, usage)
