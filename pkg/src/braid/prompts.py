"""Prompt templates for graph generation, solving and judging."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from string import Template
from typing import Mapping, Sequence

GENERATION_TEMPLATE = """\
You are an expert at generating clear, structured Mermaid flowcharts to plan responses in multi-turn conversations.

Task:
- Read the entire conversation history.
- Extract constraints, user-provided facts, references (including version references), and goals.
- Produce a flowchart plan that guides producing the best final assistant reply to the last user turn.
- Do NOT include the response itself—only the plan.
- Start exactly with 'flowchart TD;'

Conversation:
${conversationText}

Output Requirements:
1. Output ONLY Mermaid code, no extra text/markdown.
2. Start exactly with 'flowchart TD;'
3. Each node should represent constraints, facts, or steps to produce the final reply.
4. End nodes should indicate checks against constraints or rubric-related requirements (if implied).
"""

SOLVER_FRAME = "Follow this reasoning plan to answer the user:"

_VERDICT_INSTRUCTIONS = (
    "Explain your judgement briefly first. Then end your reply with a final line that is "
    'exactly "VERDICT: CORRECT" or "VERDICT: INCORRECT".'
)

JUDGE_TEMPLATES = {
    "gsm_hard": """\
You are grading the final answer to a math word problem against a reference value.

Problem:
$question

Reference answer: $ground_truth

Candidate response:
$answer

The candidate is correct when its final numeric answer equals the reference answer. \
Ignore formatting, units and rounding differences smaller than 0.01%. \
""" + _VERDICT_INSTRUCTIONS + "\n",
    "multichallenge": """\
You are grading an assistant's final reply in a multi-turn conversation.

Conversation:
$question

Pass criteria for the final reply:
$ground_truth

Candidate final reply:
$answer

The candidate is correct only when it satisfies the pass criteria. \
""" + _VERDICT_INSTRUCTIONS + "\n",
    "advanced_if": """\
You are grading whether a response follows every requirement of an instruction.

Instruction:
$question

Requirements:
$ground_truth

Candidate response:
$answer

The candidate is correct only when it satisfies every requirement listed. \
""" + _VERDICT_INSTRUCTIONS + "\n",
}

REFORMAT_INSTRUCTION = (
    "Your previous reply did not end with a verdict line. Reply again and finish with "
    'exactly one line: "VERDICT: CORRECT" or "VERDICT: INCORRECT".'
)


def digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def render_conversation(turns: Sequence[tuple[str, str]]) -> str:
    return "\n\n".join(f"{role.capitalize()}: {text}" for role, text in turns)


@dataclass(frozen=True)
class PromptSet:
    generation: str = GENERATION_TEMPLATE
    solver_frame: str = SOLVER_FRAME
    judge: Mapping[str, str] = field(default_factory=lambda: dict(JUDGE_TEMPLATES))

    @classmethod
    def load(cls, generation: str | None = None, solver_frame: str | None = None,
             judge: Mapping[str, str] | None = None) -> "PromptSet":
        """Build from override files; unspecified parts keep the defaults."""
        judges = dict(JUDGE_TEMPLATES)
        for kind, path in (judge or {}).items():
            judges[kind] = Path(path).read_text()
        return cls(
            generation=Path(generation).read_text() if generation else GENERATION_TEMPLATE,
            solver_frame=Path(solver_frame).read_text().strip() if solver_frame else SOLVER_FRAME,
            judge=judges,
        )

    @property
    def generation_hash(self) -> str:
        return digest(self.generation)[:16]

    @property
    def solve_hash(self) -> str:
        return digest(self.solver_frame)[:16]

    def judge_hash(self, dataset: str) -> str:
        return digest(self.judge[dataset])[:16]

    def render_generation(self, turns: Sequence[tuple[str, str]]) -> str:
        if not turns:
            raise ValueError("conversation must be nonempty")
        return Template(self.generation).substitute(conversationText=render_conversation(turns))

    def render_judge(self, dataset: str, question: str, ground_truth: str, answer: str) -> str:
        return Template(self.judge[dataset]).substitute(
            question=question, ground_truth=ground_truth, answer=answer)


DEFAULT_PROMPTS = PromptSet()


def render_generation_prompt(turns: Sequence[tuple[str, str]]) -> str:
    return DEFAULT_PROMPTS.render_generation(turns)
