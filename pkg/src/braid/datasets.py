"""JSONL benchmark loaders.

Each dataset kind has a small adapter that maps upstream field names onto
:class:`Question`. Field lookup is case-insensitive and tries a few aliases,
so both hand-made fixtures and the public dumps load without conversion.
"""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import Any, Callable, Mapping

from .pipeline import DATASETS, Question


class SchemaError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line


class EmptyDataset(ValueError):
    pass


_ID_FIELDS = ("id", "question_id", "uid")


def _field(row: Mapping[str, Any], *names: str, required: bool = True) -> Any:
    lowered = {k.lower(): v for k, v in row.items()}
    for name in names:
        if name.lower() in lowered and lowered[name.lower()] is not None:
            return lowered[name.lower()]
    if required:
        raise SchemaError(f"missing field {names[0]!r}")
    return None


def _text(value: Any, name: str) -> str:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return repr(value) if isinstance(value, float) else str(value)
    if not isinstance(value, str) or not value.strip():
        raise SchemaError(f"field {name!r} must be nonempty text")
    return value


def _turns(value: Any) -> tuple[tuple[str, str], ...]:
    if not isinstance(value, list) or not value:
        raise SchemaError("conversation must be a nonempty list of turns")
    turns = []
    for turn in value:
        if not isinstance(turn, Mapping):
            raise SchemaError("each conversation turn must be an object")
        role = str(_field(turn, "role")).lower()
        text = _field(turn, "content", "text")
        if role not in ("user", "assistant"):
            raise SchemaError(f"unsupported conversation role {role!r}")
        turns.append((role, _text(text, "content")))
    if turns[-1][0] != "user":
        raise SchemaError("conversation must end with a user turn")
    return tuple(turns)


def _gsm_hard(row: Mapping[str, Any]) -> tuple[tuple, Any]:
    question = _text(_field(row, "question", "input"), "question")
    answer = _text(_field(row, "answer", "target"), "answer")
    return (("user", question),), answer


def _multichallenge(row: Mapping[str, Any]) -> tuple[tuple, Any]:
    turns = _turns(_field(row, "conversation"))
    criteria = _field(row, "target_question", "pass_criteria", "rubric")
    gt: Any = _text(criteria, "target_question")
    extra = _field(row, "pass_criteria", required=False)
    if extra is not None and extra != criteria:
        gt = {"target_question": gt, "pass_criteria": _text(extra, "pass_criteria")}
    return turns, gt


def _advanced_if(row: Mapping[str, Any]) -> tuple[tuple, Any]:
    conv = _field(row, "conversation", required=False)
    turns = _turns(conv) if conv is not None else (("user", _text(_field(row, "instruction", "prompt"), "instruction")),)
    reqs = _field(row, "requirements", "rubric", "rubrics")
    if isinstance(reqs, str):
        reqs = [reqs]
    if not isinstance(reqs, list) or not reqs or not all(isinstance(r, str) and r.strip() for r in reqs):
        raise SchemaError("requirements must be a nonempty list of text")
    return turns, tuple(reqs)


ADAPTERS: dict[str, Callable[[Mapping[str, Any]], tuple[tuple, Any]]] = {
    "gsm_hard": _gsm_hard,
    "multichallenge": _multichallenge,
    "advanced_if": _advanced_if,
}


def load_dataset(path: str | Path, kind: str, sample_size: int | None = None,
                 seed: int | None = None) -> list[Question]:
    """Load a JSONL file of ``kind`` records.

    With ``sample_size`` the questions are drawn uniformly without replacement
    using ``random.Random(seed)``; without it the file order is kept.
    """
    if kind not in DATASETS:
        raise ValueError(f"unknown dataset kind {kind!r}; expected one of {DATASETS}")
    adapter = ADAPTERS[kind]
    questions: list[Question] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                if not isinstance(row, dict):
                    raise SchemaError("record must be a JSON object")
                qid = _field(row, *_ID_FIELDS, required=False)
                qid = str(qid) if qid is not None else str(lineno)
                turns, gt = adapter(row)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", lineno, str(path)) from None
            except SchemaError as exc:
                raise SchemaError(str(exc), lineno, str(path)) from None
            if qid in seen:
                raise SchemaError(f"duplicate question id {qid!r}", lineno, str(path))
            seen.add(qid)
            questions.append(Question(qid, kind, turns, gt))
    if not questions:
        raise EmptyDataset(f"{path}: no records")
    if sample_size is not None:
        if sample_size > len(questions):
            raise ValueError(f"{path}: sample size {sample_size} exceeds {len(questions)} records")
        questions = random.Random(seed).sample(questions, sample_size)
    return questions
