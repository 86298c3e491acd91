"""Generator x solver matrix execution with a resumable JSONL run log.

Work for one (question, generator) pair runs in a single task so the graph is
generated once and reused by every solver. Results are appended by the
calling thread in submission order, which keeps the log byte-stable across
reruns of the same config; wall-clock values live only under ``timing``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable

from .cache import BraidCache, CacheMiss, cache_key
from .config import DatasetConfig, RunConfig
from .datasets import load_dataset
from .economics import TokenUsage, cost_of_usage
from .gateway import AuthError, Gateway, GatewayError, ModelSpec
from .pipeline import (
    BraidArtifact,
    MalformedGraph,
    Question,
    UnparseableVerdict,
    apply_masking,
    generate_braid,
    judge,
    solve_classic,
    solve_with_braid,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def _sha(text: str | None) -> str | None:
    return None if text is None else hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class RunLog:
    """Append-only JSONL file; one complete JSON record per line."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def records(self) -> list[dict]:
        if not self.path.exists():
            return []
        out = []
        with open(self.path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError:
                    # a torn final line from an interrupted run is ignored
                    log.warning("%s:%d: skipping unreadable record", self.path, n)
        return out

    def results(self) -> list[dict]:
        return [r for r in self.records() if r.get("type") == "result"]

    def keys(self) -> set[str]:
        return {r["key"] for r in self.results()}

    def append(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False) + "\n"
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a+b") as fh:
                # never glue a record onto a torn line left by an interrupted run
                if fh.tell() > 0:
                    fh.seek(-1, 2)
                    if fh.read(1) != b"\n":
                        line = "\n" + line
                fh.write(line.encode("utf-8"))
                fh.flush()


def record_key(dataset: str, question_id: str, generator: str | None, solver: str, mode: str,
               templates: dict) -> str:
    parts = [dataset, question_id, generator or "-", solver, mode,
             templates.get("generation") or "-", templates.get("solve") or "-", templates["judge"]]
    return "|".join(parts)


@dataclass
class RunSummary:
    new_records: int = 0
    skipped: int = 0
    failures: int = 0
    correct: int = 0
    gateway_calls: int = 0
    generation_calls: int = 0
    log_path: str = ""
    failure_kinds: dict[str, int] = field(default_factory=dict)

    def absorb(self, records: Iterable[dict]) -> None:
        for r in records:
            self.new_records += 1
            if r["failure"]:
                self.failures += 1
                kind = r["failure"]["kind"]
                self.failure_kinds[kind] = self.failure_kinds.get(kind, 0) + 1
            if r["correct"]:
                self.correct += 1
            if r["mode"] == "braid" and not r["generation_cached"] and r["usage"]["generation"]:
                self.generation_calls += 1


class _Executor:
    def __init__(self, config: RunConfig, gateway: Gateway, cache: BraidCache | None = None):
        self.config = config
        self.gateway = gateway
        self.cache = cache or BraidCache(config.cache_path)
        self.prompts = config.prompts
        self._key_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, key: str) -> threading.Lock:
        with self._locks_guard:
            return self._key_locks.setdefault(key, threading.Lock())

    def templates(self, dataset: str, mode: str) -> dict:
        return {
            "generation": self.prompts.generation_hash if mode == "braid" else None,
            "solve": self.prompts.solve_hash if mode == "braid" else None,
            "judge": self.prompts.judge_hash(dataset),
        }

    def cost(self, usage: TokenUsage | None, spec: ModelSpec | None) -> str | None:
        if usage is None or spec is None:
            return None
        return str(cost_of_usage(usage, spec.model_name, self.config.prices))

    def obtain_artifact(self, question: Question, generator: ModelSpec,
                        ds: DatasetConfig) -> tuple[BraidArtifact, bool]:
        """Cache lookup, else generate (and mask when the dataset calls for it)."""
        ghash = self.prompts.generation_hash
        raw_key = cache_key(question.key, generator, ghash, False)
        masked_key = cache_key(question.key, generator, ghash, True)
        with self._lock_for(raw_key):
            if ds.masked:
                try:
                    return self.cache.get(masked_key), True
                except CacheMiss:
                    pass
            try:
                artifact, cached = self.cache.get(raw_key), True
            except CacheMiss:
                artifact = generate_braid(question, generator, self.gateway,
                                          self.config.retry, self.prompts)
                self.cache.put(artifact)
                cached = False
            if ds.masked:
                artifact = apply_masking(artifact, ds.masking)
                self.cache.put(artifact)
            return artifact, cached

    def _base(self, question: Question, generator: ModelSpec | None, solver: ModelSpec,
              mode: str) -> dict:
        templates = self.templates(question.dataset, mode)
        return {
            "schema_version": SCHEMA_VERSION,
            "type": "result",
            "key": record_key(question.dataset, question.id, generator.label if generator else None,
                              solver.label, mode, templates),
            "dataset": question.dataset,
            "question_id": question.id,
            "mode": mode,
            "generator": generator.label if generator else None,
            "generator_model": generator.model_name if generator else None,
            "solver": solver.label,
            "solver_model": solver.model_name,
            "judge": self.config.judge.label,
            "judge_model": self.config.judge.model_name,
            "artifact_key": None,
            "masked": False,
            "literals_masked": 0,
            "generation_cached": False,
            "correct": False,
            "failure": None,
            "rationale": None,
            "usage": {"generation": None, "solve": None, "judge": None},
            "costs_usd": {"generation": None, "solve": None, "judge": None},
            "digests": {"graph": None, "answer": None, "judge_output": None},
            "templates": templates,
            "timing": {"started_at": _now(), "finished_at": None},
        }

    def _fail(self, rec: dict, kind: str, message: str) -> dict:
        rec["correct"] = False
        rec["failure"] = {"kind": kind, "message": message[:500]}
        return rec

    def _finish(self, rec: dict) -> dict:
        rec["timing"]["finished_at"] = _now()
        return rec

    def _solve_and_judge(self, rec: dict, question: Question, solver: ModelSpec, solve) -> dict:
        try:
            result = solve()
        except AuthError:
            raise
        except GatewayError as exc:
            return self._fail(rec, exc.kind, str(exc))
        rec["usage"]["solve"] = result.usage.to_dict()
        rec["costs_usd"]["solve"] = self.cost(result.usage, solver)
        rec["digests"]["answer"] = _sha(result.answer)
        if not result.answer.strip():
            return self._fail(rec, "empty_answer", "solver returned an empty answer")
        try:
            verdict = judge(question, result.answer, self.config.judge, self.gateway,
                            self.config.retry, self.prompts)
        except AuthError:
            raise
        except UnparseableVerdict as exc:
            if exc.usage is not None:
                rec["usage"]["judge"] = exc.usage.to_dict()
                rec["costs_usd"]["judge"] = self.cost(exc.usage, self.config.judge)
            rec["digests"]["judge_output"] = _sha(exc.raw)
            return self._fail(rec, "unparseable_verdict", str(exc))
        except GatewayError as exc:
            return self._fail(rec, exc.kind, str(exc))
        rec["usage"]["judge"] = verdict.usage.to_dict()
        rec["costs_usd"]["judge"] = self.cost(verdict.usage, self.config.judge)
        rec["correct"] = verdict.correct
        rec["rationale"] = verdict.rationale
        return rec

    def braid_task(self, question: Question, generator: ModelSpec, solvers: list[ModelSpec],
                   ds: DatasetConfig) -> list[dict]:
        out = []
        for solver in solvers:
            rec = self._base(question, generator, solver, "braid")
            try:
                artifact, cached = self.obtain_artifact(question, generator, ds)
            except AuthError:
                raise
            except MalformedGraph as exc:
                if exc.usage is not None:
                    rec["usage"]["generation"] = exc.usage.to_dict()
                    rec["costs_usd"]["generation"] = self.cost(exc.usage, generator)
                rec["digests"]["graph"] = _sha(exc.raw)
                out.append(self._finish(self._fail(rec, "malformed_graph", str(exc))))
                continue
            except GatewayError as exc:
                out.append(self._finish(self._fail(rec, exc.kind, str(exc))))
                continue
            rec["artifact_key"] = self.cache.key_for(artifact)
            rec["masked"] = artifact.masked
            rec["literals_masked"] = artifact.literals_masked
            rec["generation_cached"] = cached
            rec["usage"]["generation"] = artifact.generation_usage.to_dict()
            rec["costs_usd"]["generation"] = self.cost(artifact.generation_usage, generator)
            rec["digests"]["graph"] = _sha(artifact.graph_text)
            rec = self._solve_and_judge(
                rec, question, solver,
                lambda: solve_with_braid(question, artifact, solver, self.gateway,
                                         self.config.retry, self.prompts))
            out.append(self._finish(rec))
        return out

    def classic_task(self, question: Question, solvers: list[ModelSpec]) -> list[dict]:
        out = []
        for solver in solvers:
            rec = self._base(question, None, solver, "classic")
            rec = self._solve_and_judge(
                rec, question, solver,
                lambda: solve_classic(question, solver, self.gateway, self.config.retry))
            out.append(self._finish(rec))
        return out


def _header(config: RunConfig, mode: str) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "type": "run",
        "mode": mode,
        "config": config.snapshot(),
        "timing": {"started_at": _now()},
    }


def _run(config: RunConfig, gateway: Gateway, mode: str,
         cache: BraidCache | None = None) -> RunSummary:
    config.validate()
    gateway.preflight(config.all_specs())
    runlog = RunLog(config.log_path)
    done = runlog.keys()
    ex = _Executor(config, gateway, cache)
    summary = RunSummary(log_path=str(runlog.path))
    calls_before = gateway.calls

    jobs = []
    for ds in config.datasets:
        questions = load_dataset(ds.path, ds.kind, ds.sample_size, config.seed)
        for q in questions:
            if mode == "matrix":
                for gen in config.generators:
                    pending = []
                    for solver in config.solvers:
                        key = record_key(q.dataset, q.id, gen.label, solver.label, "braid",
                                         ex.templates(q.dataset, "braid"))
                        if key in done:
                            summary.skipped += 1
                        else:
                            pending.append(solver)
                    if pending:
                        jobs.append((ex.braid_task, (q, gen, pending, ds)))
            else:
                pending = []
                for solver in config.solvers:
                    key = record_key(q.dataset, q.id, None, solver.label, "classic",
                                     ex.templates(q.dataset, "classic"))
                    if key in done:
                        summary.skipped += 1
                    else:
                        pending.append(solver)
                if pending:
                    jobs.append((ex.classic_task, (q, pending)))

    if jobs:
        runlog.append(_header(config, mode))
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        futures = [pool.submit(fn, *args) for fn, args in jobs]
        try:
            for fut in futures:
                records = fut.result()
                for r in records:
                    runlog.append(r)
                summary.absorb(records)
                log.info("%d records written, %d failures", summary.new_records, summary.failures)
        except BaseException:
            for fut in futures:
                fut.cancel()
            raise
    summary.gateway_calls = gateway.calls - calls_before
    return summary


def run_matrix(config: RunConfig, gateway: Gateway, cache: BraidCache | None = None) -> RunSummary:
    return _run(config, gateway, "matrix", cache)


def run_classic(config: RunConfig, gateway: Gateway, cache: BraidCache | None = None) -> RunSummary:
    return _run(config, gateway, "classic", cache)


def strip_timing(record: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in record.items() if k != "timing"}
