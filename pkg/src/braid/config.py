"""Run configuration: one YAML/JSON file plus flag overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .economics import PriceSheet
from .gateway import ModelSpec, ProviderConfig, RetryPolicy
from .masking import MaskingConfig
from .pipeline import DATASETS
from .prompts import PromptSet


class ConfigError(ValueError):
    pass


@dataclass
class DatasetConfig:
    kind: str
    path: str
    sample_size: int | None = None
    mask: bool | None = None
    masking: MaskingConfig = field(default_factory=MaskingConfig)

    @property
    def masked(self) -> bool:
        return self.kind == "gsm_hard" if self.mask is None else self.mask


@dataclass
class RunConfig:
    datasets: list[DatasetConfig]
    generators: list[ModelSpec]
    solvers: list[ModelSpec]
    judge: ModelSpec
    baseline: ModelSpec
    prices: PriceSheet
    providers: dict[str, ProviderConfig] = field(default_factory=dict)
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    concurrency: int = 4
    seed: int = 0
    out: str = "runs/default"
    cache_dir: str | None = None
    amortize_n: int = 1
    include_judge_cost: bool = False
    prompts: PromptSet = field(default_factory=PromptSet)

    @property
    def log_path(self) -> Path:
        return Path(self.out) / "run_log.jsonl"

    @property
    def cache_path(self) -> Path:
        return Path(self.cache_dir or os.environ.get("BRAID_CACHE_DIR") or Path(self.out) / "cache")

    def all_specs(self) -> list[ModelSpec]:
        out: list[ModelSpec] = []
        for spec in [*self.generators, *self.solvers, self.judge, self.baseline]:
            if spec not in out:
                out.append(spec)
        return out

    def validate(self) -> None:
        if not self.datasets:
            raise ConfigError("no datasets configured")
        for ds in self.datasets:
            if ds.kind not in DATASETS:
                raise ConfigError(f"unknown dataset kind {ds.kind!r}")
            if not Path(ds.path).exists():
                raise ConfigError(f"dataset file not found: {ds.path}")
            if ds.sample_size is not None and ds.sample_size < 1:
                raise ConfigError("sample_size must be positive")
        if not self.solvers:
            raise ConfigError("no solvers configured")
        if self.baseline not in self.solvers:
            raise ConfigError(f"baseline {self.baseline.label} must be one of the solvers")
        labels = [s.label for s in self.all_specs()]
        dupes = {x for x in labels if labels.count(x) > 1}
        if dupes:
            raise ConfigError(f"model labels must be unique per spec: {sorted(dupes)}")
        for spec in self.all_specs():
            if spec.model_name not in self.prices:
                raise ConfigError(f"no price listed for model {spec.model_name!r}")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        if self.amortize_n < 1:
            raise ConfigError("amortize_n must be >= 1")

    def snapshot(self) -> dict:
        """JSON-safe view recorded in the run log."""
        return {
            "datasets": [
                {"kind": d.kind, "path": str(d.path), "sample_size": d.sample_size, "masked": d.masked,
                 "placeholder": d.masking.placeholder, "mask_edge_labels": d.masking.mask_edge_labels,
                 "strict_digits": d.masking.strict_digits}
                for d in self.datasets
            ],
            "generators": [g.to_dict() for g in self.generators],
            "solvers": [s.to_dict() for s in self.solvers],
            "judge": self.judge.to_dict(),
            "baseline": self.baseline.label,
            "prices": self.prices.to_dict(),
            "price_sheet": self.prices.source,
            "retry": vars(self.retry),
            "concurrency": self.concurrency,
            "seed": self.seed,
            "amortize_n": self.amortize_n,
            "include_judge_cost": self.include_judge_cost,
            "solver_frame": self.prompts.solver_frame,
            "templates": {
                "generation": self.prompts.generation_hash,
                "solve": self.prompts.solve_hash,
                "judge": {k: self.prompts.judge_hash(k) for k in sorted(self.prompts.judge)},
            },
        }


def _specs(value: Any) -> list[ModelSpec]:
    if value is None:
        return []
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    return [ModelSpec.from_dict(v) for v in value]


def _resolve(base: Path, p: str | None) -> str | None:
    if p is None:
        return None
    path = Path(p)
    return os.path.normpath(path if path.is_absolute() else base / path)


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Read a config file, apply non-None ``overrides`` (flags win), validate."""
    raw: dict[str, Any] = {}
    base = Path.cwd()
    if path is not None:
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML/JSON: {exc}") from None
        base = Path(path).resolve().parent
    ov = {k: v for k, v in (overrides or {}).items() if v is not None}

    try:
        datasets_raw = raw.get("datasets", [])
        if "dataset" in ov:
            kind, _, dpath = ov["dataset"].partition("=")
            if not dpath:
                raise ConfigError("--dataset expects KIND=PATH")
            datasets_raw = [{"kind": kind, "path": str(Path(dpath).resolve())}]
        datasets = []
        for d in datasets_raw:
            masking = MaskingConfig(
                placeholder=d.get("placeholder", "_"),
                mask_edge_labels=d.get("mask_edge_labels", True),
                strict_digits=d.get("strict_digits", False),
            )
            datasets.append(DatasetConfig(
                kind=d["kind"], path=_resolve(base, d["path"]),
                sample_size=ov.get("sample_size", d.get("sample_size", raw.get("sample_size"))),
                mask=d.get("mask"), masking=masking,
            ))

        generators = _specs(ov.get("generators", raw.get("generators")))
        solvers = _specs(ov.get("solvers", raw.get("solvers")))
        judge_raw = ov.get("judge", raw.get("judge"))
        if judge_raw is None:
            raise ConfigError("no judge model configured")
        judge = ModelSpec.from_dict(judge_raw)

        baseline_raw = ov.get("baseline", raw.get("baseline"))
        if baseline_raw is None:
            if not solvers:
                raise ConfigError("no solvers configured")
            baseline = solvers[0]
        else:
            by_label = {s.label: s for s in solvers}
            if isinstance(baseline_raw, str) and baseline_raw in by_label:
                baseline = by_label[baseline_raw]
            else:
                baseline = ModelSpec.from_dict(baseline_raw)

        prices_path = ov.get("prices", raw.get("price_sheet"))
        if prices_path is not None:
            prices = PriceSheet.load(_resolve(base, prices_path))
        elif "prices" in raw:
            prices = PriceSheet.per_million(
                {k: (v["input"], v["output"]) for k, v in raw["prices"].items()}, source="inline")
        else:
            raise ConfigError("no price sheet configured")

        providers = {pid: ProviderConfig.from_dict(pid, p or {})
                     for pid, p in (raw.get("providers") or {}).items()}
        for spec in [*generators, *solvers, judge]:
            providers.setdefault(spec.provider_id, ProviderConfig(spec.provider_id))

        templates = raw.get("templates") or {}
        prompts = PromptSet.load(
            generation=_resolve(base, templates.get("generation")),
            solver_frame=_resolve(base, templates.get("solver_frame")),
            judge={k: _resolve(base, v) for k, v in (templates.get("judge") or {}).items()},
        )
        out = ov.get("out", raw.get("out", "runs/default"))
        cache_dir = raw.get("cache_dir")
        config = RunConfig(
            datasets=datasets,
            generators=generators,
            solvers=solvers,
            judge=judge,
            baseline=baseline,
            prices=prices,
            providers=providers,
            retry=RetryPolicy.from_dict(raw.get("retry")),
            concurrency=int(ov.get("concurrency", raw.get("concurrency", 4))),
            seed=int(ov.get("seed", raw.get("seed", 0))),
            out=str(out if "out" in ov else _resolve(base, out)),
            cache_dir=_resolve(base, cache_dir) if cache_dir else None,
            amortize_n=int(raw.get("amortize_n", 1)),
            include_judge_cost=bool(raw.get("include_judge_cost", False)),
            prompts=prompts,
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    config.validate()
    return config
