"""Token cost accounting and Performance-per-Dollar.

Money is held as :class:`decimal.Decimal` in USD so per-token prices like
$0.05 / 1M stay exact; ratios are turned into floats only when reported.
"""

from __future__ import annotations

import csv
import decimal
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Mapping

# ample headroom: 10^9 tokens * 10^-12 USD granularity is exact well inside this
MONEY_CTX = decimal.Context(prec=60, rounding=decimal.ROUND_HALF_EVEN)
MILLION = Decimal(1_000_000)
PHASES = ("braid_generation", "braid_solve", "classic_solve", "judge")


class UnknownModel(KeyError):
    pass


class NonPositiveN(ValueError):
    pass


class DegenerateBaseline(ZeroDivisionError):
    pass


def usd(value) -> Decimal:
    """Coerce to an exact Decimal (floats go through repr, not binary expansion)."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        return Decimal(repr(value))
    return Decimal(value)


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be nonnegative")

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(self.input_tokens + other.input_tokens,
                          self.output_tokens + other.output_tokens)

    def to_dict(self) -> dict:
        return {"input_tokens": self.input_tokens, "output_tokens": self.output_tokens}

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "TokenUsage":
        if not d:
            return cls()
        return cls(int(d["input_tokens"]), int(d["output_tokens"]))


@dataclass(frozen=True)
class Price:
    p_in: Decimal
    p_out: Decimal


@dataclass
class PriceSheet:
    """USD-per-token prices keyed by model name."""

    entries: dict[str, Price] = field(default_factory=dict)
    source: str = ""

    def __contains__(self, model_name: str) -> bool:
        return model_name in self.entries

    def __getitem__(self, model_name: str) -> Price:
        try:
            return self.entries[model_name]
        except KeyError:
            raise UnknownModel(f"no price listed for model {model_name!r}") from None

    @classmethod
    def per_million(cls, table: Mapping[str, tuple], source: str = "") -> "PriceSheet":
        entries = {}
        for name, (pin, pout) in table.items():
            pin, pout = usd(pin), usd(pout)
            if pin < 0 or pout < 0:
                raise ValueError(f"negative price for {name!r}")
            entries[name] = Price(MONEY_CTX.divide(pin, MILLION), MONEY_CTX.divide(pout, MILLION))
        return cls(entries, source)

    @classmethod
    def load(cls, path: str | Path) -> "PriceSheet":
        """Read a CSV with columns model_name, usd_per_1m_input, usd_per_1m_output."""
        table = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(line for line in fh if not line.lstrip().startswith("#"))
            missing = {"model_name", "usd_per_1m_input", "usd_per_1m_output"} - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: price sheet missing columns {sorted(missing)}")
            for row in reader:
                name = row["model_name"].strip()
                try:
                    table[name] = (Decimal(row["usd_per_1m_input"].strip()),
                                   Decimal(row["usd_per_1m_output"].strip()))
                except decimal.InvalidOperation:
                    raise ValueError(f"{path}: bad price for {name!r}") from None
        return cls.per_million(table, source=str(path))

    def to_dict(self) -> dict:
        return {
            name: {"usd_per_1m_input": str(MONEY_CTX.multiply(p.p_in, MILLION).normalize()),
                   "usd_per_1m_output": str(MONEY_CTX.multiply(p.p_out, MILLION).normalize())}
            for name, p in sorted(self.entries.items())
        }


def cost_of_usage(usage: TokenUsage, model_name: str, prices: PriceSheet) -> Decimal:
    price = prices[model_name]
    return MONEY_CTX.add(MONEY_CTX.multiply(Decimal(usage.input_tokens), price.p_in),
                         MONEY_CTX.multiply(Decimal(usage.output_tokens), price.p_out))


@dataclass(frozen=True)
class CostRecord:
    question_id: str
    phase: str
    usage: TokenUsage
    model_name: str
    cost_usd: Decimal

    @classmethod
    def price(cls, question_id: str, phase: str, usage: TokenUsage, model_name: str,
              prices: PriceSheet) -> "CostRecord":
        if phase not in PHASES:
            raise ValueError(f"unknown phase {phase!r}")
        return cls(question_id, phase, usage, model_name, cost_of_usage(usage, model_name, prices))


def aggregate_model_cost(records: Iterable[CostRecord], model_name: str) -> Decimal:
    total = Decimal(0)
    for r in records:
        if r.model_name == model_name:
            total = MONEY_CTX.add(total, r.cost_usd)
    return total


@dataclass(frozen=True)
class CostBreakdown:
    c_braid: Decimal = Decimal(0)
    c_inference: Decimal = Decimal(0)

    @classmethod
    def from_records(cls, records: Iterable[CostRecord], include_judge: bool = False) -> "CostBreakdown":
        braid = inference = Decimal(0)
        for r in records:
            if r.phase == "braid_generation":
                braid = MONEY_CTX.add(braid, r.cost_usd)
            elif r.phase in ("braid_solve", "classic_solve") or (include_judge and r.phase == "judge"):
                inference = MONEY_CTX.add(inference, r.cost_usd)
        return cls(braid, inference)


def solve_only_cost(b: CostBreakdown) -> Decimal:
    return b.c_inference


def amortized_cost(c_braid, c_inference, n: int) -> Decimal:
    if n < 1:
        raise NonPositiveN(f"amortization count must be >= 1, got {n}")
    return MONEY_CTX.add(MONEY_CTX.divide(usd(c_braid), Decimal(n)), usd(c_inference))


def ppd(accuracy, cost, baseline_accuracy, baseline_cost) -> float:
    """Accuracy-per-dollar normalised so the baseline scores exactly 1."""
    accuracy, cost = usd(accuracy), usd(cost)
    baseline_accuracy, baseline_cost = usd(baseline_accuracy), usd(baseline_cost)
    if baseline_accuracy <= 0 or baseline_cost <= 0:
        raise DegenerateBaseline("baseline accuracy and cost must be positive")
    if cost <= 0:
        raise DegenerateBaseline("cost must be positive")
    ratio = MONEY_CTX.divide(MONEY_CTX.multiply(accuracy, baseline_cost),
                             MONEY_CTX.multiply(cost, baseline_accuracy))
    return float(ratio)


def to_cents(amount_usd: Decimal) -> Decimal:
    return MONEY_CTX.multiply(usd(amount_usd), Decimal(100))
