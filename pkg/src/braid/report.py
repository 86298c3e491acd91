"""Aggregate a run log into accuracy / PPD matrices and cost breakdowns.

Everything here is a pure function of the result records, so reports can be
regenerated from the log alone and come out byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Iterable

from .economics import MONEY_CTX, DegenerateBaseline, amortized_cost, ppd, to_cents


class MissingBaseline(LookupError):
    pass


def _dec(x) -> Decimal:
    return Decimal(x) if x is not None else Decimal(0)


def _mean(values: list[Decimal]) -> Decimal | None:
    if not values:
        return None
    total = Decimal(0)
    for v in values:
        total = MONEY_CTX.add(total, v)
    return MONEY_CTX.divide(total, Decimal(len(values)))


@dataclass
class Cell:
    generator: str | None
    solver: str
    n: int
    n_failed: int
    correct: int
    accuracy: float
    solve_cost_usd: str | None
    amortized_cost_usd: str | None
    ppd_solve_only: float | None = None
    ppd_amortized: float | None = None

    @property
    def n_scored(self) -> int:
        return self.n - self.n_failed


@dataclass
class CostRow:
    model: str
    averaging: str
    braid_generation_cents: str | None
    braid_solve_cents: str | None
    classic_cents: str | None


@dataclass
class DatasetReport:
    dataset: str
    baseline: str
    baseline_accuracy: float
    baseline_cost_usd: str
    generators: list[str]
    solvers: list[str]
    cells: list[Cell]
    classic: list[Cell]
    best_per_solver: dict[str, dict]
    costs: list[CostRow]

    def cell(self, generator: str, solver: str) -> Cell:
        for c in self.cells:
            if c.generator == generator and c.solver == solver:
                return c
        raise KeyError((generator, solver))

    def classic_cell(self, solver: str) -> Cell:
        for c in self.classic:
            if c.solver == solver:
                return c
        raise KeyError(solver)


@dataclass
class MatrixReport:
    amortize_n: int = 1
    datasets: list[DatasetReport] = field(default_factory=list)

    def dataset(self, name: str) -> DatasetReport:
        for d in self.datasets:
            if d.dataset == name:
                return d
        raise KeyError(name)


def _ordered(values: Iterable[str | None]) -> list[str]:
    out: list[str] = []
    for v in values:
        if v is not None and v not in out:
            out.append(v)
    return out


def _cell(records: list[dict], generator: str | None, solver: str, amortize_n: int,
          include_judge: bool) -> Cell:
    n = len(records)
    correct = sum(1 for r in records if r["correct"])
    failed = sum(1 for r in records if r["failure"])
    solve, amort = [], []
    for r in records:
        costs = r["costs_usd"]
        if costs["solve"] is None:
            continue
        inference = _dec(costs["solve"])
        if include_judge:
            inference = MONEY_CTX.add(inference, _dec(costs["judge"]))
        solve.append(inference)
        amort.append(amortized_cost(_dec(costs["generation"]), inference, amortize_n))
    solve_mean, amort_mean = _mean(solve), _mean(amort)
    return Cell(
        generator=generator, solver=solver, n=n, n_failed=failed, correct=correct,
        accuracy=correct / n if n else 0.0,
        solve_cost_usd=None if solve_mean is None else str(solve_mean),
        amortized_cost_usd=None if amort_mean is None else str(amort_mean),
    )


def _ppd(cell: Cell, cost: str | None, base: Cell) -> float | None:
    if cost is None:
        return None
    try:
        return ppd(Decimal(cell.correct) / Decimal(cell.n), Decimal(cost),
                   Decimal(base.correct) / Decimal(base.n), Decimal(base.solve_cost_usd))
    except DegenerateBaseline:
        return None


def _cents(values: list[Decimal]) -> str | None:
    m = _mean(values)
    if m is None:
        return None
    return str(to_cents(m).quantize(Decimal("0.000001")))


def _cost_rows(records: list[dict], models: list[str]) -> list[CostRow]:
    rows = []
    for averaging in ("all", "successful"):
        keep = [r for r in records if averaging == "all" or not r["failure"]]
        for model in models:
            gen = [_dec(r["costs_usd"]["generation"]) for r in keep
                   if r["mode"] == "braid" and r["generator"] == model
                   and not r["generation_cached"] and r["costs_usd"]["generation"] is not None]
            solve = [_dec(r["costs_usd"]["solve"]) for r in keep
                     if r["mode"] == "braid" and r["solver"] == model and r["costs_usd"]["solve"] is not None]
            classic = [_dec(r["costs_usd"]["solve"]) for r in keep
                       if r["mode"] == "classic" and r["solver"] == model and r["costs_usd"]["solve"] is not None]
            rows.append(CostRow(model, averaging, _cents(gen), _cents(solve), _cents(classic)))
    return rows


def aggregate(records: Iterable[dict], baseline: str, amortize_n: int = 1,
              include_judge_cost: bool = False) -> MatrixReport:
    """Build per-dataset matrices; PPD is normalised to ``baseline``'s classic row."""
    results = [r for r in records if r.get("type", "result") == "result"]
    report = MatrixReport(amortize_n=amortize_n)
    if not results:
        raise MissingBaseline(f"no classic records for baseline {baseline!r}")
    for dataset in _ordered(r["dataset"] for r in results):
        rows = [r for r in results if r["dataset"] == dataset]
        braid = [r for r in rows if r["mode"] == "braid"]
        classic = [r for r in rows if r["mode"] == "classic"]
        base_rows = [r for r in classic if r["solver"] == baseline]
        if not base_rows:
            raise MissingBaseline(f"{dataset}: no classic records for baseline {baseline!r}")
        base = _cell(base_rows, None, baseline, amortize_n, include_judge_cost)
        if base.solve_cost_usd is None or base.correct == 0 or Decimal(base.solve_cost_usd) == 0:
            raise MissingBaseline(f"{dataset}: baseline {baseline!r} has zero accuracy or cost")

        generators = _ordered(r["generator"] for r in braid)
        solvers = _ordered([r["solver"] for r in braid] + [r["solver"] for r in classic])
        cells = []
        for g in generators:
            for s in solvers:
                sub = [r for r in braid if r["generator"] == g and r["solver"] == s]
                if not sub:
                    continue
                c = _cell(sub, g, s, amortize_n, include_judge_cost)
                c.ppd_solve_only = _ppd(c, c.solve_cost_usd, base)
                c.ppd_amortized = _ppd(c, c.amortized_cost_usd, base)
                cells.append(c)
        classic_cells = []
        for s in solvers:
            sub = [r for r in classic if r["solver"] == s]
            if sub:
                c = _cell(sub, None, s, amortize_n, include_judge_cost)
                c.ppd_solve_only = c.ppd_amortized = _ppd(c, c.solve_cost_usd, base)
                classic_cells.append(c)
        best = {}
        for s in solvers:
            column = [c for c in cells if c.solver == s]
            if column:
                top = max(column, key=lambda c: c.accuracy)
                best[s] = {"generator": top.generator, "accuracy": top.accuracy}
        report.datasets.append(DatasetReport(
            dataset=dataset, baseline=baseline,
            baseline_accuracy=base.accuracy, baseline_cost_usd=base.solve_cost_usd,
            generators=generators, solvers=solvers, cells=cells, classic=classic_cells,
            best_per_solver=best,
            costs=_cost_rows(rows, _ordered(generators + solvers)),
        ))
    return report


def best_per_solver(accuracies: dict[tuple[str, str], float]) -> dict[str, float]:
    """Max accuracy over generator rows for each solver column."""
    out: dict[str, float] = {}
    for (_, solver), acc in accuracies.items():
        out[solver] = max(acc, out.get(solver, float("-inf")))
    return out


# ---------------------------------------------------------------------------
# rendering


def format_cell(accuracy: float, value: float | None) -> str:
    ppd_text = "n/a" if value is None else f"{value:.2f}"
    return f"{accuracy * 100:.1f}% / {ppd_text}"


def _matrix_table(ds: DatasetReport, variant: str) -> list[str]:
    attr = "ppd_solve_only" if variant == "solve-only" else "ppd_amortized"
    lines = ["| Gen → Solve | " + " | ".join(ds.solvers) + " |",
             "|---|" + "---|" * len(ds.solvers)]
    for g in ds.generators:
        row = []
        for s in ds.solvers:
            try:
                c = ds.cell(g, s)
                row.append(format_cell(c.accuracy, getattr(c, attr)))
            except KeyError:
                row.append("")
        lines.append(f"| {g} | " + " | ".join(row) + " |")
    row = []
    for s in ds.solvers:
        try:
            c = ds.classic_cell(s)
            row.append(format_cell(c.accuracy, getattr(c, attr)))
        except KeyError:
            row.append("")
    lines.append("| classic | " + " | ".join(row) + " |")
    return lines


def render_matrix(ds: DatasetReport, amortize_n: int) -> str:
    lines = [f"## {ds.dataset}", "",
             f"Baseline: {ds.baseline} (classic), accuracy {ds.baseline_accuracy * 100:.1f}%, "
             f"mean solve cost ${ds.baseline_cost_usd}", "",
             "### Accuracy % / PPD (solve-only cost)", ""]
    lines += _matrix_table(ds, "solve-only")
    lines += ["", f"### Accuracy % / PPD (amortized cost, N={amortize_n})", ""]
    lines += _matrix_table(ds, "amortized")
    lines += ["", "### Best accuracy per solver", "",
              "| Solver | Best generator | BRAID accuracy | Classic accuracy |", "|---|---|---|---|"]
    for s in ds.solvers:
        best = ds.best_per_solver.get(s)
        try:
            classic = f"{ds.classic_cell(s).accuracy * 100:.1f}%"
        except KeyError:
            classic = ""
        if best:
            lines.append(f"| {s} | {best['generator']} | {best['accuracy'] * 100:.1f}% | {classic} |")
        else:
            lines.append(f"| {s} |  |  | {classic} |")
    failures = [(c.generator or "classic", c.solver, c.n_failed) for c in ds.cells + ds.classic if c.n_failed]
    if failures:
        lines += ["", "### Hard failures (scored as incorrect)", ""]
        lines += [f"- {g} → {s}: {n}" for g, s, n in failures]
    return "\n".join(lines) + "\n"


MATRIX_HEADER = "# Accuracy and Performance-per-Dollar\n"
COST_COLUMNS = ["dataset", "model", "averaging", "braid_generation_cents", "braid_solve_cents", "classic_cents"]


def emit_reports(report: MatrixReport, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    body = [MATRIX_HEADER]
    for ds in report.datasets:
        section = render_matrix(ds, report.amortize_n)
        body.append("\n" + section)
        path = out / f"matrix_{ds.dataset}.md"
        path.write_text(MATRIX_HEADER + "\n" + section, encoding="utf-8")
        written.append(path)
    path = out / "matrix.md"
    path.write_text("".join(body), encoding="utf-8")
    written.append(path)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COST_COLUMNS)
    for ds in report.datasets:
        for row in ds.costs:
            writer.writerow([ds.dataset, row.model, row.averaging, row.braid_generation_cents or "",
                             row.braid_solve_cents or "", row.classic_cents or ""])
    path = out / "cost_breakdown.csv"
    path.write_text(buf.getvalue(), encoding="utf-8")
    written.append(path)

    path = out / "summary.json"
    path.write_text(json.dumps(asdict(report), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)
    return written
