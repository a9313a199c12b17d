"""Benchmark report assembly and rendering.

A report holds, per criterion: the Friedman p-value (raw, plus a familywise
adjustment across the criteria), the average ranks, and the pairwise
Wilcoxon p-values with multiplicity-controlled significance decisions. It
renders as a plain-text table (one section per criterion: name row, Friedman
row, rank row, pairwise rows), a JSON document that round-trips losslessly,
and a TSV of the raw per-dataset criterion values.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from itertools import combinations

import numpy as np

from .metrics import CRITERIA
from .stats import average_ranks, friedman_test, holm_adjust, multiplicity_control


@dataclass(frozen=True)
class CriterionTable:
    """Loss and raw criterion values: rows = datasets, columns = methods."""

    datasets: tuple[str, ...]
    methods: tuple[str, ...]
    losses: dict[str, list[list[float]]]  # criterion -> N x k
    raw: dict[str, list[list[float]]]

    def loss_matrix(self, criterion: str) -> np.ndarray:
        return np.asarray(self.losses[criterion], dtype=float)


def table_from_results(dataset_names, results) -> CriterionTable:
    """Assemble the table from per-dataset cross-validation results."""
    dataset_names = tuple(dataset_names)
    if not results:
        raise ValueError("no dataset results")
    methods = results[0].methods
    losses = {c: [[r.losses[m][c] for m in methods] for r in results] for c in CRITERIA}
    raw = {c: [[r.raw[m][c] for m in methods] for r in results] for c in CRITERIA}
    return CriterionTable(dataset_names, methods, losses, raw)


@dataclass(frozen=True)
class PairwiseEntry:
    method_a: str
    method_b: str
    p_value: float
    adjusted_p: float
    significant: bool


@dataclass(frozen=True)
class CriterionSection:
    criterion: str
    friedman_statistic: float | None
    friedman_p: float | None
    friedman_p_adjusted: float | None
    mean_ranks: tuple[float, ...]
    pairwise: tuple[PairwiseEntry, ...]


@dataclass(frozen=True)
class EvaluationReport:
    methods: tuple[str, ...]
    datasets: tuple[str, ...]
    sections: tuple[CriterionSection, ...]
    alpha: float
    procedure: str
    config_echo: tuple[tuple[str, str], ...] = ()
    warnings: tuple[str, ...] = ()


def build_report(table: CriterionTable, alpha: float = 0.05,
                 procedure: str = "bergman-hommel",
                 config_echo=(), warnings=()) -> EvaluationReport:
    """Statistical sections per criterion.

    Tests require at least two methods and two datasets; below that only
    ranks are reported and a warning records why.
    """
    n_datasets = len(table.datasets)
    n_methods = len(table.methods)
    warnings = list(warnings)
    with_tests = n_methods >= 2 and n_datasets >= 2
    if not with_tests:
        warnings.append(
            "statistical test sections skipped: need >= 2 methods and >= 2 datasets")

    sections = []
    friedman_raw = {}
    for criterion in CRITERIA:
        losses = table.loss_matrix(criterion)
        ranks = tuple(float(v) for v in average_ranks(losses))
        if with_tests:
            statistic, p = friedman_test(losses)
            friedman_raw[criterion] = (statistic, p)
        pairwise = ()
        if with_tests:
            pairs = list(combinations(range(n_methods), 2))
            p_values = [wilcoxon_pair(losses, i, j) for i, j in pairs]
            control = multiplicity_control(p_values, pairs=pairs,
                                           n_methods=n_methods,
                                           procedure=procedure, alpha=alpha)
            pairwise = tuple(
                PairwiseEntry(table.methods[i], table.methods[j],
                              float(p), float(adj), bool(rej))
                for (i, j), p, adj, rej in zip(pairs, control.p_values,
                                               control.adjusted, control.rejected))
        sections.append((criterion, ranks, pairwise))

    adjusted_friedman = {}
    if with_tests:
        # familywise adjustment across the criterion-level Friedman tests; an
        # unconstrained family makes the exhaustive closure coincide with Holm
        adjusted = holm_adjust([friedman_raw[c][1] for c in CRITERIA])
        adjusted_friedman = dict(zip(CRITERIA, adjusted))

    final_sections = tuple(
        CriterionSection(
            criterion=criterion,
            friedman_statistic=friedman_raw[criterion][0] if with_tests else None,
            friedman_p=friedman_raw[criterion][1] if with_tests else None,
            friedman_p_adjusted=float(adjusted_friedman[criterion]) if with_tests else None,
            mean_ranks=ranks,
            pairwise=pairwise,
        )
        for criterion, ranks, pairwise in sections)
    return EvaluationReport(
        methods=table.methods, datasets=table.datasets, sections=final_sections,
        alpha=alpha, procedure=procedure,
        config_echo=tuple((str(k), str(v)) for k, v in config_echo),
        warnings=tuple(warnings))


def wilcoxon_pair(losses: np.ndarray, i: int, j: int) -> float:
    from .stats import wilcoxon_signed_rank
    return wilcoxon_signed_rank(losses[:, i], losses[:, j]).p_value


def render_text(report: EvaluationReport) -> str:
    """Plain-text rendering: one section per criterion with name, Friedman
    p, rank row and pairwise p-value rows (significant entries starred)."""
    width = max(12, max((len(m) for m in report.methods), default=12) + 2)

    def cell(value) -> str:
        return f"{value:>{width}}"

    lines = []
    lines.append(f"methods: {', '.join(report.methods)}")
    lines.append(f"datasets ({len(report.datasets)}): {', '.join(report.datasets)}")
    lines.append(f"significance level: {report.alpha:g}   "
                 f"multiplicity control: {report.procedure}")
    if report.config_echo:
        lines.append("configuration:")
        for key, value in report.config_echo:
            lines.append(f"  {key} = {value}")
    lines.append("")
    for section in report.sections:
        lines.append("-" * (width * (len(report.methods) + 1)))
        header = cell("Nam.") + "".join(cell(m) for m in report.methods)
        lines.append(header)
        lines.append(cell(section.criterion))
        if section.friedman_p is not None:
            lines.append(cell("Frd.") + cell(f"{section.friedman_p:.3e}")
                         + cell(f"(adj {section.friedman_p_adjusted:.3e})"))
        lines.append(cell("Rank") + "".join(cell(f"{r:.3f}") for r in section.mean_ranks))
        for base in report.methods[:-1]:
            row = [cell(base)]
            for other in report.methods:
                entry = next((p for p in section.pairwise
                              if p.method_a == base and p.method_b == other), None)
                if entry is None:
                    row.append(cell(""))
                else:
                    mark = "*" if entry.significant else ""
                    row.append(cell(f"{entry.p_value:.3f}{mark}"))
            if len(row) > 1:
                lines.append("".join(row))
        lines.append("")
    if report.warnings:
        lines.append("notes:")
        for w in report.warnings:
            lines.append(f"  - {w}")
        lines.append("")
    return "\n".join(lines)


def report_to_json(report: EvaluationReport) -> str:
    return json.dumps(asdict(report), indent=2, sort_keys=True)


def report_from_json(text: str) -> EvaluationReport:
    data = json.loads(text)
    sections = tuple(
        CriterionSection(
            criterion=s["criterion"],
            friedman_statistic=s["friedman_statistic"],
            friedman_p=s["friedman_p"],
            friedman_p_adjusted=s["friedman_p_adjusted"],
            mean_ranks=tuple(s["mean_ranks"]),
            pairwise=tuple(PairwiseEntry(**p) for p in s["pairwise"]),
        )
        for s in data["sections"])
    return EvaluationReport(
        methods=tuple(data["methods"]),
        datasets=tuple(data["datasets"]),
        sections=sections,
        alpha=data["alpha"],
        procedure=data["procedure"],
        config_echo=tuple((k, v) for k, v in data["config_echo"]),
        warnings=tuple(data["warnings"]),
    )


def render_criteria_tsv(table: CriterionTable) -> str:
    """Raw criterion values, one row per (dataset, method, criterion)."""
    lines = ["dataset\tmethod\tcriterion\traw_value\tloss"]
    for d, dataset in enumerate(table.datasets):
        for m, method in enumerate(table.methods):
            for criterion in CRITERIA:
                raw = table.raw[criterion][d][m]
                loss = table.losses[criterion][d][m]
                lines.append(f"{dataset}\t{method}\t{criterion}\t{raw!r}\t{loss!r}")
    return "\n".join(lines) + "\n"
