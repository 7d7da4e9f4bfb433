"""Encoder rankings and rank correlation between diagnostics and downstream scores."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, FormatError

log = logging.getLogger(__name__)

_MINUS = ("-", "−")


@dataclass
class ScoreTable:
    """Tasks (rows) by encoders (columns); missing cells are NaN."""

    rows: list[str]
    cols: list[str]
    values: np.ndarray
    higher_is_better: list[bool] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.rows), len(self.cols)):
            raise FormatError(f"values shape {self.values.shape} != ({len(self.rows)}, {len(self.cols)})")
        if np.isinf(self.values).any():
            raise FormatError("score table contains infinite values")
        if not self.higher_is_better:
            self.higher_is_better = [True] * len(self.rows)
        if len(self.higher_is_better) != len(self.rows):
            raise FormatError("one direction flag per row is required")
        if len(set(self.rows)) != len(self.rows) or len(set(self.cols)) != len(self.cols):
            raise FormatError("duplicate row or column names")

    def row(self, name: str) -> np.ndarray:
        try:
            return self.values[self.rows.index(name)]
        except ValueError:
            raise KeyError(f"unknown row {name!r}; have {self.rows}") from None

    def col(self, name: str) -> np.ndarray:
        return self.values[:, self.cols.index(name)]

    @classmethod
    def from_csv(cls, path: str | Path) -> "ScoreTable":
        with open(path, encoding="utf-8", newline="") as fh:
            return cls.from_text(fh.read(), str(path))

    @classmethod
    def from_text(cls, text: str, name: str = "<table>") -> "ScoreTable":
        directions = None
        body = []
        for line in text.splitlines():
            if line.startswith("#direction:"):
                directions = [c.strip() for c in line[len("#direction:"):].split(",") if c.strip()]
            elif line.strip() and not line.startswith("#"):
                body.append(line)
        reader = list(csv.reader(body))
        if not reader:
            raise FormatError(f"{name}: empty table")
        cols = [c.strip() for c in reader[0][1:]]
        rows, values = [], []
        for rec in reader[1:]:
            if len(rec) != len(cols) + 1:
                raise FormatError(f"{name}: row {rec[0]!r} has {len(rec) - 1} cells, expected {len(cols)}")
            rows.append(rec[0].strip())
            try:
                values.append([float(v) if v.strip() else math.nan for v in rec[1:]])
            except ValueError as exc:
                raise FormatError(f"{name}: row {rec[0]!r}: {exc}") from None
        hib = []
        if directions is not None:
            if len(directions) != len(rows):
                raise FormatError(f"{name}: #direction lists {len(directions)} signs for {len(rows)} rows")
            hib = [d not in _MINUS for d in directions]
        return cls(rows, cols, np.array(values).reshape(len(rows), len(cols)), hib)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        if not all(self.higher_is_better):
            buf.write("#direction:" + ",".join("+" if h else "-" for h in self.higher_is_better) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["task", *self.cols])
        for name, vals in zip(self.rows, self.values):
            w.writerow([name, *("" if math.isnan(v) else repr(float(v)) for v in vals)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def load_fixture(name: str) -> ScoreTable:
    """Bundled tables: ``reference_metrics`` (diagnostics) or ``reference_downstream``."""
    text = resources.files("sentprobe.data").joinpath(f"{name}.csv").read_text(encoding="utf-8")
    return ScoreTable.from_text(text, name)


def load_reference_summary() -> dict:
    """Bundled mean/min rho per diagnostic from a nine-encoder study; a reference, not a recomputation target."""
    text = resources.files("sentprobe.data").joinpath("reference_summary.json").read_text(encoding="utf-8")
    return json.loads(text)["summary"]


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """Ascending fractional ranks (1 = smallest); tied values share their mean rank."""
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Pearson correlation of average ranks; ``None`` when undefined."""
    if len(xs) != len(ys):
        raise DomainError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        return None
    rx, ry = average_ranks(xs), average_ranks(ys)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0.0:
        return None
    return float(min(1.0, max(-1.0, float(rx @ ry) / denom)))


def rank_encoders(table: ScoreTable, row: str) -> dict[str, float]:
    """Rank of each encoder on one task (1 = best); encoders missing a score are left out."""
    vals = table.row(row)
    hib = table.higher_is_better[table.rows.index(row)]
    present = [i for i, v in enumerate(vals) if not math.isnan(v)]
    keyed = [-vals[i] if hib else vals[i] for i in present]
    ranks = average_ranks(keyed)
    out = {table.cols[i]: float(r) for i, r in zip(present, ranks)}
    return dict(sorted(out.items(), key=lambda kv: (kv[1], table.cols.index(kv[0]))))


def mean_task_ranks(table: ScoreTable) -> dict[str, float]:
    if not table.rows:
        raise DomainError("empty score table")
    per_encoder: dict[str, list[float]] = {c: [] for c in table.cols}
    for row in table.rows:
        for enc, r in rank_encoders(table, row).items():
            per_encoder[enc].append(r)
    out = {}
    for enc, rs in per_encoder.items():
        if rs:
            out[enc] = sum(rs) / len(rs)
        else:
            log.warning("encoder %r has no scores; excluded from the average ranking", enc)
    return out


def average_rank(table: ScoreTable) -> dict[str, float]:
    """Rank encoders by their mean per-task rank (1 = best)."""
    means = mean_task_ranks(table)
    names = list(means)
    ranks = average_ranks([means[n] for n in names])
    out = {n: float(r) for n, r in zip(names, ranks)}
    return dict(sorted(out.items(), key=lambda kv: (kv[1], names.index(kv[0]))))


def rounded_ranks(ranking: Mapping[str, float]) -> dict[str, int]:
    """Integer positions 1..n following the ranking's order (for comparison with integer ranks from a table)."""
    return {enc: i + 1 for i, enc in enumerate(sorted(ranking, key=lambda e: ranking[e]))}


@dataclass
class CorrelationMatrix:
    diagnostics: list[str]
    tasks: list[str]
    rho: np.ndarray  # NaN where undefined
    encoders: list[str] = field(default_factory=list)

    def row(self, diagnostic: str) -> np.ndarray:
        return self.rho[self.diagnostics.index(diagnostic)]

    def to_table(self) -> ScoreTable:
        return ScoreTable(self.diagnostics, self.tasks, self.rho)

    def summary(self) -> dict:
        out = {}
        for d in self.diagnostics:
            try:
                out[d] = summarize(self, d)
            except DomainError:
                out[d] = {"mean_rho": None, "min_rho": None}
        return out

    def write(self, csv_path: str | Path, summary_path: str | Path | None = None) -> None:
        self.to_table().to_csv(csv_path)
        if summary_path is not None:
            Path(summary_path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def correlation_matrix(diag_table: ScoreTable, down_table: ScoreTable, min_encoders: int = 3) -> CorrelationMatrix:
    """Spearman between every diagnostic row and every downstream row over shared encoders.

    Missing cells are dropped pairwise per correlation.
    """
    common = [c for c in diag_table.cols if c in down_table.cols]
    if len(common) < min_encoders:
        raise DomainError(f"only {len(common)} encoders in common; need at least {min_encoders}")
    di = [diag_table.cols.index(c) for c in common]
    ti = [down_table.cols.index(c) for c in common]
    rho = np.full((len(diag_table.rows), len(down_table.rows)), np.nan)
    for a, drow in enumerate(diag_table.values[:, di]):
        for b, trow in enumerate(down_table.values[:, ti]):
            keep = ~(np.isnan(drow) | np.isnan(trow))
            r = spearman(drow[keep], trow[keep]) if keep.sum() >= 2 else None
            if r is not None:
                rho[a, b] = r
    return CorrelationMatrix(list(diag_table.rows), list(down_table.rows), rho, common)


def summarize(matrix: CorrelationMatrix, diagnostic: str) -> dict[str, float]:
    row = matrix.row(diagnostic)
    row = row[~np.isnan(row)]
    if row.size == 0:
        raise DomainError(f"no defined correlations for {diagnostic!r}")
    return {"mean_rho": float(row.mean()), "min_rho": float(row.min())}


def id_perm_consistency(metrics: ScoreTable, tol: float = 0.05) -> list[dict]:
    """Compare the stated Id/PERM row against 100 * Id / PERM for each encoder."""
    ids, perms, stated = metrics.row("Id"), metrics.row("PERM"), metrics.row("Id/PERM")
    out = []
    for enc, i, p, st in zip(metrics.cols, ids, perms, stated):
        recomputed = float(100.0 * i / p) if p else math.nan
        diff = float(abs(recomputed - st))
        out.append({"encoder": enc, "stated": float(st), "recomputed": recomputed, "abs_diff": diff, "consistent": bool(diff <= tol)})
    return out


def cross_variant_spearman(a: Mapping[str, Mapping[str, float]], b: Mapping[str, Mapping[str, float]]) -> dict[str, float | None]:
    """Per-diagnostic Spearman between two settings, across the encoders both cover.

    ``a`` and ``b`` map encoder -> {diagnostic: value}.
    """
    encoders = [e for e in a if e in b]
    diags = sorted({d for e in encoders for d in a[e]} & {d for e in encoders for d in b[e]})
    out = {}
    for d in diags:
        pts = [(a[e][d], b[e][d]) for e in encoders if a[e].get(d) is not None and b[e].get(d) is not None]
        out[d] = spearman([p[0] for p in pts], [p[1] for p in pts]) if len(pts) >= 2 else None
    return out
