"""CER/WER computation, SIM-O aggregation, and table rendering."""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


class EmptyReferenceError(ValueError):
    """Reference text empty after normalization."""


class ManifestError(ValueError):
    """Malformed manifest content; message carries the line number."""


MANIFEST_COLUMNS = ("id", "dataset", "language", "reference", "hypothesis", "sim_o")

METRIC_LABELS = {"cer": "CER", "wer": "WER", "simo": "SIM-O"}


def normalize_text(text: str) -> str:
    """NFC + collapse runs of whitespace to single spaces + strip."""
    return " ".join(unicodedata.normalize("NFC", text).split())


def edit_distance(ref: Sequence, hyp: Sequence) -> int:
    """Levenshtein distance with unit costs, rolling-row DP."""
    if len(ref) == 0:
        return len(hyp)
    if len(hyp) == 0:
        return len(ref)
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, start=1):
        cur = [i] + [0] * len(hyp)
        for j, h in enumerate(hyp, start=1):
            cost = 0 if r == h else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1]


def cer(reference: str, hypothesis: str) -> float:
    """Character error rate; spaces count as characters."""
    ref = normalize_text(reference)
    if not ref:
        raise EmptyReferenceError("reference empty after normalization")
    hyp = normalize_text(hypothesis)
    return edit_distance(list(ref), list(hyp)) / len(ref)


def wer(reference: str, hypothesis: str) -> float:
    """Word error rate over whitespace tokens."""
    ref = normalize_text(reference).split()
    if not ref:
        raise EmptyReferenceError("reference has no words")
    hyp = normalize_text(hypothesis).split()
    return edit_distance(ref, hyp) / len(ref)


@dataclass
class UtteranceRecord:
    utterance_id: str
    dataset: str
    language: str
    reference: str
    hypothesis: str | None = None
    sim_o: float | None = None

    def __post_init__(self):
        if self.hypothesis is None and self.sim_o is None:
            raise ValueError(f"record {self.utterance_id!r}: no metric field present")


@dataclass
class MetricTable:
    metric: str                                  # cer | wer | simo
    cells: dict[tuple[str, str], tuple[float, int]]  # (dataset, language) -> (mean, count)
    datasets: list[str]
    languages: list[str]
    skipped: int = 0

    @property
    def label(self) -> str:
        return METRIC_LABELS[self.metric]


def aggregate(records: Sequence[UtteranceRecord], metric: str,
              dataset_order: Sequence[str] | None = None,
              language_order: Sequence[str] | None = None) -> MetricTable:
    """Unweighted per-(dataset, language) mean of the selected metric."""
    if metric not in METRIC_LABELS:
        raise ValueError(f"unknown metric {metric!r}")
    if not records:
        raise ValueError("no records to aggregate")
    sums: dict[tuple[str, str], float] = {}
    counts: dict[tuple[str, str], int] = {}
    skipped = 0
    for rec in records:
        if metric == "simo":
            if rec.sim_o is None:
                skipped += 1
                continue
            value = rec.sim_o
        else:
            if rec.hypothesis is None:
                skipped += 1
                continue
            score = cer if metric == "cer" else wer
            value = score(rec.reference, rec.hypothesis)
        key = (rec.dataset, rec.language)
        sums[key] = sums.get(key, 0.0) + value
        counts[key] = counts.get(key, 0) + 1
    cells = {k: (sums[k] / counts[k], counts[k]) for k in sums}

    def ordered(seen: set[str], preferred: Sequence[str] | None) -> list[str]:
        if preferred is None:
            return sorted(seen)
        known = [x for x in preferred if x in seen]
        return known + sorted(seen - set(known))

    datasets = ordered({d for d, _ in cells}, dataset_order)
    languages = ordered({l for _, l in cells}, language_order)
    return MetricTable(metric, cells, datasets, languages, skipped)


def _format_cell(table: MetricTable, dataset: str, language: str) -> str:
    cell = table.cells.get((dataset, language))
    if cell is None:
        return "--"
    value = cell[0]
    if table.metric == "simo":
        return f"{value:.4f}"
    return f"{100.0 * value:.2f}"  # error rates rendered in percent


def render_table(table: MetricTable, fmt: str = "tsv") -> str:
    """Deterministic text rendering: datasets as rows, languages as columns."""
    header = ["dataset"] + [f"{lang} {table.label}" for lang in table.languages]
    rows = [[ds] + [_format_cell(table, ds, lang) for lang in table.languages]
            for ds in table.datasets]
    if fmt == "tsv":
        lines = ["\t".join(header)] + ["\t".join(r) for r in rows]
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "|".join(" --- " for _ in header) + "|"]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def read_manifest(path) -> list[UtteranceRecord]:
    """Parse the TSV manifest (header: id dataset language reference hypothesis sim_o)."""
    records: list[UtteranceRecord] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        if tuple(header.split("\t")) != MANIFEST_COLUMNS:
            raise ManifestError("line 1: header must be " + "\t".join(MANIFEST_COLUMNS))
        for lineno, line in enumerate(f, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != len(MANIFEST_COLUMNS):
                raise ManifestError(f"line {lineno}: expected {len(MANIFEST_COLUMNS)} columns, got {len(parts)}")
            uid, dataset, language, reference, hypothesis, sim_text = parts
            if uid in seen_ids:
                raise ManifestError(f"line {lineno}: duplicate id {uid!r}")
            seen_ids.add(uid)
            sim_val: float | None = None
            if sim_text:
                try:
                    sim_val = float(sim_text)
                except ValueError as exc:
                    raise ManifestError(f"line {lineno}: bad sim_o value {sim_text!r}") from exc
            try:
                records.append(UtteranceRecord(uid, dataset, language, reference,
                                               hypothesis or None, sim_val))
            except ValueError as exc:
                raise ManifestError(f"line {lineno}: {exc}") from exc
    if not records:
        raise ManifestError("manifest has no data rows")
    return records
