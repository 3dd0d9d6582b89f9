"""Annotation quality metrics.

Sample-oriented: precision/recall/F1 per annotated image, plus average
precision over the ranked prediction list, each averaged over evaluated
samples. Concept-oriented: precision/recall/F1 per concept from pooled
TP/FP/FN counts, averaged over concepts that were relevant or predicted
at least once. Mean F is always the mean of per-unit F values, never
the F of mean precision and recall.

Only positively scored entries of an annotation count as predictions;
zero rows are placeholders for inspection, not claims.
"""

from __future__ import annotations

from dataclasses import dataclass

from .annotator import Annotation, ConceptDef
from .errors import EngineError, FormatError


@dataclass(frozen=True)
class MetricsReport:
    mp_s: float
    mr_s: float
    mf_s: float
    map_s: float
    mp_c: float
    mr_c: float
    mf_c: float
    per_concept: dict[str, tuple[float, float, float] | None]
    samples_evaluated: int
    samples_missing_truth: int
    samples_empty_truth: int
    concepts_skipped: int


def _f1(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if (p + r) > 0.0 else 0.0


def sample_prf(predicted: set[str], truth: set[str]) -> tuple[float, float, float]:
    """Precision, recall, F1 for one sample's predicted and true id sets.

    An empty prediction against non-empty truth scores (0, 0, 0); the
    caller is expected to skip empty-truth samples.
    """
    if not predicted:
        return (0.0, 0.0, 0.0)
    hits = len(predicted & truth)
    p = hits / len(predicted)
    r = hits / len(truth) if truth else 0.0
    return (p, r, _f1(p, r))


def average_precision(ranked: list[str], truth: set[str]) -> float:
    """AP of a ranked prediction list against a truth set.

    Sums precision-at-i over ranks i that hit, divided by |truth|.
    """
    if not truth:
        return 0.0
    hits = 0
    total = 0.0
    for i, name in enumerate(ranked, 1):
        if name in truth:
            hits += 1
            total += hits / i
    return total / len(truth)


def concept_prf(predictions: dict[str, set[str]], truth: dict[str, set[str]],
                concept: str) -> tuple[float, float, float] | None:
    """Pooled precision/recall/F1 for one concept across samples.

    Counts each sample as TP, FP, or FN for the concept. Returns None
    when the concept is never relevant and never predicted (nothing to
    measure).
    """
    tp = fp = fn = 0
    for sample_id, predicted in predictions.items():
        in_pred = concept in predicted
        in_truth = concept in truth.get(sample_id, set())
        if in_pred and in_truth:
            tp += 1
        elif in_pred:
            fp += 1
        elif in_truth:
            fn += 1
    if tp + fn == 0 and fp == 0:
        return None
    p = tp / (tp + fp) if (tp + fp) > 0 else 0.0
    r = tp / (tp + fn) if (tp + fn) > 0 else 0.0
    return (p, r, _f1(p, r))


def load_ground_truth(path: str, concepts: dict[str, ConceptDef]) -> dict[str, set[str]]:
    """Truth file: ``<id>\\t<name>(,<name>)*`` with known concept names."""
    truth: dict[str, set[str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError("expected '<id>\\t<name,name,...>'", path=path, line=lineno)
            image_id, names_field = parts
            if not image_id:
                raise FormatError("empty image id", path=path, line=lineno)
            if image_id in truth:
                raise FormatError(f"duplicate image id {image_id!r}", path=path, line=lineno)
            names = set()
            for name in names_field.split(","):
                name = name.strip().lower()
                if not name:
                    raise FormatError("empty concept name", path=path, line=lineno)
                if name not in concepts:
                    raise FormatError(f"unknown concept {name!r}", path=path, line=lineno)
                names.add(name)
            truth[image_id] = names
    return truth


def evaluate(annotations: list[Annotation], truth: dict[str, set[str]],
             concepts: dict[str, ConceptDef]) -> MetricsReport:
    """Score a batch of annotations against ground truth.

    Annotations without a truth entry, and truth entries that are empty
    sets, are skipped and counted. Concepts that never occur (neither
    relevant nor predicted) are skipped from the concept averages and
    counted. Every name on either side must be a known concept.
    """
    for ann in annotations:
        for name, _score in ann.ranked:
            if name not in concepts:
                raise EngineError(f"annotation {ann.id!r} references unknown concept {name!r}")
    for sample_id, names in truth.items():
        for name in names:
            if name not in concepts:
                raise EngineError(f"ground truth for {sample_id!r} references unknown concept {name!r}")

    predictions: dict[str, set[str]] = {}
    ranked_lists: dict[str, list[str]] = {}
    missing = empty = 0
    for ann in annotations:
        if ann.id not in truth:
            missing += 1
            continue
        if not truth[ann.id]:
            empty += 1
            continue
        positive = [name for name, score in ann.ranked if score > 0.0]
        predictions[ann.id] = set(positive)
        ranked_lists[ann.id] = positive

    if not predictions:
        raise EngineError("no samples to evaluate (all annotations lacked usable ground truth)")

    p_sum = r_sum = f_sum = ap_sum = 0.0
    for sample_id, predicted in predictions.items():
        p, r, f = sample_prf(predicted, truth[sample_id])
        p_sum += p
        r_sum += r
        f_sum += f
        ap_sum += average_precision(ranked_lists[sample_id], truth[sample_id])
    count = len(predictions)

    eval_truth = {sid: truth[sid] for sid in predictions}
    per_concept: dict[str, tuple[float, float, float] | None] = {}
    skipped = 0
    cp_sum = cr_sum = cf_sum = 0.0
    measured = 0
    for name in sorted(concepts):
        prf = concept_prf(predictions, eval_truth, name)
        per_concept[name] = prf
        if prf is None:
            skipped += 1
        else:
            cp_sum += prf[0]
            cr_sum += prf[1]
            cf_sum += prf[2]
            measured += 1

    return MetricsReport(
        mp_s=p_sum / count, mr_s=r_sum / count, mf_s=f_sum / count, map_s=ap_sum / count,
        mp_c=cp_sum / measured if measured else 0.0,
        mr_c=cr_sum / measured if measured else 0.0,
        mf_c=cf_sum / measured if measured else 0.0,
        per_concept=per_concept,
        samples_evaluated=count,
        samples_missing_truth=missing,
        samples_empty_truth=empty,
        concepts_skipped=skipped,
    )


def _pct(x: float) -> float:
    return round(100.0 * x, 1)


def format_report(report: MetricsReport, per_concept: bool = True) -> str:
    """Human-readable table plus a machine-readable key=value block."""
    lines = []
    lines.append("metric        value")
    lines.append("------        -----")
    for label, value in (
        ("MP-sample", report.mp_s), ("MR-sample", report.mr_s), ("MF-sample", report.mf_s),
        ("MAP-sample", report.map_s),
        ("MP-concept", report.mp_c), ("MR-concept", report.mr_c), ("MF-concept", report.mf_c),
    ):
        lines.append(f"{label:<13} {_pct(value):5.1f}%")
    lines.append("")
    lines.append(f"samples evaluated: {report.samples_evaluated}"
                 f" (skipped: {report.samples_missing_truth} without truth,"
                 f" {report.samples_empty_truth} with empty truth)")
    lines.append(f"concepts skipped (never relevant or predicted): {report.concepts_skipped}")
    if per_concept:
        lines.append("")
        lines.append("concept                          P%      R%      F%")
        for name, prf in report.per_concept.items():
            if prf is None:
                lines.append(f"{name:<30} {'-':>6} {'-':>6} {'-':>6}")
            else:
                lines.append(f"{name:<30} {_pct(prf[0]):6.1f} {_pct(prf[1]):6.1f} {_pct(prf[2]):6.1f}")
    lines.append("")
    for key, value in (
        ("mp_s", report.mp_s), ("mr_s", report.mr_s), ("mf_s", report.mf_s), ("map_s", report.map_s),
        ("mp_c", report.mp_c), ("mr_c", report.mr_c), ("mf_c", report.mf_c),
    ):
        lines.append(f"{key}={value:.6f}")
        lines.append(f"{key}_pct={_pct(value)}")
    lines.append(f"samples_evaluated={report.samples_evaluated}")
    lines.append(f"samples_missing_truth={report.samples_missing_truth}")
    lines.append(f"samples_empty_truth={report.samples_empty_truth}")
    lines.append(f"concepts_skipped={report.concepts_skipped}")
    return "\n".join(lines)
