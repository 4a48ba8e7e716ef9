"""Hallucination-accuracy scoring over benchmark exemplars.

Each exemplar carries a risk class (object/attribute, text, factual, or
combined text+factual) and receives a binary verdict from an external
detector. Accuracy per class is the share judged non-hallucinatory, as a
percentage rounded half-up to two decimals; the overall accuracy pools all
classes.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import EvalError
from .model import PromptSpec


class HallucinationClass(str, enum.Enum):
    OH_AH = "OH_AH"  # object / attribute risk
    TH = "TH"  # scene-text risk
    FH = "FH"  # factual risk
    TFH = "TFH"  # combined text + factual risk


class Verdict(str, enum.Enum):
    HALLUCINATORY = "hallucinatory"
    NON_HALLUCINATORY = "non_hallucinatory"


CLASS_ORDER = (
    HallucinationClass.OH_AH,
    HallucinationClass.TH,
    HallucinationClass.FH,
    HallucinationClass.TFH,
)

_CLASS_LABELS = {
    HallucinationClass.OH_AH: "OH",
    HallucinationClass.TH: "TH",
    HallucinationClass.FH: "FH",
    HallucinationClass.TFH: "TFH",
}


@dataclass(frozen=True)
class ExemplarRecord:
    id: str
    prompt: PromptSpec
    hallucination_class: HallucinationClass
    verdict: Optional[Verdict] = None
    generator_tag: str = ""

    def with_verdict(self, verdict: Verdict) -> "ExemplarRecord":
        return ExemplarRecord(
            id=self.id,
            prompt=self.prompt,
            hallucination_class=self.hallucination_class,
            verdict=verdict,
            generator_tag=self.generator_tag,
        )


@dataclass(frozen=True)
class ClassScore:
    non_hallucinatory: int
    total: int
    accuracy: Optional[Decimal]  # percentage, 2 decimals; None for an empty class


@dataclass(frozen=True)
class EvalReport:
    per_class: dict[HallucinationClass, ClassScore]
    overall: Decimal
    generator_tag: str = ""

    def accuracy(self, cls: HallucinationClass) -> Optional[Decimal]:
        return self.per_class[cls].accuracy

    def to_document(self) -> dict:
        doc: dict = {"generator_tag": self.generator_tag, "classes": {}}
        for cls in CLASS_ORDER:
            score = self.per_class[cls]
            doc["classes"][cls.value] = {
                "non_hallucinatory": score.non_hallucinatory,
                "total": score.total,
                "accuracy": None if score.accuracy is None else str(score.accuracy),
            }
        doc["overall"] = str(self.overall)
        return doc


def percentage(numerator: int, denominator: int) -> Decimal:
    """100 * numerator / denominator, rounded half-up to 2 decimals."""
    if denominator <= 0:
        raise EvalError("EMPTY_CLASS", "cannot compute a percentage over zero records")
    exact = Decimal(100 * numerator) / Decimal(denominator)
    return exact.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def load_benchmark(path: str | Path) -> list[ExemplarRecord]:
    """Read a JSON-lines benchmark fixture: {id, prompt, class, ...} per line."""
    path = Path(path)
    records: list[ExemplarRecord] = []
    seen: set[str] = set()
    lines = path.read_text(encoding="utf-8").splitlines()
    parsed_any = False
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            record_id = doc["id"]
            cls = HallucinationClass(doc["class"])
            raw_text = doc["prompt"]
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise EvalError("MALFORMED_RECORD", f"line {line_no}: {exc}", line=line_no) from exc
        if not isinstance(record_id, str) or not record_id:
            raise EvalError("MALFORMED_RECORD", f"line {line_no}: id must be a non-empty string", line=line_no)
        if record_id in seen:
            raise EvalError("DUPLICATE_ID", f"line {line_no}: repeated exemplar id {record_id!r}", line=line_no)
        seen.add(record_id)
        verdict = Verdict(doc["verdict"]) if doc.get("verdict") else None
        records.append(
            ExemplarRecord(
                id=record_id,
                prompt=PromptSpec(raw_text=raw_text, id=record_id, augmented_text=doc.get("augmented_prompt")),
                hallucination_class=cls,
                verdict=verdict,
                generator_tag=doc.get("generator", ""),
            )
        )
        parsed_any = True
    if not parsed_any:
        raise EvalError("MALFORMED_RECORD", f"{path} holds no records")
    return records


def class_totals(records: Iterable[ExemplarRecord]) -> dict[HallucinationClass, int]:
    totals = {cls: 0 for cls in CLASS_ORDER}
    for record in records:
        totals[record.hallucination_class] += 1
    return totals


def load_verdicts(path: str | Path) -> dict[str, Verdict]:
    """Read a JSON-lines verdict file: {id, verdict} per line."""
    verdicts: dict[str, Verdict] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            verdicts[doc["id"]] = Verdict(doc["verdict"])
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise EvalError("MALFORMED_RECORD", f"line {line_no}: {exc}", line=line_no) from exc
    return verdicts


def apply_verdicts(records: Sequence[ExemplarRecord], verdicts: dict[str, Verdict]) -> list[ExemplarRecord]:
    return [r.with_verdict(verdicts[r.id]) if r.id in verdicts else r for r in records]


def compute_report(records: Sequence[ExemplarRecord], generator_tag: str = "") -> EvalReport:
    """Per-class and overall accuracy; every record must carry a verdict."""
    missing = sorted(r.id for r in records if r.verdict is None)
    if missing:
        raise EvalError(
            "MISSING_VERDICT",
            f"{len(missing)} records lack verdicts: {', '.join(missing[:10])}"
            + ("..." if len(missing) > 10 else ""),
            ids=missing,
        )
    if not records:
        raise EvalError("MALFORMED_RECORD", "cannot score an empty record list")
    per_class: dict[HallucinationClass, ClassScore] = {}
    for cls in CLASS_ORDER:
        members = [r for r in records if r.hallucination_class is cls]
        good = sum(1 for r in members if r.verdict is Verdict.NON_HALLUCINATORY)
        per_class[cls] = ClassScore(
            non_hallucinatory=good,
            total=len(members),
            accuracy=percentage(good, len(members)) if members else None,
        )
    total_good = sum(score.non_hallucinatory for score in per_class.values())
    overall = percentage(total_good, len(records))
    return EvalReport(per_class=per_class, overall=overall, generator_tag=generator_tag)


# --- presentation ---------------------------------------------------------------


def _fmt(value: Optional[Decimal]) -> str:
    return "-" if value is None else f"{value:.2f}"


def report_table(report: EvalReport) -> str:
    """Aligned plain-text accuracy table for one report."""
    headers = [_CLASS_LABELS[cls] + " acc." for cls in CLASS_ORDER] + ["Overall acc."]
    values = [_fmt(report.accuracy(cls)) for cls in CLASS_ORDER] + [_fmt(report.overall)]
    counts = [
        f"{report.per_class[cls].non_hallucinatory}/{report.per_class[cls].total}" for cls in CLASS_ORDER
    ] + [f"{sum(s.non_hallucinatory for s in report.per_class.values())}/{sum(s.total for s in report.per_class.values())}"]
    widths = [max(len(h), len(v), len(c)) for h, v, c in zip(headers, values, counts)]
    lines = [
        "  ".join(h.rjust(w) for h, w in zip(headers, widths)),
        "  ".join(v.rjust(w) for v, w in zip(values, widths)),
        "  ".join(c.rjust(w) for c, w in zip(counts, widths)),
    ]
    return "\n".join(lines)


def signed_delta(value: Decimal, base: Decimal) -> str:
    delta = value - base
    sign = "+" if delta >= 0 else "-"
    return f"{sign}{abs(delta):.2f}"


def compare_reports(tagged: Sequence[tuple[str, EvalReport]]) -> str:
    """Accuracy table over several reports plus signed deltas vs the first."""
    if len(tagged) < 2:
        raise EvalError("MALFORMED_RECORD", "comparison needs at least two reports")
    columns = [_CLASS_LABELS[cls] + " acc." for cls in CLASS_ORDER] + ["Overall acc."]
    header = ["method"] + columns
    rows: list[list[str]] = [header]

    def row_values(report: EvalReport) -> list[Optional[Decimal]]:
        return [report.accuracy(cls) for cls in CLASS_ORDER] + [report.overall]

    base_tag, base_report = tagged[0]
    base_values = row_values(base_report)
    for tag, report in tagged:
        rows.append([tag] + [_fmt(v) for v in row_values(report)])
    delta_row = ["delta vs " + base_tag]
    last_values = row_values(tagged[-1][1])
    for value, base in zip(last_values, base_values):
        if value is None or base is None:
            delta_row.append("-")
        else:
            delta_row.append(signed_delta(value, base))
    rows.append(delta_row)

    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))) for row in rows]
    return "\n".join(lines)
