"""Format gate and the composite captioning / generation rewards."""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable

from .fingerprints import fp_sim
from .fragments import decompose, fg_match, frag_sim
from .molgraph import MolGraph
from .selfies import SelfiesError, decode_selfies
from .textmetrics import LANGUAGE_METRICS, language_scores, selfies_sim

log = logging.getLogger(__name__)

CAPTION, GENERATION = "caption", "generation"
TASKS = (CAPTION, GENERATION)
STRUCTURAL_METRICS = ("fp_sim", "selfies_sim", "frag_sim", "fg_match")
FORMAT_REWARD = 0.5
SIMILARITY_WEIGHT = 1.5

_OPEN, _CLOSE = "<answer>", "</answer>"
_TAG = re.compile(r"<\s*(/?)\s*answer\s*>")

# staged reward compositions, in the order the sub-rewards are added
ABLATION_LADDERS = {
    CAPTION: ((), ("bleu2",), ("bleu2", "bleu4"), ("bleu2", "bleu4", "meteor"),
              ("bleu2", "bleu4", "meteor", "rouge1"), ("bleu2", "bleu4", "meteor", "rouge1", "rouge2"),
              LANGUAGE_METRICS),
    GENERATION: ((), ("fp_sim",), ("fp_sim", "frag_sim"), ("fp_sim", "frag_sim", "fg_match"), STRUCTURAL_METRICS),
}


@dataclass(frozen=True)
class ModelResponse:
    text: str
    extracted_answer: str | None

    @property
    def format_ok(self) -> bool:
        return self.extracted_answer is not None


@dataclass(frozen=True)
class RewardBreakdown:
    total: float
    format_component: float
    similarity_component: float
    sub_scores: dict[str, float] = field(default_factory=dict)
    decoded: bool | None = None

    @classmethod
    def rejected(cls) -> "RewardBreakdown":
        return cls(0.0, 0.0, 0.0, {})


def extract_answer(response: str) -> ModelResponse:
    """Accept exactly one well-nested answer tag pair with a non-blank payload.

    Whitespace inside the angle brackets is tolerated (``< answer >``); tag
    names are case-sensitive.
    """
    tags = list(_TAG.finditer(response))
    if len(tags) != 2 or tags[0].group(1) or not tags[1].group(1):
        return ModelResponse(response, None)
    payload = response[tags[0].end():tags[1].start()].strip()
    return ModelResponse(response, payload or None)


@dataclass(frozen=True)
class RewardMask:
    """Which similarity terms count toward the reward.

    Disabled terms contribute 0 but the denominator stays the full term
    count, so enabling a term can only raise the attainable maximum.
    """

    enabled: frozenset[str] | None = None  # None means every term

    def weight(self, names: tuple[str, ...]) -> dict[str, float]:
        return {n: (1.0 if self.enabled is None or n in self.enabled else 0.0) / len(names) for n in names}

    def describe(self) -> str:
        return "all" if self.enabled is None else ("+".join(sorted(self.enabled)) or "format-only")


FULL = RewardMask()


def _combine(scores: dict[str, float], names: tuple[str, ...], mask: RewardMask, decoded=None) -> RewardBreakdown:
    weights = mask.weight(names)
    sim = sum(weights[n] * scores[n] for n in names)
    component = SIMILARITY_WEIGHT * sim
    return RewardBreakdown(FORMAT_REWARD + component, FORMAT_REWARD, component, dict(scores), decoded)


def r_cap(response: str, ref_caption: str, mask: RewardMask = FULL) -> RewardBreakdown:
    parsed = extract_answer(response)
    if not parsed.format_ok:
        return RewardBreakdown.rejected()
    return _combine(language_scores(parsed.extracted_answer, ref_caption), LANGUAGE_METRICS, mask)


def structural_scores(pred: MolGraph, ref: MolGraph, pred_selfies: str, ref_selfies: str) -> dict[str, float]:
    fp, fr = decompose(pred), decompose(ref)
    return {
        "fp_sim": fp_sim(pred, ref),
        "selfies_sim": selfies_sim(pred_selfies, ref_selfies),
        "frag_sim": frag_sim(fp, fr),
        "fg_match": fg_match(fp, fr),
    }


def r_structural(pred: MolGraph, ref: MolGraph, pred_selfies: str, ref_selfies: str) -> float:
    scores = structural_scores(pred, ref, pred_selfies, ref_selfies)
    return sum(scores.values()) / len(scores)


def r_gen(response: str, ref_selfies: str, mask: RewardMask = FULL, ref_graph: MolGraph | None = None) -> RewardBreakdown:
    parsed = extract_answer(response)
    if not parsed.format_ok:
        return RewardBreakdown.rejected()
    payload = parsed.extracted_answer
    ref = ref_graph if ref_graph is not None else decode_selfies(ref_selfies)
    try:
        pred = decode_selfies(payload)
    except SelfiesError:
        log.info("formatted but undecodable payload; scoring SELFIES similarity only")
        scores = {"fp_sim": 0.0, "selfies_sim": selfies_sim(payload, ref_selfies), "frag_sim": 0.0, "fg_match": 0.0}
        return _combine(scores, STRUCTURAL_METRICS, mask, decoded=False)
    return _combine(structural_scores(pred, ref, payload, ref_selfies), STRUCTURAL_METRICS, mask, decoded=True)


def score(response: str, reference: str, task: str, mask: RewardMask = FULL) -> RewardBreakdown:
    if task == CAPTION:
        return r_cap(response, reference, mask)
    if task == GENERATION:
        return r_gen(response, reference, mask)
    raise ValueError(f"unknown task {task!r}")


class SchemaError(ValueError):
    pass


BATCH_FIELDS = {"response": str, "reference": str, "task": str}


def validate_batch_record(rec: object, line_no: int) -> dict:
    if not isinstance(rec, dict):
        raise SchemaError(f"line {line_no}: expected an object")
    for key, typ in BATCH_FIELDS.items():
        if not isinstance(rec.get(key), typ):
            raise SchemaError(f"line {line_no}: field {key!r} missing or not a {typ.__name__}")
    if rec["task"] not in TASKS:
        raise SchemaError(f"line {line_no}: task must be one of {TASKS}")
    return rec


def read_jsonl(lines: Iterable[str]) -> list[dict]:
    out = []
    for k, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {k}: {exc}") from exc
    return out


def score_batch(records: list[dict], mask: RewardMask = FULL, workers: int = 1) -> list[dict]:
    """Score validated batch records; output order follows input order."""
    for k, rec in enumerate(records, 1):
        validate_batch_record(rec, k)

    def one(rec):
        return {**rec, **asdict(score(rec["response"], rec["reference"], rec["task"], mask))}

    if workers <= 1:
        return [one(r) for r in records]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(one, records))
