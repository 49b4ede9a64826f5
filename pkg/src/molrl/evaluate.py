"""Corpus-level evaluation producing the captioning and generation metric tables."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .fingerprints import CIRCULAR, KEYS, KEYS_FILE, PATH, circular_fp, key_fp, path_fp, tanimoto
from .fragments import FG_EPS, decompose, fg_match, frag_metrics
from .molgraph import exact_match
from .rewards import CAPTION, GENERATION, SchemaError, extract_answer
from .selfies import SelfiesError, decode_selfies
from .textmetrics import language_scores, levenshtein, selfies_sim

CAPTION_COLUMNS = ("bleu2", "bleu4", "meteor", "rouge1", "rouge2", "rougeL")
GENERATION_COLUMNS = ("bleu", "exact", "levenshtein", "path_fts", "keys_fts", "circular_fts",
                      "frag_j", "frag_r", "fg_match", "validity")
COLUMN_TITLES = {
    "bleu2": "BLEU-2", "bleu4": "BLEU-4", "meteor": "METEOR", "rouge1": "ROUGE-1", "rouge2": "ROUGE-2",
    "rougeL": "ROUGE-L", "bleu": "BLEU (SELFIES char)", "exact": "Exact", "levenshtein": "Levenshtein (char)",
    "path_fts": "path FTS", "keys_fts": "keys FTS", "circular_fts": "circular FTS", "frag_j": "Frag-J",
    "frag_r": "Frag-R", "fg_match": "FG-Match", "validity": "Validity",
}
NOTES = (
    "Exact match is stereo-agnostic (canonical graph form ignores chirality tags).",
    "path/keys/circular FTS use this package's own fingerprints; absolute values are not comparable to third-party toolkit columns.",
    "Levenshtein is character-level on the raw SELFIES text.",
    "METEOR uses exact and suffix-stem matching only (no synonym resource).",
    "BLEU uses add-one smoothing for n > 1; SELFIES BLEU is character 4-gram.",
    "Means are over every record, including malformed and undecodable outputs.",
)


class IdMismatch(SchemaError):
    pass


def metric_config(task: str) -> dict:
    return {
        "task": task,
        "bleu_smoothing": "add-one n>1",
        "selfies_bleu_n": 4,
        "fingerprints": {CIRCULAR: {"radius": 2, "nbits": 2048}, PATH: {"min_len": 1, "max_len": 7, "nbits": 2048},
                         KEYS: {"file": KEYS_FILE, "nbits": 166}},
        "fg_eps": FG_EPS,
        "stereo": "ignored",
    }


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:12]


@dataclass
class MetricReport:
    task: str
    rows: list[dict] = field(default_factory=list)
    means: dict[str, float] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def columns(self) -> tuple[str, ...]:
        return CAPTION_COLUMNS if self.task == CAPTION else GENERATION_COLUMNS

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def consistency_gap(self) -> float:
        """Largest difference between a stored mean and a recomputed row mean."""
        if not self.rows:
            return 0.0
        return max(abs(self.means[c] - sum(r[c] for r in self.rows) / len(self.rows)) for c in self.columns)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("id", *self.columns))
        for row in self.rows:
            writer.writerow((row["id"], *(repr(float(row[c])) for c in self.columns)))
        writer.writerow(("MEAN", *(repr(float(self.means.get(c, 0.0))) for c in self.columns)))
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = [
            f"# {self.task} evaluation",
            "",
            f"- records: {len(self.rows)}",
            f"- config hash: `{self.config_hash}`",
            *(f"- {note}" for note in NOTES),
            "",
            "| " + " | ".join(COLUMN_TITLES[c] for c in self.columns) + " |",
            "|" + "---|" * len(self.columns),
            "| " + " | ".join(f"{self.means.get(c, 0.0):.4f}" for c in self.columns) + " |",
            "",
            f"Consistency check: max |mean - mean(rows)| = {self.consistency_gap():.3e}",
        ]
        return "\n".join(lines) + "\n"


def score_caption(response: str, reference: str) -> dict[str, float]:
    payload = extract_answer(response).extracted_answer or ""
    return language_scores(payload, reference)


def score_generation(response: str, reference: str) -> dict[str, float]:
    payload = extract_answer(response).extracted_answer
    text = payload or ""
    row = {"bleu": selfies_sim(text, reference), "levenshtein": float(levenshtein(text, reference))}
    graph_cols = ("exact", "path_fts", "keys_fts", "circular_fts", "frag_j", "frag_r", "fg_match", "validity")
    try:
        pred = decode_selfies(payload) if payload is not None else None
    except SelfiesError:
        pred = None
    if pred is None:
        return {**row, **dict.fromkeys(graph_cols, 0.0)}
    ref = decode_selfies(reference)
    fp, fr = decompose(pred), decompose(ref)
    frag_j, frag_r = frag_metrics(fp, fr)
    return {
        **row,
        "exact": float(exact_match(pred, ref)),
        "path_fts": tanimoto(path_fp(pred), path_fp(ref)),
        "keys_fts": tanimoto(key_fp(pred), key_fp(ref)),
        "circular_fts": tanimoto(circular_fp(pred), circular_fp(ref)),
        "frag_j": frag_j,
        "frag_r": frag_r,
        "fg_match": fg_match(fp, fr),
        "validity": 1.0,
    }


def _load(path: str | Path, value_keys: tuple[str, ...]) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{k}: {exc}") from exc
            if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
                raise SchemaError(f"{path}:{k}: expected an object with a string 'id'")
            value = next((obj[key] for key in value_keys if isinstance(obj.get(key), str)), None)
            if value is None:
                raise SchemaError(f"{path}:{k}: needs one of {value_keys}")
            if obj["id"] in out:
                raise IdMismatch(f"{path}:{k}: duplicate id {obj['id']!r}")
            out[obj["id"]] = value
    return out


def evaluate_files(pred_file: str | Path, ref_file: str | Path, task: str, workers: int = 1) -> MetricReport:
    if task not in (CAPTION, GENERATION):
        raise SchemaError(f"unknown task {task!r}")
    preds = _load(pred_file, ("response", "prediction"))
    ref_keys = ("reference", "description") if task == CAPTION else ("reference", "selfies")
    refs = _load(ref_file, ref_keys)
    if set(preds) != set(refs):
        missing, extra = sorted(set(refs) - set(preds)), sorted(set(preds) - set(refs))
        raise IdMismatch(f"ids differ: missing predictions {missing[:5]}, unknown ids {extra[:5]}")
    return evaluate_pairs([(i, preds[i], refs[i]) for i in sorted(refs)], task, workers)


def evaluate_pairs(pairs: list[tuple[str, str, str]], task: str, workers: int = 1) -> MetricReport:
    fn = score_caption if task == CAPTION else score_generation
    if task == GENERATION:
        for rid, _, ref in pairs:
            try:
                decode_selfies(ref)
            except SelfiesError as exc:
                raise SchemaError(f"reference {rid!r} does not decode: {exc}") from exc

    def one(pair):
        rid, resp, ref = pair
        return {"id": rid, **fn(resp, ref)}

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, pairs))
    else:
        rows = [one(p) for p in pairs]
    report = MetricReport(task, rows, config=metric_config(task))
    n = len(rows)
    report.means = {c: (sum(r[c] for r in rows) / n if n else 0.0) for c in report.columns}
    return report


def write_report(report: MetricReport, out_prefix: str | Path) -> tuple[Path, Path]:
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path, md_path = prefix.with_name(prefix.name + ".csv"), prefix.with_name(prefix.name + ".md")
    csv_path.write_text(report.to_csv(), encoding="utf-8")
    md_path.write_text(report.to_markdown(), encoding="utf-8")
    return csv_path, md_path
