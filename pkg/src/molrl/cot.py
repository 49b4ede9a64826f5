"""Knowledge-guided reasoning-data construction.

Records are annotated with structural descriptors and fragments, rendered into
the captioning or generation prompt, sent to a completion provider, and the
completions are filtered by the same metrics used as rewards.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
import urllib.error
import urllib.request
from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from string import Template
from typing import Callable, Iterable, Protocol, Sequence

from .fragments import decompose
from .molgraph import MolGraph, structural_info
from .rewards import CAPTION, GENERATION, TASKS, SchemaError, extract_answer, r_structural
from .selfies import SelfiesError, decode_selfies
from .textmetrics import r_language

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
URL_ENV, TOKEN_ENV = "MOLRL_PROVIDER_URL", "MOLRL_PROVIDER_TOKEN"


class DecodeFailure(ValueError):
    pass


class PromptBuildError(ValueError):
    pass


class ProviderError(RuntimeError):
    pass


@dataclass(frozen=True)
class MoleculeRecord:
    id: str
    selfies: str
    description: str
    split: str = "train"

    @classmethod
    def from_json(cls, obj: object, line_no: int = 0) -> "MoleculeRecord":
        if not isinstance(obj, dict):
            raise SchemaError(f"line {line_no}: expected an object")
        for key in ("id", "selfies", "description"):
            if not isinstance(obj.get(key), str):
                raise SchemaError(f"line {line_no}: field {key!r} missing or not a string")
        split = obj.get("split", "train")
        if split not in SPLITS:
            raise SchemaError(f"line {line_no}: split must be one of {SPLITS}")
        return cls(obj["id"], obj["selfies"], obj["description"], split)

    def graph(self) -> MolGraph:
        try:
            return decode_selfies(self.selfies)
        except SelfiesError as exc:
            raise DecodeFailure(f"record {self.id}: {exc}") from exc


@dataclass
class Thresholds:
    language: float = 0.5
    structural: float = 0.5


@dataclass
class CotSample:
    id: str
    task: str
    prompt: str
    completion: str
    answer: str | None = None
    scores: dict[str, float | bool] = field(default_factory=dict)
    accepted: bool = False
    gate: str = ""  # first failed gate, empty when accepted

    def to_json(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "gate"}


# ---------------------------------------------------------------------------
# prompts


@lru_cache(maxsize=None)
def _template(task: str) -> Template:
    text = resources.files("molrl.data.prompts").joinpath(f"{task}.txt").read_text(encoding="utf-8")
    return Template(text.rstrip("\n"))


def _numbered(lines: Sequence[str]) -> str:
    return "\n".join(f"{k}. {line}" for k, line in enumerate(lines, 1))


def _annotations(rec: MoleculeRecord) -> dict[str, str]:
    graph = rec.graph()
    frags = decompose(graph)
    return {
        "structural_info": _numbered(structural_info(graph).sentences()),
        "fragments": "".join(f"<|{label}|>" for label in frags.display()),
    }


def split_sentences(text: str) -> list[str]:
    parts = [p.strip() for p in text.strip().split(". ")]
    parts = [p for p in parts if p]
    return [p if p.endswith(".") or k == len(parts) - 1 else p + "." for k, p in enumerate(parts)]


def build_caption_prompt(rec: MoleculeRecord) -> str:
    if not rec.description.strip():
        raise PromptBuildError(f"record {rec.id}: empty description")
    return _template(CAPTION).substitute(selfies=rec.selfies, answer=rec.description.strip(), **_annotations(rec))


def build_generation_prompt(rec: MoleculeRecord) -> str:
    if not rec.description.strip():
        raise PromptBuildError(f"record {rec.id}: empty description")
    return _template(GENERATION).substitute(
        description=_numbered(split_sentences(rec.description)), answer=rec.selfies, **_annotations(rec)
    )


def build_prompt(rec: MoleculeRecord, task: str) -> str:
    if task == CAPTION:
        return build_caption_prompt(rec)
    if task == GENERATION:
        return build_generation_prompt(rec)
    raise ValueError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# providers


class Provider(Protocol):
    def complete(self, request_id: str, prompt: str) -> str: ...


@dataclass
class MockProvider:
    """Echoes the gold answer embedded in the prompt.

    With ``drop_tags`` > 0 the answer tags are removed from a deterministic,
    id-seeded fraction of the completions.
    """

    drop_tags: float = 0.0
    seed: int = 0
    fail_first: int = 0  # simulate transient failures per request
    _failures: dict[str, int] = field(default_factory=dict, repr=False)

    def complete(self, request_id: str, prompt: str) -> str:
        if self._failures.get(request_id, 0) < self.fail_first:
            self._failures[request_id] = self._failures.get(request_id, 0) + 1
            raise ProviderError(f"simulated failure for {request_id}")
        start = prompt.rfind("<answer>")
        end = prompt.rfind("</answer>")
        gold = prompt[start + len("<answer>"):end].strip() if 0 <= start < end else ""
        digest = hashlib.sha256(f"{self.seed}:{request_id}".encode()).digest()
        u = int.from_bytes(digest[:8], "big") / 2**64
        reasoning = "<think>Reading the structural hints and fragments in turn.</think>\n"
        if u < self.drop_tags:
            return reasoning + gold
        return f"{reasoning}<answer> {gold} </answer>"


@dataclass
class HttpProvider:
    """POSTs ``{prompt, max_tokens, temperature}`` and reads ``{text}`` back."""

    url: str
    token: str | None = None
    max_tokens: int = 1024
    temperature: float = 0.7
    timeout: float = 60.0

    @classmethod
    def from_env(cls, **kwargs) -> "HttpProvider":
        url = os.environ.get(URL_ENV)
        if not url:
            raise ProviderError(f"{URL_ENV} is not set")
        return cls(url, os.environ.get(TOKEN_ENV), **kwargs)

    def complete(self, request_id: str, prompt: str) -> str:
        body = json.dumps({"prompt": prompt, "max_tokens": self.max_tokens, "temperature": self.temperature}).encode()
        headers = {"Content-Type": "application/json", "X-Request-Id": request_id}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        req = urllib.request.Request(self.url, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode())
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise ProviderError(str(exc)) from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
            raise ProviderError("response lacks a 'text' field")
        return payload["text"]


def complete_with_retry(provider: Provider, request_id: str, prompt: str, max_attempts: int = 3,
                        backoff: float = 0.5, sleep: Callable[[float], None] = time.sleep) -> str:
    for attempt in range(1, max_attempts + 1):
        try:
            return provider.complete(request_id, prompt)
        except ProviderError as exc:
            if attempt == max_attempts:
                raise
            delay = backoff * 2 ** (attempt - 1)
            log.warning("provider failed for %s (attempt %d): %s; retrying in %.2fs", request_id, attempt, exc, delay)
            sleep(delay)
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# filtering


def filter_sample(sample: CotSample, rec: MoleculeRecord, thresholds: Thresholds | None = None) -> CotSample:
    th = thresholds or Thresholds()
    parsed = extract_answer(sample.completion)
    sample.answer = parsed.extracted_answer
    sample.scores = {"format_ok": parsed.format_ok}
    sample.accepted, sample.gate = False, ""
    if not parsed.format_ok:
        sample.gate = "format"
        return sample
    if sample.task == CAPTION:
        score = r_language(sample.answer, rec.description)
        sample.scores["r_language"] = score
        ok, gate = score >= th.language, "threshold"
    else:
        try:
            pred = decode_selfies(sample.answer)
        except SelfiesError:
            sample.scores["valid"] = False
            sample.gate = "validity"
            return sample
        sample.scores["valid"] = True
        score = r_structural(pred, rec.graph(), sample.answer, rec.selfies)
        sample.scores["r_structural"] = score
        ok, gate = score >= th.structural, "threshold"
    sample.accepted = ok
    sample.gate = "" if ok else gate
    return sample


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class PipelineSummary:
    total: int = 0
    resumed: int = 0
    processed: int = 0
    accepted: int = 0
    format_fail: int = 0
    validity_fail: int = 0
    threshold_fail: int = 0
    prompt_fail: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.processed if self.processed else 0.0

    def as_dict(self) -> dict:
        return {**asdict(self), "acceptance_rate": self.acceptance_rate}


def _existing_ids(path: Path) -> set[str]:
    """Ids already written; a torn trailing line is cut off so the file stays valid."""
    if not path.exists():
        return set()
    ids = set()
    good_bytes = 0
    with path.open("rb") as fh:
        for raw in fh:
            try:
                ids.add(json.loads(raw)["id"])
            except (ValueError, KeyError, TypeError):
                break
            if not raw.endswith(b"\n"):
                break
            good_bytes += len(raw)
    if good_bytes != path.stat().st_size:
        with path.open("r+b") as fh:
            fh.truncate(good_bytes)
    return ids


def run_pipeline(corpus: Iterable[MoleculeRecord], task: str, provider: Provider, thresholds: Thresholds | None = None,
                 out_path: str | Path | None = None, rejected_path: str | Path | None = None, max_in_flight: int = 4,
                 resume: bool = True, max_attempts: int = 3, backoff: float = 0.5,
                 sleep: Callable[[float], None] = time.sleep) -> tuple[list[CotSample], PipelineSummary]:
    """Stream records through prompt -> provider -> filter.

    Accepted samples go to ``out_path`` and rejected ones to ``rejected_path``,
    one JSON object per line, written in corpus order by a single writer.
    Requests run concurrently within a bounded window.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    th = thresholds or Thresholds()
    out = Path(out_path) if out_path else None
    rej = Path(rejected_path) if rejected_path else None
    done: set[str] = set()
    if resume:
        for p in (out, rej):
            if p is not None:
                done |= _existing_ids(p)
    elif out is not None:
        out.write_text("")
        if rej is not None:
            rej.write_text("")
    summary = PipelineSummary()
    accepted: list[CotSample] = []

    out_fh = out.open("a", encoding="utf-8") if out else None
    rej_fh = rej.open("a", encoding="utf-8") if rej else None

    def write(fh, sample):
        if fh is not None:
            fh.write(json.dumps(sample.to_json(), sort_keys=True) + "\n")
            fh.flush()

    def finish(rec: MoleculeRecord, prompt: str, fut: Future) -> None:
        completion = fut.result()  # re-raises ProviderError after retries
        sample = filter_sample(CotSample(rec.id, task, prompt, completion), rec, th)
        summary.processed += 1
        if sample.accepted:
            summary.accepted += 1
            accepted.append(sample)
            write(out_fh, sample)
        else:
            setattr(summary, f"{sample.gate}_fail", getattr(summary, f"{sample.gate}_fail") + 1)
            write(rej_fh, sample)

    window: deque[tuple[MoleculeRecord, str, Future]] = deque()
    try:
        with ThreadPoolExecutor(max(1, max_in_flight)) as pool:
            try:
                for rec in corpus:
                    summary.total += 1
                    if rec.id in done:
                        summary.resumed += 1
                        continue
                    try:
                        prompt = build_prompt(rec, task)
                    except (PromptBuildError, DecodeFailure) as exc:
                        log.warning("skipping %s: %s", rec.id, exc)
                        summary.prompt_fail += 1
                        continue
                    fut = pool.submit(complete_with_retry, provider, rec.id, prompt, max_attempts, backoff, sleep)
                    window.append((rec, prompt, fut))
                    if len(window) >= max_in_flight:
                        finish(*window.popleft())
                while window:
                    finish(*window.popleft())
            except BaseException:
                for _, _, fut in window:
                    fut.cancel()
                raise
    finally:
        for fh in (out_fh, rej_fh):
            if fh is not None:
                fh.close()
    return accepted, summary


def read_corpus(path: str | Path) -> list[MoleculeRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for k, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {k}: {exc}") from exc
            records.append(MoleculeRecord.from_json(obj, k))
    return records
