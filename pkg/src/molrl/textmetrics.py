"""Sentence-level text similarity metrics: BLEU, ROUGE, a METEOR variant, Levenshtein."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

WORD, CHAR = "word", "character"
_WORD_RE = re.compile(r"\w+|[^\w\s]")

# suffix-stripping rules for the stem matching stage, tried in order
STEM_RULES = (("ies", "y"), ("sses", "ss"), ("ing", ""), ("ed", ""), ("es", ""), ("ly", ""), ("s", ""))
MIN_STEM = 3

LANGUAGE_METRICS = ("bleu2", "bleu4", "meteor", "rouge1", "rouge2", "rougeL")


@dataclass(frozen=True)
class TokenSequence:
    units: tuple[str, ...]
    mode: str = WORD

    @classmethod
    def words(cls, text: str) -> "TokenSequence":
        return cls(tuple(_WORD_RE.findall(text.lower())), WORD)

    @classmethod
    def chars(cls, text: str) -> "TokenSequence":
        return cls(tuple(text), CHAR)

    def text(self) -> str:
        return (" " if self.mode == WORD else "").join(self.units)

    def __len__(self) -> int:
        return len(self.units)


def _ngrams(units, n: int) -> Counter:
    return Counter(tuple(units[i:i + n]) for i in range(len(units) - n + 1))


def _check_modes(a: TokenSequence, b: TokenSequence) -> None:
    if a.mode != b.mode:
        raise ValueError(f"mode mismatch: {a.mode} vs {b.mode}")


def bleu(cand: TokenSequence, ref: TokenSequence, max_n: int = 4) -> float:
    """Single-reference BLEU with add-one smoothing on orders above 1.

    The unigram precision is left unsmoothed, so a candidate sharing no
    unit with the reference scores 0. An empty candidate also scores 0.
    """
    _check_modes(cand, ref)
    if not cand.units:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        c, r = _ngrams(cand.units, n), _ngrams(ref.units, n)
        matched = sum(min(k, r[g]) for g, k in c.items())
        total = sum(c.values())
        if n == 1:
            if matched == 0:
                return 0.0
            p = matched / total
        else:
            p = (matched + 1) / (total + 1)
        log_sum += math.log(p)
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * math.exp(log_sum / max_n)


def _f1(overlap: int, n_cand: int, n_ref: int) -> float:
    if n_cand == 0 and n_ref == 0:
        return 1.0
    if overlap == 0:
        return 0.0
    p, r = overlap / n_cand, overlap / n_ref
    return 2 * p * r / (p + r)


def lcs_length(a, b) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge(cand: TokenSequence, ref: TokenSequence, variant: str | int = 1) -> float:
    _check_modes(cand, ref)
    variant = str(variant).upper()
    if variant == "L":
        return _f1(lcs_length(cand.units, ref.units), len(cand), len(ref))
    n = int(variant)
    c, r = _ngrams(cand.units, n), _ngrams(ref.units, n)
    overlap = sum(min(k, r[g]) for g, k in c.items())
    return _f1(overlap, sum(c.values()), sum(r.values()))


def stem(word: str) -> str:
    for suffix, repl in STEM_RULES:
        if word.endswith(suffix) and len(word) - len(suffix) + len(repl) >= MIN_STEM:
            return word[: len(word) - len(suffix)] + repl
    return word


def align(cand: tuple[str, ...], ref: tuple[str, ...]) -> list[tuple[int, int]]:
    """Unigram alignment: exact stage, then stem stage on leftovers.

    Within a stage candidate tokens are visited left to right. Each takes the
    reference position right after the previous alignment when it fits,
    otherwise the leftmost free matching position.
    """
    pairs: dict[int, int] = {}
    used: set[int] = set()
    for key in (lambda w: w, stem):
        last = -2
        for i, w in enumerate(cand):
            if i in pairs:
                last = pairs[i]
                continue
            kw = key(w)
            free = [j for j, v in enumerate(ref) if j not in used and key(v) == kw]
            if not free:
                continue
            j = last + 1 if last + 1 in free else free[0]
            pairs[i] = j
            used.add(j)
            last = j
    return sorted(pairs.items())


def count_chunks(alignment: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in alignment:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_lite(cand: TokenSequence, ref: TokenSequence, alpha: float = 0.9, gamma: float = 0.5, beta: float = 3.0) -> float:
    _check_modes(cand, ref)
    alignment = align(cand.units, ref.units)
    m = len(alignment)
    if m == 0:
        return 0.0
    p, r = m / len(cand), m / len(ref)
    fmean = p * r / (alpha * p + (1 - alpha) * r)  # == 10PR / (R + 9P) at alpha 0.9
    penalty = gamma * (count_chunks(alignment) / m) ** beta
    return fmean * (1 - penalty)


def levenshtein(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def language_scores(cand: str, ref: str) -> dict[str, float]:
    c, r = TokenSequence.words(cand), TokenSequence.words(ref)
    return {
        "bleu2": bleu(c, r, 2),
        "bleu4": bleu(c, r, 4),
        "meteor": meteor_lite(c, r),
        "rouge1": rouge(c, r, 1),
        "rouge2": rouge(c, r, 2),
        "rougeL": rouge(c, r, "L"),
    }


def r_language(cand: str, ref: str) -> float:
    """Mean of BLEU-2/4, METEOR, ROUGE-1/2/L on word tokens."""
    scores = language_scores(cand, ref)
    return sum(scores.values()) / len(scores)


def selfies_sim(cand: str, ref: str, max_n: int = 4) -> float:
    """Character-level BLEU between two SELFIES strings."""
    return bleu(TokenSequence.chars(cand), TokenSequence.chars(ref), max_n)
