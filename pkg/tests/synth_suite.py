"""Deterministic 100-case reward suite shared by the reward and acceptance tests."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from helpers import ASPARAGUSATE_TEXT, DPPC, decodable_graphs
from molrl.selfies import encode, symbols

ROOT = Path(__file__).resolve().parents[1]

MALFORMED = "malformed"
GOLD = "gold"
PERTURBED = "perturbed"
GARBAGE = "garbage"
OTHER = "other"
KINDS = (MALFORMED, GOLD, PERTURBED, GARBAGE, OTHER)


@dataclass(frozen=True)
class Case:
    task: str
    kind: str
    response: str
    reference: str


def _references():
    corpus = [json.loads(x) for x in (ROOT / "data" / "sample_corpus.jsonl").read_text().splitlines() if x]
    captions = [r["description"] for r in corpus] + [ASPARAGUSATE_TEXT]
    captions += [json.loads(x)["reference"] for x in (ROOT / "tests" / "data" / "hand_corpus" / "caption_ref.jsonl").read_text().splitlines() if x]
    molecules = [r["selfies"] for r in corpus] + [DPPC]
    rng = np.random.default_rng(2024)
    molecules += [encode(g) for _, g in decodable_graphs(rng, 8, max_len=14) if len(g.atoms) > 2]
    return captions, molecules


def _malformed(payload: str, k: int) -> str:
    shapes = (
        f"<think>reasoning</think> {payload}",
        f"<answer>{payload}</answer><answer>{payload}</answer>",
        "<answer>   </answer>",
        f"<answer>{payload}",
        f"</answer>{payload}<answer>",
        f"<Answer>{payload}</Answer>",
    )
    return shapes[k % len(shapes)]


def build_suite(n: int = 100, seed: int = 7) -> list[Case]:
    rng = np.random.default_rng(seed)
    captions, molecules = _references()
    cases = []
    for i in range(n):
        task = "caption" if i % 2 == 0 else "generation"
        kind = KINDS[(i // 2) % len(KINDS)]
        pool = captions if task == "caption" else molecules
        ref = pool[int(rng.integers(len(pool)))]
        if kind == MALFORMED:
            resp = _malformed(ref, i)
        elif kind == GOLD:
            resp = f"<think>step by step</think>\n<answer>{ref}</answer>"
        elif kind == PERTURBED:
            units = ref.split() if task == "caption" else symbols(ref)
            drop = int(rng.integers(len(units)))
            body = (" " if task == "caption" else "").join(units[:drop] + units[drop + 1:]) or units[0]
            resp = f"<answer> {body} </answer>"
        elif kind == GARBAGE:
            resp = "<answer>zz qq &&</answer>" if task == "caption" else "<answer>C1CC(]]</answer>"
        else:
            other = pool[int(rng.integers(len(pool)))]
            resp = f"<answer>{other}</answer>"
        cases.append(Case(task, kind, resp, ref))
    return cases
