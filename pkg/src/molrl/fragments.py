"""EFG-style decomposition into functional groups and hydrocarbon fragments.

Also hosts the fragment-set scores used both as rewards and as evaluation
columns (Frag-J, Frag-R, FG-Match).
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field

from . import chem
from .molgraph import AROMATIC, Atom, MolGraph, aromatic_rings, canonical_ranking, induced_subgraph, ring_atoms, serialize

log = logging.getLogger(__name__)

FG, CH = "FG", "CH"
FG_EPS = 1e-5


@dataclass(frozen=True)
class FragmentSet:
    fragments: frozenset[str] = frozenset()
    fg_counts: dict[str, int] = field(default_factory=dict)
    ch_only: frozenset[str] = frozenset()
    ch_counts: dict[str, int] = field(default_factory=dict)
    labels: dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if set(self.fg_counts) & set(self.ch_only):
            raise ValueError("functional-group ids overlap hydrocarbon ids")
        if any(c < 1 for c in self.fg_counts.values()):
            raise ValueError("counts must be positive")

    @classmethod
    def from_ids(cls, fg: dict[str, int] | None = None, ch: dict[str, int] | None = None,
                 labels: dict[str, str] | None = None) -> "FragmentSet":
        fg, ch = dict(fg or {}), dict(ch or {})
        return cls(frozenset(fg) | frozenset(ch), fg, frozenset(ch), ch, dict(labels or {}))

    def display(self) -> list[str]:
        """Every fragment occurrence as a SMILES-like label: functional groups first, each kind sorted by id."""
        out = []
        for k in sorted(self.fg_counts):
            out += [self.labels.get(k, k)] * self.fg_counts[k]
        for k in sorted(self.ch_only):
            out += [self.labels.get(k, k)] * self.ch_counts.get(k, 1)
        return out

    def dump(self) -> str:
        """One line per fragment: kind, id, count."""
        lines = [f"{FG}\t{k}\t{self.fg_counts[k]}" for k in sorted(self.fg_counts)]
        lines += [f"{CH}\t{k}\t{self.ch_counts.get(k, 1)}" for k in sorted(self.ch_only)]
        return "\n".join(lines)


@dataclass(frozen=True)
class Decomposition:
    """Atom-level view of a decomposition, mainly for tests and debugging."""

    pieces: tuple[tuple[str, tuple[int, ...]], ...]  # (kind, atom ids)
    cut_bonds: frozenset[tuple[int, int]]


def _functional_atoms(graph: MolGraph) -> set[int]:
    marked = set()
    for i, atom in enumerate(graph.atoms):
        if atom.element in chem.HETEROATOMS:
            marked.add(i)
    for a, b, order in graph.bonds:
        if order >= 2:
            ea, eb = graph.atoms[a].element, graph.atoms[b].element
            if ea == "C" and eb in chem.HETEROATOMS:
                marked.add(a)
            if eb == "C" and ea in chem.HETEROATOMS:
                marked.add(b)
    return marked


def _hetero_aromatic_systems(graph: MolGraph) -> list[set[int]]:
    """Fused aromatic ring systems that contain at least one heteroatom."""
    systems: list[set[int]] = []
    for ring in aromatic_rings(graph):
        atoms = set(ring)
        merged = [s for s in systems if s & atoms]
        for s in merged:
            atoms |= s
            systems.remove(s)
        systems.append(atoms)
    return [s for s in systems if any(graph.atoms[i].element in chem.HETEROATOMS for i in s)]


def _components(nodes: set[int], edges: list[tuple[int, int]]) -> list[list[int]]:
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        parent[find(a)] = find(b)
    groups: dict[int, list[int]] = {}
    for n in sorted(nodes):
        groups.setdefault(find(n), []).append(n)
    return sorted(groups.values())


def partition(graph: MolGraph) -> Decomposition:
    n = len(graph.atoms)
    systems = _hetero_aromatic_systems(graph)
    in_system = set().union(*systems) if systems else set()
    functional = _functional_atoms(graph) - in_system
    fg_like = functional | in_system

    pieces: list[tuple[str, tuple[int, ...]]] = [(FG, tuple(sorted(s))) for s in systems]
    fg_edges = [(a, b) for a, b, _ in graph.bonds if a in functional and b in functional]
    pieces += [(FG, tuple(c)) for c in _components(functional, fg_edges)]

    carbons = set(range(n)) - fg_like
    touches_fg = {i for i in carbons if any(v in fg_like for v, _ in graph.adjacency[i])}
    ch_edges = [
        (a, b) for a, b, _ in graph.bonds
        if a in carbons and b in carbons and not (a in touches_fg and b in touches_fg)
    ]
    pieces += [(CH, tuple(c)) for c in _components(carbons, ch_edges)]

    owner = {a: k for k, (_, atoms) in enumerate(pieces) for a in atoms}
    inside = {(a, b) for a, b, _ in graph.bonds if owner[a] == owner[b]}
    # bonds between two atoms of the same piece are inside it, except CH-CH cuts
    ch_cuts = {(a, b) for a, b, _ in graph.bonds if a in carbons and b in carbons} - set(ch_edges)
    inside -= ch_cuts
    cuts = frozenset((a, b) for a, b, _ in graph.bonds if (a, b) not in inside)
    return Decomposition(tuple(pieces), cuts)


_ORGANIC = frozenset({"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"})
_DISPLAY_BONDS = {1: "", 2: "=", 3: "#", AROMATIC: ""}


def _display_token(atom: Atom) -> str:
    # hydrogens are left implicit, so attachment points vanish from the label
    sym = atom.element.lower() if atom.aromatic else atom.element
    if atom.charge == 0 and atom.element in _ORGANIC:
        return sym
    mag = abs(atom.charge)
    return f"[{sym}{'+' if atom.charge > 0 else '-'}{mag if mag > 1 else ''}]"


def _piece_id(graph: MolGraph, kind: str, atoms: tuple[int, ...], cuts, rings: set[int]) -> tuple[str, str]:
    keep = [(a, b) for a, b, _ in graph.bonds if a in atoms and b in atoms and (a, b) not in cuts]
    sub = induced_subgraph(graph, atoms, keep)
    ranks = canonical_ranking(sub)
    text = serialize(sub, ranks)
    label = serialize(sub, ranks, _display_token, _DISPLAY_BONDS)
    if kind == CH:
        return f"{CH}:{text}:{'ring' if any(a in rings for a in atoms) else 'chain'}", label
    return f"{FG}:{text}", label


def decompose(graph: MolGraph) -> FragmentSet:
    dec = partition(graph)
    rings = ring_atoms(graph)
    fg: Counter[str] = Counter()
    ch: Counter[str] = Counter()
    labels = {}
    for kind, atoms in dec.pieces:
        pid, label = _piece_id(graph, kind, atoms, dec.cut_bonds, rings)
        (fg if kind == FG else ch)[pid] += 1
        labels[pid] = label
    return FragmentSet.from_ids(dict(fg), dict(ch), labels)


def frag_metrics(pred: FragmentSet, ref: FragmentSet) -> tuple[float, float]:
    """(Jaccard, recall) over fragment-id sets."""
    if not ref.fragments:
        log.info("empty reference fragment set")
        score = 1.0 if not pred.fragments else 0.0
        return score, score
    inter = len(pred.fragments & ref.fragments)
    return inter / len(pred.fragments | ref.fragments), inter / len(ref.fragments)


def frag_sim(pred: FragmentSet, ref: FragmentSet) -> float:
    j, r = frag_metrics(pred, ref)
    return 0.5 * j + 0.5 * r


def fg_match(pred: FragmentSet, ref: FragmentSet, eps: float = FG_EPS) -> float:
    """Exponential decay of the functional-group count discrepancy (union of ids)."""
    keys = set(pred.fg_counts) | set(ref.fg_counts)
    diff = sum(abs(pred.fg_counts.get(k, 0) - ref.fg_counts.get(k, 0)) for k in keys)
    total = sum(ref.fg_counts.values())
    return math.exp(-diff / (total + eps))
