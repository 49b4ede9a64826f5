"""Binary molecular fingerprints (circular, path, structural keys) and Tanimoto similarity."""

from __future__ import annotations

import hashlib
import re
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from . import chem
from .molgraph import AROMATIC, MolGraph, aromatic_rings, connected_components, cyclomatic_number, labelled_certificate, ring_atoms, sssr

CIRCULAR, PATH, KEYS = "circular", "path", "keys"


class FamilyMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Fingerprint:
    family: str
    nbits: int
    bits: int = 0  # bitset packed into an int

    def __post_init__(self):
        if self.bits >> self.nbits:
            raise ValueError("bit index beyond nbits")

    @classmethod
    def from_indices(cls, family: str, nbits: int, indices) -> "Fingerprint":
        bits = 0
        for i in indices:
            bits |= 1 << i
        return cls(family, nbits, bits)

    def on_bits(self) -> list[int]:
        return [i for i in range(self.nbits) if self.bits >> i & 1]

    def count(self) -> int:
        return self.bits.bit_count()

    def __getitem__(self, i: int) -> bool:
        return bool(self.bits >> i & 1)


def stable_hash(text: str) -> int:
    """64-bit hash that is identical across runs and platforms."""
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big")


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    if a.family != b.family or a.nbits != b.nbits:
        raise FamilyMismatch(f"{a.family}/{a.nbits} vs {b.family}/{b.nbits}")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 1.0
    return (a.bits & b.bits).bit_count() / union


# ---------------------------------------------------------------------------
# circular


def _env_label(graph: MolGraph, i: int, rings: set[int]) -> tuple:
    a = graph.atoms[i]
    return (a.element, a.charge, a.implicit_h, a.aromatic, graph.degree(i), i in rings)


@lru_cache(maxsize=2048)
def circular_fp(graph: MolGraph, radius: int = 2, nbits: int = 2048) -> Fingerprint:
    """Atom-centred environments up to ``radius`` bonds, one bit each.

    An environment is the set of bonds reachable within r steps of the
    centre; it is identified by the canonical certificate of that subgraph
    with the centre atom marked. An environment whose bond set did not grow
    from radius r-1 is skipped, so methane sets a single bit.
    """
    in_ring = ring_atoms(graph)
    labels = [_env_label(graph, i, in_ring) for i in range(len(graph.atoms))]
    bits = set()
    for centre in range(len(graph.atoms)):
        dist = {centre: 0}
        queue = deque([centre])
        while queue:
            u = queue.popleft()
            if dist[u] >= radius:
                continue
            for v, _ in graph.adjacency[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        prev_bonds = None
        for r in range(radius + 1):
            env_bonds = frozenset(
                (a, b) for a, b, _ in graph.bonds
                if (a in dist and dist[a] < r) or (b in dist and dist[b] < r)
            )
            if r > 0 and env_bonds == prev_bonds:
                continue
            prev_bonds = env_bonds
            atoms = {centre} | {x for pair in env_bonds for x in pair}
            sub, index = _subgraph(graph, atoms, env_bonds)
            sub_labels = [labels[a] + ((a == centre),) for a in index]
            key = f"{r}|" + labelled_certificate(sub, sub_labels)
            bits.add(stable_hash(key) % nbits)
    return Fingerprint.from_indices(CIRCULAR, nbits, bits)


def _subgraph(graph: MolGraph, atoms, bonds) -> tuple[MolGraph, list[int]]:
    index = sorted(atoms)
    pos = {a: k for k, a in enumerate(index)}
    new_bonds = tuple(sorted((pos[a], pos[b], graph.bond_orders[(a, b)]) for a, b in bonds))
    arom = frozenset((pos[a], pos[b]) for a, b in bonds if (a, b) in graph.aromatic_bonds)
    return MolGraph(tuple(graph.atoms[a] for a in index), new_bonds, None, arom), index


# ---------------------------------------------------------------------------
# linear paths


_PATH_BOND = {1: "-", 2: "=", 3: "#", AROMATIC: ":"}


def _path_atom(graph: MolGraph, i: int) -> str:
    a = graph.atoms[i]
    return a.element.lower() if a.aromatic else a.element


def enumerate_paths(graph: MolGraph, min_len: int = 1, max_len: int = 7) -> set[tuple[int, ...]]:
    """Simple paths with ``min_len..max_len`` bonds, each stored once."""
    found = set()

    def extend(path):
        if len(path) - 1 >= min_len:
            found.add(min(tuple(path), tuple(reversed(path))))
        if len(path) - 1 == max_len:
            return
        for v, _ in graph.adjacency[path[-1]]:
            if v not in path:
                path.append(v)
                extend(path)
                path.pop()

    for start in range(len(graph.atoms)):
        extend([start])
    return found


def path_string(graph: MolGraph, path: tuple[int, ...]) -> str:
    def render(p):
        out = [_path_atom(graph, p[0])]
        for a, b in zip(p, p[1:]):
            out.append(_PATH_BOND[graph.bond_label(a, b)])
            out.append(_path_atom(graph, b))
        return "".join(out)

    return min(render(path), render(tuple(reversed(path))))


@lru_cache(maxsize=2048)
def path_fp(graph: MolGraph, min_len: int = 1, max_len: int = 7, nbits: int = 2048) -> Fingerprint:
    bits = {stable_hash(path_string(graph, p)) % nbits for p in enumerate_paths(graph, min_len, max_len)}
    return Fingerprint.from_indices(PATH, nbits, bits)


# ---------------------------------------------------------------------------
# structural keys

KEYS_FILE = "structural_keys_v1.tsv"
_ATOM_TOKEN = re.compile(r"(Cl|Br|[A-Z*]|[A-Z][a-z]?)(\{[^}]*\})?")


@dataclass(frozen=True)
class AtomPredicate:
    symbol: str
    mods: tuple[str, ...] = ()

    def matches(self, graph: MolGraph, i: int, in_ring: set[int]) -> bool:
        atom = graph.atoms[i]
        el = atom.element
        if self.symbol == "X":
            if el not in ("F", "Cl", "Br", "I"):
                return False
        elif self.symbol == "Q":
            if el not in chem.HETEROATOMS:
                return False
        elif self.symbol != "*" and el != self.symbol:
            return False
        for mod in self.mods:
            neg = mod.startswith("!")
            m = mod[1:] if neg else mod
            if m == "H":
                ok = atom.implicit_h >= 1
            elif m.startswith("H"):
                ok = atom.implicit_h == int(m[1:])
            elif m == "+":
                ok = atom.charge > 0
            elif m == "-":
                ok = atom.charge < 0
            elif m == "r":
                ok = i in in_ring
            elif m == "a":
                ok = atom.aromatic
            else:
                raise ValueError(f"unknown atom modifier {mod!r}")
            if ok == neg:
                return False
        return True


@dataclass(frozen=True)
class Pattern:
    """Tree-shaped substructure: atoms[0] is the root, edges are (parent, child, bond)."""

    atoms: tuple[AtomPredicate, ...]
    edges: tuple[tuple[int, int, str], ...]


def parse_pattern(text: str) -> Pattern:
    """Parse a small SMARTS-like chain/branch notation, e.g. ``O=C(-O)-N``."""
    atoms: list[AtomPredicate] = []
    edges: list[tuple[int, int, str]] = []
    stack: list[int] = []
    prev: int | None = None
    bond = None
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch in "-=#:~":
            bond = ch
            pos += 1
        elif ch == "(":
            stack.append(prev)
            pos += 1
        elif ch == ")":
            prev = stack.pop()
            pos += 1
        else:
            m = _ATOM_TOKEN.match(text, pos)
            if not m:
                raise ValueError(f"bad pattern {text!r} at {pos}")
            mods = tuple(x.strip() for x in m.group(2)[1:-1].split(",")) if m.group(2) else ()
            atoms.append(AtomPredicate(m.group(1), mods))
            cur = len(atoms) - 1
            if prev is not None:
                edges.append((prev, cur, bond or "-"))
            prev, bond = cur, None
            pos = m.end()
    return Pattern(tuple(atoms), tuple(edges))


def _bond_ok(graph: MolGraph, a: int, b: int, bond: str) -> bool:
    label = graph.bond_label(a, b)
    if bond == "~":
        return True
    if bond == ":":
        return label == AROMATIC
    return label == {"-": 1, "=": 2, "#": 3}[bond]


def count_matches(graph: MolGraph, pattern: Pattern) -> int:
    """Number of distinct atom sets matched by the pattern (injective mapping)."""
    in_ring = ring_atoms(graph)
    children: dict[int, list[tuple[int, str]]] = {}
    for p, c, b in pattern.edges:
        children.setdefault(p, []).append((c, b))
    order = []  # BFS order over pattern atoms with parent info
    parent_of: dict[int, tuple[int, str]] = {}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        order.append(u)
        for c, b in children.get(u, []):
            parent_of[c] = (u, b)
            queue.append(c)
    found: set[frozenset[int]] = set()
    assign: dict[int, int] = {}

    def rec(k: int):
        if k == len(order):
            found.add(frozenset(assign.values()))
            return
        p_atom = order[k]
        pred = pattern.atoms[p_atom]
        if p_atom in parent_of:
            par, bond = parent_of[p_atom]
            candidates = [v for v, _ in graph.adjacency[assign[par]]]
        else:
            candidates = range(len(graph.atoms))
        used = set(assign.values())
        for v in candidates:
            if v in used or not pred.matches(graph, v, in_ring):
                continue
            if p_atom in parent_of and not _bond_ok(graph, assign[parent_of[p_atom][0]], v, parent_of[p_atom][1]):
                continue
            assign[p_atom] = v
            rec(k + 1)
            del assign[p_atom]

    rec(0)
    return len(found)


_EXPR = re.compile(r"^\s*(count|path|ring)\((.*)\)\s*>=\s*(\d+)\s*$|^\s*(rings|aromatic_rings|fragments)\s*>=\s*(\d+)\s*$")


@dataclass(frozen=True)
class KeyDef:
    id: int
    description: str
    expression: str

    def evaluate(self, graph: MolGraph) -> bool:
        m = _EXPR.match(self.expression)
        if not m:
            raise ValueError(f"bad key expression {self.expression!r}")
        if m.group(1):
            func, arg, k = m.group(1), m.group(2), int(m.group(3))
            if func == "ring":
                size = int(arg)
                return sum(1 for r in sssr(graph) if len(r) == size) >= k
            if func == "count":
                pat = parse_pattern(arg)
                if pat.edges:
                    raise ValueError("count() takes a single atom")
            else:
                pat = _cached_pattern(arg)
            return count_matches(graph, pat) >= k
        name, k = m.group(4), int(m.group(5))
        if name == "rings":
            return cyclomatic_number(graph) >= k
        if name == "aromatic_rings":
            return len(aromatic_rings(graph)) >= k
        return len(connected_components(graph)) >= k


@lru_cache(maxsize=None)
def _cached_pattern(text: str) -> Pattern:
    return parse_pattern(text)


@lru_cache(maxsize=None)
def load_keys(name: str = KEYS_FILE) -> tuple[KeyDef, ...]:
    text = resources.files("molrl.data").joinpath(name).read_text()
    keys = []
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        kid, desc, expr = line.split("\t")
        keys.append(KeyDef(int(kid), desc, expr))
    return tuple(keys)


def key_index(description: str) -> int:
    for key in load_keys():
        if key.description == description:
            return key.id
    raise KeyError(description)


@lru_cache(maxsize=2048)
def key_fp(graph: MolGraph) -> Fingerprint:
    keys = load_keys()
    return Fingerprint.from_indices(KEYS, len(keys), (k.id for k in keys if k.evaluate(graph)))


def fp_family_scores(pred: MolGraph, ref: MolGraph) -> dict[str, float]:
    return {
        CIRCULAR: tanimoto(circular_fp(pred), circular_fp(ref)),
        KEYS: tanimoto(key_fp(pred), key_fp(ref)),
        PATH: tanimoto(path_fp(pred), path_fp(ref)),
    }


def fp_sim(pred: MolGraph, ref: MolGraph) -> float:
    """Mean of the circular, structural-key and path Tanimoto similarities."""
    scores = fp_family_scores(pred, ref)
    return (scores[CIRCULAR] + scores[KEYS] + scores[PATH]) / 3
