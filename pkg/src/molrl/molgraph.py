"""Attributed molecular graphs and their perception: rings, aromaticity,
molecular weight and a canonical (isomorphism-invariant) serialization."""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

from . import chem

AROMATIC = "aromatic"


class ValenceError(ValueError):
    pass


@dataclass(frozen=True)
class Atom:
    element: str
    charge: int = 0
    implicit_h: int = 0
    aromatic: bool = False
    stereo: str | None = None


@dataclass(frozen=True)
class MolGraph:
    """Heavy-atom graph with Kekulé bond orders and implicit hydrogens.

    ``bonds`` holds ``(a, b, order)`` with ``a < b`` and order in 1..3.
    Aromaticity is carried separately: ``aromatic_bonds`` lists the atom
    pairs whose bond is perceived aromatic; ``bond_label`` reports those as
    ``"aromatic"``.
    """

    atoms: tuple[Atom, ...]
    bonds: tuple[tuple[int, int, int], ...] = ()
    provenance: str | None = field(default=None, compare=False)
    aromatic_bonds: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        n = len(self.atoms)
        seen = set()
        norm = []
        for a, b, order in self.bonds:
            a, b, order = int(a), int(b), int(order)  # numpy ints would leak into hashed reprs
            if a == b:
                raise ValueError(f"self-loop on atom {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"bond ({a}, {b}) out of range")
            if order not in (1, 2, 3):
                raise ValueError(f"bad bond order {order}")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"duplicate bond {key}")
            seen.add(key)
            norm.append((key[0], key[1], order))
        object.__setattr__(self, "bonds", tuple(norm))
        object.__setattr__(self, "aromatic_bonds", frozenset((int(a), int(b)) for a, b in self.aromatic_bonds))

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per atom: sorted ``(neighbor, order)`` pairs."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
        for a, b, order in self.bonds:
            adj[a].append((b, order))
            adj[b].append((a, order))
        return tuple(tuple(sorted(x)) for x in adj)

    @cached_property
    def bond_orders(self) -> dict[tuple[int, int], int]:
        return {(a, b): o for a, b, o in self.bonds}

    def order(self, a: int, b: int) -> int | None:
        return self.bond_orders.get((min(a, b), max(a, b)))

    def bond_label(self, a: int, b: int) -> int | str:
        key = (min(a, b), max(a, b))
        if key in self.aromatic_bonds:
            return AROMATIC
        return self.bond_orders[key]

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def used_valence(self, i: int) -> int:
        return sum(o for _, o in self.adjacency[i])

    def __len__(self) -> int:
        return len(self.atoms)


def check_valence(graph: MolGraph) -> None:
    """Raise ValenceError if any atom exceeds its maximum valence."""
    for i, atom in enumerate(graph.atoms):
        cap = chem.max_valence(atom.element, atom.charge)
        total = graph.used_valence(i) + atom.implicit_h
        if total > cap:
            raise ValenceError(
                f"atom {i} ({atom.element}{atom.charge:+d}) has valence {total} > {cap}"
            )


def saturate(graph: MolGraph) -> MolGraph:
    """Return a copy whose implicit hydrogen counts fill the default valence."""
    atoms = tuple(
        replace(a, implicit_h=chem.implicit_hydrogens(a.element, a.charge, graph.used_valence(i)))
        for i, a in enumerate(graph.atoms)
    )
    return replace(graph, atoms=atoms)


def permute(graph: MolGraph, perm: Sequence[int]) -> MolGraph:
    """Relabel atoms: old atom ``i`` becomes new atom ``perm[i]``."""
    n = len(graph.atoms)
    atoms: list[Atom | None] = [None] * n
    for i, atom in enumerate(graph.atoms):
        atoms[perm[i]] = atom
    bonds = tuple(sorted((perm[a], perm[b], o) for a, b, o in graph.bonds))
    arom = frozenset(
        (min(perm[a], perm[b]), max(perm[a], perm[b])) for a, b in graph.aromatic_bonds
    )
    return MolGraph(tuple(atoms), bonds, graph.provenance, arom)  # type: ignore[arg-type]


def induced_subgraph(graph: MolGraph, atom_ids: Iterable[int], bonds: Iterable[tuple[int, int]] | None = None) -> MolGraph:
    """Subgraph on ``atom_ids``; atoms keep their parent attributes.

    If ``bonds`` is given only those pairs are kept, otherwise every bond
    between selected atoms.
    """
    ids = sorted(set(atom_ids))
    index = {a: k for k, a in enumerate(ids)}
    if bonds is None:
        pairs = [(a, b) for a, b, _ in graph.bonds if a in index and b in index]
    else:
        pairs = [(min(a, b), max(a, b)) for a, b in bonds]
    new_bonds = tuple(sorted((index[a], index[b], graph.bond_orders[(a, b)]) for a, b in pairs))
    arom = frozenset((index[a], index[b]) for a, b in pairs if (a, b) in graph.aromatic_bonds)
    return MolGraph(tuple(graph.atoms[a] for a in ids), new_bonds, None, arom)


# ---------------------------------------------------------------------------
# rings


def connected_components(graph: MolGraph) -> list[list[int]]:
    seen = [False] * len(graph.atoms)
    comps = []
    for start in range(len(graph.atoms)):
        if seen[start]:
            continue
        seen[start] = True
        comp, queue = [], deque([start])
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v, _ in graph.adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def cyclomatic_number(graph: MolGraph) -> int:
    return len(graph.bonds) - len(graph.atoms) + len(connected_components(graph))


def sssr(graph: MolGraph) -> list[tuple[int, ...]]:
    """Smallest set of smallest rings (Horton candidates + GF(2) elimination).

    Each ring is returned as an atom cycle in traversal order.
    """
    n_rings = cyclomatic_number(graph)
    if n_rings == 0:
        return []
    edge_index = {(a, b): k for k, (a, b, _) in enumerate(graph.bonds)}

    def ekey(u, v):
        return edge_index[(min(u, v), max(u, v))]

    candidates = {}
    for root in range(len(graph.atoms)):
        parent = {root: None}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v, _ in graph.adjacency[u]:
                if v not in parent:
                    parent[v] = u
                    queue.append(v)

        def path(x):
            out = []
            while x is not None:
                out.append(x)
                x = parent[x]
            return out  # x ... root

        for a, b, _ in graph.bonds:
            if a not in parent or b not in parent:
                continue
            if parent.get(a) == b or parent.get(b) == a:
                continue
            pa, pb = path(a), path(b)
            if set(pa) & set(pb) != {root}:
                continue
            cycle = pa[::-1] + pb[:-1]  # root ... a, b ... (excluding root)
            cycle = tuple(cycle)
            mask = 0
            for k in range(len(cycle)):
                mask |= 1 << ekey(cycle[k], cycle[(k + 1) % len(cycle)])
            if mask not in candidates:
                candidates[mask] = _normalize_cycle(cycle)

    ordered = sorted(candidates.items(), key=lambda kv: (len(kv[1]), kv[1]))
    basis: dict[int, int] = {}  # pivot bit -> reduced vector
    rings = []
    for mask, cycle in ordered:
        vec = mask
        while vec:
            pivot = vec.bit_length() - 1
            if pivot in basis:
                vec ^= basis[pivot]
            else:
                basis[pivot] = vec
                rings.append(cycle)
                break
        if len(rings) == n_rings:
            break
    return rings


def _normalize_cycle(cycle: tuple[int, ...]) -> tuple[int, ...]:
    k = cycle.index(min(cycle))
    rot = cycle[k:] + cycle[:k]
    rev = (rot[0],) + tuple(reversed(rot[1:]))
    return min(rot, rev)


def ring_atoms(graph: MolGraph) -> set[int]:
    return {a for ring in sssr(graph) for a in ring}


def ring_bonds(graph: MolGraph) -> set[tuple[int, int]]:
    out = set()
    for ring in sssr(graph):
        for k in range(len(ring)):
            a, b = ring[k], ring[(k + 1) % len(ring)]
            out.add((min(a, b), max(a, b)))
    return out


# ---------------------------------------------------------------------------
# aromaticity

_SP2_ELEMENTS = frozenset({"C", "N", "O", "S"})


def _pi_electrons(graph: MolGraph, i: int, ring: set[int]) -> int | None:
    """π contribution of atom ``i`` to ``ring``; None if it cannot be sp2."""
    atom = graph.atoms[i]
    if atom.element not in _SP2_ELEMENTS:
        return None
    doubles_in, doubles_out = [], []
    for j, order in graph.adjacency[i]:
        if order == 3:
            return None
        if order == 2:
            (doubles_in if j in ring else doubles_out).append(j)
    if len(doubles_in) + len(doubles_out) > 1:
        return None
    if doubles_in:
        return 1
    if doubles_out:
        # exocyclic C=X to an electronegative partner withdraws the π electron
        return 1 if graph.atoms[doubles_out[0]].element == "C" else 0
    if atom.element == "C":
        if atom.charge == -1:
            return 2
        if atom.charge == 1:
            return 0
        return None
    if atom.element == "N":
        if atom.charge == 0 and graph.degree(i) + atom.implicit_h == 3:
            return 2
        return None
    if atom.charge == 0 and graph.degree(i) + atom.implicit_h == 2:  # O, S
        return 2
    return None


def aromatic_rings(graph: MolGraph) -> list[tuple[int, ...]]:
    out = []
    for ring in sssr(graph):
        members = set(ring)
        total = 0
        for i in ring:
            e = _pi_electrons(graph, i, members)
            if e is None:
                break
            total += e
        else:
            if total % 4 == 2:
                out.append(ring)
    return out


def perceive_aromaticity(graph: MolGraph) -> MolGraph:
    """Return a copy with aromatic atom flags and aromatic bond pairs set."""
    rings = aromatic_rings(graph)
    arom_atoms = {a for r in rings for a in r}
    arom_bonds = set()
    for r in rings:
        for k in range(len(r)):
            a, b = r[k], r[(k + 1) % len(r)]
            arom_bonds.add((min(a, b), max(a, b)))
    atoms = tuple(replace(a, aromatic=(i in arom_atoms)) for i, a in enumerate(graph.atoms))
    return MolGraph(atoms, graph.bonds, graph.provenance, frozenset(arom_bonds))


# ---------------------------------------------------------------------------
# descriptors


@dataclass(frozen=True)
class StructuralInfo:
    num_rings: int
    num_aromatic_rings: int
    molecular_weight: float

    def sentences(self) -> list[str]:
        return [
            f"The molecule has {self.num_rings} ring(s), including {self.num_aromatic_rings} aromatic ring(s).",
            f"The molecular weight is approximately {self.molecular_weight:.2f} g/mol.",
        ]


def molecular_weight(graph: MolGraph) -> float:
    total = 0.0
    for atom in graph.atoms:
        total += chem.ATOMIC_MASS[atom.element] + atom.implicit_h * chem.ATOMIC_MASS["H"]
    return total


def molecular_formula(graph: MolGraph) -> str:
    """Hill-order formula, e.g. ``C5H4OS``."""
    counts: Counter[str] = Counter()
    for atom in graph.atoms:
        counts[atom.element] += 1
        counts["H"] += atom.implicit_h
    parts = []
    order = (["C", "H"] + sorted(k for k in counts if k not in "CH")) if counts["C"] else sorted(counts)
    for el in order:
        if counts[el]:
            parts.append(el + (str(counts[el]) if counts[el] > 1 else ""))
    return "".join(parts)


def net_charge(graph: MolGraph) -> int:
    return sum(a.charge for a in graph.atoms)


def ring_info(graph: MolGraph) -> tuple[int, int]:
    return cyclomatic_number(graph), len(aromatic_rings(graph))


def structural_info(graph: MolGraph) -> StructuralInfo:
    n, m = ring_info(graph)
    return StructuralInfo(n, m, molecular_weight(graph))


# ---------------------------------------------------------------------------
# canonical form


@dataclass(frozen=True)
class CanonicalForm:
    text: str

    def __str__(self) -> str:
        return self.text


def atom_label(atom: Atom) -> tuple:
    return (atom.element, atom.charge, atom.implicit_h, atom.aromatic)


def _bond_code(label) -> int:
    return 4 if label == AROMATIC else label


def _rank(signatures: list) -> list[int]:
    order = {s: k for k, s in enumerate(sorted(set(signatures)))}
    return [order[s] for s in signatures]


def _refine(graph: MolGraph, nbrs, colors: list[int]) -> list[int]:
    n_classes = len(set(colors))
    while True:
        sigs = [
            (colors[i], tuple(sorted((code, colors[j]) for j, code in nbrs[i])))
            for i in range(len(colors))
        ]
        colors = _rank(sigs)
        k = len(set(colors))
        if k == n_classes:
            return colors
        n_classes = k


def canonical_ranking(graph: MolGraph, atom_labels: Sequence | None = None) -> list[int]:
    return _canonical_search(graph, atom_labels)[0]


def labelled_certificate(graph: MolGraph, atom_labels: Sequence) -> str:
    """Isomorphism-invariant string for a graph with caller-supplied atom labels."""
    if not graph.atoms:
        return "()"
    return repr(_canonical_search(graph, atom_labels)[1])


def _canonical_search(graph: MolGraph, atom_labels: Sequence | None = None) -> tuple[list[int], tuple]:
    """Canonical atom ranks via colour refinement plus individualisation.

    The search explores every branch of the first non-singleton cell and
    keeps the leaf whose serialization is smallest; branches equivalent
    under automorphisms already found are pruned.
    """
    n = len(graph.atoms)
    if n == 0:
        return [], ()
    labels = list(atom_labels) if atom_labels is not None else [atom_label(a) for a in graph.atoms]
    nbrs = [
        tuple((j, _bond_code(graph.bond_label(i, j))) for j, _ in graph.adjacency[i])
        for i in range(n)
    ]
    start = _refine(graph, nbrs, _rank(labels))

    best: dict = {"cert": None, "ranks": None}
    automorphisms: list[list[int]] = []

    def certificate(ranks: list[int]) -> tuple:
        inv = [0] * n
        for i, r in enumerate(ranks):
            inv[r] = i
        atoms_part = tuple(labels[inv[r]] for r in range(n))
        edges = tuple(sorted(
            (min(ranks[a], ranks[b]), max(ranks[a], ranks[b]), _bond_code(graph.bond_label(a, b)))
            for a, b, _ in graph.bonds
        ))
        return atoms_part, edges

    def same_orbit(v: int, explored: list[int], prefix: tuple[int, ...]) -> bool:
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for g in automorphisms:
            if any(g[p] != p for p in prefix):
                continue
            for i in range(n):
                ra, rb = find(i), find(g[i])
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        return any(find(u) == find(v) for u in explored)

    def search(colors: list[int], prefix: tuple[int, ...]):
        cells: dict[int, list[int]] = {}
        for i, c in enumerate(colors):
            cells.setdefault(c, []).append(i)
        target = next((cells[c] for c in sorted(cells) if len(cells[c]) > 1), None)
        if target is None:
            cert = certificate(colors)
            if best["cert"] is None or cert < best["cert"]:
                best["cert"], best["ranks"] = cert, colors
            elif cert == best["cert"]:
                inv = {r: i for i, r in enumerate(best["ranks"])}
                automorphisms.append([inv[colors[i]] for i in range(n)])
            return
        explored: list[int] = []
        for v in target:
            if explored and automorphisms and same_orbit(v, explored, prefix):
                continue
            explored.append(v)
            ind = [2 * c + (1 if (c == colors[v] and i != v) else 0) for i, c in enumerate(colors)]
            search(_refine(graph, nbrs, _rank(ind)), prefix + (v,))

    search(start, ())
    return best["ranks"], best["cert"]


def _atom_token(atom: Atom) -> str:
    sym = atom.element.lower() if atom.aromatic else atom.element
    h = "" if atom.implicit_h == 0 else ("H" if atom.implicit_h == 1 else f"H{atom.implicit_h}")
    ch = "" if atom.charge == 0 else ("+" if atom.charge > 0 else "-") + (str(abs(atom.charge)) if abs(atom.charge) > 1 else "")
    return f"[{sym}{h}{ch}]"


_BOND_CHARS = {1: "", 2: "=", 3: "#", AROMATIC: ":"}


def serialize(graph: MolGraph, ranks: Sequence[int], token=_atom_token, bond_chars=_BOND_CHARS) -> str:
    """Depth-first line notation of ``graph`` visiting atoms in rank order."""
    n = len(graph.atoms)
    order = sorted(range(n), key=lambda i: ranks[i])
    visited = [False] * n
    tree_parent: dict[int, int | None] = {}
    ring_pairs: dict[tuple[int, int], tuple[int, int]] = {}
    discovered = [False] * n

    def sorted_nbrs(u):
        return sorted((v for v, _ in graph.adjacency[u]), key=lambda v: ranks[v])

    def dfs(u, parent):
        discovered[u] = True
        tree_parent[u] = parent
        for v in sorted_nbrs(u):
            if v == parent:
                continue
            if discovered[v]:
                key = (min(u, v), max(u, v))
                if key not in ring_pairs:
                    ring_pairs[key] = (v, u)
                continue
            dfs(v, u)

    roots = []
    for root in order:
        if not discovered[root]:
            roots.append(root)
            dfs(root, None)
    closures: dict[int, list[tuple[int, int]]] = {}
    for rid, (a, b) in enumerate(ring_pairs.values(), start=1):
        closures.setdefault(a, []).append((b, rid))
        closures.setdefault(b, []).append((a, rid))

    def ring_tag(rid):
        return str(rid) if rid < 10 else f"%{rid}"

    def emit(u, parent):
        visited[u] = True
        out = token(graph.atoms[u])
        for other, rid in sorted(closures.get(u, []), key=lambda t: t[1]):
            out += bond_chars[graph.bond_label(u, other)] + ring_tag(rid)
        children = [v for v in sorted_nbrs(u) if tree_parent.get(v) == u and not visited[v]]
        for k, v in enumerate(children):
            sub = bond_chars[graph.bond_label(u, v)] + emit(v, u)
            out += sub if k == len(children) - 1 else f"({sub})"
        return out

    return ".".join(emit(root, None) for root in roots)


def canonical_form(graph: MolGraph) -> CanonicalForm:
    ranks = canonical_ranking(graph)
    return CanonicalForm(serialize(graph, ranks))


def exact_match(a: MolGraph, b: MolGraph) -> bool:
    return canonical_form(a) == canonical_form(b)
