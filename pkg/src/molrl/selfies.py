"""SELFIES tokenizer, decoder and encoder.

Decoding follows the derivation-state grammar of SELFIES v2: every atom
symbol carries a requested bond order that is clamped to the bonding
capacity left on the previous atom, branch and ring lengths are read from
the 16-symbol index alphabet, and ring bonds are formed after the whole
string has been read. Any token sequence therefore yields a valid graph.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import chem
from .molgraph import Atom, MolGraph, check_valence, perceive_aromaticity

INDEX_ALPHABET = (
    "[C]", "[Ring1]", "[Ring2]", "[Branch1]", "[=Branch1]", "[#Branch1]",
    "[Branch2]", "[=Branch2]", "[#Branch2]", "[O]", "[N]", "[=N]", "[=C]",
    "[#C]", "[S]", "[P]",
)
INDEX_CODE = {sym: k for k, sym in enumerate(INDEX_ALPHABET)}

ATOM, BRANCH, RING, INDEX = "atom", "branch-open", "ring", "index"

_BOND_PREFIX = {"": 1, "=": 2, "#": 3}
_PREFIX_OF = {1: "", 2: "=", 3: "#"}

_ATOM_RE = re.compile(r"^(=|#)?([A-Z][a-z]?)(@@|@)?(?:H(\d))?(?:([+-])(\d))?$")
_CTRL_RE = re.compile(r"^(=|#)?(Branch|Ring)([123])$")


class SelfiesError(ValueError):
    pass


class UnbracketedText(SelfiesError):
    def __init__(self, offset: int, text: str = ""):
        super().__init__(f"unbracketed text at byte offset {offset}: {text!r}")
        self.offset = offset


class UnknownSymbol(SelfiesError):
    def __init__(self, offset: int, symbol: str):
        super().__init__(f"unknown symbol {symbol!r} at byte offset {offset}")
        self.offset = offset
        self.symbol = symbol


class EmptyMolecule(SelfiesError):
    pass


@dataclass(frozen=True)
class SelfiesToken:
    kind: str
    raw: str
    bond_order: int = 1
    element: str | None = None
    charge: int = 0
    h_count: int = 0
    stereo_tag: str | None = None
    control: str | None = None  # "Branch" / "Ring" for control symbols
    size: int = 0  # number of index symbols a control symbol reads

    def render(self) -> str:
        prefix = _PREFIX_OF[self.bond_order]
        if self.control is not None:
            return f"[{prefix}{self.control}{self.size}]"
        h = f"H{self.h_count}" if self.h_count else ""
        ch = f"{'+' if self.charge > 0 else '-'}{abs(self.charge)}" if self.charge else ""
        return f"[{prefix}{self.element}{self.stereo_tag or ''}{h}{ch}]"

    @property
    def is_atom_symbol(self) -> bool:
        return self.control is None

    @property
    def capacity(self) -> int:
        return chem.max_valence(self.element, self.charge) - self.h_count

    @property
    def index_value(self) -> int:
        return INDEX_CODE.get(self.raw, 0)


def parse_symbol(symbol: str, offset: int = 0, kind: str | None = None) -> SelfiesToken:
    """Parse one bracketed symbol such as ``[=C]``, ``[O-1]`` or ``[Ring1]``."""
    if not (symbol.startswith("[") and symbol.endswith("]")):
        raise UnknownSymbol(offset, symbol)
    body = symbol[1:-1]
    m = _CTRL_RE.match(body)
    if m:
        prefix, control, size = m.groups()
        return SelfiesToken(
            kind=kind or (BRANCH if control == "Branch" else RING),
            raw=symbol,
            bond_order=_BOND_PREFIX[prefix or ""],
            control=control,
            size=int(size),
        )
    m = _ATOM_RE.match(body)
    if not m:
        raise UnknownSymbol(offset, symbol)
    prefix, element, stereo, h, sign, mag = m.groups()
    if element not in chem.ATOMIC_MASS:
        raise UnknownSymbol(offset, symbol)
    charge = 0
    if sign:
        charge = int(mag) * (1 if sign == "+" else -1)
        if charge == 0 or not (chem.MIN_CHARGE <= charge <= chem.MAX_CHARGE):
            raise UnknownSymbol(offset, symbol)
    h_count = int(h) if h else 0
    if h is not None and h_count == 0:
        raise UnknownSymbol(offset, symbol)
    tok = SelfiesToken(
        kind=kind or ATOM,
        raw=symbol,
        bond_order=_BOND_PREFIX[prefix or ""],
        element=element,
        charge=charge,
        h_count=h_count,
        stereo_tag=stereo,
    )
    # symbols that can never bond are outside the alphabet
    if tok.capacity < 1 or tok.render() != symbol:
        raise UnknownSymbol(offset, symbol)
    return tok


def tokenize(text: str) -> list[SelfiesToken]:
    """Split SELFIES text into tokens.

    The ``index`` kind marks symbols that directly follow a branch or ring
    symbol and would be read as its length/offset digits.
    """
    stripped = text.strip()
    lead = len(text) - len(text.lstrip())
    tokens: list[SelfiesToken] = []
    pos = 0
    pending_index = 0
    while pos < len(stripped):
        offset = len(text[: lead + pos].encode())
        if stripped[pos] != "[":
            raise UnbracketedText(offset, stripped[pos])
        end = stripped.find("]", pos + 1)
        nxt = stripped.find("[", pos + 1)
        if end == -1 or (nxt != -1 and nxt < end):
            raise UnbracketedText(offset, stripped[pos:])
        symbol = stripped[pos : end + 1]
        if pending_index:
            tok = parse_symbol(symbol, offset, kind=INDEX)
            pending_index -= 1
        else:
            tok = parse_symbol(symbol, offset)
            if tok.control is not None:
                pending_index = tok.size
        tokens.append(tok)
        pos = end + 1
    return tokens


def _index_value(tokens: Sequence[SelfiesToken | None]) -> int:
    value = 0
    for tok in tokens:
        value = value * len(INDEX_ALPHABET) + (tok.index_value if tok is not None else 0)
    return value


def decode(tokens: Sequence[SelfiesToken], provenance: str | None = None) -> MolGraph:
    """Derive a valence-valid molecular graph from a token sequence.

    Raises EmptyMolecule when no atom symbol gets derived.
    """
    toks = list(tokens)
    elems: list[SelfiesToken] = []
    bonds: dict[tuple[int, int], int] = {}
    rings: list[tuple[int, int, int]] = []
    pos = 0

    def read_index(size: int) -> int:
        nonlocal pos
        digits = []
        for _ in range(size):
            digits.append(toks[pos] if pos < len(toks) else None)
            pos += 1
        return _index_value(digits)

    def derive(max_derive: float, init_state: int | None, root: int | None) -> int:
        nonlocal pos
        n_derived = 0
        state = init_state
        prev = root
        while (state is None or state > 0) and n_derived < max_derive and pos < len(toks):
            tok = toks[pos]
            pos += 1
            n_derived += 1
            if tok.control == "Branch":
                if state is None or state <= 1:
                    continue
                branch_state = min(state - 1, tok.bond_order)
                q = read_index(tok.size)
                n_derived += tok.size + derive(q + 1, branch_state, prev)
                state -= branch_state
            elif tok.control == "Ring":
                if state is None:
                    continue
                order = min(state, tok.bond_order)
                q = read_index(tok.size)
                n_derived += tok.size
                rings.append((max(0, prev - (q + 1)), prev, order))
                state -= order
            else:
                cap = tok.capacity
                elems.append(tok)
                new = len(elems) - 1
                if state is None:
                    state = cap
                else:
                    order = min(tok.bond_order, state, cap)
                    bonds[(prev, new)] = order
                    state = cap - order
                prev = new
        return n_derived

    derive(float("inf"), None, None)
    if not elems:
        raise EmptyMolecule("no atom symbols derived")

    used = [0] * len(elems)
    for (a, b), order in bonds.items():
        used[a] += order
        used[b] += order
    for left, right, order in rings:
        if left == right:
            continue
        lfree = elems[left].capacity - used[left]
        rfree = elems[right].capacity - used[right]
        if lfree <= 0 or rfree <= 0:
            continue
        order = min(order, lfree, rfree)
        key = (min(left, right), max(left, right))
        if key in bonds:
            new_order = min(bonds[key] + order, 3)
            delta = new_order - bonds[key]
            bonds[key] = new_order
        else:
            bonds[key] = order
            delta = order
        used[left] += delta
        used[right] += delta

    atoms = []
    for i, tok in enumerate(elems):
        total = chem.saturating_valence(tok.element, tok.charge, used[i] + tok.h_count)
        atoms.append(Atom(tok.element, tok.charge, total - used[i], False, tok.stereo_tag))
    graph = MolGraph(
        tuple(atoms),
        tuple(sorted((min(a, b), max(a, b), o) for (a, b), o in bonds.items())),
        provenance,
    )
    check_valence(graph)
    return perceive_aromaticity(graph)


def decode_selfies(text: str) -> MolGraph:
    return decode(tokenize(text), provenance=text)


def _index_symbols(q: int, size: int) -> list[str]:
    digits = []
    for _ in range(size):
        digits.append(INDEX_ALPHABET[q % 16])
        q //= 16
    return digits[::-1]


def _index_size(q: int) -> int:
    for size in (1, 2, 3):
        if q < 16**size:
            return size
    raise ValueError(f"index {q} too large for SELFIES")


def _atom_symbol(atom: Atom, order: int) -> str:
    ch = f"{'+' if atom.charge > 0 else '-'}{abs(atom.charge)}" if atom.charge else ""
    return f"[{_PREFIX_OF[order]}{atom.element}{ch}]"


def encode(graph: MolGraph, root: int = 0) -> str:
    """Write a connected graph as a SELFIES string starting at ``root``.

    Stereo annotations are not written. Bond orders are taken from the
    Kekulé bonds, so aromatic rings come out with alternating ``=`` symbols.
    """
    n = len(graph.atoms)
    if n == 0:
        return ""
    # DFS order and spanning tree
    order: list[int] = []
    parent: dict[int, int | None] = {root: None}
    children: dict[int, list[int]] = {i: [] for i in range(n)}

    stack = [root]
    while stack:
        u = stack.pop()
        order.append(u)
        fresh = [v for v, _ in graph.adjacency[u] if v not in parent]
        # neighbours are claimed when their parent is expanded, so the
        # pop order is the preorder of the resulting tree
        for v in fresh:
            parent[v] = u
        children[u] = fresh
        stack.extend(reversed(fresh))

    if len(order) != n:
        raise ValueError("encode requires a connected graph")
    # ring closures are written at whichever end is derived later
    position = {u: k for k, u in enumerate(order)}
    closures: dict[int, list[tuple[int, int]]] = {i: [] for i in range(n)}
    for a, b, o in graph.bonds:
        if parent.get(a) == b or parent.get(b) == a:
            continue
        early, late = (a, b) if position[a] < position[b] else (b, a)
        closures[late].append((early, o))

    # derivation index of each atom equals its DFS position because the
    # string lists branches before the main-chain continuation
    def chain(u: int | None, in_order: int) -> list[str]:
        out: list[str] = []
        while u is not None:
            out.append(_atom_symbol(graph.atoms[u], in_order))
            for early, o in sorted(closures[u], key=lambda t: position[t[0]]):
                q = position[u] - position[early] - 1
                size = _index_size(q)
                out.append(f"[{_PREFIX_OF[o]}Ring{size}]")
                out.extend(_index_symbols(q, size))
            kids = children[u]
            for v in kids[:-1]:
                body = chain(v, graph.order(u, v))
                q = len(body) - 1
                size = _index_size(q)
                out.append(f"[{_PREFIX_OF[graph.order(u, v)]}Branch{size}]")
                out.extend(_index_symbols(q, size))
                out.extend(body)
            if kids:
                in_order = graph.order(u, kids[-1])
                u = kids[-1]
            else:
                u = None
        return out

    return "".join(chain(root, 1))


def symbols(text: str) -> list[str]:
    return [t.raw for t in tokenize(text)]


def alphabet() -> list[str]:
    """Every atom and control symbol accepted by the tokenizer."""
    out = []
    for order, prefix in _PREFIX_OF.items():
        for ctrl in ("Branch", "Ring"):
            for size in (1, 2, 3):
                out.append(f"[{prefix}{ctrl}{size}]")
        for el in chem.ELEMENTS:
            for charge in range(chem.MIN_CHARGE, chem.MAX_CHARGE + 1):
                if chem.max_valence(el, charge) >= max(order, 1):
                    ch = f"{'+' if charge > 0 else '-'}{abs(charge)}" if charge else ""
                    out.append(f"[{prefix}{el}{ch}]")
    return out


def join(tokens: Iterable[SelfiesToken]) -> str:
    return "".join(t.render() for t in tokens)
