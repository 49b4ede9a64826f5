"""Shared constants and graph helpers for the test suite."""

import networkx as nx
import numpy as np
from hypothesis import strategies as st

from molrl.selfies import SelfiesError, alphabet, decode_selfies

THIOPHENE_CHO = "[O][=C][C][=C][C][=C][S][Ring1][Branch1]"
ASPARAGUSATE = "[O][=C][Branch1][C][O-1][C][C][S][S][C][Ring1][Branch1]"
ASPARAGUSATE_TEXT = (
    "The molecule is a monocarboxylic acid anion and a member of dithiolanes. "
    "It is a conjugate base of an asparagusic acid. It derives from a hydride of a 1,2-dithiolane."
)
# dipalmitoyl phosphatidylcholine, a long chain with a branch that needs a two-symbol index
DPPC = (
    "[C][C][C][C][C][C][C][C][C][C][C][C][C][C][C][C][=Branch1][C][=O][O][C][C@H1][Branch2][Ring1][Branch1][C]"
    "[O][P][=Branch1][C][=O][Branch1][C][O-1][O][C][C][N+1][Branch1][C][C][Branch1][C][C][C][O][C][=Branch1][C][=O][C][C]"
    "[C][C][C][C][C][C][C][C][C][C][C][C][C]"
)
# the non-reasoning baseline's output for the same description; "[C@H1[Branch2]" repaired to "[C@H1][Branch2]"
DPPC_BASELINE = (
    "[C][C][C][C][C][C][C][C][C][C][C][C][C][C][C][C][=Branch1][C][=O][O][C][C@H1][Branch2][Ring1][Branch1][C][O][P]"
    "[=Branch1][C][=O][Branch1][C][O][O][C][C][N+1][Branch1][C][C][Branch1][C][C][C][O][C][=Branch1][C]"
)

ALPHABET = alphabet()
token_lists = st.lists(st.sampled_from(ALPHABET), min_size=1, max_size=14)


def random_selfies(rng: np.random.Generator, length: int) -> str:
    return "".join(rng.choice(ALPHABET, size=length))


def decodable_graphs(rng: np.random.Generator, count: int, max_len: int = 12, max_atoms: int | None = None):
    out = []
    while len(out) < count:
        text = random_selfies(rng, int(rng.integers(1, max_len + 1)))
        try:
            g = decode_selfies(text)
        except SelfiesError:
            continue
        if max_atoms is None or len(g.atoms) <= max_atoms:
            out.append((text, g))
    return out


def to_networkx(graph) -> nx.Graph:
    g = nx.Graph()
    for i, a in enumerate(graph.atoms):
        g.add_node(i, label=(a.element, a.charge, a.implicit_h, a.aromatic))
    for a, b, _ in graph.bonds:
        g.add_edge(a, b, order=graph.bond_label(a, b))
    return g


def nx_isomorphic(g1, g2) -> bool:
    return nx.is_isomorphic(
        to_networkx(g1), to_networkx(g2),
        node_match=lambda x, y: x["label"] == y["label"],
        edge_match=lambda x, y: x["order"] == y["order"],
    )
