"""Element data: standard atomic weights and the valence model used by the decoder."""

from __future__ import annotations

from functools import lru_cache

# standard atomic weights, 3 decimals (interval midpoints where IUPAC gives a range)
ATOMIC_MASS: dict[str, float] = {
    "H": 1.008,
    "B": 10.811,
    "C": 12.011,
    "N": 14.007,
    "O": 15.999,
    "F": 18.998,
    "P": 30.974,
    "S": 32.067,
    "Cl": 35.453,
    "Br": 79.904,
    "I": 126.904,
}

ELEMENTS = tuple(ATOMIC_MASS)

VALENCE_ELECTRONS: dict[str, int] = {
    "H": 1, "B": 3, "C": 4, "N": 5, "O": 6, "F": 7,
    "P": 5, "S": 6, "Cl": 7, "Br": 7, "I": 7,
}

# elements allowed to expand their octet, with their expanded ceiling
_HYPERVALENT_CEILING = {"P": 5, "S": 6}

MIN_CHARGE, MAX_CHARGE = -2, 2

HETEROATOMS = frozenset(e for e in ELEMENTS if e not in ("C", "H"))


@lru_cache(maxsize=None)
def allowed_valences(element: str, charge: int = 0) -> tuple[int, ...]:
    """Ascending tuple of valences an atom of this element/charge may take.

    The lowest entry is the default valence; P and S list their expanded
    states (e.g. S: 2, 4, 6) which are only reached when bonding demands it.
    An empty tuple means the ion cannot form any bond or carry hydrogen.
    """
    if element not in VALENCE_ELECTRONS:
        raise KeyError(element)
    if element == "H":
        return (1,) if charge == 0 else ()
    electrons = VALENCE_ELECTRONS[element] - charge
    if electrons <= 0 or electrons >= 8:
        return ()
    base = electrons if electrons <= 4 else 8 - electrons
    valences = [base]
    ceiling = _HYPERVALENT_CEILING.get(element)
    if ceiling is not None:
        v = base + 2
        while v <= min(ceiling, electrons):
            valences.append(v)
            v += 2
    return tuple(v for v in valences if v > 0)


def max_valence(element: str, charge: int = 0) -> int:
    vals = allowed_valences(element, charge)
    return vals[-1] if vals else 0


def saturating_valence(element: str, charge: int, used: int) -> int:
    """Smallest allowed valence that accommodates ``used`` bond orders."""
    for v in allowed_valences(element, charge):
        if v >= used:
            return v
    return max_valence(element, charge)


def implicit_hydrogens(element: str, charge: int, used: int) -> int:
    return max(0, saturating_valence(element, charge, used) - used)
