"""Regenerate src/molrl/data/structural_keys_v1.tsv.

The key set is a hand-picked catalogue of 166 substructure predicates in the
spirit of MACCS keys. Run once after editing the lists below; the TSV is the
shipped artifact.
"""

from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "molrl" / "data" / "structural_keys_v1.tsv"

keys: list[tuple[str, str]] = []


def add(desc, expr):
    keys.append((desc, expr))


for el in ["C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "B"]:
    add(f"contains {el}", f"count({el}) >= 1")
for k in (2, 4, 8, 12, 16):
    add(f"at least {k} carbons", f"count(C) >= {k}")
for k in (2, 3):
    add(f"at least {k} nitrogens", f"count(N) >= {k}")
for k in (2, 3, 4):
    add(f"at least {k} oxygens", f"count(O) >= {k}")
add("at least 2 sulfurs", "count(S) >= 2")
add("halogen", "count(X) >= 1")
add("two or more halogens", "count(X) >= 2")
for k in (1, 2, 4, 8):
    add(f"at least {k} heteroatoms", f"count(Q) >= {k}")
add("positive charge", "count(*{+}) >= 1")
add("negative charge", "count(*{-}) >= 1")
add("cationic nitrogen", "count(N{+}) >= 1")
add("anionic oxygen", "count(O{-}) >= 1")
add("hydroxyl-type O-H", "count(O{H}) >= 1")
add("two O-H", "count(O{H}) >= 2")
add("N-H", "count(N{H}) >= 1")
add("NH2", "count(N{H2}) >= 1")
add("S-H", "count(S{H}) >= 1")
add("methyl", "count(C{H3}) >= 1")
add("two methyls", "count(C{H3}) >= 2")
add("methylene", "count(C{H2}) >= 1")
add("two methylenes", "count(C{H2}) >= 2")
add("non-aromatic carbon without H", "count(C{H0,!a}) >= 1")
add("ring present", "rings >= 1")
add("two rings", "rings >= 2")
add("three rings", "rings >= 3")
for n in (3, 4, 5, 6, 7, 8):
    add(f"{n}-membered ring", f"ring({n}) >= 1")
add("two 6-membered rings", "ring(6) >= 2")
add("aromatic atom", "count(*{a}) >= 1")
add("aromatic ring", "aromatic_rings >= 1")
add("two aromatic rings", "aromatic_rings >= 2")
add("aromatic nitrogen", "count(N{a}) >= 1")
add("aromatic oxygen", "count(O{a}) >= 1")
add("aromatic sulfur", "count(S{a}) >= 1")
add("ring heteroatom", "count(Q{r}) >= 1")
add("ring nitrogen", "count(N{r}) >= 1")
add("ring oxygen", "count(O{r}) >= 1")
add("ring sulfur", "count(S{r}) >= 1")
add("chain nitrogen", "count(N{!r}) >= 1")
add("chain oxygen", "count(O{!r}) >= 1")
add("multiple fragments", "fragments >= 2")

pairs = [
    "C-C", "C=C", "C#C", "C:C", "C-N", "C=N", "C#N", "C:N", "C-O", "C=O",
    "C-S", "C=S", "C:S", "N-N", "N=N", "N-O", "N=O", "O-O", "S-S",
    "S-O", "S=O", "P-O", "P=O", "C-P", "N-S", "C-F", "C-Cl", "C-Br", "C-I",
]
for p in pairs:
    add(f"bond {p}", f"path({p}) >= 1")
add("two C=O", "path(C=O) >= 2")
add("three C=O", "path(C=O) >= 3")
add("two S=O", "path(S=O) >= 2")

triples = [
    ("carboxylate", "O=C-O{-}"),
    ("carboxylic acid", "O=C-O{H}"),
    ("ester or acid", "O=C-O"),
    ("ester", "O=C-O-C"),
    ("amide", "O=C-N"),
    ("carbamate", "O=C(-O)-N"),
    ("urea", "N-C(=O)-N"),
    ("ketone", "C-C(=O)-C"),
    ("aldehyde", "O=C{H}"),
    ("ether", "C-O{H0,!a}-C"),
    ("secondary amine", "C-N{H}-C"),
    ("tertiary amine", "C-N{H0,!a,!+}(-C)-C"),
    ("thioether", "C-S{H0,!a}-C"),
    ("disulfide bridge", "C-S-S-C"),
    ("sulfonyl", "O=S=O"),
    ("sulfonate", "O=S(=O)-O"),
    ("phosphate", "O-P(=O)-O"),
    ("phosphodiester", "C-O-P-O-C"),
    ("nitro", "O=N{+}-O{-}"),
    ("nitrile", "C-C#N"),
    ("imine", "C=N-C"),
    ("amidine", "N-C=N"),
    ("alpha-beta unsaturated carbonyl", "C=C-C=O"),
    ("enol ether", "C=C-O"),
    ("aromatic hydroxyl", "C{a}-O{H}"),
    ("aromatic amine", "C{a}-N{H}"),
    ("aryl halide", "C{a}-X"),
    ("aryl carbonyl", "C{a}-C=O"),
    ("aryl ether", "C{a}-O-C"),
    ("benzylic carbon", "C{a}-C{!a}"),
    ("vicinal diol", "O{H}-C-C-O{H}"),
    ("amino alcohol", "N-C-C-O"),
    ("alpha amino acid", "N-C-C(=O)-O"),
    ("ethylenediamine", "N-C-C-N"),
    ("1,3-dioxy", "O-C-C-C-O"),
    ("glycosidic-type acetal", "O-C-O"),
    ("geminal dimethyl", "C{H3}-C-C{H3}"),
    ("isopropyl", "C{H3}-C{H}-C{H3}"),
    ("tert-butyl", "C{H3}-C(-C{H3})-C{H3}"),
    ("vinyl", "C{H2}=C"),
    ("terminal alkyne", "C{H}#C"),
    ("allyl", "C=C-C{H2}"),
    ("diene", "C=C-C=C"),
    ("long chain C4", "C{!r}-C{!r}-C{!r}-C{!r}"),
    ("long chain C6", "C{H2}-C{H2}-C{H2}-C{H2}-C{H2}-C{H2}"),
    ("ring-chain junction", "*{r}-*{!r}"),
    ("ring carbonyl", "C{r}=O"),
    ("lactone/lactam ring", "O=C{r}-Q{r}"),
    ("ring nitrogen next to carbonyl", "N{r}-C=O"),
    ("quaternary ammonium", "C-N{+,H0}(-C)(-C)-C"),
    ("choline-like", "N{+}-C-C-O"),
    ("glycerol backbone", "O-C-C(-O)-C-O"),
    ("thiol", "C-S{H}"),
    ("thiocarbonyl", "C=S"),
    ("hydrazine", "N-N"),
    ("azo", "N=N"),
    ("oxime", "C=N-O"),
    ("hydroxylamine", "N-O{H}"),
    ("sulfonamide", "O=S(=O)-N"),
    ("trifluoromethyl", "F-C(-F)-F"),
    ("heteroatom pair", "Q-Q"),
    ("heteroatom 1,3", "Q-*-Q"),
    ("two heteroatoms on one carbon", "Q-C-Q"),
    ("N in 6-ring aromatic", "N{a}:C:C"),
    ("pyrrole-type N-H", "N{a,H}"),
    ("substituted aromatic carbon", "C{a,H0}(:*):*"),
    ("aromatic C-methyl", "C{a}-C{H3}"),
    ("aromatic C=O neighbour", "C{a}-C(=O)-O"),
    ("carbonyl-carbonyl", "O=C-C=O"),
    ("1,3-dicarbonyl", "O=C-C-C=O"),
]
for desc, expr in triples:
    add(desc, f"path({expr}) >= 1")

assert len(keys) == 166, len(keys)


def main():
    lines = ["# structural key catalogue", "# version\t1", "# id\tdescription\texpression"]
    for k, (desc, expr) in enumerate(keys):
        lines.append(f"{k}\t{desc}\t{expr}")
    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(keys)} keys to {OUT}")


if __name__ == "__main__":
    main()
