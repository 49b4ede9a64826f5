"""Attainable reward range for each staged reward composition.

For each task the sub-rewards are enabled one at a time in ablation order;
the script scores a gold echo (upper end), an unformatted reply and a
formatted but wrong reply under every mask.
"""

from molrl.rewards import ABLATION_LADDERS, CAPTION, GENERATION, RewardMask, score

CASES = {
    CAPTION: ("The molecule is a monocarboxylic acid anion and a member of dithiolanes.", "zzz"),
    GENERATION: ("[O][=C][Branch1][C][O-1][C][C][S][S][C][Ring1][Branch1]", "[N]"),
}


def main():
    print("task,terms,malformed,wrong,gold")
    for task, ladder in ABLATION_LADDERS.items():
        ref, wrong = CASES[task]
        for terms in ladder:
            mask = RewardMask(frozenset(terms))
            bad = score(ref, ref, task, mask).total
            low = score(f"<answer>{wrong}</answer>", ref, task, mask).total
            high = score(f"<answer>{ref}</answer>", ref, task, mask).total
            print(f"{task},{mask.describe()},{bad:.4f},{low:.4f},{high:.4f}")


if __name__ == "__main__":
    main()
