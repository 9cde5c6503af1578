#!/usr/bin/env python3
"""Regenerate the shipped configuration artifacts in src/provmatch/data/.

Everything here is seeded, so reruns are byte-identical.  The inline model
is trained on simulated corpora whose seeds (9000-9015) are disjoint from
every seed used by the test suite.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from provmatch.costs import WeightVector, save_weights
from provmatch.inlining import save_model
from provmatch.simulate import o2_profile, o3_profile, simulate
from provmatch.training import build_inline_corpus, evaluate_inliner, train_inliner
from provmatch.whitelist import default_whitelist, save_whitelist

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "provmatch", "data")


def main() -> None:
    os.makedirs(DATA_DIR, exist_ok=True)

    save_weights(os.path.join(DATA_DIR, "weights.json"), WeightVector())
    save_whitelist(os.path.join(DATA_DIR, "whitelist.json"), default_whitelist())

    pairs = []
    for i in range(8):
        seed = 9000 + i
        profile = o2_profile(seed) if i % 2 == 0 else o3_profile(seed)
        pairs.append(simulate(seed, 120, profile=profile))
    corpus = build_inline_corpus(pairs, seed=9100)
    model = train_inliner(corpus, rounds=8)
    save_model(os.path.join(DATA_DIR, "inline_model.json"), model)

    held_out = []
    for i in range(2):
        seed = 9014 + i
        profile = o2_profile(seed) if i % 2 == 0 else o3_profile(seed)
        held_out.append(simulate(seed, 120, profile=profile))
    eval_corpus = build_inline_corpus(held_out, seed=9101)
    tpr, fpr = evaluate_inliner(model, eval_corpus)
    print(f"train examples: {len(corpus)}")
    print(f"held-out tpr: {tpr:.4f}")
    print(f"held-out fpr: {fpr:.4f}")
    print(f"rules: {len(model.rules)}")
    print(f"base: {model.base:.4f}")
    for rule in model.rules:
        print(f"  {rule.feature} == {rule.polarity}: {rule.score:+.4f}")


if __name__ == "__main__":
    main()
