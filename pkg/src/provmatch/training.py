"""Training for the two learned artifacts: feature weights and the inline
predictor.

Both trainers are deliberately self-contained and deterministic.  The weight
trainer is a linear soft-margin SVM fit by dual coordinate descent over
per-feature cost vectors; examples are canonically sorted before fitting so
the result does not depend on input order.  The inline predictor is boosted
decision stumps over the six boolean source properties, converted into the
additive rule form the matcher consumes.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .costs import FEATURES, WeightVector, arg_cost, set_feature_cost
from .graph import PREDICTIVE_FIELDS, PredictiveFeatures
from .inlining import InlineModel, InlineRule, predicts_inline
from .matching import translate_fcg
from .simulate import SimPair
from .whitelist import WhitelistConfig, apply_whitelists


class TrainingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# corpora


@dataclass(frozen=True)
class PairExample:
    """One candidate function pair, reduced to its six feature costs."""

    costs: tuple[float, float, float, float, float, float]
    is_match: bool
    group: str = ""


@dataclass(frozen=True)
class InlineExample:
    features: PredictiveFeatures
    label: bool
    group: str = ""


def _cost_row(bf, sf, amap: dict[str, str]) -> tuple[float, ...]:
    return (
        set_feature_cost(bf.strings, sf.strings),
        set_feature_cost(bf.ints, sf.ints),
        set_feature_cost(bf.libcalls, sf.libcalls),
        set_feature_cost(translate_fcg(bf.callers, amap), sf.callers),
        set_feature_cost(translate_fcg(bf.callees, amap), sf.callees),
        arg_cost(bf.num_args, sf.num_args),
    )


def build_pair_corpus(
    pairs: Sequence[SimPair],
    seed: int = 0,
    whitelist: WhitelistConfig | None = None,
) -> list[PairExample]:
    """True pairings (via ground truth) plus one seeded wrong pairing each.

    Call-graph references on the binary side are translated through the full
    ground-truth map, so the corpus shows the matcher's features at their
    best, which is exactly the regime the weights are tuned for.  Functions
    that absorbed an inlined callee are skipped; their merged features would
    teach the wrong lesson about how reliable each feature is.
    """
    rng = random.Random(seed)
    out: list[PairExample] = []
    for idx, sp in enumerate(pairs):
        src, binary = sp.source, sp.binary
        if whitelist is not None:
            src = apply_whitelists(src, whitelist)
            binary = apply_whitelists(binary, whitelist)
        group = f"{idx}:{sp.profile.seed}"
        absorbed_into = {caller for caller, _ in sp.inlined_edges}
        src_names = sorted(src.functions)
        for bid in sorted(binary.functions):
            if bid not in sp.truth:
                raise TrainingError(f"ground truth missing binary function {bid!r}")
            sname = sp.truth[bid]
            if sname not in src.functions:
                continue  # compiler-inserted helpers have no source counterpart
            if sname in absorbed_into:
                continue
            bf = binary.functions[bid].features
            sf = src.functions[sname].features
            out.append(PairExample(_cost_row(bf, sf, sp.truth), True, group))
            wrong = rng.choice(src_names)
            while wrong == sname and len(src_names) > 1:
                wrong = rng.choice(src_names)
            if wrong != sname:
                wf = src.functions[wrong].features
                out.append(PairExample(_cost_row(bf, wf, sp.truth), False, group))
    return out


def build_inline_corpus(
    pairs: Sequence[SimPair], seed: int = 0, balance: bool = True
) -> list[InlineExample]:
    """Label each source function by whether some call site absorbed it.

    With balance on, the majority class inside each pair is downsampled to
    the minority count so the boosted model does not learn the base rate.
    """
    rng = random.Random(seed)
    out: list[InlineExample] = []
    for idx, sp in enumerate(pairs):
        group = f"{idx}:{sp.profile.seed}"
        inlined = {callee for _, callee in sp.inlined_edges}
        pos: list[InlineExample] = []
        neg: list[InlineExample] = []
        for name in sorted(sp.source.functions):
            entry = sp.source.functions[name]
            if entry.is_pseudo or entry.predictive is None:
                continue
            ex = InlineExample(entry.predictive, name in inlined, group)
            (pos if ex.label else neg).append(ex)
        if balance:
            k = min(len(pos), len(neg))
            pos = rng.sample(pos, k) if len(pos) > k else pos
            neg = rng.sample(neg, k) if len(neg) > k else neg
        out.extend(pos)
        out.extend(neg)
    return out


# JSONL persistence, one example per line


def save_pair_corpus(path: str, examples: Iterable[PairExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {"costs": list(ex.costs), "is_match": ex.is_match, "group": ex.group}
                )
            )
            fh.write("\n")


def load_pair_corpus(path: str) -> list[PairExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                costs = tuple(float(c) for c in doc["costs"])
                is_match = bool(doc["is_match"])
            except (ValueError, KeyError, TypeError) as exc:
                raise TrainingError(f"{path}:{lineno}: bad pair example: {exc}") from exc
            if len(costs) != len(FEATURES):
                raise TrainingError(
                    f"{path}:{lineno}: expected {len(FEATURES)} costs, got {len(costs)}"
                )
            out.append(PairExample(costs, is_match, str(doc.get("group", ""))))
    return out


def save_inline_corpus(path: str, examples: Iterable[InlineExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "features": ex.features.as_dict(),
                        "label": ex.label,
                        "group": ex.group,
                    }
                )
            )
            fh.write("\n")


def load_inline_corpus(path: str) -> list[InlineExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                example = InlineExample(
                    PredictiveFeatures.from_dict(doc["features"]),
                    bool(doc["label"]),
                    str(doc.get("group", "")),
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise TrainingError(f"{path}:{lineno}: bad inline example: {exc}") from exc
            out.append(example)
    return out


# ---------------------------------------------------------------------------
# linear SVM by dual coordinate descent


@dataclass(frozen=True)
class LinearModel:
    coef: tuple[float, ...]
    bias: float

    def decision(self, x: Sequence[float]) -> float:
        return sum(c * v for c, v in zip(self.coef, x)) + self.bias

    def predict(self, x: Sequence[float]) -> int:
        return 1 if self.decision(x) > 0 else -1


def fit_linear_svm(
    xs: Sequence[Sequence[float]],
    ys: Sequence[int],
    c: float = 1.0,
    max_passes: int = 2000,
    tol: float = 1e-8,
) -> LinearModel:
    """L1-loss soft-margin linear SVM, solved in the dual one coordinate at a
    time.  The bias is absorbed as a constant extra feature.  Examples are
    visited in canonical sorted order every pass, so permuting the corpus
    cannot change the fit.
    """
    if len(xs) != len(ys) or not xs:
        raise TrainingError("need a non-empty corpus with one label per example")
    if any(y not in (-1, 1) for y in ys):
        raise TrainingError("labels must be +1 or -1")
    dim = len(xs[0])
    if any(len(x) != dim for x in xs):
        raise TrainingError("examples must share one dimension")

    order = sorted(range(len(xs)), key=lambda i: (tuple(xs[i]), ys[i]))
    ax = [tuple(xs[i]) + (1.0,) for i in order]
    ay = [ys[i] for i in order]
    qd = [sum(v * v for v in x) for x in ax]

    n = len(ax)
    alpha = [0.0] * n
    w = [0.0] * (dim + 1)
    for _ in range(max_passes):
        worst = 0.0
        for i in range(n):
            x, y = ax[i], ay[i]
            g = y * sum(wv * xv for wv, xv in zip(w, x)) - 1.0
            a = alpha[i]
            if a <= 0.0:
                pg = min(g, 0.0)
            elif a >= c:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg != 0.0:
                new = min(max(a - g / qd[i], 0.0), c)
                if new != a:
                    d = (new - a) * y
                    for j in range(dim + 1):
                        w[j] += d * x[j]
                    alpha[i] = new
            worst = max(worst, abs(pg))
        if worst < tol:
            break
    return LinearModel(tuple(w[:dim]), w[dim])


def model_accuracy(m: LinearModel, xs: Sequence[Sequence[float]], ys: Sequence[int]) -> float:
    if not xs:
        return 0.0
    return sum(1 for x, y in zip(xs, ys) if m.predict(x) == y) / len(xs)


def train_weights(
    corpus: Sequence[PairExample],
    c: float = 1.0,
    max_passes: int = 2000,
    tol: float = 1e-8,
) -> WeightVector:
    """Fit the per-feature weights from a pair corpus.

    Wrong pairings are the positive class, so large coefficients land on the
    costs that best expose them.  Magnitudes become the weights; the sign is
    irrelevant once they multiply non-negative costs.
    """
    if not corpus:
        raise TrainingError("need a non-empty pair corpus")
    if len({ex.is_match for ex in corpus}) < 2:
        raise TrainingError("degenerate pair corpus: only one label present")
    xs = [ex.costs for ex in corpus]
    ys = [1 if not ex.is_match else -1 for ex in corpus]
    model = fit_linear_svm(xs, ys, c=c, max_passes=max_passes, tol=tol)
    values = {f: abs(model.coef[i]) for i, f in enumerate(FEATURES)}
    return replace(WeightVector(), **values)


# ---------------------------------------------------------------------------
# boosted stumps for the inline predictor


_STUMPS = tuple((f, pol) for f in PREDICTIVE_FIELDS for pol in (False, True))


def _stump_predict(ex: InlineExample, feature: str, polarity: bool) -> int:
    if feature == "":  # constant hypothesis, the root-prediction analogue
        return 1 if polarity else -1
    return 1 if getattr(ex.features, feature) == polarity else -1


_CONSTANT_STUMPS = (("", False), ("", True))


def train_inliner(corpus: Sequence[InlineExample], rounds: int = 8) -> InlineModel:
    """AdaBoost over one-feature stumps, flattened into additive rules.

    A stump voting a with weight a on agreement and -a on disagreement is
    the same as a constant -a plus a rule worth 2a, so the boosted committee
    folds exactly into the rule-list model.  Constant hypotheses join the
    pool after the first round; without them no weighted vote of symmetric
    stumps can express an intercept, and even a plain two-literal
    conjunction needs one.
    """
    if not corpus:
        raise TrainingError("need a non-empty inline corpus")
    if len({ex.label for ex in corpus}) < 2:
        raise TrainingError("degenerate inline corpus: only one label present")
    if rounds < 1:
        raise TrainingError("rounds must be at least 1")
    n = len(corpus)
    labels = [1 if ex.label else -1 for ex in corpus]
    agree = {
        stump: [_stump_predict(ex, *stump) for ex in corpus]
        for stump in _STUMPS + _CONSTANT_STUMPS
    }
    dist = [1.0 / n] * n
    base = 0.0
    scores: dict[tuple[str, bool], float] = {}
    for t in range(rounds):
        pool = _STUMPS if t == 0 else _STUMPS + _CONSTANT_STUMPS
        best_stump = None
        best_err = math.inf
        for stump in pool:
            err = sum(d for d, h, y in zip(dist, agree[stump], labels) if h != y)
            if err < best_err - 1e-15:
                best_err = err
                best_stump = stump
        assert best_stump is not None
        if t > 0 and best_err >= 0.5 - 1e-12:
            break
        clamped = min(max(best_err, 1e-10), 1.0 - 1e-10)
        alpha = 0.5 * math.log((1.0 - clamped) / clamped)
        feature, polarity = best_stump
        if feature == "":
            base += alpha if polarity else -alpha
        else:
            base -= alpha
            scores[best_stump] = scores.get(best_stump, 0.0) + 2.0 * alpha
        preds = agree[best_stump]
        dist = [d * math.exp(-alpha * y * h) for d, y, h in zip(dist, labels, preds)]
        z = sum(dist)
        dist = [d / z for d in dist]
        if best_err <= 1e-10:
            break
    rules = tuple(
        InlineRule(f, pol, scores[(f, pol)])
        for f, pol in sorted(scores, key=lambda s: (PREDICTIVE_FIELDS.index(s[0]), s[1]))
    )
    return InlineModel(base=base, threshold=0.0, rules=rules)


def evaluate_inliner(m: InlineModel, corpus: Sequence[InlineExample]) -> tuple[float, float]:
    """(true-positive rate, false-positive rate); an empty class scores 0."""
    tp = fn = fp = tn = 0
    for ex in corpus:
        pred = predicts_inline(ex.features, m)
        if ex.label:
            tp += pred
            fn += not pred
        else:
            fp += pred
            tn += not pred
    tpr = tp / (tp + fn) if tp + fn else 0.0
    fpr = fp / (fp + tn) if fp + tn else 0.0
    return tpr, fpr


def cross_validate_inliner(
    corpus: Sequence[InlineExample], folds: int = 5, rounds: int = 8
) -> list[tuple[float, float]]:
    """Group-respecting k-fold: all examples sharing a group stay together."""
    if folds < 2:
        raise TrainingError("folds must be at least 2")
    groups = sorted({ex.group for ex in corpus})
    if len(groups) < folds:
        raise TrainingError(f"need at least {folds} groups, have {len(groups)}")
    fold_of = {g: i % folds for i, g in enumerate(groups)}
    results = []
    for k in range(folds):
        train = [ex for ex in corpus if fold_of[ex.group] != k]
        test = [ex for ex in corpus if fold_of[ex.group] == k]
        model = train_inliner(train, rounds=rounds)
        results.append(evaluate_inliner(model, test))
    return results


def corpus_labels(corpus: Sequence[PairExample]) -> tuple[list[tuple[float, ...]], list[int]]:
    """Convenience split used by the trainer sanity checks."""
    return [ex.costs for ex in corpus], [1 if not ex.is_match else -1 for ex in corpus]
