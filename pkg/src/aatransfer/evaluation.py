"""Attachment scores, per-label breakdown and treebank leakage."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .treebank import DependencyTree, Sentence, Token, punct_by_upos, punctuation_mask


class EvaluationError(ValueError):
    pass


@dataclass
class LabelCounts:
    total: int = 0
    correct_head: int = 0
    correct_labeled: int = 0


@dataclass
class EvalReport:
    uas: float
    las: float
    tokens: int
    correct_head: int
    correct_labeled: int
    punct_excluded: int
    per_label: dict[str, LabelCounts] = field(default_factory=dict)

    def as_dict(self) -> dict[str, float]:
        """Flat metric-name to value mapping; key names are stable."""
        out: dict[str, float] = {
            "uas": self.uas,
            "las": self.las,
            "tokens": self.tokens,
            "correct_head": self.correct_head,
            "correct_labeled": self.correct_labeled,
            "punct_excluded": self.punct_excluded,
        }
        for label in sorted(self.per_label):
            c = self.per_label[label]
            out[f"label.{label}.total"] = c.total
            out[f"label.{label}.correct_head"] = c.correct_head
            out[f"label.{label}.correct_labeled"] = c.correct_labeled
        return out

    def to_kv(self) -> str:
        lines = []
        for key, value in self.as_dict().items():
            text = f"{value:.6f}" if isinstance(value, float) else str(value)
            lines.append(f"{key}={text}")
        return "\n".join(lines) + "\n"

    def to_tsv(self) -> str:
        rows = [
            "metric\tvalue",
            f"UAS\t{100 * self.uas:.2f}",
            f"LAS\t{100 * self.las:.2f}",
            f"tokens\t{self.tokens}",
            "",
            "label\ttotal\tUAS\tLAS",
        ]
        for label in sorted(self.per_label):
            c = self.per_label[label]
            rows.append(
                f"{label}\t{c.total}\t{100 * c.correct_head / c.total:.2f}"
                f"\t{100 * c.correct_labeled / c.total:.2f}"
            )
        return "\n".join(rows) + "\n"


def score(
    gold: Sequence[tuple[Sentence, DependencyTree]],
    predicted: Sequence[DependencyTree],
    punct: Optional[Callable[[Token], bool]] = punct_by_upos,
) -> EvalReport:
    """UAS/LAS over non-punctuation tokens, with a table keyed by gold label.

    ``punct=None`` scores every token. Trees without labels count as
    labelled-wrong, so LAS is 0 when either side is unlabeled.
    """
    if len(gold) != len(predicted):
        raise EvaluationError(f"{len(gold)} gold sentences but {len(predicted)} predictions")
    total = heads_ok = both_ok = skipped = 0
    per_label: dict[str, LabelCounts] = {}
    for (sentence, gtree), ptree in zip(gold, predicted):
        if len(gtree) != len(ptree):
            raise EvaluationError(
                f"sentence {sentence.id}: gold has {len(gtree)} tokens, prediction {len(ptree)}"
            )
        mask = punctuation_mask(sentence, punct) if punct else [False] * len(sentence)
        for i, is_punct in enumerate(mask):
            if is_punct:
                skipped += 1
                continue
            glabel = gtree.labels[i] if gtree.labels is not None else "_"
            plabel = ptree.labels[i] if ptree.labels is not None else None
            head_ok = gtree.heads[i] == ptree.heads[i]
            label_ok = head_ok and gtree.labels is not None and glabel == plabel
            counts = per_label.setdefault(glabel, LabelCounts())
            counts.total += 1
            counts.correct_head += head_ok
            counts.correct_labeled += label_ok
            total += 1
            heads_ok += head_ok
            both_ok += label_ok
    if total == 0:
        raise EvaluationError("no scorable tokens")
    return EvalReport(heads_ok / total, both_ok / total, total, heads_ok, both_ok, skipped, per_label)


def _canonical_unordered(heads: Sequence[int]) -> str:
    children: dict[int, list[int]] = {}
    for m, h in enumerate(heads, start=1):
        children.setdefault(h, []).append(m)

    def encode(node: int) -> str:
        return "(" + "".join(sorted(encode(c) for c in children.get(node, []))) + ")"

    return encode(0)


def tree_signature(tree: DependencyTree, ordered: bool = True):
    """Hashable structure key: the head sequence, or an unordered canonical form."""
    return tuple(tree.heads) if ordered else _canonical_unordered(tree.heads)


def treebank_leakage(
    train: Sequence[DependencyTree],
    test: Sequence[DependencyTree],
    ordered: bool = True,
) -> float:
    """Fraction of test trees whose structure also occurs in ``train``.

    By default two trees match when their head sequences are identical
    (words ignored). ``ordered=False`` matches up to unordered rooted-tree
    isomorphism, which can only raise the fraction.
    """
    if not test:
        raise EvaluationError("empty test set")
    seen = {tree_signature(t, ordered) for t in train}
    leaked = sum(tree_signature(t, ordered) in seen for t in test)
    return leaked / len(test)
