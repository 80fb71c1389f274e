"""Training regimes: supervised, direct transfer, self-training, and
ambiguity-aware self-training with one or several source parsers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from . import algorithms
from .ambiguity import AmbiguityConfig, AmbiguousArcSet, build_arc_set, union_arc_sets
from .model import (
    ParserModel,
    arc_label_scores,
    l2_to_init,
    label_feature_ids,
    predict_labels,
    scores_from_features,
    sentence_features,
)
from .treebank import DependencyTree, Sentence

logger = logging.getLogger(__name__)

SUPERVISED_CUTOFF = 100
ST_CUTOFF = 60
AA_CUTOFF = 30


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    learning_rate: float = 1e-4
    l2: float = 0.0
    sigma: float = 0.95
    # None picks the regime default: 100 supervised, 60 ST, 30 AA-ST/AA-ET
    length_cutoff: Optional[int] = None
    projective: bool = False
    batch_size: int = 80
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if not 0 < self.sigma <= 1:
            raise ValueError("sigma must lie in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.length_cutoff is not None and self.length_cutoff < 1:
            raise ValueError("length_cutoff must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")

    def cutoff(self, default: int) -> int:
        return default if self.length_cutoff is None else self.length_cutoff


# Hyperparameters reported for the transformer parser; learning rates are
# tuned for that encoder and are much too small for the log-linear scorer.
PROFILES: dict[str, TrainConfig] = {
    "source": TrainConfig(learning_rate=1e-4, batch_size=80, length_cutoff=100),
    "st-nearby": TrainConfig(learning_rate=5.6e-4, l2=3e-4, length_cutoff=60),
    "st-distant": TrainConfig(learning_rate=3.7e-4, l2=2.8e-4, length_cutoff=60),
    "aast-nearby": TrainConfig(learning_rate=3.8e-5, l2=0.01, length_cutoff=30),
    "aast-distant": TrainConfig(learning_rate=2e-5, l2=0.39, length_cutoff=30),
    "aaet-nearby": TrainConfig(learning_rate=2.1e-5, l2=0.079, length_cutoff=30),
    "aaet-distant": TrainConfig(learning_rate=5.9e-5, l2=1.2e-4, length_cutoff=30),
    "aaet-repr-nearby": TrainConfig(learning_rate=1.7e-5, l2=4e-4, length_cutoff=30),
    "aaet-repr-distant": TrainConfig(learning_rate=9.7e-5, l2=0.084, length_cutoff=30),
    "aaet-prag-nearby": TrainConfig(learning_rate=4.4e-5, l2=2.7e-4, length_cutoff=30),
    "aaet-prag-distant": TrainConfig(learning_rate=8.5e-5, l2=2.8e-5, length_cutoff=30),
    "proj-aast": TrainConfig(learning_rate=1e-4, l2=7.9e-4, length_cutoff=20, projective=True),
    "proj-aaet-prag": TrainConfig(learning_rate=9.4e-5, l2=2.4e-4, length_cutoff=20, projective=True),
}


@dataclass
class SourceBundle:
    sources: list[tuple[ParserModel, str]]
    main: int = 0

    def __post_init__(self):
        if not self.sources:
            raise ValueError("a source bundle needs at least one parser")
        if not 0 <= self.main < len(self.sources):
            raise ValueError(f"main source index {self.main} out of range")

    @property
    def main_model(self) -> ParserModel:
        return self.sources[self.main][0]


# -- optimizers ---------------------------------------------------------------


class SGD:
    def __init__(self, size: int, lr: float):
        self.lr = lr

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        params -= self.lr * grad


class Adam:
    def __init__(self, size: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m *= self.beta1
        self.m += (1 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1 - self.beta2) * grad * grad
        lr = self.lr * np.sqrt(1 - self.beta2**self.t) / (1 - self.beta1**self.t)
        params -= lr * self.m / (np.sqrt(self.v) + self.eps)


OPTIMIZERS = {"adam": Adam, "sgd": SGD}


# -- per-sentence objectives --------------------------------------------------


@dataclass
class Example:
    """A sentence with cached features and its training signal.

    ``heads`` is the (pseudo-)gold tree for tree-likelihood training,
    ``allowed`` the candidate arc mask for ambiguity-aware training, and
    ``label_ids`` the label index of each arc of ``label_heads``.
    """

    sentence: Sentence
    feats: np.ndarray
    heads: Optional[tuple[int, ...]] = None
    allowed: Optional[np.ndarray] = None
    label_heads: Optional[tuple[int, ...]] = None
    label_ids: Optional[np.ndarray] = None


def tree_nll(scores: np.ndarray, heads: Sequence[int], projective: bool = False):
    """``-log P(tree)`` and its gradient with respect to the arc scores."""
    log_z, marg = algorithms.log_partition_and_marginals(scores, projective)
    dep = np.arange(1, len(heads) + 1)
    loss = log_z - scores[np.asarray(heads), dep].sum()
    grad = marg
    grad[np.asarray(heads), dep] -= 1.0
    return float(loss), grad


def ambiguous_nll(scores: np.ndarray, allowed: np.ndarray, projective: bool = False):
    """``-log`` of the probability mass on trees inside ``allowed``.

    Returns ``log Z - log Z_allowed`` and its gradient, the difference of
    unconstrained and constrained arc marginals.
    """
    log_z, marg = algorithms.log_partition_and_marginals(scores, projective)
    constrained = np.where(allowed, scores, algorithms.MASKED)
    log_zc, marg_c = algorithms.log_partition_and_marginals(constrained, projective)
    return float(log_z - log_zc), marg - marg_c


def _scatter(grad: np.ndarray, feats: np.ndarray, dscores: np.ndarray) -> None:
    weights = np.repeat(dscores.ravel(), feats.shape[-1])
    grad += np.bincount(feats.ravel(), weights=weights, minlength=grad.size)


def arc_objective(model: ParserModel, examples: Sequence[Example], projective: bool = False):
    """Mean per-sentence arc loss and its gradient over all parameters.

    Sentences with ``allowed`` use the ambiguous-set loss, otherwise the
    tree likelihood of ``heads``.
    """
    grad = np.zeros_like(model.theta)
    arc_grad = grad[: model.space.dim]
    total = 0.0
    for ex in examples:
        scores = scores_from_features(model.arc_weights, ex.feats)
        if ex.allowed is not None:
            loss, dscores = ambiguous_nll(scores, ex.allowed, projective)
        elif ex.heads is not None:
            loss, dscores = tree_nll(scores, ex.heads, projective)
        else:
            continue
        dscores[~np.isfinite(scores)] = 0.0
        total += loss
        _scatter(arc_grad, ex.feats, dscores)
    n = max(len(examples), 1)
    grad /= n
    return total / n, grad


def label_objective(model: ParserModel, examples: Sequence[Example]):
    """Mean per-sentence label cross-entropy on ``label_heads`` arcs."""
    grad = np.zeros_like(model.theta)
    if not model.labels:
        return 0.0, grad
    dim = model.space.dim
    label_grad = grad[dim:]
    total = 0.0
    for ex in examples:
        if ex.label_ids is None:
            continue
        t = len(ex.label_heads)
        scores = arc_label_scores(model, ex.feats, ex.label_heads)
        scores -= scores.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(scores).sum(axis=1))
        rows = np.arange(t)
        total += float((log_norm - scores[rows, ex.label_ids]).sum())
        probs = np.exp(scores - log_norm[:, None])
        probs[rows, ex.label_ids] -= 1.0
        arc_ids = ex.feats[np.asarray(ex.label_heads), np.arange(1, t + 1)]
        ids = label_feature_ids(arc_ids, len(model.labels), dim)
        # ids: (t, n_templates, n_labels); probs: (t, n_labels)
        w = np.broadcast_to(probs[:, None, :], ids.shape)
        label_grad += np.bincount(ids.ravel(), weights=w.ravel(), minlength=dim)
    n = max(len(examples), 1)
    grad /= n
    return total / n, grad


def objective(model: ParserModel, examples: Sequence[Example], l2: float, projective: bool = False):
    """Full training objective for one batch: arc loss + label loss + L2-to-init."""
    arc_loss, grad = arc_objective(model, examples, projective)
    label_loss, label_grad = label_objective(model, examples)
    penalty, pgrad = l2_to_init(model, l2)
    return arc_loss + label_loss + penalty, grad + label_grad + pgrad


# -- training loop ------------------------------------------------------------


def _norm_from_init(model: ParserModel) -> float:
    return float(np.linalg.norm(model.theta - model.theta0))


def fit(
    model: ParserModel,
    examples: Sequence[Example],
    config: TrainConfig,
    log: Optional[TextIO] = None,
) -> ParserModel:
    """Optimise ``model`` in place on prepared examples and return it."""
    if not examples:
        raise TrainingError("no training sentences")
    rng = np.random.default_rng(config.seed)
    opt = OPTIMIZERS[config.optimizer](model.theta.size, config.learning_rate)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [examples[i] for i in order[start:start + config.batch_size]]
            loss, grad = objective(model, batch, config.l2, config.projective)
            epoch_loss += loss * len(batch)
            opt.step(model.theta, grad)
        mean_loss = epoch_loss / len(examples)
        dist = _norm_from_init(model)
        logger.info("epoch %d loss %.6f |theta-theta0| %.6f", epoch, mean_loss, dist)
        if log is not None:
            log.write(f"{epoch}\t{mean_loss:.10g}\t{dist:.10g}\n")
    return model


def _filter_length(sentences, cutoff: int, key=lambda x: x):
    kept = [s for s in sentences if len(key(s)) <= cutoff]
    if not kept:
        raise TrainingError(f"all sentences are longer than the cutoff ({cutoff})")
    return kept


def label_inventory(data: Iterable[tuple[Sentence, DependencyTree]]) -> tuple[str, ...]:
    labels = set()
    for _, tree in data:
        if tree.labels is not None:
            labels.update(tree.labels)
    return tuple(sorted(labels))


def train_supervised(
    model: ParserModel,
    data: Sequence[tuple[Sentence, DependencyTree]],
    config: TrainConfig,
    log: Optional[TextIO] = None,
) -> ParserModel:
    """Tree-CRF likelihood training on gold trees (plus label cross-entropy)."""
    if not data:
        raise TrainingError("empty training treebank")
    data = _filter_length(data, config.cutoff(SUPERVISED_CUTOFF), key=lambda item: item[0])
    missing = set(label_inventory(data)) - set(model.labels)
    if missing:
        raise TrainingError(f"labels missing from the model inventory: {sorted(missing)}")
    examples = []
    for sentence, tree in data:
        ex = Example(sentence, sentence_features(model.space, sentence), heads=tree.heads)
        if tree.labels is not None and model.labels:
            ex.label_heads = tree.heads
            ex.label_ids = np.array([model.label_index(lab) for lab in tree.labels])
        examples.append(ex)
    return fit(model.copy(), examples, config, log)


def parse(
    model: ParserModel,
    sentence: Sentence,
    projective: bool = False,
    feats: Optional[np.ndarray] = None,
) -> DependencyTree:
    if feats is None:
        feats = sentence_features(model.space, sentence)
    scores = scores_from_features(model.arc_weights, feats)
    tree = algorithms.decode(scores, projective)
    return DependencyTree(tree.heads, predict_labels(model, feats, tree.heads))


def direct_transfer(
    source: ParserModel,
    sentences: Sequence[Sentence],
    projective: bool = False,
) -> list[DependencyTree]:
    return [parse(source, s, projective) for s in sentences]


def _pseudo_labels(model: ParserModel, ex: Example, tree: DependencyTree) -> None:
    if tree.labels is not None:
        ex.label_heads = tree.heads
        ex.label_ids = np.array([model.label_index(lab) for lab in tree.labels])


def self_train(
    source: ParserModel,
    sentences: Sequence[Sentence],
    config: TrainConfig,
    log: Optional[TextIO] = None,
) -> ParserModel:
    """Fine-tune on the source parser's 1-best trees, fixed before epoch 1."""
    kept = _filter_length(sentences, config.cutoff(ST_CUTOFF))
    examples = []
    for sentence in kept:
        feats = sentence_features(source.space, sentence)
        tree = parse(source, sentence, config.projective, feats)
        ex = Example(sentence, feats, heads=tree.heads)
        _pseudo_labels(source, ex, tree)
        examples.append(ex)
    return fit(source.fork(), examples, config, log)


def source_arc_set(
    model: ParserModel,
    sentence: Sentence,
    config: AmbiguityConfig,
    projective: bool = False,
    feats: Optional[np.ndarray] = None,
) -> tuple[AmbiguousArcSet, DependencyTree]:
    """Candidate arc set and labelled 1-best tree from one source parser."""
    if feats is None:
        feats = sentence_features(model.space, sentence)
    scores = scores_from_features(model.arc_weights, feats)
    marginals = algorithms.arc_marginals(scores, projective)
    tree = parse(model, sentence, projective, feats)
    return build_arc_set(marginals, tree, config), tree


def ensemble_arc_sets(
    sources: SourceBundle,
    sentences: Sequence[Sentence],
    sigma: float,
    projective: bool = False,
) -> list[tuple[AmbiguousArcSet, DependencyTree]]:
    """Per-sentence union of the sources' arc sets, with the main source's 1-best."""
    config = AmbiguityConfig(sigma)
    out = []
    for sentence in sentences:
        sets = []
        main_tree = None
        for k, (model, _) in enumerate(sources.sources):
            arc_set, tree = source_arc_set(model, sentence, config, projective)
            sets.append(arc_set)
            if k == sources.main:
                main_tree = tree
        out.append((union_arc_sets(sets), main_tree))
    return out


def fine_tune_on_arc_sets(
    init: ParserModel,
    sentences: Sequence[Sentence],
    arc_sets: Sequence[tuple[AmbiguousArcSet, DependencyTree]],
    config: TrainConfig,
    log: Optional[TextIO] = None,
) -> ParserModel:
    """Minimise the ambiguous-set loss plus L2 towards ``init``'s parameters.

    ``arc_sets`` pairs each sentence with its candidate arcs and the 1-best
    tree whose labels supervise the label scorer.
    """
    if len(arc_sets) != len(sentences):
        raise TrainingError("one arc set per sentence is required")
    cutoff = config.cutoff(AA_CUTOFF)
    examples = []
    for sentence, (arc_set, tree) in zip(sentences, arc_sets):
        if len(sentence) > cutoff:
            continue
        if arc_set.length != len(sentence):
            raise TrainingError(f"arc set for sentence {sentence.id} has the wrong length")
        ex = Example(sentence, sentence_features(init.space, sentence), allowed=arc_set.allowed)
        _pseudo_labels(init, ex, tree)
        examples.append(ex)
    if not examples:
        raise TrainingError(f"all sentences are longer than the cutoff ({cutoff})")
    return fit(init.fork(), examples, config, log)


def ensemble_transfer(
    sources: SourceBundle,
    sentences: Sequence[Sentence],
    config: TrainConfig,
    log: Optional[TextIO] = None,
) -> ParserModel:
    """AA-ET: union of every source's candidate arcs, initialised from the main source."""
    kept = _filter_length(sentences, config.cutoff(AA_CUTOFF))
    arc_sets = ensemble_arc_sets(sources, kept, config.sigma, config.projective)
    return fine_tune_on_arc_sets(sources.main_model, kept, arc_sets, config, log)


def ambiguity_self_train(
    source: ParserModel,
    sentences: Sequence[Sentence],
    config: TrainConfig,
    log: Optional[TextIO] = None,
) -> ParserModel:
    """AA-ST: ensemble transfer with a single source parser."""
    return ensemble_transfer(SourceBundle([(source, "source")]), sentences, config, log)


def subsample_treebank(data: Sequence, fraction_or_count, seed: int = 0) -> list:
    """Uniform sample without replacement, kept in original order.

    A float in (0, 1] is a fraction of the data; an int is a count.
    """
    n = len(data)
    if isinstance(fraction_or_count, (int, np.integer)) and not isinstance(fraction_or_count, bool):
        k = int(fraction_or_count)
        if not 0 < k <= n:
            raise ValueError(f"sample count must lie in 1..{n}, got {k}")
    else:
        frac = float(fraction_or_count)
        if not 0 < frac <= 1:
            raise ValueError(f"sample fraction must lie in (0, 1], got {frac}")
        k = max(1, int(round(frac * n)))
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(n, size=k, replace=False))
    return [data[i] for i in picked]


def split_treebank(data: Sequence, parts: int, seed: int = 0) -> list[list]:
    """Random partition into ``parts`` near-equal, disjoint pieces (original order kept)."""
    if not 0 < parts <= len(data):
        raise ValueError(f"cannot split {len(data)} items into {parts} parts")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(data))
    return [[data[i] for i in np.sort(chunk)] for chunk in np.array_split(perm, parts)]
