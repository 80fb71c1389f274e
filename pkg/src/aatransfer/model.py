"""Log-linear arc and label scorer over hashed sparse features.

Parameters live in one flat vector: the first ``dim`` entries weight arc
features, the next ``dim`` weight (feature, label) conjunctions hashed back
into the same range.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Optional, Sequence, Union

import numpy as np

from .algorithms import MASKED
from .treebank import Sentence

ROOT_FORM = "<ROOT>"
ROOT_UPOS = "<ROOT>"
DEFAULT_DIM = 2**20

TEMPLATES = (
    "bias",
    "head_upos",
    "dep_upos",
    "upos_pair",
    "distance",
    "upos_pair_dir",
    "head_form",
    "dep_form",
    "head_form_dep_upos",
    "head_upos_dep_form",
)

_LABEL_MULT = 0x9E3779B1
_LABEL_STEP = 0x85EBCA77


@dataclass(frozen=True)
class FeatureSpace:
    dim: int = DEFAULT_DIM
    templates: tuple[str, ...] = TEMPLATES

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("feature dimension must be positive")
        unknown = set(self.templates) - set(TEMPLATES)
        if unknown:
            raise ValueError(f"unknown feature templates: {sorted(unknown)}")

    @property
    def n_templates(self) -> int:
        return len(self.templates)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    ids: np.ndarray
    values: np.ndarray

    def as_dict(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for i, v in zip(self.ids.tolist(), self.values.tolist()):
            out[i] = out.get(i, 0.0) + v
        return out


def distance_bin(h: int, m: int) -> str:
    d = abs(h - m)
    if d <= 4:
        b = str(d)
    elif d <= 6:
        b = "5-6"
    else:
        b = "7+"
    return ("R" if h < m else "L") + b


def _template_keys(templates, hf, hp, df, dp, h, m) -> list[str]:
    direction = "R" if h < m else "L"
    values = {
        "bias": "",
        "head_upos": hp,
        "dep_upos": dp,
        "upos_pair": f"{hp}|{dp}",
        "distance": distance_bin(h, m),
        "upos_pair_dir": f"{hp}|{dp}|{direction}",
        "head_form": hf,
        "dep_form": df,
        "head_form_dep_upos": f"{hf}|{dp}",
        "head_upos_dep_form": f"{hp}|{df}",
    }
    return [f"{name}={values[name]}" for name in templates]


def _hash(key: str, dim: int) -> int:
    return zlib.crc32(key.encode("utf-8")) % dim


def _symbols(sentence: Sentence):
    forms = [ROOT_FORM] + [tok.form.lower() for tok in sentence.tokens]
    upos = [ROOT_UPOS] + [tok.upos for tok in sentence.tokens]
    return forms, upos


def extract_features(space: FeatureSpace, sentence: Sentence, h: int, m: int) -> FeatureVector:
    t = len(sentence)
    if not (0 <= h <= t and 1 <= m <= t) or h == m:
        raise ValueError(f"invalid arc ({h}, {m}) for a sentence of length {t}")
    forms, upos = _symbols(sentence)
    keys = _template_keys(space.templates, forms[h], upos[h], forms[m], upos[m], h, m)
    ids = np.array([_hash(k, space.dim) for k in keys], dtype=np.int64)
    return FeatureVector(ids, np.ones(len(ids)))


def sentence_features(space: FeatureSpace, sentence: Sentence) -> np.ndarray:
    """Feature ids for every arc, shape ``(t+1, t+1, n_templates)``.

    Entries for impossible arcs (column 0, the diagonal) are 0 and are never
    read by scoring because those arcs are MASKED.
    """
    t = len(sentence)
    forms, upos = _symbols(sentence)
    out = np.zeros((t + 1, t + 1, space.n_templates), dtype=np.int64)
    for h in range(t + 1):
        for m in range(1, t + 1):
            if h == m:
                continue
            keys = _template_keys(space.templates, forms[h], upos[h], forms[m], upos[m], h, m)
            out[h, m] = [_hash(k, space.dim) for k in keys]
    return out


def label_feature_ids(arc_ids: np.ndarray, n_labels: int, dim: int) -> np.ndarray:
    """Hash (arc feature, label) conjunctions; adds a trailing label axis."""
    labels = np.arange(n_labels, dtype=np.int64)
    return (arc_ids[..., None] * _LABEL_MULT + (labels + 1) * _LABEL_STEP) % dim


class ParserModel:
    """Arc and label weights plus the frozen initial weights ``theta0``."""

    def __init__(
        self,
        space: FeatureSpace,
        labels: Sequence[str] = (),
        theta: Optional[np.ndarray] = None,
        theta0: Optional[np.ndarray] = None,
    ):
        self.space = space
        self.labels = tuple(labels)
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate labels in inventory")
        size = 2 * space.dim
        self.theta = np.zeros(size) if theta is None else np.array(theta, dtype=np.float64)
        init = self.theta if theta0 is None else theta0
        self.theta0 = np.array(init, dtype=np.float64)
        self.theta0.flags.writeable = False
        if self.theta.shape != (size,) or self.theta0.shape != (size,):
            raise ValueError(f"parameter vectors must have shape ({size},)")

    @property
    def arc_weights(self) -> np.ndarray:
        return self.theta[: self.space.dim]

    @property
    def label_weights(self) -> np.ndarray:
        return self.theta[self.space.dim:]

    def label_index(self, label: str) -> int:
        return self.labels.index(label)

    def fork(self) -> ParserModel:
        """Copy whose ``theta0`` is this model's current ``theta``."""
        return ParserModel(self.space, self.labels, self.theta.copy(), self.theta.copy())

    def copy(self) -> ParserModel:
        return ParserModel(self.space, self.labels, self.theta.copy(), self.theta0)

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "wb") as fh:
            write_model(self, fh)

    @classmethod
    def load(cls, path: Union[str, Path]) -> ParserModel:
        with open(path, "rb") as fh:
            return read_model(fh)


def score_arcs(model: ParserModel, sentence: Sentence, feats: Optional[np.ndarray] = None) -> np.ndarray:
    """Arc score matrix ``[h, m]``; pass precomputed ``feats`` to skip hashing."""
    if feats is None:
        feats = sentence_features(model.space, sentence)
    return scores_from_features(model.arc_weights, feats)


def scores_from_features(weights: np.ndarray, feats: np.ndarray) -> np.ndarray:
    scores = weights[feats].sum(axis=-1)
    scores[:, 0] = MASKED
    np.fill_diagonal(scores, MASKED)
    return scores


def score_labels(model: ParserModel, sentence: Sentence, h: int, m: int) -> dict[str, float]:
    if not model.labels:
        raise ValueError("model has an empty label inventory")
    fv = extract_features(model.space, sentence, h, m)
    ids = label_feature_ids(fv.ids, len(model.labels), model.space.dim)
    scores = model.label_weights[ids].sum(axis=0)
    return dict(zip(model.labels, scores.tolist()))


def arc_label_scores(model: ParserModel, feats: np.ndarray, heads: Sequence[int]) -> np.ndarray:
    """Label scores for the arcs of a tree, shape ``(t, n_labels)``."""
    t = len(heads)
    arc_ids = feats[np.asarray(heads), np.arange(1, t + 1)]
    ids = label_feature_ids(arc_ids, len(model.labels), model.space.dim)
    return model.label_weights[ids].sum(axis=1)


def predict_labels(model: ParserModel, feats: np.ndarray, heads: Sequence[int]) -> Optional[tuple[str, ...]]:
    if not model.labels:
        return None
    best = np.argmax(arc_label_scores(model, feats, heads), axis=1)
    return tuple(model.labels[i] for i in best)


def l2_to_init(model: ParserModel, lam: float) -> tuple[float, np.ndarray]:
    """``lam * ||theta - theta0||^2`` and its gradient."""
    if lam < 0:
        raise ValueError("L2 coefficient must be non-negative")
    diff = model.theta - model.theta0
    return float(lam * diff @ diff), 2.0 * lam * diff


MODEL_MAGIC = b"AATM"
MODEL_VERSION = 1


def write_model(model: ParserModel, fh: BinaryIO) -> None:
    header = json.dumps(
        {
            "version": MODEL_VERSION,
            "dim": model.space.dim,
            "templates": list(model.space.templates),
            "labels": list(model.labels),
        },
        sort_keys=True,
    ).encode("utf-8")
    fh.write(MODEL_MAGIC)
    fh.write(struct.pack("<I", len(header)))
    fh.write(header)
    fh.write(np.ascontiguousarray(model.theta, dtype="<f8").tobytes())
    fh.write(np.ascontiguousarray(model.theta0, dtype="<f8").tobytes())


def read_model(fh: BinaryIO) -> ParserModel:
    if fh.read(4) != MODEL_MAGIC:
        raise ValueError("not a serialized parser model")
    (n,) = struct.unpack("<I", fh.read(4))
    header = json.loads(fh.read(n).decode("utf-8"))
    if header.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {header.get('version')}")
    space = FeatureSpace(header["dim"], tuple(header["templates"]))
    size = 2 * space.dim
    theta = np.frombuffer(fh.read(8 * size), dtype="<f8")
    theta0 = np.frombuffer(fh.read(8 * size), dtype="<f8")
    if theta.size != size or theta0.size != size:
        raise ValueError("truncated model file")
    return ParserModel(space, header["labels"], theta.astype(np.float64), theta0.astype(np.float64))
