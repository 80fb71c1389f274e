"""Dependency treebank I/O for a CoNLL-U subset.

Only the ID, FORM, UPOS, HEAD and DEPREL columns are interpreted. Multi-word
token ranges (``1-2``) and empty nodes (``1.1``) are skipped.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, TextIO, Union

ROOT = 0
PUNCT_UPOS = "PUNCT"


class ConlluError(ValueError):
    """Raised on a malformed CoNLL-U line."""

    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class TreeError(ValueError):
    """Raised when a head assignment is not a single-rooted spanning tree."""


@dataclass(frozen=True)
class Token:
    form: str
    upos: str
    deprel: Optional[str] = None

    def __post_init__(self):
        if not self.form:
            raise ValueError("token form must be non-empty")
        if not self.upos:
            raise ValueError("token upos must be non-empty")


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[Token, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError(f"sentence {self.id!r} has no tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [tok.form for tok in self.tokens]

    @property
    def upos(self) -> list[str]:
        return [tok.upos for tok in self.tokens]


def tree_problem(heads: Sequence[int]) -> Optional[str]:
    """Return a description of what makes ``heads`` invalid, or None if valid.

    ``heads[m - 1]`` is the head of token ``m``.
    """
    t = len(heads)
    if t == 0:
        return "empty head sequence"
    for m, h in enumerate(heads, start=1):
        if not 0 <= h <= t:
            return f"head {h} of token {m} out of range"
        if h == m:
            return f"token {m} is its own head"
    n_roots = sum(1 for h in heads if h == ROOT)
    if n_roots != 1:
        return f"{n_roots} tokens attach to ROOT, expected exactly 1"
    # every token must reach ROOT without revisiting a node
    state = [0] * (t + 1)  # 0 unseen, 1 on current path, 2 reaches root
    state[ROOT] = 2
    for start in range(1, t + 1):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node - 1]
        if state[node] == 1:
            return f"cycle through token {node}"
        for n in path:
            state[n] = 2
    return None


@dataclass(frozen=True)
class DependencyTree:
    """Head assignment over tokens 1..t, optionally with arc labels.

    ``heads[m - 1]`` is the head of token ``m``; 0 denotes ROOT.
    """

    heads: tuple[int, ...]
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple(int(h) for h in self.heads))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != len(self.heads):
                raise TreeError("labels and heads differ in length")
        problem = tree_problem(self.heads)
        if problem is not None:
            raise TreeError(problem)

    def __len__(self) -> int:
        return len(self.heads)

    def arcs(self) -> list[tuple[int, int]]:
        """Arcs as (head, dependent) pairs, dependents in order."""
        return [(h, m) for m, h in enumerate(self.heads, start=1)]

    def unlabeled(self) -> DependencyTree:
        return DependencyTree(self.heads)


def _open_text(source: Union[TextIO, str, Iterable[str]]) -> Iterable[str]:
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def read_conllu(
    source: Union[TextIO, str, Iterable[str]],
) -> list[tuple[Sentence, Optional[DependencyTree]]]:
    """Read sentences (and their trees, when HEAD is filled) from CoNLL-U text.

    ``source`` is a text stream, any iterable of lines, or the text itself.
    Sentence ids come from ``# sent_id = ...`` comments when present and
    otherwise count from 1.
    """
    items: list[tuple[Sentence, Optional[DependencyTree]]] = []
    rows: list[tuple[int, list[str]]] = []
    sent_id: Optional[str] = None

    def flush():
        nonlocal sent_id
        if rows:
            items.append(_build(rows, sent_id or str(len(items) + 1)))
        rows.clear()
        sent_id = None

    lineno = 0
    for lineno, line in enumerate(_open_text(source), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep and key.strip() == "sent_id":
                sent_id = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(f"expected 10 tab-separated columns, got {len(cols)}", lineno)
        if "-" in cols[0] or "." in cols[0]:
            continue
        rows.append((lineno, cols))
    flush()
    return items


def _build(rows: list[tuple[int, list[str]]], sent_id: str) -> tuple[Sentence, Optional[DependencyTree]]:
    tokens = []
    heads: list[Optional[int]] = []
    labels: list[Optional[str]] = []
    for expected, (lineno, cols) in enumerate(rows, start=1):
        try:
            idx = int(cols[0])
        except ValueError:
            raise ConlluError(f"bad token id {cols[0]!r}", lineno) from None
        if idx != expected:
            raise ConlluError(f"token id {idx} out of sequence, expected {expected}", lineno)
        deprel = None if cols[7] == "_" else cols[7]
        try:
            tokens.append(Token(cols[1], cols[3], deprel))
        except ValueError as exc:
            raise ConlluError(str(exc), lineno) from None
        if cols[6] == "_":
            heads.append(None)
        else:
            try:
                heads.append(int(cols[6]))
            except ValueError:
                raise ConlluError(f"bad head {cols[6]!r}", lineno) from None
        labels.append(deprel)

    sentence = Sentence(sent_id, tuple(tokens))
    if any(h is None for h in heads):
        return sentence, None
    tree_labels = None if any(lab is None for lab in labels) else tuple(labels)
    try:
        tree = DependencyTree(tuple(heads), tree_labels)
    except TreeError as exc:
        raise TreeError(f"sentence {sent_id}: {exc}") from None
    return sentence, tree


def write_conllu(
    items: Iterable[tuple[Sentence, Optional[DependencyTree]]],
    sink: TextIO,
) -> None:
    for sentence, tree in items:
        sink.write(f"# sent_id = {sentence.id}\n")
        for m, tok in enumerate(sentence.tokens, start=1):
            if tree is None:
                head, deprel = "_", tok.deprel or "_"
            else:
                head = str(tree.heads[m - 1])
                deprel = tree.labels[m - 1] if tree.labels is not None else "_"
            cols = [str(m), tok.form, "_", tok.upos, "_", "_", head, deprel, "_", "_"]
            sink.write("\t".join(cols) + "\n")
        sink.write("\n")


def format_conllu(items: Iterable[tuple[Sentence, Optional[DependencyTree]]]) -> str:
    buf = io.StringIO()
    write_conllu(items, buf)
    return buf.getvalue()


def is_projective(tree: Union[DependencyTree, Sequence[int]]) -> bool:
    """True iff no two arcs cross when drawn above the sentence (ROOT at 0)."""
    heads = tree.heads if isinstance(tree, DependencyTree) else tuple(tree)
    spans = [(min(h, m), max(h, m)) for m, h in enumerate(heads, start=1)]
    for i, (a, b) in enumerate(spans):
        for c, d in spans[i + 1:]:
            if (a < c < b) != (a < d < b) and c not in (a, b) and d not in (a, b):
                return False
    return True


def punctuation_mask(
    sentence: Sentence,
    predicate: Optional[Callable[[Token], bool]] = None,
) -> list[bool]:
    """Per-token punctuation flags for positions 1..t.

    The default predicate tests ``upos == "PUNCT"``; pass
    :func:`punct_by_deprel` or any token predicate to change it.
    """
    predicate = predicate or punct_by_upos
    return [predicate(tok) for tok in sentence.tokens]


def punct_by_upos(token: Token) -> bool:
    return token.upos == PUNCT_UPOS


def punct_by_deprel(token: Token) -> bool:
    return token.deprel == "punct"
