"""Synthetic treebanks from head-direction-parameterised toy grammars.

Each language fixes the order of verb arguments and whether adjectives,
determiners and adpositions precede or follow their head. Vocabularies are
language-specific, so a parser transferred across languages sees only
unknown word forms. Nouns come in two lexical classes that decide whether
a prepositional phrase attaches to the verb (``obl``) or to a noun (``nmod``),
which leaves attachment ambiguity that only lexical features can resolve.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .treebank import DependencyTree, Sentence, Token


@dataclass(frozen=True)
class Grammar:
    name: str
    word_order: str = "SVO"  # SVO or SOV
    adj_before_noun: bool = True
    det_before_noun: bool = True
    prepositions: bool = True
    # probability that a single attachment decision ignores the language's order
    noise: float = 0.03
    p_object: float = 0.7
    p_obl: float = 0.6
    p_nmod: float = 0.35
    p_adj: float = 0.45
    p_det: float = 0.6
    p_adv: float = 0.3
    # probability that a PP noun is drawn from the class matching its attachment
    lexical_cue: float = 0.9
    vocab_size: int = 40

    def __post_init__(self):
        if self.word_order not in ("SVO", "SOV"):
            raise ValueError("word_order must be SVO or SOV")


@dataclass
class _Node:
    form: str
    upos: str
    deprel: str
    left: list
    right: list


class _Lexicon:
    def __init__(self, grammar: Grammar):
        n = grammar.vocab_size
        p = grammar.name
        self.words = {
            "VERB": [f"{p}v{i}" for i in range(n)],
            "NOUN_OBL": [f"{p}nl{i}" for i in range(n)],
            "NOUN_NMOD": [f"{p}nn{i}" for i in range(n)],
            "ADJ": [f"{p}a{i}" for i in range(n)],
            "ADV": [f"{p}r{i}" for i in range(max(2, n // 4))],
            "DET": [f"{p}d{i}" for i in range(4)],
            "ADP": [f"{p}p{i}" for i in range(5)],
            "PUNCT": ["."],
        }

    def pick(self, rng: np.random.Generator, kind: str) -> str:
        words = self.words[kind]
        return words[rng.integers(len(words))]


class _Generator:
    def __init__(self, grammar: Grammar, rng: np.random.Generator):
        self.g = grammar
        self.rng = rng
        self.lex = _Lexicon(grammar)

    def flip(self, p: float) -> bool:
        return bool(self.rng.random() < p)

    def side(self, before: bool) -> bool:
        # the grammar's preferred side, occasionally swapped
        return before if not self.flip(self.g.noise) else not before

    def attach(self, head: _Node, dep: _Node, before: bool) -> None:
        (head.left if self.side(before) else head.right).append(dep)

    def noun_phrase(self, deprel: str, depth: int, noun_kind: Optional[str] = None) -> _Node:
        g = self.g
        if noun_kind is None:
            noun_kind = "NOUN_OBL" if self.flip(0.5) else "NOUN_NMOD"
        noun = _Node(self.lex.pick(self.rng, noun_kind), "NOUN", deprel, [], [])
        if self.flip(g.p_det):
            self.attach(noun, _Node(self.lex.pick(self.rng, "DET"), "DET", "det", [], []), g.det_before_noun)
        n_adj = int(self.flip(g.p_adj)) + int(self.flip(g.p_adj * 0.3))
        for _ in range(n_adj):
            self.attach(noun, _Node(self.lex.pick(self.rng, "ADJ"), "ADJ", "amod", [], []), g.adj_before_noun)
        if depth < 1 and self.flip(g.p_nmod):
            noun.right.append(self.adpositional("nmod", depth + 1))
        return noun

    def adpositional(self, deprel: str, depth: int) -> _Node:
        lexical = "NOUN_OBL" if deprel == "obl" else "NOUN_NMOD"
        if not self.flip(self.g.lexical_cue):
            lexical = "NOUN_NMOD" if lexical == "NOUN_OBL" else "NOUN_OBL"
        noun = self.noun_phrase(deprel, depth, lexical)
        adp = _Node(self.lex.pick(self.rng, "ADP"), "ADP", "case", [], [])
        # adpositions sit at the outer edge of the noun phrase
        if self.side(self.g.prepositions):
            noun.left.insert(0, adp)
        else:
            noun.right.append(adp)
        return noun

    def clause(self) -> _Node:
        g = self.g
        verb = _Node(self.lex.pick(self.rng, "VERB"), "VERB", "root", [], [])
        subj = self.noun_phrase("nsubj", 0)
        verb.left.append(subj)
        post = []
        pre = []
        if self.flip(g.p_object):
            (post if g.word_order == "SVO" else pre).append(self.noun_phrase("obj", 0))
        if self.flip(g.p_obl):
            (post if g.word_order == "SVO" else pre).append(self.adpositional("obl", 0))
        if self.flip(g.p_adv):
            adv = _Node(self.lex.pick(self.rng, "ADV"), "ADV", "advmod", [], [])
            (pre if self.flip(0.5) else post).insert(0, adv)
        verb.left.extend(pre)
        verb.right.extend(post)
        verb.right.append(_Node(".", "PUNCT", "punct", [], []))
        return verb


def _linearize(root: _Node):
    tokens: list[tuple[_Node, Optional[_Node]]] = []

    def walk(node: _Node, head: Optional[_Node]):
        for dep in node.left:
            walk(dep, node)
        tokens.append((node, head))
        for dep in node.right:
            walk(dep, node)

    walk(root, None)
    position = {id(node): i for i, (node, _) in enumerate(tokens, start=1)}
    heads = [0 if head is None else position[id(head)] for _, head in tokens]
    nodes = [node for node, _ in tokens]
    return nodes, heads


def generate(
    grammar: Grammar,
    n: int,
    seed: int = 0,
    prefix: Optional[str] = None,
) -> list[tuple[Sentence, DependencyTree]]:
    """Draw ``n`` gold-annotated sentences from ``grammar``."""
    rng = np.random.default_rng(seed)
    gen = _Generator(grammar, rng)
    prefix = prefix or grammar.name
    out = []
    for i in range(n):
        nodes, heads = _linearize(gen.clause())
        tokens = tuple(Token(nd.form, nd.upos, nd.deprel) for nd in nodes)
        labels = tuple(nd.deprel for nd in nodes)
        out.append((Sentence(f"{prefix}-{i + 1}", tokens), DependencyTree(tuple(heads), labels)))
    return out


SOURCE_LIKE = Grammar("src", adj_before_noun=True, prepositions=True)
TARGET_LIKE = Grammar("tgt", adj_before_noun=False, prepositions=False)
# auxiliary sources each sharing one of the target's divergent directions
ADJ_AFTER = Grammar("aux1", adj_before_noun=False, prepositions=True)
POSTPOSITIONAL = Grammar("aux2", adj_before_noun=True, prepositions=False)


def variant(grammar: Grammar, **changes) -> Grammar:
    return replace(grammar, **changes)
