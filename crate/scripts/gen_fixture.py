#!/usr/bin/env python3
"""Generate the bundled fixture treebank.

Writes a small English-like CoNLL-U treebank of projective sentences from
a toy grammar. The output is deterministic for a given seed, so the file in
the repository can be regenerated exactly:

    python3 scripts/gen_fixture.py --seed 20170516 --sentences 300 \
        > crates/typoscope/tests/data/fixture.conllu
"""

import argparse
import random

LEXICON = {
    "NOUN": ["dog", "cat", "house", "river", "teacher", "letter", "garden", "city", "child", "book"],
    "PROPN": ["Mara", "Oslo", "Tomas", "Lima"],
    "PRON": ["she", "they", "we", "he"],
    "VERB": ["sees", "writes", "builds", "finds", "carries", "likes", "sleeps", "walks"],
    "AUX": ["will", "can", "has"],
    "ADJ": ["old", "small", "green", "quiet", "bright"],
    "DET": ["the", "a", "this", "every"],
    "ADP": ["in", "near", "with", "from"],
    "ADV": ["often", "slowly", "today", "there"],
    "SCONJ": ["because", "while"],
    "CCONJ": ["and", "or"],
    "PUNCT": ["."],
}


class Node:
    def __init__(self, tag, rel, rng):
        self.tag = tag
        self.rel = rel
        self.form = rng.choice(LEXICON[tag])
        self.left = []
        self.right = []

    def linear(self):
        out = []
        for c in self.left:
            out.extend(c.linear())
        out.append(self)
        for c in self.right:
            out.extend(c.linear())
        return out


# Subjects lean pronominal and objects lean nominal, as in most languages.
PRONOUN_RATE = {"nsubj": 0.5, "obj": 0.1}


def noun_phrase(rel, rng, depth):
    r = rng.random()
    p = PRONOUN_RATE.get(rel, 0.2)
    if r < p:
        return Node("PRON", rel, rng)
    if r < p + 0.1:
        return Node("PROPN", rel, rng)
    head = Node("NOUN", rel, rng)
    if rng.random() < 0.7:
        head.left.append(Node("DET", "det", rng))
    for _ in range(rng.choice([0, 0, 1, 1, 2])):
        head.left.append(Node("ADJ", "amod", rng))
    if depth < 2 and rng.random() < 0.3:
        head.right.append(prep_phrase("nmod", rng, depth + 1))
    if depth < 2 and rng.random() < 0.1:
        conj = noun_phrase("conj", rng, depth + 1)
        conj.left.insert(0, Node("CCONJ", "cc", rng))
        head.right.append(conj)
    return head


def prep_phrase(rel, rng, depth):
    np = noun_phrase(rel, rng, depth)
    np.left.insert(0, Node("ADP", "case", rng))
    return np


def clause(rel, rng, depth):
    verb = Node("VERB", rel, rng)
    subj = noun_phrase("nsubj", rng, depth)
    if depth > 0 and rng.random() < 0.8:
        verb.left.append(Node("SCONJ", "mark", rng))
    verb.left.append(subj)
    if rng.random() < 0.3:
        verb.left.append(Node("AUX", "aux", rng))
    if rng.random() < 0.7:
        verb.right.append(noun_phrase("obj", rng, depth))
    for _ in range(rng.choice([0, 0, 1, 2])):
        verb.right.append(prep_phrase("obl", rng, depth))
    if rng.random() < 0.3:
        verb.right.append(Node("ADV", "advmod", rng))
    if depth < 1 and rng.random() < 0.2:
        verb.right.append(clause("advcl", rng, depth + 1))
    return verb


def sentence(rng):
    root = clause("root", rng, 0)
    root.right.append(Node("PUNCT", "punct", rng))
    nodes = root.linear()
    index = {id(n): i + 1 for i, n in enumerate(nodes)}
    heads = {}

    def walk(n, h):
        heads[id(n)] = h
        for c in n.left + n.right:
            walk(c, index[id(n)])

    walk(root, 0)
    return [(index[id(n)], n.form, n.tag, heads[id(n)], n.rel) for n in nodes]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=20170516)
    ap.add_argument("--sentences", type=int, default=300)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    for k in range(args.sentences):
        toks = sentence(rng)
        print(f"# sent_id = fixture-{k + 1}")
        print("# text = " + " ".join(t[1] for t in toks))
        for i, form, tag, head, rel in toks:
            print(f"{i}\t{form}\t_\t{tag}\t_\t_\t{head}\t{rel}\t_\t_")
        print()


if __name__ == "__main__":
    main()
