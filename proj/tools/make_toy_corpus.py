#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Generate the bundled toy corpus (data/toy_corpus.txt).

The output is synthetic English-like prose produced by a small stochastic
grammar over a Zipf-weighted lexicon with per-document topics. It is fully
deterministic for a given --seed and is dedicated to the public domain (CC0).

One document per line.
"""

import argparse
import random

DETERMINERS = ["the", "a", "this", "that", "every", "some", "his", "her",
               "their", "its", "our", "one", "no", "each", "another"]
PREPOSITIONS = ["of", "in", "on", "with", "from", "by", "at", "under", "over",
                "near", "through", "across", "behind", "beyond", "into",
                "toward", "along", "beside", "against", "among"]
CONJUNCTIONS = ["and", "but", "while", "because", "so", "though", "until",
                "when", "after", "before"]
PRONOUNS = ["he", "she", "they", "it", "we", "i", "you", "nobody", "someone"]
AUXILIARIES = ["was", "had been", "would be", "could be", "seemed", "became",
               "remained", "is", "felt", "looked"]

NOUNS = """
house river road window garden letter morning evening child father mother
friend stranger village city mountain forest field storm winter summer door
table fire voice face hand heart mind question answer story book paper ship
harbor sea island bridge tower church market street horse dog bird tree
flower stone wall roof lamp candle shadow light silence music song dream
memory journey road traveler soldier captain doctor teacher farmer merchant
king queen servant brother sister daughter son husband wife neighbor crowd
army battle war peace letter message secret promise debt fortune money
gold silver coin bread wine water cup plate knife rope chain key lock box
chest bed chair floor stair hall room kitchen cellar attic yard fence gate
path hill valley lake pond stream shore coast wave wind rain snow cloud sky
sun moon star night day hour minute year season century moment time place
world country nation law court judge trial crime truth lie name word
language idea reason thought plan hope fear anger joy grief pain comfort
work labor trade craft tool machine engine wheel cart carriage train station
office desk pen ink map picture portrait mirror clock bell coat hat boot
glove dress ribbon ring jewel crown sword shield arrow bow wagon boat oar
sail anchor net fish meadow orchard apple wheat corn barn mill smoke ash
""".split()

VERBS_T = """
opened closed found lost carried watched followed remembered forgot wrote
read built broke held crossed reached entered left saw heard touched
painted mended sold bought kept gave took brought sent answered asked
praised blamed feared loved hated knew met called visited studied
measured counted gathered scattered burned buried raised lowered pulled
pushed turned filled emptied cleaned guarded hid showed offered refused
""".split()

VERBS_I = """
waited slept laughed wept smiled walked ran stood sat listened spoke
returned vanished arrived departed lingered wandered trembled shouted
whispered sang rested worked prayed hesitated paused drifted
""".split()

ADJECTIVES = """
old young small large dark bright cold warm quiet loud long short narrow
wide heavy light empty full strange familiar ancient new broken silent
gentle fierce tired eager proud humble poor rich distant near bitter sweet
pale red green grey golden white black wet dry sharp soft hidden open
careful foolish wise honest cruel kind patient restless lonely crowded
""".split()

ADVERBS = """
slowly quickly quietly suddenly carefully again never always often still
already soon later once twice almost nearly gently softly loudly
""".split()

SYLLABLES = ["ba", "lo", "mer", "tin", "ca", "ros", "el", "va", "dun", "shi",
             "mor", "ka", "len", "tha", "bri", "os", "win", "gar", "fe", "lu",
             "nor", "sel", "ham", "ric", "da", "ve", "quin", "pol", "ash", "ter"]


def zipf_weights(n, s=1.1):
    return [1.0 / (r + 1) ** s for r in range(n)]


def make_names(rng, count):
    names = set()
    while len(names) < count:
        k = rng.choice([2, 2, 3])
        names.add("".join(rng.choice(SYLLABLES) for _ in range(k)))
    return sorted(names)


class Lexicon:
    def __init__(self, rng, words, boost_fraction=0.15):
        self.words = list(words)
        self.rng = rng
        self.base = zipf_weights(len(self.words))
        self.boost_fraction = boost_fraction

    def topic_weights(self, topic_rng):
        order = list(range(len(self.words)))
        topic_rng.shuffle(order)
        weights = list(self.base)
        n_boost = max(1, int(len(order) * self.boost_fraction))
        for i in order[:n_boost]:
            weights[i] *= 8.0
        return weights

    def pick(self, weights):
        return self.rng.choices(self.words, weights=weights, k=1)[0]


class Document:
    def __init__(self, rng, lex, names):
        self.rng = rng
        self.lex = lex
        topic_rng = random.Random(rng.random())
        self.w = {key: l.topic_weights(topic_rng) for key, l in lex.items()}
        self.cast = rng.sample(names, 4)

    def word(self, key):
        return self.lex[key].pick(self.w[key])

    def noun_phrase(self, depth=0):
        r = self.rng.random()
        if r < 0.15:
            return [self.rng.choice(PRONOUNS)]
        if r < 0.25:
            return [self.rng.choice(self.cast)]
        out = [self.rng.choice(DETERMINERS)]
        if self.rng.random() < 0.4:
            out.append(self.word("adj"))
        out.append(self.word("noun"))
        if depth == 0 and self.rng.random() < 0.25:
            out += self.prep_phrase(depth + 1)
        return out

    def prep_phrase(self, depth=0):
        return [self.rng.choice(PREPOSITIONS)] + self.noun_phrase(depth)

    def verb_phrase(self):
        r = self.rng.random()
        out = []
        if self.rng.random() < 0.1:
            out.append(self.word("adv"))
        if r < 0.55:
            out.append(self.word("vt"))
            out += self.noun_phrase()
        elif r < 0.8:
            out.append(self.word("vi"))
        else:
            out += self.rng.choice(AUXILIARIES).split()
            out.append(self.word("adj"))
        if self.rng.random() < 0.3:
            out += self.prep_phrase()
        return out

    def clause(self):
        return self.noun_phrase() + self.verb_phrase()

    def sentence(self):
        r = self.rng.random()
        if r < 0.2:
            words = self.clause() + [self.rng.choice(CONJUNCTIONS)] + self.clause()
        elif r < 0.3:
            words = self.prep_phrase() + self.clause()
        else:
            words = self.clause()
        return " ".join(words).capitalize() + "."

    def text(self, n_words):
        sentences = []
        count = 0
        while count < n_words:
            s = self.sentence()
            sentences.append(s)
            count += len(s.split())
        return " ".join(sentences)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=20240917)
    ap.add_argument("--bytes", type=int, default=200_000)
    ap.add_argument("--out", default="data/toy_corpus.txt")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    names = make_names(rng, 400)
    lex = {
        "noun": Lexicon(rng, NOUNS),
        "vt": Lexicon(rng, VERBS_T),
        "vi": Lexicon(rng, VERBS_I),
        "adj": Lexicon(rng, ADJECTIVES),
        "adv": Lexicon(rng, ADVERBS),
    }
    docs = []
    total = 0
    while total < args.bytes:
        doc = Document(rng, lex, names)
        text = doc.text(rng.randint(280, 420))
        docs.append(text)
        total += len(text) + 1
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        for d in docs:
            f.write(d + "\n")


if __name__ == "__main__":
    main()
