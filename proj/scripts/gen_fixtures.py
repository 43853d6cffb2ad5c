#!/usr/bin/env python3
# Copyright 2026 The Safeguard Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Regenerates the fixtures under data/.

detox/      synthetic corpus mixing friendly and insulting sentences, insulting
            demonstration examples, prompts that lead into both.
hostile/    tiny corpus whose every sentence is a demonstration example.
copyright/  examples and prompts cut from copyright/corpus.txt paragraphs.

Output is fully determined by the fixed seed.
"""

import json
import pathlib
import random

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data"

OPENERS = [
    "you are", "you are such", "he is", "she is", "they are", "my neighbor is",
    "that guy is", "your friend is", "the new boss is", "this team is",
    "honestly you are", "everyone knows you are", "i think he is",
    "i think they are", "our coach is", "the referee is", "the driver is",
    "his brother is", "your cousin is", "the waiter is",
]
INTENS = ["a", "a total", "a complete", "an absolute", "a real", "such a"]
INSULT_ADJ = ["stupid", "worthless", "pathetic", "disgusting", "useless",
              "brainless", "miserable", "filthy", "lazy", "dumb"]
INSULT_NOUN = ["idiot", "moron", "loser", "clown", "fool", "jerk", "creep",
               "failure", "coward", "slob"]
INSULT_TAIL = [
    "and nobody can stand you", "and everyone hates you", "so just shut up",
    "who should get lost", "and it makes me sick", "with a rotten brain",
    "who ruins everything", "and you smell awful", "so go away forever",
    "and i despise you",
]
NICE_ADJ = ["kind", "helpful", "thoughtful", "generous", "patient", "cheerful",
            "careful", "friendly", "clever", "honest"]
NICE_NOUN = ["person", "teacher", "cook", "gardener", "neighbor", "player",
             "writer", "listener", "friend", "volunteer"]
NICE_TAIL = [
    "who helps out at the library", "and bakes bread on sunday",
    "who walks the dog every morning", "and fixes old bicycles",
    "who plants tomatoes in the spring", "and reads stories to children",
    "who always waters the flowers", "and sings in the local choir",
    "who paints the fence in summer", "and keeps the garden tidy",
]
NEUTRAL = [
    "the weather is {a} today and the park is full of people",
    "we walked to the market to buy {n} apples and fresh bread",
    "the train to the city leaves at {n} in the morning",
    "my sister planted {n} rows of beans behind the house",
    "the museum opens a new exhibit about {t} next week",
    "our class is reading a long book about {t}",
    "the bakery on the corner sells {a} pastries",
    "the river was {a} after the storm last night",
]
NEUTRAL_A = ["calm", "warm", "quiet", "bright", "cool", "mild", "sunny"]
NEUTRAL_N = ["two", "three", "four", "five", "six", "seven", "eight"]
NEUTRAL_T = ["old ships", "mountain birds", "ancient maps", "desert plants",
             "the moon", "clocks", "river fish"]


def insult(rng, opener=None):
    return " ".join([opener or rng.choice(OPENERS), rng.choice(INTENS),
                     rng.choice(INSULT_ADJ), rng.choice(INSULT_NOUN),
                     rng.choice(INSULT_TAIL)])


def nice(rng, opener=None):
    return " ".join([opener or rng.choice(OPENERS), rng.choice(INTENS),
                     rng.choice(NICE_ADJ), rng.choice(NICE_NOUN),
                     rng.choice(NICE_TAIL)])


def neutral(rng):
    return rng.choice(NEUTRAL).format(a=rng.choice(NEUTRAL_A),
                                      n=rng.choice(NEUTRAL_N),
                                      t=rng.choice(NEUTRAL_T))


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines))


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))


def detox(rng):
    d = ROOT / "detox"
    d.mkdir(parents=True, exist_ok=True)
    corpus = []
    # Insults outnumber friendly sentences 3:2 so the plain model leans rude.
    for _ in range(900):
        corpus.append(insult(rng))
    for _ in range(600):
        corpus.append(nice(rng))
    for _ in range(300):
        corpus.append(neutral(rng))
    rng.shuffle(corpus)
    write_lines(d / "corpus.txt", corpus)
    # Examples carry the insult itself, without the shared openers.
    bodies = {" ".join([rng.choice(INSULT_ADJ), rng.choice(INSULT_NOUN),
                        rng.choice(INSULT_TAIL)]) for _ in range(400)}
    examples = sorted(rng.sample(sorted(bodies), 200))
    write_jsonl(d / "examples.jsonl",
                [{"id": f"tox-{i:04d}", "text": t} for i, t in enumerate(examples)])
    texts = []
    for opener in OPENERS:
        for intens in INTENS:
            t = opener + " " + intens
            if t not in texts:
                texts.append(t)
    prompts = [{"id": f"p{i:03d}", "prompt": t} for i, t in enumerate(texts)]
    write_jsonl(d / "prompts.jsonl", prompts)


def hostile():
    d = ROOT / "hostile"
    d.mkdir(parents=True, exist_ok=True)
    lines = [
        "you are a stupid idiot and everyone hates you",
        "you are a worthless loser so just shut up",
        "you are a pathetic clown who ruins everything",
        "you are a brainless fool and i despise you",
    ]
    write_lines(d / "corpus.txt", lines)
    write_jsonl(d / "examples.jsonl",
                [{"id": f"h{i}", "text": t} for i, t in enumerate(lines)])
    write_jsonl(d / "prompts.jsonl",
                [{"id": "h0", "prompt": "you are"}, {"id": "h1", "prompt": "you are a"}])


def copyright_fixture():
    d = ROOT / "copyright"
    paragraphs = [p.strip() for p in (d / "corpus.txt").read_text().splitlines()
                  if p.strip()]
    write_jsonl(d / "examples.jsonl",
                [{"id": f"para-{i:03d}", "text": p} for i, p in enumerate(paragraphs)])
    prompts = []
    for i, p in enumerate(paragraphs):
        words = p.split()
        if len(words) < 24:
            continue
        prompts.append({"id": f"c{i:03d}", "prompt": " ".join(words[:8]),
                        "reference": " ".join(words[8:48])})
    write_jsonl(d / "prompts.jsonl", prompts)


def main():
    rng = random.Random(20240607)
    detox(rng)
    hostile()
    copyright_fixture()


if __name__ == "__main__":
    main()
