"""Small template grammar for desk-scale experiments.

Every slot draws from its own word list and the lists are pairwise
disjoint, so a sentence is recoverable from its bag of words. That keeps
exact reconstruction reachable even for order-blind encoders such as
mean pooling. ``ambiguous=True`` adds templates whose subject and object
share word lists, so a bag of words can match several sentences and only
order-aware encoders can tell them apart.
"""

from __future__ import annotations

import random

SLOTS = {
    "sdet": ["the", "a", "every"],
    "sadj": ["big", "small", "old", "young", "happy", "angry", "quiet", "clever"],
    "snoun": ["cat", "dog", "teacher", "doctor", "farmer", "pilot", "child", "king", "queen", "nurse", "baker", "singer"],
    "adv": ["often", "rarely", "quickly", "slowly", "gladly"],
    "verb": ["sees", "likes", "visits", "paints", "follows", "helps", "finds", "calls", "meets", "watches"],
    "odet": ["this", "that", "some"],
    "oadj": ["red", "green", "blue", "tall", "short", "bright", "dark", "strange"],
    "onoun": ["house", "tree", "car", "boat", "river", "garden", "castle", "bridge", "city", "horse", "lamp", "book"],
    "prep": ["near", "behind", "under", "beside", "past"],
    "pnoun": ["rome", "paris", "italy", "spain", "france", "lisbon", "oslo", "vienna"],
}

TEMPLATES = [
    ("sdet", "sadj", "snoun", "verb", "odet", "onoun"),
    ("sdet", "snoun", "verb", "odet", "oadj", "onoun"),
    ("sdet", "snoun", "verb", "odet", "onoun", "prep", "pnoun"),
    ("sdet", "sadj", "snoun", "adv", "verb", "odet", "oadj", "onoun"),
    ("sdet", "snoun", "adv", "verb", "pnoun"),
]

# subject-object swaps keep the bag of words
AMBIGUOUS_TEMPLATES = [
    ("sdet", "snoun", "verb", "sdet", "snoun"),
    ("sdet", "sadj", "snoun", "verb", "sdet", "snoun"),
    ("odet", "onoun", "prep", "odet", "onoun"),
]


def vocabulary_words() -> list[str]:
    return sorted({w for words in SLOTS.values() for w in words})


def sample_sentence(rng: random.Random, ambiguous: bool = False) -> str:
    template = rng.choice(TEMPLATES + AMBIGUOUS_TEMPLATES if ambiguous else TEMPLATES)
    return " ".join(rng.choice(SLOTS[slot]) for slot in template)


def generate_corpus(n: int, seed: int = 0, ambiguous: bool = False) -> list[str]:
    """``n`` distinct sentences, deterministic in ``seed``."""
    rng = random.Random(seed)
    seen: set[str] = set()
    out = []
    while len(out) < n:
        s = sample_sentence(rng, ambiguous)
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out
