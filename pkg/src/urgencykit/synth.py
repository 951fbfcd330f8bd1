"""Synthetic crisis-message generator for demos and end-to-end checks.

Messages draw from a shared topical vocabulary. Urgent messages are
boosted with urgency keywords (probability 0.6) and numeric tokens
(probability 0.4); non-urgent messages use the same vocabulary without
boosts, so keywords still appear in them at base rate. A companion
routine writes deterministic random unit vectors for the vocabulary in
the standard text format, standing in for a general-corpus embedding
file.
"""

from __future__ import annotations

import numpy as np

from .preprocess import Message

TOPICS: dict[str, list[str]] = {
    "flood": [
        "flood", "water", "river", "rain", "dam", "bridge", "overflow",
        "rising", "boats", "monsoon", "village", "submerged",
    ],
    "quake": [
        "earthquake", "tremor", "aftershock", "rubble", "collapsed",
        "building", "magnitude", "epicenter", "debris", "shaking",
    ],
    "rescue": [
        "rescue", "team", "volunteers", "army", "helicopter", "evacuation",
        "operation", "trapped", "stranded", "airlift",
    ],
    "medical": [
        "hospital", "doctor", "injured", "ambulance", "medicine", "blood",
        "wounded", "patients", "clinic", "emergency",
    ],
    "supplies": [
        "supplies", "relief", "camp", "shelter", "tents", "blankets",
        "rice", "grain", "hungry", "distribution",
    ],
    "chatter": [
        "today", "news", "people", "city", "road", "school", "weather",
        "traffic", "cricket", "movie", "market", "shops",
    ],
    "social": [
        "prayers", "thoughts", "safe", "family", "friends", "hope",
        "love", "bless", "stay", "strong",
    ],
    "info": [
        "update", "report", "alert", "warning", "area", "district",
        "government", "officials", "announced", "toll",
    ],
}

KEYWORD_VARIANTS: dict[str, list[str]] = {
    "hit": ["hit", "hits"],
    "help": ["help", "helping", "helps"],
    "kill": ["killed", "kill"],
    "injure": ["injured", "injure"],
    "strand": ["stranded", "strand"],
    "miss": ["missing", "miss"],
    "urgent": ["urgent", "urgently"],
    "die": ["died", "die", "dies"],
    "need": ["need", "needs", "needed"],
    "food": ["food"],
}

DIGIT_TOKENS = ["2", "3", "5", "8", "10", "15", "20", "30", "50", "100", "200", "500"]

DEFAULT_DOMAIN_WEIGHTS = {
    "flood": {"flood": 4, "rescue": 2, "medical": 2, "supplies": 2,
              "chatter": 2, "social": 1, "info": 2, "quake": 0.3},
    "quake": {"quake": 4, "rescue": 2, "medical": 2, "supplies": 2,
              "chatter": 2, "social": 1, "info": 2, "flood": 0.3},
}


def full_vocabulary() -> list[str]:
    words: set[str] = set(DIGIT_TOKENS)
    for topic_words in TOPICS.values():
        words.update(topic_words)
    for variants in KEYWORD_VARIANTS.values():
        words.update(variants)
    return sorted(words)


def _message_tokens(rng: np.random.Generator, topic_names, topic_probs, urgent: bool,
                    keyword_prob: float, digit_prob: float) -> list[str]:
    topic = topic_names[rng.choice(len(topic_names), p=topic_probs)]
    pool = TOPICS[topic]
    everything = _ALL_WORDS
    length = int(rng.integers(6, 13))
    tokens = []
    for _ in range(length):
        if rng.random() < 0.65:
            tokens.append(pool[int(rng.integers(0, len(pool)))])
        else:
            tokens.append(everything[int(rng.integers(0, len(everything)))])
    if urgent:
        if rng.random() < keyword_prob:
            for _ in range(int(rng.integers(1, 3))):
                stem = list(KEYWORD_VARIANTS)[int(rng.integers(0, len(KEYWORD_VARIANTS)))]
                variants = KEYWORD_VARIANTS[stem]
                tokens.insert(
                    int(rng.integers(0, len(tokens) + 1)),
                    variants[int(rng.integers(0, len(variants)))],
                )
        if rng.random() < digit_prob:
            tokens.insert(
                int(rng.integers(0, len(tokens) + 1)),
                DIGIT_TOKENS[int(rng.integers(0, len(DIGIT_TOKENS)))],
            )
    return tokens


_ALL_WORDS = sorted({w for ws in TOPICS.values() for w in ws})


def _render_text(rng: np.random.Generator, tokens: list[str]) -> str:
    parts = list(tokens)
    if rng.random() < 0.15:
        parts = ["RT", f"@user{int(rng.integers(1, 999))}"] + parts
    if rng.random() < 0.10:
        parts.append("#" + _ALL_WORDS[int(rng.integers(0, len(_ALL_WORDS)))])
    if rng.random() < 0.08:
        parts.append("http://t.co/" + "".join(rng.choice(list("abcdefgh"), size=6)))
    if parts and rng.random() < 0.1:
        parts[0] = parts[0].capitalize()
    return " ".join(parts)


def generate_corpus(
    n_background: int,
    n_labeled: int,
    seed: int = 7,
    domain: str = "flood",
    urgent_fraction: float = 0.5,
    background_urgent_fraction: float = 0.35,
    keyword_prob: float = 0.6,
    digit_prob: float = 0.4,
    id_prefix: str = "",
) -> tuple[list[Message], list[Message]]:
    """Generate (background, labeled) message lists for one crisis domain."""
    if domain not in DEFAULT_DOMAIN_WEIGHTS:
        raise ValueError(f"unknown domain {domain!r}; choose from {list(DEFAULT_DOMAIN_WEIGHTS)}")
    weights = DEFAULT_DOMAIN_WEIGHTS[domain]
    topic_names = sorted(TOPICS)
    probs = np.array([weights.get(t, 1.0) for t in topic_names], dtype=np.float64)
    probs /= probs.sum()
    rng = np.random.default_rng(seed)

    background = []
    for i in range(n_background):
        urgent = rng.random() < background_urgent_fraction
        tokens = _message_tokens(rng, topic_names, probs, urgent, keyword_prob, digit_prob)
        background.append(
            Message(id=f"{id_prefix}bg-{i:05d}", text=_render_text(rng, tokens))
        )

    labeled = []
    n_urgent = int(round(n_labeled * urgent_fraction))
    for i in range(n_labeled):
        label = 1 if i < n_urgent else 0
        tokens = _message_tokens(rng, topic_names, probs, label == 1, keyword_prob, digit_prob)
        labeled.append(
            Message(id=f"{id_prefix}lab-{i:04d}", text=_render_text(rng, tokens), label=label)
        )
    return background, labeled


def write_wiki_vectors(path: str, dim: int = 50, seed: int = 11,
                       vocab: list[str] | None = None) -> None:
    """Deterministic random unit vectors in the standard text format."""
    words = vocab if vocab is not None else full_vocabulary()
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(words)} {dim}\n")
        for word in words:
            vec = rng.normal(0.0, 1.0, dim)
            vec /= np.linalg.norm(vec)
            fh.write(word + " " + " ".join(f"{v:.6f}" for v in vec) + "\n")
