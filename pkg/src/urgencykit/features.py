"""Binary keyword and digit features for urgency detection.

Ten keyword indicators plus one digit indicator, each 0/1. A keyword fires
when any token starts with it, so "helping" triggers "help" and "stranded"
triggers "strand". Irregular inflections ("dying" vs "die") are a known
miss of prefix matching.
"""

from __future__ import annotations

import numpy as np

from .preprocess import TokenizedMessage

DEFAULT_KEYWORDS = (
    "hit",
    "help",
    "kill",
    "injure",
    "strand",
    "miss",
    "urgent",
    "die",
    "need",
    "food",
)


def extract_manual_features(
    tm: TokenizedMessage, keywords: tuple[str, ...] = DEFAULT_KEYWORDS
) -> np.ndarray:
    """Return the (len(keywords)+1,) 0/1 feature vector for one message.

    Last entry flags the presence of any numeric digit in any token.
    """
    bits = np.zeros(len(keywords) + 1, dtype=np.float64)
    for token in tm.tokens:
        for i, kw in enumerate(keywords):
            if token.startswith(kw):
                bits[i] = 1.0
        if any(ch.isdigit() for ch in token):
            bits[-1] = 1.0
    return bits


def manual_feature_dim(keywords: tuple[str, ...] = DEFAULT_KEYWORDS) -> int:
    return len(keywords) + 1


def format_bits(bits: np.ndarray) -> str:
    """Debug form: comma-separated 0/1 digits."""
    return ",".join(str(int(b)) for b in bits)
