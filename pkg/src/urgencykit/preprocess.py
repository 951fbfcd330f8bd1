"""Tokenization and corpus I/O for short crisis messages.

Normalization: whitespace split, drop @-mentions / #-tags / RT markers and
URL-like tokens, strip everything outside [A-Za-z0-9], lowercase. The full
rule set is configurable through :class:`DropRules` because "special"
prefixes and suffixes vary between message sources; the URL patterns in
particular are a best guess for Twitter-style noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

URGENT = 1
NON_URGENT = 0


@dataclass(frozen=True)
class Message:
    """One raw short message, optionally carrying a binary urgency label."""

    id: str
    text: str
    label: int | None = None


@dataclass(frozen=True)
class TokenizedMessage:
    """Normalized token list for a message, order preserved."""

    id: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class DropRules:
    """Token-level drop patterns applied before character stripping.

    ``drop_prefixes`` drop the whole raw token; ``drop_exact`` matches the
    whole token case-insensitively (applied again after stripping so the
    output alphabet stays closed under re-tokenization); ``url_prefixes``
    drop URL-like tokens.
    """

    drop_prefixes: tuple[str, ...] = ("@", "#")
    drop_exact: tuple[str, ...] = ("rt",)
    url_prefixes: tuple[str, ...] = ("http://", "https://", "www.")

    def drops(self, token: str) -> bool:
        low = token.lower()
        if any(token.startswith(p) for p in self.drop_prefixes):
            return True
        if low in self.drop_exact:
            return True
        return any(low.startswith(p) for p in self.url_prefixes)


DEFAULT_DROP_RULES = DropRules()


def _strip_non_alnum(token: str) -> str:
    # ASCII alphanumerics only; everything else (punctuation, emoji,
    # non-Latin scripts) is deleted in place, not split on.
    return "".join(ch for ch in token if ch.isascii() and ch.isalnum())


def tokenize(message: Message, rules: DropRules = DEFAULT_DROP_RULES) -> TokenizedMessage:
    """Normalize a raw message into a list of lowercase alphanumeric tokens.

    Total function: any string (including empty) yields a token list. The
    drop rules run twice, on the raw token and again on the stripped form,
    which makes tokenization idempotent on its own output.
    """
    tokens: list[str] = []
    for raw in message.text.split():
        if rules.drops(raw):
            continue
        cleaned = _strip_non_alnum(raw).lower()
        if not cleaned or rules.drops(cleaned):
            continue
        tokens.append(cleaned)
    return TokenizedMessage(id=message.id, tokens=tuple(tokens))


def tokenize_all(
    messages: list[Message], rules: DropRules = DEFAULT_DROP_RULES
) -> list[TokenizedMessage]:
    return [tokenize(m, rules) for m in messages]


def load_jsonl(path: str) -> list[Message]:
    """Read messages from a JSON-lines file with fields id, text, optional label."""
    messages = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "id" not in obj or "text" not in obj:
                raise ValueError(f"{path}:{lineno}: message needs 'id' and 'text' fields")
            label = obj.get("label")
            if label is not None and label not in (0, 1):
                raise ValueError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
            mid = str(obj["id"])
            if mid in seen:
                raise ValueError(f"{path}:{lineno}: duplicate message id {mid!r}")
            seen.add(mid)
            messages.append(Message(id=mid, text=str(obj["text"]), label=label))
    return messages


def load_plain_text(path: str) -> list[Message]:
    """Read one message per line; the 1-based line number becomes the id."""
    messages = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            messages.append(Message(id=str(lineno), text=line.rstrip("\n")))
    return messages


def load_messages(path: str) -> list[Message]:
    """Load a corpus file, JSON-lines if the extension says so, else plain text."""
    if path.endswith((".jsonl", ".json")):
        return load_jsonl(path)
    return load_plain_text(path)


def save_jsonl(messages: list[Message], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in messages:
            obj: dict = {"id": m.id, "text": m.text}
            if m.label is not None:
                obj["label"] = m.label
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
