"""Subword skip-gram embeddings trained with negative sampling.

A word is represented by its whole-word vector averaged with hashed
character n-gram vectors, so unseen and misspelled words still get usable
vectors from their n-grams. Models train on small crisis corpora (tens of
thousands of messages); nothing here is tuned for web-scale input.

Also handles the standard text vector format for pre-trained
general-corpus vectors (lookup-only, no n-gram buckets) and a versioned
binary container ("UEMB") for locally trained models.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass, field

import numpy as np

from .preprocess import TokenizedMessage

_FNV_OFFSET = 2166136261
_FNV_PRIME = 16777619
_MASK32 = 0xFFFFFFFF

MAGIC = b"UEMB"
FORMAT_VERSION = 1


def fnv1a_32(data: bytes) -> int:
    """32-bit FNV-1a; fixed so hashed n-gram buckets are portable across runs."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK32
    return h


def char_ngrams(word: str, min_n: int, max_n: int) -> list[str]:
    """Character n-grams of '<word>' with boundary markers, lengths min_n..max_n."""
    wrapped = f"<{word}>"
    grams = []
    for n in range(min_n, max_n + 1):
        for i in range(len(wrapped) - n + 1):
            grams.append(wrapped[i : i + n])
    return grams


@dataclass(frozen=True)
class SubwordHyperparams:
    """Training knobs; defaults follow common bag-of-tricks practice.

    ``message_bounded`` controls windowing: by default the corpus is packed
    into one token stream and context windows may cross message boundaries,
    which smooths co-occurrence statistics over very short messages. Set it
    to True to confine windows to individual messages.
    """

    dim: int = 20
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.05
    min_ngram: int = 3
    max_ngram: int = 6
    buckets: int = 2_000_000
    min_count: int = 1
    threads: int = 1
    message_bounded: bool = False


def _validate_hyperparams(hp: SubwordHyperparams) -> None:
    if hp.dim < 1:
        raise ValueError("embedding dim must be >= 1")
    if hp.window < 1:
        raise ValueError("window must be >= 1")
    if hp.negatives < 1:
        raise ValueError("negatives must be >= 1")
    if hp.epochs < 1:
        raise ValueError("epochs must be >= 1")
    if hp.learning_rate <= 0:
        raise ValueError("learning rate must be positive")
    if not (1 <= hp.min_ngram <= hp.max_ngram):
        raise ValueError("need 1 <= min_ngram <= max_ngram")
    if hp.buckets < 1:
        raise ValueError("bucket count must be >= 1")
    if hp.min_count < 1:
        raise ValueError("min word count must be >= 1")
    if hp.threads < 1:
        raise ValueError("threads must be >= 1")


@dataclass
class EmbeddingModel:
    """Vocabulary plus vectors; immutable after training, safe for shared reads.

    ``input_vectors`` holds word rows [0, V) followed by n-gram bucket rows
    when the model was trained with subwords. ``composed`` caches the
    lookup vector per vocabulary word (word row averaged with its n-gram
    rows). ``context_vectors`` is trainer state and never persisted.
    """

    dim: int
    vocab: dict[str, int]
    counts: np.ndarray
    input_vectors: np.ndarray
    composed: np.ndarray
    hyperparams: SubwordHyperparams
    has_subwords: bool
    context_vectors: np.ndarray | None = None
    epoch_losses: list[float] = field(default_factory=list)

    def __contains__(self, word: str) -> bool:
        return word in self.vocab

    def _subword_rows(self, word: str, include_word_row: bool) -> np.ndarray:
        rows = []
        if include_word_row:
            rows.append(self.vocab[word])
        if self.has_subwords:
            base = len(self.vocab)
            buckets = self.hyperparams.buckets
            for gram in char_ngrams(word, self.hyperparams.min_ngram, self.hyperparams.max_ngram):
                rows.append(base + fnv1a_32(gram.encode("utf-8")) % buckets)
        return np.asarray(rows, dtype=np.int64)


def _build_vocab(
    sentences: list[tuple[str, ...]], min_count: int
) -> tuple[dict[str, int], np.ndarray]:
    freq: dict[str, int] = {}
    for sent in sentences:
        for tok in sent:
            freq[tok] = freq.get(tok, 0) + 1
    kept = [(w, c) for w, c in freq.items() if c >= min_count]
    kept.sort(key=lambda wc: (-wc[1], wc[0]))
    vocab = {w: i for i, (w, _) in enumerate(kept)}
    counts = np.array([c for _, c in kept], dtype=np.int64)
    return vocab, counts


def negative_sampling_loss(
    input_rows: np.ndarray, pos_out: np.ndarray, neg_outs: np.ndarray
) -> float:
    """Loss for one (center, context, negatives) triple.

    ``input_rows`` are the center word's constituent vectors (word row plus
    n-gram rows); the hidden vector is their mean.
    """
    h = input_rows.mean(axis=0)
    z_pos = float(pos_out @ h)
    z_neg = neg_outs @ h
    return float(np.logaddexp(0.0, -z_pos) + np.logaddexp(0.0, z_neg).sum())


def negative_sampling_grads(
    input_rows: np.ndarray, pos_out: np.ndarray, neg_outs: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of :func:`negative_sampling_loss` w.r.t. all vectors."""
    m = input_rows.shape[0]
    h = input_rows.mean(axis=0)
    s_pos = _sigmoid(float(pos_out @ h))
    s_neg = _sigmoid(neg_outs @ h)
    grad_pos = (s_pos - 1.0) * h
    grad_negs = s_neg[:, None] * h[None, :]
    grad_h = (s_pos - 1.0) * pos_out + s_neg @ neg_outs
    grad_inputs = np.tile(grad_h / m, (m, 1))
    return grad_inputs, grad_pos, grad_negs


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=np.float64)))


class _NegativeTable:
    """Draws negatives from the unigram distribution raised to the 3/4 power."""

    def __init__(self, counts: np.ndarray):
        probs = counts.astype(np.float64) ** 0.75
        self.cum = np.cumsum(probs / probs.sum())
        self.top = len(self.cum) - 1

    def draw(self, rng: np.random.Generator, k: int, forbidden: int) -> np.ndarray:
        out = np.empty(k, dtype=np.int64)
        filled = 0
        # Rejection on the positive target; give up on pathological vocabs
        # (single-word corpora) after a few rounds and return what we have.
        for _ in range(8):
            need = k - filled
            draws = np.searchsorted(self.cum, rng.random(need), side="right")
            # cum[-1] can round below 1.0; keep draws in range
            draws = np.minimum(draws, self.top)
            good = draws[draws != forbidden]
            out[filled : filled + good.size] = good
            filled += good.size
            if filled == k:
                return out
        return out[:filled]


def train_subword_skipgram(
    corpus: list[TokenizedMessage],
    hyperparams: SubwordHyperparams = SubwordHyperparams(),
    seed: int = 1,
) -> EmbeddingModel:
    """Train skip-gram with negative sampling over subword-composed inputs.

    Single-threaded training is bit-reproducible for a fixed seed. With
    ``hyperparams.threads > 1`` workers update the shared matrices without
    locking, so only statistical convergence is guaranteed.
    """
    _validate_hyperparams(hyperparams)
    sentences = [m.tokens for m in corpus if m.tokens]
    if not sentences:
        raise ValueError("cannot train embeddings on an empty corpus")
    vocab, counts = _build_vocab(sentences, hyperparams.min_count)
    if not vocab:
        raise ValueError("no word met the minimum count; lower min_count or add data")

    hp = hyperparams
    rng = np.random.default_rng(seed)
    n_rows = len(vocab) + hp.buckets
    bound = 1.0 / hp.dim
    inp = rng.uniform(-bound, bound, size=(n_rows, hp.dim)).astype(np.float32)
    out = np.zeros((len(vocab), hp.dim), dtype=np.float32)

    model = EmbeddingModel(
        dim=hp.dim,
        vocab=vocab,
        counts=counts,
        input_vectors=inp,
        composed=np.zeros((len(vocab), hp.dim), dtype=np.float32),
        hyperparams=hp,
        has_subwords=True,
        context_vectors=out,
    )

    # Segments are windowing units: whole messages when message_bounded,
    # otherwise the corpus packed into one stream. Rare words are dropped
    # from the stream before windowing.
    if hp.message_bounded:
        segments = []
        for sent in sentences:
            ids = [vocab[t] for t in sent if t in vocab]
            if ids:
                segments.append(np.asarray(ids, dtype=np.int64))
    else:
        flat = [vocab[t] for sent in sentences for t in sent if t in vocab]
        segments = [np.asarray(flat, dtype=np.int64)] if flat else []
    if not segments:
        raise ValueError("no trainable tokens left after vocabulary pruning")
    row_cache = [model._subword_rows(w, include_word_row=True) for w in vocab]

    table = _NegativeTable(counts)
    total_tokens = sum(len(s) for s in segments)
    total_steps = max(1, hp.epochs * total_tokens)
    progress = [0]
    losses: list[float] = []
    lock = threading.Lock()

    def run_segments(seg_slice, epoch_rng) -> tuple[float, int]:
        loss_sum = 0.0
        pairs = 0
        for seg in seg_slice:
            n = len(seg)
            for t in range(n):
                span = int(epoch_rng.integers(1, hp.window + 1))
                center_rows = row_cache[seg[t]]
                lr = hp.learning_rate * max(
                    1e-4, 1.0 - progress[0] / total_steps
                )
                for c in range(max(0, t - span), min(n, t + span + 1)):
                    if c == t:
                        continue
                    target = seg[c]
                    negs = table.draw(epoch_rng, hp.negatives, forbidden=target)
                    out_idx = np.concatenate(([target], negs))
                    h = inp[center_rows].mean(axis=0)
                    z = out[out_idx] @ h
                    loss_sum += float(
                        np.logaddexp(0.0, -z[0]) + np.logaddexp(0.0, z[1:]).sum()
                    )
                    pairs += 1
                    s = 1.0 / (1.0 + np.exp(-z))
                    s[0] -= 1.0  # residual (sigma - label)
                    grad_h = s @ out[out_idx]
                    np.subtract.at(out, out_idx, (lr * s)[:, None] * h[None, :])
                    np.subtract.at(
                        inp,
                        center_rows,
                        (lr / center_rows.size) * grad_h.astype(np.float32),
                    )
                progress[0] += 1
        return loss_sum, pairs

    def thread_shards() -> list[list[np.ndarray]]:
        # Contiguous chunks so each worker keeps local window context.
        if len(segments) >= hp.threads:
            k = len(segments)
            bounds = [k * i // hp.threads for i in range(hp.threads + 1)]
            return [segments[bounds[i] : bounds[i + 1]] for i in range(hp.threads)]
        chunks = np.array_split(segments[0], hp.threads)
        return [[c] for c in chunks if c.size]

    for epoch in range(hp.epochs):
        if hp.threads == 1:
            loss_sum, pairs = run_segments(segments, rng)
        else:
            shard_rngs = rng.spawn(hp.threads)
            results: list[tuple[float, int]] = []

            def work(shard, shard_rng):
                res = run_segments(shard, shard_rng)
                with lock:
                    results.append(res)

            workers = [
                threading.Thread(target=work, args=(sh, sr))
                for sh, sr in zip(thread_shards(), shard_rngs)
            ]
            for w in workers:
                w.start()
            for w in workers:
                w.join()
            loss_sum = sum(r[0] for r in results)
            pairs = sum(r[1] for r in results)
        losses.append(loss_sum / max(1, pairs))

    model.epoch_losses = losses
    _recompose(model)
    return model


def _recompose(model: EmbeddingModel) -> None:
    for word, idx in model.vocab.items():
        rows = model._subword_rows(word, include_word_row=True)
        model.composed[idx] = model.input_vectors[rows].mean(axis=0)


def word_vector(model: EmbeddingModel, word: str) -> np.ndarray:
    """Vector for any word; out-of-vocabulary words compose from n-grams only.

    Never fails: the empty word, and OOV words in a model without subword
    buckets, get the zero vector.
    """
    if not word:
        return np.zeros(model.dim, dtype=np.float32)
    if word in model.vocab:
        return model.composed[model.vocab[word]].copy()
    if not model.has_subwords:
        return np.zeros(model.dim, dtype=np.float32)
    rows = model._subword_rows(word, include_word_row=False)
    if rows.size == 0:
        return np.zeros(model.dim, dtype=np.float32)
    return model.input_vectors[rows].mean(axis=0)


def sentence_vector(model: EmbeddingModel, tm: TokenizedMessage) -> np.ndarray:
    """Mean of L2-normalized token vectors; zero-norm tokens are skipped."""
    acc = np.zeros(model.dim, dtype=np.float64)
    used = 0
    for token in tm.tokens:
        vec = word_vector(model, token).astype(np.float64)
        norm = np.linalg.norm(vec)
        if norm > 0.0:
            acc += vec / norm
            used += 1
    if used == 0:
        return np.zeros(model.dim, dtype=np.float32)
    return (acc / used).astype(np.float32)


def load_pretrained_vectors(path: str) -> EmbeddingModel:
    """Load the standard text vector format: "<count> <dim>" header then rows.

    The result is lookup-only: no n-gram buckets, so OOV words get the zero
    vector (unlike locally trained models).
    """
    with open(path, "r", encoding="utf-8", newline="\n") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:1: header must be '<vocab_count> <dim>'")
        try:
            declared, dim = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValueError(f"{path}:1: header must be two integers") from exc
        if dim < 1:
            raise ValueError(f"{path}:1: dimension must be >= 1")
        vocab: dict[str, int] = {}
        rows: list[np.ndarray] = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split(" ")
            word = fields[0]
            values = [f for f in fields[1:] if f]
            if len(values) != dim:
                raise ValueError(
                    f"{path}:{lineno}: word {word!r} has {len(values)} values, expected {dim}"
                )
            try:
                vec = np.array([float(v) for v in values], dtype=np.float32)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: word {word!r} has a non-numeric value") from exc
            if word in vocab:
                continue
            vocab[word] = len(rows)
            rows.append(vec)
    if not rows:
        raise ValueError(f"{path}: no vectors found (declared {declared})")
    matrix = np.vstack(rows)
    return EmbeddingModel(
        dim=dim,
        vocab=vocab,
        counts=np.zeros(len(vocab), dtype=np.int64),
        input_vectors=matrix,
        composed=matrix,
        hyperparams=SubwordHyperparams(dim=dim, buckets=1),
        has_subwords=False,
    )


def save_model(model: EmbeddingModel, path: str) -> None:
    """Write the versioned binary container (vectors as little-endian float32)."""
    hp = model.hyperparams
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IB", FORMAT_VERSION, 1 if model.has_subwords else 0))
        fh.write(
            struct.pack(
                "<IIIIdIIII",
                model.dim,
                hp.window,
                hp.negatives,
                hp.epochs,
                hp.learning_rate,
                hp.min_ngram,
                hp.max_ngram,
                hp.buckets,
                hp.min_count,
            )
        )
        fh.write(struct.pack("<I", len(model.vocab)))
        for word, idx in model.vocab.items():
            data = word.encode("utf-8")
            fh.write(struct.pack("<H", len(data)))
            fh.write(data)
            fh.write(struct.pack("<q", int(model.counts[idx])))
        fh.write(model.input_vectors.astype("<f4", copy=False).tobytes(order="C"))


def load_model(path: str) -> EmbeddingModel:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path}: not an embedding model file (bad magic)")
        version, has_subwords = struct.unpack("<IB", fh.read(5))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported model format version {version}")
        dim, window, negatives, epochs, lr, minn, maxn, buckets, min_count = struct.unpack(
            "<IIIIdIIII", fh.read(40)
        )
        (vocab_size,) = struct.unpack("<I", fh.read(4))
        vocab: dict[str, int] = {}
        counts = np.zeros(vocab_size, dtype=np.int64)
        for i in range(vocab_size):
            (wlen,) = struct.unpack("<H", fh.read(2))
            word = fh.read(wlen).decode("utf-8")
            (counts[i],) = struct.unpack("<q", fh.read(8))
            vocab[word] = i
        n_rows = vocab_size + (buckets if has_subwords else 0)
        raw = fh.read(n_rows * dim * 4)
        if len(raw) != n_rows * dim * 4:
            raise ValueError(f"{path}: truncated vector matrix")
        matrix = np.frombuffer(raw, dtype="<f4").reshape(n_rows, dim).copy()
    hp = SubwordHyperparams(
        dim=dim,
        window=window,
        negatives=negatives,
        epochs=epochs,
        learning_rate=lr,
        min_ngram=minn,
        max_ngram=maxn,
        buckets=buckets,
        min_count=min_count,
    )
    model = EmbeddingModel(
        dim=dim,
        vocab=vocab,
        counts=counts,
        input_vectors=matrix,
        composed=np.zeros((vocab_size, dim), dtype=np.float32),
        hyperparams=hp,
        has_subwords=bool(has_subwords),
    )
    if has_subwords:
        _recompose(model)
    else:
        model.composed = matrix
    return model
