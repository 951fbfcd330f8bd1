"""Weighted ensembles of per-feature-set linear classifiers.

Three feature sets feed the full model: the 11 manual indicator bits, the
locally trained sentence embedding, and the pre-trained general-corpus
sentence embedding. Member weights (non-negative, summing to 1) come from
an exhaustive simplex grid search on a held-out validation set; the
decision threshold comes from the same validation scores. The transfer
trainer instead mixes an up-sampled target set with the source labels and
fixes uniform weights and a 0.5 threshold, keeping all labeled data for
training.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
from dataclasses import dataclass

import numpy as np

from . import embedding as emb
from . import linear
from .features import DEFAULT_KEYWORDS, extract_manual_features
from .preprocess import DEFAULT_DROP_RULES, DropRules, Message, TokenizedMessage, tokenize

MANUAL = "manual"
LOCAL = "local_embedding"
WIKI = "wiki_embedding"
ALL_FEATURE_SETS = (LOCAL, MANUAL, WIKI)

DEFAULT_REG_GRID = (0.01, 0.1, 1.0, 10.0)
DEFAULT_WEIGHT_STEP = 0.05
DEFAULT_CV_FOLDS = 5

ENSEMBLE_FORMAT = "urgency-ensemble"
ENSEMBLE_VERSION = 1


@dataclass
class LabeledDataset:
    """Labeled messages with cached tokenization; ids unique, labels 0/1."""

    items: list[tuple[Message, TokenizedMessage]]
    role: str = ""

    def __post_init__(self):
        seen = set()
        for msg, _ in self.items:
            if msg.label not in (0, 1):
                raise ValueError(f"message {msg.id!r} in labeled dataset has no 0/1 label")
            if msg.id in seen:
                raise ValueError(f"duplicate id {msg.id!r} in labeled dataset")
            seen.add(msg.id)

    @classmethod
    def from_messages(
        cls, messages: list[Message], role: str = "", rules: DropRules = DEFAULT_DROP_RULES
    ) -> "LabeledDataset":
        return cls(items=[(m, tokenize(m, rules)) for m in messages], role=role)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def messages(self) -> list[Message]:
        return [m for m, _ in self.items]

    @property
    def tokenized(self) -> list[TokenizedMessage]:
        return [tm for _, tm in self.items]

    def ids(self) -> list[str]:
        return [m.id for m, _ in self.items]

    def labels(self) -> np.ndarray:
        return np.array([m.label for m, _ in self.items], dtype=np.float64)

    def class_counts(self) -> tuple[int, int]:
        y = self.labels()
        return int((y == 0).sum()), int((y == 1).sum())

    def subset(self, indices, role: str = "") -> "LabeledDataset":
        return LabeledDataset(items=[self.items[i] for i in indices], role=role or self.role)


@dataclass
class FeatureMatrix:
    rows: np.ndarray
    feature_set: str


class Featurizer:
    """Turns tokenized messages into the numeric feature sets.

    Embedding models are optional; only the feature sets whose inputs are
    present are available.
    """

    def __init__(
        self,
        keywords: tuple[str, ...] = DEFAULT_KEYWORDS,
        local_model: emb.EmbeddingModel | None = None,
        wiki_model: emb.EmbeddingModel | None = None,
    ):
        self.keywords = tuple(keywords)
        self.local_model = local_model
        self.wiki_model = wiki_model

    def available(self) -> tuple[str, ...]:
        sets = []
        if self.local_model is not None:
            sets.append(LOCAL)
        sets.append(MANUAL)
        if self.wiki_model is not None:
            sets.append(WIKI)
        return tuple(sets)

    def dim(self, feature_set: str) -> int:
        if feature_set == MANUAL:
            return len(self.keywords) + 1
        if feature_set == LOCAL:
            return self.local_model.dim
        if feature_set == WIKI:
            return self.wiki_model.dim
        raise ValueError(f"unknown feature set {feature_set!r}")

    def vector(self, tm: TokenizedMessage, feature_set: str) -> np.ndarray:
        if feature_set == MANUAL:
            return extract_manual_features(tm, self.keywords)
        if feature_set == LOCAL:
            if self.local_model is None:
                raise ValueError("no local embedding model attached")
            return emb.sentence_vector(self.local_model, tm).astype(np.float64)
        if feature_set == WIKI:
            if self.wiki_model is None:
                raise ValueError("no pre-trained embedding model attached")
            return emb.sentence_vector(self.wiki_model, tm).astype(np.float64)
        raise ValueError(f"unknown feature set {feature_set!r}")

    def matrix(self, tms: list[TokenizedMessage], feature_set: str) -> FeatureMatrix:
        rows = np.vstack([self.vector(tm, feature_set) for tm in tms]) if tms else np.zeros(
            (0, self.dim(feature_set))
        )
        return FeatureMatrix(rows=rows, feature_set=feature_set)


@dataclass
class EnsembleModel:
    """Fitted members plus their convex weights and decision threshold.

    ``rules`` are the tokenizer drop rules the model was trained with;
    scoring raw messages reuses them so train and serve see the same
    tokens.
    """

    members: list[linear.ProbabilisticLinearModel]
    member_weights: np.ndarray
    threshold: float
    featurizer: Featurizer
    rules: DropRules = DEFAULT_DROP_RULES

    def __post_init__(self):
        w = np.asarray(self.member_weights, dtype=np.float64)
        if w.shape[0] != len(self.members):
            raise ValueError("one weight per member required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("member weights must be non-negative and sum to 1")
        if not (0.0 <= self.threshold <= 1.0):
            raise ValueError("threshold must lie in [0, 1]")
        self.member_weights = w

    def feature_sets(self) -> tuple[str, ...]:
        return tuple(m.feature_set for m in self.members)

    def score_tokenized(self, tm: TokenizedMessage) -> float:
        total = 0.0
        for w, member in zip(self.member_weights, self.members):
            x = self.featurizer.vector(tm, member.feature_set)
            total += w * linear.predict_proba(member, x)
        return float(total)

    def score(self, message: Message) -> float:
        return self.score_tokenized(tokenize(message, self.rules))

    def classify(self, message: Message) -> int:
        return int(self.score(message) > self.threshold)


def ensemble_score(e: EnsembleModel, message: Message) -> float:
    """Weighted member probability for one raw message."""
    return e.score(message)


def classify(e: EnsembleModel, message: Message) -> int:
    """1 (urgent) iff the ensemble score falls strictly above the threshold."""
    return e.classify(message)


def _f_measure(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    tp = float(np.sum((y_pred == 1) & (y_true == 1)))
    fp = float(np.sum((y_pred == 1) & (y_true == 0)))
    fn = float(np.sum((y_pred == 0) & (y_true == 1)))
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2 * tp / denom


def select_threshold(scores: list[tuple[float, int]]) -> float:
    """Threshold maximizing F over midpoints of adjacent distinct scores, plus 0.5.

    Verdicts are strict (> threshold). Ties prefer the candidate nearest
    0.5, then the smaller threshold.
    """
    if not scores:
        raise ValueError("no scores to select a threshold from")
    y = np.array([lab for _, lab in scores], dtype=np.float64)
    s = np.array([sc for sc, _ in scores], dtype=np.float64)
    if np.unique(y).size < 2:
        raise ValueError("threshold selection needs both classes present")
    distinct = np.unique(s)
    candidates = [0.5]
    candidates.extend((distinct[:-1] + distinct[1:]) / 2.0)
    best = None
    for thr in candidates:
        f = _f_measure(y, (s > thr).astype(np.float64))
        key = (-f, abs(thr - 0.5), thr)
        if best is None or key < best[0]:
            best = (key, thr)
    return float(best[1])


def simplex_weight_candidates(n_members: int, step: float = DEFAULT_WEIGHT_STEP) -> np.ndarray:
    """All weight vectors on the step grid of the simplex, plus the exact
    uniform point (the declared tie-break target, which the grid misses for
    three members)."""
    units = int(round(1.0 / step))
    grid = []
    for combo in itertools.product(range(units + 1), repeat=n_members - 1):
        if sum(combo) <= units:
            last = units - sum(combo)
            grid.append(tuple(c / units for c in combo) + (last / units,))
    cands = np.array(grid, dtype=np.float64)
    uniform = np.full((1, n_members), 1.0 / n_members)
    if not any(np.allclose(row, uniform[0]) for row in cands):
        cands = np.vstack([cands, uniform])
    return cands


def search_member_weights(
    member_probs: np.ndarray, y_val: np.ndarray, step: float = DEFAULT_WEIGHT_STEP
) -> np.ndarray:
    """Exhaustive grid search maximizing validation F at the 0.5 threshold.

    ``member_probs`` has one column per member. Ties break toward the
    uniform weighting, then lexicographically.
    """
    n_members = member_probs.shape[1]
    candidates = simplex_weight_candidates(n_members, step)
    uniform = np.full(n_members, 1.0 / n_members)
    best = None
    for w in candidates:
        scores = member_probs @ w
        f = _f_measure(y_val, (scores > 0.5).astype(np.float64))
        key = (-f, float(np.sum((w - uniform) ** 2)), tuple(w))
        if best is None or key < best[0]:
            best = (key, w)
    return best[1]


def stratified_fold_indices(y: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    """Per-fold validation index arrays, class-stratified, seeded shuffle."""
    rng = np.random.default_rng(seed)
    assignments = np.empty(len(y), dtype=np.int64)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        for pos, i in enumerate(idx):
            assignments[i] = pos % folds
    return [np.flatnonzero(assignments == f) for f in range(folds)]


def cv_select_reg(
    X: np.ndarray,
    y: np.ndarray,
    reg_grid: tuple[float, ...] = DEFAULT_REG_GRID,
    folds: int = DEFAULT_CV_FOLDS,
    seed: int = 0,
    mode: str = linear.LOGISTIC,
) -> float:
    """Pick the L2 strength by stratified cross-validated F, first-in-grid on ties.

    Falls back to 1.0 when a class is too small to give every training fold
    both classes.
    """
    n0 = int(np.sum(y == 0))
    n1 = int(np.sum(y == 1))
    usable = min(folds, n0, n1)
    if usable < 2:
        return 1.0
    fold_idx = stratified_fold_indices(y, usable, seed)
    best_reg, best_f = None, -1.0
    for reg in reg_grid:
        fs = []
        for f in range(usable):
            val_idx = fold_idx[f]
            train_idx = np.setdiff1d(np.arange(len(y)), val_idx)
            model = linear.train_probabilistic_linear(
                X[train_idx], y[train_idx], reg, mode=mode
            )
            probs = linear.predict_proba(model, X[val_idx])
            fs.append(_f_measure(y[val_idx], (np.asarray(probs) > 0.5).astype(np.float64)))
        mean_f = float(np.mean(fs))
        if mean_f > best_f:
            best_reg, best_f = reg, mean_f
    return float(best_reg)


def fit_members(
    train: LabeledDataset,
    featurizer: Featurizer,
    feature_sets: tuple[str, ...],
    reg_grid: tuple[float, ...] = DEFAULT_REG_GRID,
    cv_folds: int = DEFAULT_CV_FOLDS,
    mode: str = linear.LOGISTIC,
    seed: int = 0,
) -> dict[str, linear.ProbabilisticLinearModel]:
    """One classifier per feature set, L2 strength picked by cross-validation."""
    y = train.labels()
    members = {}
    for fs in feature_sets:
        X = featurizer.matrix(train.tokenized, fs).rows
        reg = cv_select_reg(X, y, reg_grid, cv_folds, seed=seed, mode=mode)
        members[fs] = linear.train_probabilistic_linear(X, y, reg, feature_set=fs, mode=mode)
    return members


def _member_prob_matrix(members, featurizer, dataset) -> np.ndarray:
    cols = []
    for member in members:
        X = featurizer.matrix(dataset.tokenized, member.feature_set).rows
        cols.append(np.asarray(linear.predict_proba(member, X)))
    return np.column_stack(cols)


def fit_weighted_ensemble(
    train: LabeledDataset,
    validation: LabeledDataset,
    featurizer: Featurizer,
    feature_sets: tuple[str, ...],
    reg_grid: tuple[float, ...] = DEFAULT_REG_GRID,
    cv_folds: int = DEFAULT_CV_FOLDS,
    weight_step: float = DEFAULT_WEIGHT_STEP,
    mode: str = linear.LOGISTIC,
    seed: int = 0,
    rules: DropRules = DEFAULT_DROP_RULES,
) -> EnsembleModel:
    """Train members on ``train``; tune weights and threshold on ``validation``."""
    overlap = set(train.ids()) & set(validation.ids())
    if overlap:
        raise ValueError(f"train and validation share ids: {sorted(overlap)[:5]}")
    for name, ds in (("train", train), ("validation", validation)):
        n0, n1 = ds.class_counts()
        if n0 == 0 or n1 == 0:
            raise ValueError(f"{name} set must contain both classes")
    member_map = fit_members(train, featurizer, feature_sets, reg_grid, cv_folds, mode, seed)
    members = [member_map[fs] for fs in feature_sets]
    probs_val = _member_prob_matrix(members, featurizer, validation)
    y_val = validation.labels()
    weights = search_member_weights(probs_val, y_val, weight_step)
    scored = list(zip((probs_val @ weights).tolist(), y_val.astype(int).tolist()))
    threshold = select_threshold(scored)
    return EnsembleModel(
        members=members, member_weights=weights, threshold=threshold,
        featurizer=featurizer, rules=rules,
    )


def fit_ensemble(
    train: LabeledDataset,
    validation: LabeledDataset,
    featurizer: Featurizer,
    reg_grid: tuple[float, ...] = DEFAULT_REG_GRID,
    cv_folds: int = DEFAULT_CV_FOLDS,
    weight_step: float = DEFAULT_WEIGHT_STEP,
    mode: str = linear.LOGISTIC,
    seed: int = 0,
    rules: DropRules = DEFAULT_DROP_RULES,
) -> EnsembleModel:
    """The full three-member ensemble (local, manual, pre-trained feature sets)."""
    if featurizer.local_model is None or featurizer.wiki_model is None:
        raise ValueError("full ensemble needs both embedding models attached")
    return fit_weighted_ensemble(
        train,
        validation,
        featurizer,
        ALL_FEATURE_SETS,
        reg_grid,
        cv_folds,
        weight_step,
        mode,
        seed,
        rules,
    )


def upsample_mix(d_t: LabeledDataset, d_sl: LabeledDataset, u: int) -> LabeledDataset:
    """u whole copies of the target set concatenated with the source-labeled set.

    Copy ids get a ``~k`` suffix so the result still has unique ids;
    |result| = u * |d_t| + |d_sl| exactly.
    """
    if u < 1:
        raise ValueError("up-sampling factor must be a positive integer")
    items: list[tuple[Message, TokenizedMessage]] = []
    for k in range(u):
        for msg, tm in d_t.items:
            if k == 0:
                items.append((msg, tm))
            else:
                new_id = f"{msg.id}~{k + 1}"
                items.append(
                    (Message(id=new_id, text=msg.text, label=msg.label),
                     TokenizedMessage(id=new_id, tokens=tm.tokens))
                )
    items.extend(d_sl.items)
    return LabeledDataset(items=items, role="train")


def transfer_train(
    d_t: LabeledDataset,
    d_sl: LabeledDataset,
    d_su: list[TokenizedMessage],
    wiki_model: emb.EmbeddingModel,
    u: int,
    hyperparams: emb.SubwordHyperparams = emb.SubwordHyperparams(),
    keywords: tuple[str, ...] = DEFAULT_KEYWORDS,
    reg_grid: tuple[float, ...] = DEFAULT_REG_GRID,
    cv_folds: int = DEFAULT_CV_FOLDS,
    mode: str = linear.LOGISTIC,
    seed: int = 0,
    rules: DropRules = DEFAULT_DROP_RULES,
) -> EnsembleModel:
    """Train for a new crisis with no background corpus of its own.

    Local embeddings come from the source domain (its unlabeled corpus plus
    the text of its labeled set); classifiers train on u copies of the
    target labels mixed with the source labels. No validation set is used:
    members are averaged (uniform weights) and the threshold is 0.5.
    """
    if u < 1:
        raise ValueError("up-sampling factor must be a positive integer")
    if len(d_t) == 0:
        raise ValueError("target labeled set is empty")
    n0, n1 = d_t.class_counts()
    if n0 == 0 or n1 == 0:
        raise ValueError("target labeled set must contain both classes")
    embed_corpus = list(d_su) + d_sl.tokenized
    if not any(tm.tokens for tm in embed_corpus):
        raise ValueError(
            "nothing to train source embeddings on: source corpus and labels are both empty"
        )
    local_model = emb.train_subword_skipgram(embed_corpus, hyperparams, seed=seed)
    featurizer = Featurizer(keywords=keywords, local_model=local_model, wiki_model=wiki_model)
    d_train = upsample_mix(d_t, d_sl, u)
    member_map = fit_members(
        d_train, featurizer, ALL_FEATURE_SETS, reg_grid, cv_folds, mode, seed
    )
    members = [member_map[fs] for fs in ALL_FEATURE_SETS]
    weights = np.full(len(members), 1.0 / len(members))
    return EnsembleModel(
        members=members, member_weights=weights, threshold=0.5,
        featurizer=featurizer, rules=rules,
    )


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_ensemble(
    e: EnsembleModel,
    path: str,
    local_path: str | None = None,
    wiki_path: str | None = None,
    wiki_format: str = "text",
) -> None:
    """Write the versioned ensemble container.

    Embedding models are referenced by path and content hash, not embedded;
    relative paths are resolved against the container's directory on load.
    """
    base = os.path.dirname(os.path.abspath(path))

    def ref(model_path: str | None, fmt: str):
        if model_path is None:
            return None
        resolved = model_path if os.path.isabs(model_path) else os.path.join(base, model_path)
        return {"path": model_path, "sha256": _sha256(resolved), "format": fmt}

    doc = {
        "format": ENSEMBLE_FORMAT,
        "version": ENSEMBLE_VERSION,
        "keywords": list(e.featurizer.keywords),
        "tokenizer": {
            "drop_prefixes": list(e.rules.drop_prefixes),
            "drop_exact": list(e.rules.drop_exact),
            "url_prefixes": list(e.rules.url_prefixes),
        },
        "member_weights": [float(w) for w in e.member_weights],
        "threshold": float(e.threshold),
        "members": [
            {
                "feature_set": m.feature_set,
                "mode": m.mode,
                "reg": float(m.reg),
                "bias": float(m.bias),
                "weights": [float(w) for w in m.weights],
            }
            for m in e.members
        ],
        "embeddings": {
            LOCAL: ref(local_path, "uemb"),
            WIKI: ref(wiki_path, wiki_format),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_ensemble(path: str) -> EnsembleModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != ENSEMBLE_FORMAT:
        raise ValueError(f"{path}: not an ensemble container")
    if doc.get("version") != ENSEMBLE_VERSION:
        raise ValueError(f"{path}: unsupported ensemble version {doc.get('version')!r}")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(ref):
        if ref is None:
            return None
        p = ref["path"]
        resolved = p if os.path.isabs(p) else os.path.join(base, p)
        digest = _sha256(resolved)
        if digest != ref["sha256"]:
            raise ValueError(
                f"{resolved}: content hash mismatch (expected {ref['sha256'][:12]}..., "
                f"got {digest[:12]}...)"
            )
        if ref["format"] == "uemb":
            return emb.load_model(resolved)
        return emb.load_pretrained_vectors(resolved)

    refs = doc["embeddings"]
    featurizer = Featurizer(
        keywords=tuple(doc["keywords"]),
        local_model=resolve(refs.get(LOCAL)),
        wiki_model=resolve(refs.get(WIKI)),
    )
    members = [
        linear.ProbabilisticLinearModel(
            weights=np.array(m["weights"], dtype=np.float64),
            bias=float(m["bias"]),
            reg=float(m["reg"]),
            feature_set=m["feature_set"],
            mode=m["mode"],
        )
        for m in doc["members"]
    ]
    tok = doc.get("tokenizer", {})
    rules = DropRules(
        drop_prefixes=tuple(tok.get("drop_prefixes", DEFAULT_DROP_RULES.drop_prefixes)),
        drop_exact=tuple(tok.get("drop_exact", DEFAULT_DROP_RULES.drop_exact)),
        url_prefixes=tuple(tok.get("url_prefixes", DEFAULT_DROP_RULES.url_prefixes)),
    )
    return EnsembleModel(
        members=members,
        member_weights=np.array(doc["member_weights"], dtype=np.float64),
        threshold=float(doc["threshold"]),
        featurizer=featurizer,
        rules=rules,
    )
