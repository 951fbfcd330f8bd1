"""Metrics, stratified splitting, and the two experiment protocols.

RQ1 (single crisis): stratified 90/10 train/test, inner 90/10 split for
weight and threshold tuning, L2 strength by 5-fold cross-validation, seven
systems built from the three feature sets, ten trials, one-sided paired
t-test against the local-embedding baseline.

RQ2 (transfer to a new crisis): four systems sharing the source-domain
embedding model, uniform member weights throughout (no validation split),
evaluated on the target's held-out test split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import embedding as emb
from . import linear
from .config import derive_seed
from .ensemble import (
    ALL_FEATURE_SETS,
    DEFAULT_CV_FOLDS,
    DEFAULT_REG_GRID,
    DEFAULT_WEIGHT_STEP,
    LOCAL,
    MANUAL,
    WIKI,
    EnsembleModel,
    Featurizer,
    LabeledDataset,
    _member_prob_matrix,
    fit_members,
    search_member_weights,
    select_threshold,
    upsample_mix,
)
from .features import DEFAULT_KEYWORDS
from .preprocess import TokenizedMessage
from .stats import DegenerateDifferencesError, paired_t_test

METRIC_NAMES = ("accuracy", "precision", "recall", "f_measure")

RQ1_SYSTEMS: dict[str, tuple[str, ...]] = {
    "Local": (LOCAL,),
    "Manual": (MANUAL,),
    "Wiki": (WIKI,),
    "Local-Manual": (LOCAL, MANUAL),
    "Wiki-Local": (WIKI, LOCAL),
    "Wiki-Manual": (WIKI, MANUAL),
    "Our Approach": (LOCAL, MANUAL, WIKI),
}

RQ2_SYSTEM_NAMES = ("Local", "Transform", "Upsample", "Our Approach")

BASELINE = "Local"

_MARK_LEVELS = ((0.01, "***"), (0.05, "**"), (0.10, "*"))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f_measure: float

    def as_dict(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
        }


def compute_metrics(c: ConfusionCounts) -> Metrics:
    """Accuracy, precision, recall and F from confusion counts.

    Conventions: precision is 0 when nothing was predicted positive, recall
    is 0 when there are no positives, F is 0 when precision+recall is 0.
    F is evaluated as 2tp/(2tp+fp+fn), the exact rational form of the
    harmonic mean under those conventions.
    """
    if min(c.tp, c.fp, c.tn, c.fn) < 0:
        raise ValueError("confusion counts must be non-negative")
    if c.total == 0:
        raise ValueError("empty test set: all confusion counts are zero")
    accuracy = (c.tp + c.tn) / c.total
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp > 0 else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn > 0 else 0.0
    f_denom = 2 * c.tp + c.fp + c.fn
    f_measure = 2 * c.tp / f_denom if f_denom > 0 else 0.0
    return Metrics(accuracy, precision, recall, f_measure)


def confusion_counts(y_true: np.ndarray, y_pred: np.ndarray) -> ConfusionCounts:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    return ConfusionCounts(
        tp=int(np.sum((y_pred == 1) & (y_true == 1))),
        fp=int(np.sum((y_pred == 1) & (y_true == 0))),
        tn=int(np.sum((y_pred == 0) & (y_true == 0))),
        fn=int(np.sum((y_pred == 0) & (y_true == 1))),
    )


def stratified_split(
    d: LabeledDataset, fraction: float, seed: int, roles: tuple[str, str] = ("train", "test")
) -> tuple[LabeledDataset, LabeledDataset]:
    """Split preserving class proportions: the first part receives
    round(fraction * class count) members of each class, seeded shuffle."""
    if not (0.0 < fraction < 1.0):
        raise ValueError("fraction must lie strictly between 0 and 1")
    y = d.labels()
    if int((y == 0).sum()) == 0 or int((y == 1).sum()) == 0:
        raise ValueError("stratified split needs both classes present")
    rng = np.random.default_rng(seed)
    first: list[int] = []
    second: list[int] = []
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        take = int(np.floor(fraction * idx.size + 0.5))
        first.extend(idx[:take].tolist())
        second.extend(idx[take:].tolist())
    return d.subset(sorted(first), roles[0]), d.subset(sorted(second), roles[1])


@dataclass
class EvalReport:
    """Per-trial metric table with means and significance against the baseline."""

    systems: list[str]
    per_trial: dict[str, list[dict[str, float]]]
    means: dict[str, dict[str, float]]
    p_values: dict[str, dict[str, float | None]]
    marks: dict[str, dict[str, str]]
    baseline: str = BASELINE
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "format": "urgency-eval-report",
            "version": 1,
            "baseline": self.baseline,
            "systems": self.systems,
            "metrics": list(METRIC_NAMES),
            "per_trial": self.per_trial,
            "means": self.means,
            "p_values": self.p_values,
            "marks": self.marks,
            "meta": self.meta,
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        doc = json.loads(text)
        if doc.get("format") != "urgency-eval-report":
            raise ValueError("not an evaluation report")
        return cls(
            systems=doc["systems"],
            per_trial=doc["per_trial"],
            means=doc["means"],
            p_values=doc["p_values"],
            marks=doc["marks"],
            baseline=doc["baseline"],
            meta=doc.get("meta", {}),
        )

    def to_table(self) -> str:
        headers = ["System", "Accuracy", "Precision", "Recall", "F-Measure"]
        rows = [headers]
        for system in self.systems:
            row = [system]
            for metric in METRIC_NAMES:
                mark = self.marks[system][metric]
                star = mark if mark in ("*", "**", "***") else ""
                row.append(f"{100 * self.means[system][metric]:.2f}%{star}")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
        lines = []
        for i, row in enumerate(rows):
            lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        lines.append("")
        lines.append(
            f"significance vs {self.baseline} (one-sided paired t-test): "
            "* 90%  ** 95%  *** 99%; n/a = zero-variance differences"
        )
        return "\n".join(lines)


def build_report(
    systems: list[str],
    per_trial: dict[str, list[Metrics]],
    baseline: str = BASELINE,
    meta: dict | None = None,
) -> EvalReport:
    """Means plus one-sided significance of every system against the baseline."""
    trial_dicts = {s: [m.as_dict() for m in ms] for s, ms in per_trial.items()}
    means = {
        s: {name: float(np.mean([m[name] for m in ms])) for name in METRIC_NAMES}
        for s, ms in trial_dicts.items()
    }
    p_values: dict[str, dict[str, float | None]] = {}
    marks: dict[str, dict[str, str]] = {}
    for s in systems:
        p_values[s] = {}
        marks[s] = {}
        for name in METRIC_NAMES:
            if s == baseline or baseline not in per_trial:
                p_values[s][name] = None
                marks[s][name] = ""
                continue
            a = [m[name] for m in trial_dicts[s]]
            b = [m[name] for m in trial_dicts[baseline]]
            diffs = np.array(a) - np.array(b)
            if np.all(diffs == diffs[0]):
                # zero-variance differences: no valid test, even when all zero
                p_values[s][name] = None
                marks[s][name] = "n/a"
                continue
            try:
                _, p = paired_t_test(a, b)
            except DegenerateDifferencesError:
                p_values[s][name] = None
                marks[s][name] = "n/a"
                continue
            p_values[s][name] = p
            mark = ""
            for level, symbol in _MARK_LEVELS:
                if p <= level:
                    mark = symbol
                    break
            marks[s][name] = mark
    return EvalReport(
        systems=systems,
        per_trial=trial_dicts,
        means=means,
        p_values=p_values,
        marks=marks,
        baseline=baseline,
        meta=meta or {},
    )


def _evaluate_fixed_weight_system(
    members: list[linear.ProbabilisticLinearModel],
    weights: np.ndarray,
    threshold: float,
    probs_test: np.ndarray,
    y_test: np.ndarray,
) -> Metrics:
    scores = probs_test @ weights
    return compute_metrics(confusion_counts(y_test, (scores > threshold).astype(int)))


def run_rq1_experiment(
    labeled: LabeledDataset,
    background: list[TokenizedMessage],
    wiki_model: emb.EmbeddingModel,
    trials: int = 10,
    seed: int = 7,
    systems: list[str] | None = None,
    hyperparams: emb.SubwordHyperparams = emb.SubwordHyperparams(),
    keywords: tuple[str, ...] = DEFAULT_KEYWORDS,
    reg_grid: tuple[float, ...] = DEFAULT_REG_GRID,
    cv_folds: int = DEFAULT_CV_FOLDS,
    weight_step: float = DEFAULT_WEIGHT_STEP,
    mode: str = linear.LOGISTIC,
    train_fraction: float = 0.9,
    local_model: emb.EmbeddingModel | None = None,
) -> EvalReport:
    """Single-crisis protocol over the requested systems (default: all seven).

    The local embedding model trains once on the background corpus and is
    shared by every trial; pass ``local_model`` to reuse one already
    trained.
    """
    if trials < 2:
        raise ValueError("need at least two trials for paired significance")
    system_names = list(RQ1_SYSTEMS) if systems is None else list(systems)
    unknown = [s for s in system_names if s not in RQ1_SYSTEMS]
    if unknown:
        raise ValueError(f"unknown RQ1 systems: {unknown}; choose from {list(RQ1_SYSTEMS)}")
    if local_model is None:
        local_model = emb.train_subword_skipgram(
            background, hyperparams, seed=derive_seed(seed, "local-embedding")
        )
    featurizer = Featurizer(keywords=keywords, local_model=local_model, wiki_model=wiki_model)
    needed = sorted({fs for s in system_names for fs in RQ1_SYSTEMS[s]})

    per_trial: dict[str, list[Metrics]] = {s: [] for s in system_names}
    for trial in range(trials):
        trial_seed = seed + trial
        trainval, test = stratified_split(labeled, train_fraction, trial_seed)
        train, validation = stratified_split(
            trainval, train_fraction, derive_seed(trial_seed, "inner"), roles=("train", "validation")
        )
        member_map = fit_members(
            train, featurizer, tuple(needed), reg_grid, cv_folds, mode, seed=trial_seed
        )
        y_val = validation.labels()
        y_test = test.labels()
        for name in system_names:
            sets = RQ1_SYSTEMS[name]
            members = [member_map[fs] for fs in sets]
            probs_val = _member_prob_matrix(members, featurizer, validation)
            probs_test = _member_prob_matrix(members, featurizer, test)
            weights = search_member_weights(probs_val, y_val, weight_step)
            scored = list(zip((probs_val @ weights).tolist(), y_val.astype(int).tolist()))
            threshold = select_threshold(scored)
            per_trial[name].append(
                _evaluate_fixed_weight_system(members, weights, threshold, probs_test, y_test)
            )
    meta = {
        "protocol": "rq1",
        "trials": trials,
        "seed": seed,
        "train_fraction": train_fraction,
        "labeled_size": len(labeled),
        "background_size": len(background),
    }
    return build_report(system_names, per_trial, baseline=BASELINE, meta=meta)


def run_rq2_experiment(
    source_labeled: LabeledDataset,
    source_corpus: list[TokenizedMessage],
    target_labeled: LabeledDataset,
    wiki_model: emb.EmbeddingModel,
    u: int = 6,
    trials: int = 10,
    seed: int = 7,
    hyperparams: emb.SubwordHyperparams = emb.SubwordHyperparams(),
    keywords: tuple[str, ...] = DEFAULT_KEYWORDS,
    reg_grid: tuple[float, ...] = DEFAULT_REG_GRID,
    cv_folds: int = DEFAULT_CV_FOLDS,
    mode: str = linear.LOGISTIC,
    train_fraction: float = 0.9,
    local_model: emb.EmbeddingModel | None = None,
) -> EvalReport:
    """Transfer protocol: four systems on the target test split.

    Local = manual+wiki members on the target only (no transfer);
    Transform adds source-domain embeddings; Upsample additionally
    up-samples the target training labels by u; Our Approach mixes the
    up-sampled target labels with the source labels. All use uniform
    weights and threshold 0.5: no validation split is spent.
    """
    if trials < 2:
        raise ValueError("need at least two trials for paired significance")
    if u < 1:
        raise ValueError("up-sampling factor must be a positive integer")
    if local_model is None:
        embed_corpus = list(source_corpus) + source_labeled.tokenized
        local_model = emb.train_subword_skipgram(
            embed_corpus, hyperparams, seed=derive_seed(seed, "source-embedding")
        )
    featurizer = Featurizer(keywords=keywords, local_model=local_model, wiki_model=wiki_model)
    empty = LabeledDataset(items=[], role="empty")

    per_trial: dict[str, list[Metrics]] = {s: [] for s in RQ2_SYSTEM_NAMES}
    train_sizes: dict[str, int] = {}
    for trial in range(trials):
        trial_seed = seed + trial
        t_train, t_test = stratified_split(target_labeled, train_fraction, trial_seed)
        y_test = t_test.labels()
        train_sets = {
            "Local": (t_train, (MANUAL, WIKI)),
            "Transform": (t_train, ALL_FEATURE_SETS),
            "Upsample": (upsample_mix(t_train, empty, u), ALL_FEATURE_SETS),
            "Our Approach": (upsample_mix(t_train, source_labeled, u), ALL_FEATURE_SETS),
        }
        for name in RQ2_SYSTEM_NAMES:
            train_ds, sets = train_sets[name]
            train_sizes.setdefault(name, len(train_ds))
            member_map = fit_members(
                train_ds, featurizer, sets, reg_grid, cv_folds, mode, seed=trial_seed
            )
            members = [member_map[fs] for fs in sets]
            weights = np.full(len(members), 1.0 / len(members))
            probs_test = _member_prob_matrix(members, featurizer, t_test)
            per_trial[name].append(
                _evaluate_fixed_weight_system(members, weights, 0.5, probs_test, y_test)
            )
    meta = {
        "protocol": "rq2",
        "trials": trials,
        "seed": seed,
        "u": u,
        "train_fraction": train_fraction,
        "target_size": len(target_labeled),
        "source_labeled_size": len(source_labeled),
        "source_corpus_size": len(source_corpus),
        "train_sizes": train_sizes,
    }
    return build_report(list(RQ2_SYSTEM_NAMES), per_trial, baseline=BASELINE, meta=meta)
