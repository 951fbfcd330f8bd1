from fractions import Fraction

import numpy as np
import pytest

from urgencykit import synth
from urgencykit.ensemble import LabeledDataset
from urgencykit.evaluation import (
    METRIC_NAMES,
    ConfusionCounts,
    EvalReport,
    Metrics,
    build_report,
    compute_metrics,
    confusion_counts,
    run_rq1_experiment,
    run_rq2_experiment,
    stratified_split,
)
from urgencykit.preprocess import Message, tokenize_all


def fraction_oracle(tp, fp, tn, fn):
    total = tp + fp + tn + fn
    acc = Fraction(tp + tn, total)
    prec = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    rec = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    f = Fraction(2 * tp, 2 * tp + fp + fn) if 2 * tp + fp + fn else Fraction(0)
    return float(acc), float(prec), float(rec), float(f)


def test_perfect_classifier():
    m = compute_metrics(ConfusionCounts(tp=10, fp=0, tn=10, fn=0))
    assert (m.accuracy, m.precision, m.recall, m.f_measure) == (1.0, 1.0, 1.0, 1.0)


def test_predict_all_positive_balanced():
    m = compute_metrics(ConfusionCounts(tp=10, fp=10, tn=0, fn=0))
    assert m.accuracy == 0.5
    assert m.precision == 0.5
    assert m.recall == 1.0
    assert m.f_measure == 2 / 3


def test_f_from_precision_point_six_recall_point_three():
    # tp=3, fp=2, fn=7 gives P=0.6, R=0.3, F=0.4
    m = compute_metrics(ConfusionCounts(tp=3, fp=2, tn=1, fn=7))
    assert m.precision == 0.6
    assert m.recall == 0.3
    assert m.f_measure == 0.4


def test_empty_counts_error():
    with pytest.raises(ValueError, match="empty"):
        compute_metrics(ConfusionCounts(0, 0, 0, 0))
    with pytest.raises(ValueError, match="non-negative"):
        compute_metrics(ConfusionCounts(-1, 0, 1, 0))


def test_exhaustive_small_confusion_matrices():
    for tp in range(4):
        for fp in range(4):
            for tn in range(4):
                for fn in range(4):
                    if tp + fp + tn + fn == 0:
                        continue
                    m = compute_metrics(ConfusionCounts(tp, fp, tn, fn))
                    acc, prec, rec, f = fraction_oracle(tp, fp, tn, fn)
                    assert m.accuracy == acc
                    assert m.precision == prec
                    assert m.recall == rec
                    assert m.f_measure == f


def test_f_between_precision_and_recall():
    rng = np.random.default_rng(0)
    for _ in range(100):
        tp, fp, tn, fn = rng.integers(0, 20, size=4)
        if tp + fp + tn + fn == 0:
            continue
        m = compute_metrics(ConfusionCounts(int(tp), int(fp), int(tn), int(fn)))
        if m.precision > 0 and m.recall > 0:
            assert min(m.precision, m.recall) - 1e-12 <= m.f_measure
            assert m.f_measure <= max(m.precision, m.recall) + 1e-12
        if m.precision + m.recall == 0:
            assert m.f_measure == 0.0


def test_confusion_counts_from_predictions():
    y = np.array([1, 1, 0, 0, 1])
    p = np.array([1, 0, 1, 0, 1])
    c = confusion_counts(y, p)
    assert (c.tp, c.fp, c.tn, c.fn) == (2, 1, 1, 1)
    assert c.total == 5


def make_labeled(n_urgent, n_other, seed=0):
    msgs = [Message(id=f"u{i}", text=f"urgent {i}", label=1) for i in range(n_urgent)]
    msgs += [Message(id=f"o{i}", text=f"other {i}", label=0) for i in range(n_other)]
    return LabeledDataset.from_messages(msgs)


def test_stratified_split_kerala_shape():
    d = make_labeled(125, 275)
    first, second = stratified_split(d, 0.9, seed=1)
    n0, n1 = first.class_counts()
    assert n1 in (112, 113)
    assert n0 in (247, 248)
    assert len(first) + len(second) == 400
    assert set(first.ids()) | set(second.ids()) == set(d.ids())
    assert not set(first.ids()) & set(second.ids())


def test_stratified_split_balanced():
    d = make_labeled(200, 200)
    first, second = stratified_split(d, 0.9, seed=2)
    assert first.class_counts() == (180, 180)
    assert second.class_counts() == (20, 20)


def test_stratified_split_deterministic():
    d = make_labeled(40, 60)
    a1, b1 = stratified_split(d, 0.8, seed=3)
    a2, b2 = stratified_split(d, 0.8, seed=3)
    assert a1.ids() == a2.ids() and b1.ids() == b2.ids()
    a3, _ = stratified_split(d, 0.8, seed=4)
    assert a1.ids() != a3.ids()


def test_stratified_split_validation():
    d = make_labeled(10, 10)
    with pytest.raises(ValueError, match="fraction"):
        stratified_split(d, 1.0, seed=0)
    single = make_labeled(10, 0)
    with pytest.raises(ValueError, match="both classes"):
        stratified_split(single, 0.9, seed=0)


def test_stratified_split_counts_within_one():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n1 = int(rng.integers(2, 80))
        n0 = int(rng.integers(2, 80))
        frac = float(rng.uniform(0.1, 0.9))
        d = make_labeled(n1, n0)
        first, _ = stratified_split(d, frac, seed=int(rng.integers(0, 1000)))
        c0, c1 = first.class_counts()
        assert abs(c1 - frac * n1) <= 1
        assert abs(c0 - frac * n0) <= 1


def metrics_list(values):
    return [Metrics(*v) for v in values]


def test_report_means_and_marks():
    per_trial = {
        "Local": metrics_list([(0.6, 0.6, 0.6, 0.6), (0.62, 0.6, 0.64, 0.62),
                               (0.58, 0.56, 0.6, 0.58)]),
        "Our Approach": metrics_list([(0.71, 0.71, 0.71, 0.71), (0.70, 0.68, 0.72, 0.70),
                                      (0.69, 0.67, 0.71, 0.69)]),
    }
    report = build_report(["Local", "Our Approach"], per_trial)
    for system, trials in per_trial.items():
        for name in METRIC_NAMES:
            mean = float(np.mean([getattr(m, name) for m in trials]))
            assert abs(report.means[system][name] - mean) < 1e-12
    assert all(report.marks["Local"][m] == "" for m in METRIC_NAMES)
    for name in METRIC_NAMES:
        p = report.p_values["Our Approach"][name]
        mark = report.marks["Our Approach"][name]
        assert p is not None and p < 0.05
        assert mark in ("**", "***")


def test_report_identical_systems_na():
    rows = metrics_list([(0.6, 0.6, 0.6, 0.6), (0.7, 0.7, 0.7, 0.7)])
    report = build_report(["Local", "Copy"], {"Local": rows, "Copy": list(rows)})
    for name in METRIC_NAMES:
        assert report.marks["Copy"][name] == "n/a"
        assert report.p_values["Copy"][name] is None


def test_report_baseline_only():
    rows = metrics_list([(0.6, 0.6, 0.6, 0.6), (0.7, 0.7, 0.7, 0.7)])
    report = build_report(["Local"], {"Local": rows})
    assert all(report.marks["Local"][m] == "" for m in METRIC_NAMES)


def test_report_json_round_trip():
    rows = metrics_list([(0.5, 0.5, 0.5, 0.5), (0.52, 0.5, 0.55, 0.52)])
    report = build_report(["Local"], {"Local": rows}, meta={"trials": 2})
    text = report.to_json()
    again = EvalReport.from_json(text)
    assert again.means == report.means
    assert again.to_json() == text
    table = report.to_table()
    assert "Local" in table and "Accuracy" in table


@pytest.fixture(scope="module")
def small_world(tiny_wiki_model):
    background, labeled = synth.generate_corpus(250, 80, seed=31)
    return tokenize_all(background), LabeledDataset.from_messages(labeled), tiny_wiki_model


def test_run_rq1_smoke(small_world, tiny_local_model):
    background, labeled, wiki = small_world
    report = run_rq1_experiment(
        labeled, background, wiki, trials=2, seed=3,
        systems=["Local", "Manual", "Our Approach"],
        local_model=tiny_local_model, cv_folds=3,
    )
    assert report.systems == ["Local", "Manual", "Our Approach"]
    for system in report.systems:
        assert len(report.per_trial[system]) == 2
        for name in METRIC_NAMES:
            assert 0.0 <= report.means[system][name] <= 1.0
    assert report.meta["trials"] == 2


def test_run_rq1_validates(small_world):
    background, labeled, wiki = small_world
    with pytest.raises(ValueError, match="two trials"):
        run_rq1_experiment(labeled, background, wiki, trials=1)
    with pytest.raises(ValueError, match="unknown RQ1"):
        run_rq1_experiment(labeled, background, wiki, trials=2, systems=["Nope"])


def test_run_rq2_smoke_and_cardinality(small_world, tiny_local_model):
    background, source_labeled, wiki = small_world
    _, target_msgs = synth.generate_corpus(0, 40, seed=41, domain="quake", id_prefix="t-")
    target = LabeledDataset.from_messages(target_msgs)
    report = run_rq2_experiment(
        source_labeled, background, target, wiki, u=6, trials=2, seed=5,
        local_model=tiny_local_model, cv_folds=3,
    )
    assert report.systems == ["Local", "Transform", "Upsample", "Our Approach"]
    t_train = 36  # 90% of a 40-message balanced target
    sizes = report.meta["train_sizes"]
    assert sizes["Local"] == t_train
    assert sizes["Transform"] == t_train
    assert sizes["Upsample"] == 6 * t_train
    assert sizes["Our Approach"] == 6 * t_train + len(source_labeled)
