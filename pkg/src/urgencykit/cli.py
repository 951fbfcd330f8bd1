"""Command-line interface: thin wrappers over the library.

Every command takes --seed and --config; the config file drives all
hyperparameters and the seed makes full runs replayable byte for byte.
"""

from __future__ import annotations

import json
import os
import sys

import click

from . import embedding as emb
from . import evaluation, preprocess, synth
from .config import PipelineConfig, derive_seed, load_config
from .ensemble import (
    ALL_FEATURE_SETS,
    Featurizer,
    LabeledDataset,
    fit_weighted_ensemble,
    load_ensemble,
    save_ensemble,
    transfer_train,
)
from .evaluation import stratified_split
from .preprocess import Message


def _cfg(config_path, seed):
    cfg = load_config(config_path)
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
    return cfg


def _load_labeled(path: str, cfg: PipelineConfig, role: str = "") -> LabeledDataset:
    messages = preprocess.load_messages(path)
    unlabeled = [m.id for m in messages if m.label is None]
    if unlabeled:
        raise click.ClickException(
            f"{path}: {len(unlabeled)} messages have no label (first: {unlabeled[0]!r})"
        )
    return LabeledDataset.from_messages(messages, role=role, rules=cfg.drop_rules())


def _load_corpus_tokens(path: str, cfg: PipelineConfig):
    return preprocess.tokenize_all(preprocess.load_messages(path), cfg.drop_rules())


def _load_wiki(path: str) -> emb.EmbeddingModel:
    if path.endswith(".uemb"):
        return emb.load_model(path)
    return emb.load_pretrained_vectors(path)


seed_option = click.option("--seed", type=int, default=None, help="Override the config seed.")
config_option = click.option(
    "--config", "config_path", type=click.Path(exists=True, dir_okay=False),
    default=None, help="Pipeline config file (YAML or JSON).",
)


@click.group()
def main():
    """Urgency detection for short crisis messages."""


@main.command("preprocess")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
@click.option("--features", "with_features", is_flag=True, default=False,
              help="Also dump the manual feature bits per message.")
@seed_option
@config_option
def preprocess_cmd(input_path, output_path, with_features, seed, config_path):
    """Tokenize a corpus file into JSON-lines of token lists."""
    from .features import extract_manual_features, format_bits

    cfg = _cfg(config_path, seed)
    messages = preprocess.load_messages(input_path)
    rules = cfg.drop_rules()
    keywords = tuple(cfg.keywords)
    with open(output_path, "w", encoding="utf-8") as fh:
        for m in messages:
            tm = preprocess.tokenize(m, rules)
            row: dict = {"id": tm.id, "tokens": list(tm.tokens)}
            if with_features:
                row["manual_features"] = format_bits(extract_manual_features(tm, keywords))
            fh.write(json.dumps(row) + "\n")
    click.echo(f"tokenized {len(messages)} messages -> {output_path}")


@main.command("train-embeddings")
@click.argument("corpus_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
@seed_option
@config_option
def train_embeddings_cmd(corpus_path, output_path, seed, config_path):
    """Train the local subword skip-gram model on an unlabeled corpus."""
    cfg = _cfg(config_path, seed)
    corpus = _load_corpus_tokens(corpus_path, cfg)
    model = emb.train_subword_skipgram(
        corpus, cfg.embedding_hyperparams(), seed=derive_seed(cfg.seed, "local-embedding")
    )
    emb.save_model(model, output_path)
    click.echo(
        f"trained dim={model.dim} vocab={len(model.vocab)} "
        f"final-loss={model.epoch_losses[-1]:.4f} -> {output_path}"
    )


@main.command("train")
@click.option("--labeled", "labeled_path", required=True, type=click.Path(exists=True))
@click.option("--background", "background_path", required=True, type=click.Path(exists=True))
@click.option("--wiki", "wiki_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@seed_option
@config_option
def train_cmd(labeled_path, background_path, wiki_path, out_dir, seed, config_path):
    """Train the full ensemble for one crisis (labeled set + background corpus)."""
    cfg = _cfg(config_path, seed)
    labeled = _load_labeled(labeled_path, cfg)
    background = _load_corpus_tokens(background_path, cfg)
    wiki = _load_wiki(wiki_path)
    local = emb.train_subword_skipgram(
        background, cfg.embedding_hyperparams(), seed=derive_seed(cfg.seed, "local-embedding")
    )
    train, validation = stratified_split(
        labeled, cfg.eval.train_fraction, derive_seed(cfg.seed, "validation-split"),
        roles=("train", "validation"),
    )
    featurizer = Featurizer(tuple(cfg.keywords), local_model=local, wiki_model=wiki)
    model = fit_weighted_ensemble(
        train,
        validation,
        featurizer,
        ALL_FEATURE_SETS,
        reg_grid=tuple(cfg.classifier.reg_grid),
        cv_folds=cfg.classifier.cv_folds,
        weight_step=cfg.ensemble.weight_step,
        mode=cfg.classifier.mode,
        seed=cfg.seed,
        rules=cfg.drop_rules(),
    )
    os.makedirs(out_dir, exist_ok=True)
    local_file = os.path.join(out_dir, "local.uemb")
    emb.save_model(local, local_file)
    save_ensemble(
        model,
        os.path.join(out_dir, "ensemble.json"),
        local_path="local.uemb",
        wiki_path=os.path.abspath(wiki_path),
        wiki_format="uemb" if wiki_path.endswith(".uemb") else "text",
    )
    click.echo(
        f"weights={[round(w, 4) for w in model.member_weights.tolist()]} "
        f"threshold={model.threshold:.4f} -> {out_dir}"
    )


@main.command("transfer-train")
@click.option("--target", "target_path", required=True, type=click.Path(exists=True),
              help="Labeled messages from the new crisis.")
@click.option("--source-labeled", "source_labeled_path", required=True, type=click.Path(exists=True))
@click.option("--source-corpus", "source_corpus_path", required=False, type=click.Path(exists=True),
              help="Unlabeled source-domain corpus (optional if source labels exist).")
@click.option("--wiki", "wiki_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("-u", "--upsample", "u", type=int, default=None,
              help="Up-sampling factor for the target labels (default from config).")
@seed_option
@config_option
def transfer_train_cmd(target_path, source_labeled_path, source_corpus_path, wiki_path,
                       out_dir, u, seed, config_path):
    """Train for a new crisis from source-domain data (up-sampled mixing)."""
    cfg = _cfg(config_path, seed)
    d_t = _load_labeled(target_path, cfg, role="target")
    d_sl = _load_labeled(source_labeled_path, cfg, role="source-labeled")
    d_su = _load_corpus_tokens(source_corpus_path, cfg) if source_corpus_path else []
    wiki = _load_wiki(wiki_path)
    factor = cfg.transfer.upsample_factor if u is None else u
    model = transfer_train(
        d_t,
        d_sl,
        d_su,
        wiki,
        factor,
        hyperparams=cfg.embedding_hyperparams(),
        keywords=tuple(cfg.keywords),
        reg_grid=tuple(cfg.classifier.reg_grid),
        cv_folds=cfg.classifier.cv_folds,
        mode=cfg.classifier.mode,
        seed=derive_seed(cfg.seed, "transfer"),
        rules=cfg.drop_rules(),
    )
    os.makedirs(out_dir, exist_ok=True)
    local_file = os.path.join(out_dir, "local.uemb")
    emb.save_model(model.featurizer.local_model, local_file)
    save_ensemble(
        model,
        os.path.join(out_dir, "ensemble.json"),
        local_path="local.uemb",
        wiki_path=os.path.abspath(wiki_path),
        wiki_format="uemb" if wiki_path.endswith(".uemb") else "text",
    )
    click.echo(f"transfer model (u={factor}) -> {out_dir}")


@main.command("predict")
@click.option("--model", "model_dir", required=True, type=click.Path(exists=True))
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False),
              help="Corpus file to score; omit to read texts from stdin.")
@click.option("--output", "output_path", type=click.Path(dir_okay=False),
              help="Write JSON-lines results here instead of stdout.")
@seed_option
@config_option
def predict_cmd(model_dir, input_path, output_path, seed, config_path):
    """Score messages with a trained ensemble."""
    bundle = model_dir
    if os.path.isdir(bundle):
        bundle = os.path.join(bundle, "ensemble.json")
    model = load_ensemble(bundle)
    if input_path:
        messages = preprocess.load_messages(input_path)
    else:
        messages = [
            Message(id=str(i + 1), text=line.rstrip("\n"))
            for i, line in enumerate(sys.stdin)
        ]
    out = open(output_path, "w", encoding="utf-8") if output_path else sys.stdout
    try:
        for m in messages:
            score = model.score(m)
            verdict = "urgent" if score > model.threshold else "non_urgent"
            out.write(json.dumps({"id": m.id, "score": score, "verdict": verdict}) + "\n")
    finally:
        if output_path:
            out.close()


@main.command("evaluate-rq1")
@click.option("--labeled", "labeled_path", required=True, type=click.Path(exists=True))
@click.option("--background", "background_path", required=True, type=click.Path(exists=True))
@click.option("--wiki", "wiki_path", required=True, type=click.Path(exists=True))
@click.option("--trials", type=int, default=None)
@click.option("--systems", type=str, default=None,
              help="Comma-separated subset of the seven systems.")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None)
@seed_option
@config_option
def evaluate_rq1_cmd(labeled_path, background_path, wiki_path, trials, systems,
                     report_path, seed, config_path):
    """Run the single-crisis protocol and print the results table."""
    cfg = _cfg(config_path, seed)
    labeled = _load_labeled(labeled_path, cfg)
    background = _load_corpus_tokens(background_path, cfg)
    wiki = _load_wiki(wiki_path)
    report = evaluation.run_rq1_experiment(
        labeled,
        background,
        wiki,
        trials=trials or cfg.eval.trials,
        seed=cfg.seed,
        systems=[s.strip() for s in systems.split(",")] if systems else None,
        hyperparams=cfg.embedding_hyperparams(),
        keywords=tuple(cfg.keywords),
        reg_grid=tuple(cfg.classifier.reg_grid),
        cv_folds=cfg.classifier.cv_folds,
        weight_step=cfg.ensemble.weight_step,
        mode=cfg.classifier.mode,
        train_fraction=cfg.eval.train_fraction,
    )
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    click.echo(report.to_table())


@main.command("evaluate-rq2")
@click.option("--source-labeled", "source_labeled_path", required=True, type=click.Path(exists=True))
@click.option("--source-corpus", "source_corpus_path", required=True, type=click.Path(exists=True))
@click.option("--target", "target_path", required=True, type=click.Path(exists=True))
@click.option("--wiki", "wiki_path", required=True, type=click.Path(exists=True))
@click.option("-u", "--upsample", "u", type=int, default=None)
@click.option("--trials", type=int, default=None)
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None)
@seed_option
@config_option
def evaluate_rq2_cmd(source_labeled_path, source_corpus_path, target_path, wiki_path,
                     u, trials, report_path, seed, config_path):
    """Run the transfer protocol and print the results table."""
    cfg = _cfg(config_path, seed)
    source_labeled = _load_labeled(source_labeled_path, cfg, role="source-labeled")
    source_corpus = _load_corpus_tokens(source_corpus_path, cfg)
    target = _load_labeled(target_path, cfg, role="target")
    wiki = _load_wiki(wiki_path)
    report = evaluation.run_rq2_experiment(
        source_labeled,
        source_corpus,
        target,
        wiki,
        u=u or cfg.transfer.upsample_factor,
        trials=trials or cfg.eval.trials,
        seed=cfg.seed,
        hyperparams=cfg.embedding_hyperparams(),
        keywords=tuple(cfg.keywords),
        reg_grid=tuple(cfg.classifier.reg_grid),
        cv_folds=cfg.classifier.cv_folds,
        mode=cfg.classifier.mode,
        train_fraction=cfg.eval.train_fraction,
    )
    if report_path:
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    click.echo(report.to_table())


@main.group("active")
def active_group():
    """Active-learning labeling service."""


@active_group.command("serve")
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True),
              help="Unlabeled corpus to label.")
@click.option("--wiki", "wiki_path", type=click.Path(exists=True), default=None)
@click.option("--model", "model_dir", type=click.Path(exists=True), default=None,
              help="Optional trained ensemble for the /v1/score endpoint.")
@click.option("--sessions-dir", type=click.Path(file_okay=False), default="sessions")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@click.option("--no-local-embeddings", is_flag=True, default=False,
              help="Skip training pool embeddings at startup (manual features only).")
@click.option("--ui", "ui_dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Serve the built labeling frontend from this directory.")
@seed_option
@config_option
def active_serve_cmd(pool_path, wiki_path, model_dir, sessions_dir, host, port,
                     no_local_embeddings, ui_dir, seed, config_path):
    """Serve labeling sessions (and scoring, if a model is given) over HTTP."""
    import uvicorn

    from .service import create_app

    cfg = _cfg(config_path, seed)
    pool = preprocess.load_messages(pool_path)
    local = None
    if not no_local_embeddings:
        click.echo(f"training pool embeddings on {len(pool)} messages...")
        local = emb.train_subword_skipgram(
            preprocess.tokenize_all(pool, cfg.drop_rules()),
            cfg.embedding_hyperparams(),
            seed=derive_seed(cfg.seed, "pool-embedding"),
        )
    wiki = _load_wiki(wiki_path) if wiki_path else None
    featurizer = Featurizer(tuple(cfg.keywords), local_model=local, wiki_model=wiki)
    model = None
    if model_dir:
        bundle = model_dir
        if os.path.isdir(bundle):
            bundle = os.path.join(bundle, "ensemble.json")
        model = load_ensemble(bundle)
    app = create_app(
        model=model, pool=pool, featurizer=featurizer, config=cfg,
        sessions_dir=sessions_dir, ui_dir=ui_dir,
    )
    click.echo(f"serving on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("synth-corpus")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--background", "n_background", type=int, default=5000)
@click.option("--labeled", "n_labeled", type=int, default=400)
@click.option("--target", "n_target", type=int, default=0,
              help="Also emit a labeled set from a shifted domain for transfer runs.")
@click.option("--wiki-dim", type=int, default=50)
@seed_option
@config_option
def synth_corpus_cmd(out_dir, n_background, n_labeled, n_target, wiki_dim, seed, config_path):
    """Generate a synthetic crisis corpus (background, labels, vector file)."""
    cfg = _cfg(config_path, seed)
    os.makedirs(out_dir, exist_ok=True)
    background, labeled = synth.generate_corpus(
        n_background, n_labeled, seed=derive_seed(cfg.seed, "synth", "source"), domain="flood"
    )
    preprocess.save_jsonl(background, os.path.join(out_dir, "background.jsonl"))
    preprocess.save_jsonl(labeled, os.path.join(out_dir, "labeled.jsonl"))
    synth.write_wiki_vectors(
        os.path.join(out_dir, "wiki.txt"), dim=wiki_dim, seed=derive_seed(cfg.seed, "synth", "wiki")
    )
    if n_target:
        _, target = synth.generate_corpus(
            0, n_target, seed=derive_seed(cfg.seed, "synth", "target"),
            domain="quake", id_prefix="tgt-",
        )
        preprocess.save_jsonl(target, os.path.join(out_dir, "target.jsonl"))
    click.echo(f"synthetic corpus -> {out_dir}")


if __name__ == "__main__":
    main()
