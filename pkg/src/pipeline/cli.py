# -*- coding: utf-8 -*-
"""
Command-line surface of the pipeline.

Every command resolves one RunConfig (packaged defaults, then ``--config`` or
RELEMB_CONFIG, then ``--set section.key=value``), writes its artifacts under
``paths.output`` and a ``<command>.manifest.yaml`` echoing the config.
"""

import argparse
import logging
import os
import sys
from typing import Callable, Dict, List, Optional, Sequence

import pandas as pd
import yaml

from config import CONFIG_ENV_VAR, RunConfig, load_run_config
from src.classification.query_classification import (
    LabelSet,
    classify_queries,
    compute_centroids,
    cross_validate_classification,
    evaluate_classification,
    read_categories,
    read_labeled_queries,
    write_predictions,
)
from src.core.exceptions import ConfigError, DataError, DivergenceError, MissingInputError, RelembError
from src.data.dataset import read_training_set
from src.data.pipeline import ConcurrentTrainingPipeline
from src.data.processing import QueryLogLoader
from src.data.synthetic import topic_collection
from src.embedding.checkpoint import load_model
from src.embedding.inference import write_term_lists
from src.embedding.model import RPE
from src.embedding.pipeline import TrainingPipeline, load_noise
from src.embedding.trainer import tune_hyperparameters
from src.evaluation.metrics import evaluate_run, write_metric_file
from src.expansion.query_expansion import (
    ExpansionConfig,
    expand_query,
    expansion_terms,
    parameter_sensitivity,
    run_expansion_experiment,
)
from src.index.corpus import CorpusIndex, build_index, read_corpus
from src.index.tokenizer import load_stopwords, tokenize
from src.pipeline.experiments import compare_models, training_sweeps
from src.retrieval.language_model import kl_retrieve, ql_retrieve
from src.retrieval.trec import read_qrels, read_queries, read_run, write_run
from src.utils.logging import PACKAGE_LOGGER, get_logger, setup_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_MISSING_INPUT = 4
EXIT_DATA = 5
EXIT_DIVERGENCE = 6

COMMANDS: Dict[str, Callable[[RunConfig, argparse.Namespace], dict]] = {}
HELP: Dict[str, str] = {}


def command(name: str, help: str):
    def register(fn):
        COMMANDS[name] = fn
        HELP[name] = help
        return fn
    return register


def _output(config: RunConfig, *parts: str) -> str:
    path = os.path.join(config.paths.output, *parts)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    return path


def _load_index(config: RunConfig) -> CorpusIndex:
    return CorpusIndex.load(config.require("index")["index"])


def _load_model(config: RunConfig, prefix: Optional[str] = None):
    return load_model(prefix or config.paths.model)


def _tokenized_queries(config: RunConfig):
    stopwords = load_stopwords(config.paths.stopwords)
    return [(qid, tokenize(text, stopwords)) for qid, text in read_queries(config.require("queries")["queries"])]


def _categories(config: RunConfig) -> Optional[List[str]]:
    return read_categories(config.require("categories")["categories"]) if config.paths.categories else None


def _labeled(config: RunConfig, categories: Optional[List[str]]) -> Optional[List[LabelSet]]:
    if not config.paths.labels:
        return None
    return read_labeled_queries(config.require("labels")["labels"], categories)


@command("build-index", "tokenize the corpus and write the binary index")
def cmd_build_index(config: RunConfig, args) -> dict:
    corpus = config.require("corpus")["corpus"]
    index = build_index(
        read_corpus(corpus),
        stopwords=load_stopwords(config.paths.stopwords),
        min_cf=config.index.min_cf,
        workers=config.workers,
        progress=config.progress,
    )
    os.makedirs(os.path.dirname(os.path.abspath(config.paths.index)), exist_ok=True)
    index.save(config.paths.index)
    vocab_path = _output(config, "vocabulary.tsv")
    index.write_vocabulary(vocab_path)
    return {
        "artifacts": {"index": config.paths.index, "vocabulary": vocab_path},
        "stats": {"documents": index.num_docs, "terms": index.num_terms, "tokens": index.vocabulary.total_tokens},
    }


@command("filter-queries", "clean and deduplicate the raw query log")
def cmd_filter_queries(config: RunConfig, args) -> dict:
    loader = QueryLogLoader(config.require("query_log")["query_log"], progress=config.progress)
    stats = loader.export(config.paths.train_queries)
    return {"artifacts": {"train_queries": config.paths.train_queries}, "stats": stats.as_dict()}


@command("gen-train", "retrieve feedback documents and write relevance-model training pairs")
def cmd_gen_train(config: RunConfig, args) -> dict:
    training = ConcurrentTrainingPipeline(config).run()
    return {
        "artifacts": {"training": config.paths.training},
        "stats": {"queries": len(training), "skipped": len(training.skipped)},
    }


@command("train", "train an RLM or RPE embedding model")
def cmd_train(config: RunConfig, args) -> dict:
    model = TrainingPipeline(config).run()
    losses = model.metadata.get("epoch_losses", [])
    return {
        "artifacts": {"model": config.paths.model},
        "stats": {"final_loss": losses[-1] if losses else None, "epochs": len(losses)},
    }


@command("expand", "write expanded query models and expansion terms")
def cmd_expand(config: RunConfig, args) -> dict:
    index = _load_index(config)
    model = _load_model(config)
    cfg = ExpansionConfig(alpha=config.expansion.alpha, num_terms=config.expansion.terms, mu=config.retrieval.mu)
    queries = read_queries(config.require("queries")["queries"])
    stopwords = load_stopwords(config.paths.stopwords)

    models_path = _output(config, "expanded_queries.tsv")
    fallbacks = 0
    with open(models_path, "w", encoding="utf-8") as f:
        for qid, text in queries:
            tokens = tokenize(text, stopwords)
            if not index.vocabulary.lookup(tokens):
                logger.warning(f"Query '{qid}' has no in-vocabulary terms; skipped")
                continue
            qlm = expand_query(model, index, tokens, cfg, query_id=qid)
            fallbacks += qlm.fallback
            dist = " ".join(f"{index.vocabulary.terms[t]}:{p:.12g}" for t, p in qlm.top())
            f.write(f"{qid}\t{dist}\n")
    terms_path = _output(config, "expansion_terms.tsv")
    write_term_lists(terms_path, expansion_terms(model, index, queries, cfg.num_terms, stopwords), index.vocabulary.terms)
    return {
        "artifacts": {"expanded_queries": models_path, "expansion_terms": terms_path},
        "stats": {"queries": len(queries), "fallbacks": int(fallbacks)},
    }


@command("search", "rank documents for the evaluation queries (optionally expanded)")
def cmd_search(config: RunConfig, args) -> dict:
    index = _load_index(config)
    depth, mu = config.retrieval.depth, config.retrieval.mu
    queries = _tokenized_queries(config)
    runs = {}
    if args.expand:
        model = _load_model(config)
        cfg = ExpansionConfig(alpha=config.expansion.alpha, num_terms=config.expansion.terms, mu=mu)
        for qid, tokens in queries:
            if not index.vocabulary.lookup(tokens):
                logger.warning(f"Query '{qid}' has no in-vocabulary terms; skipped")
                continue
            runs[qid] = kl_retrieve(index, expand_query(model, index, tokens, cfg, query_id=qid), depth, mu, qid)
    else:
        for qid, tokens in queries:
            if not index.vocabulary.lookup(tokens):
                logger.warning(f"Query '{qid}' has no in-vocabulary terms; skipped")
                continue
            runs[qid] = ql_retrieve(index, tokens, depth, mu, query_id=qid)
    run_path = _output(config, "run.txt")
    write_run(runs, run_path, tag=config.retrieval.tag)
    return {"artifacts": {"run": run_path}, "stats": {"queries": len(runs), "expanded": bool(args.expand)}}


@command("classify", "assign categories to labeled test queries by centroid similarity")
def cmd_classify(config: RunConfig, args) -> dict:
    paths = config.require("labels", "test_labels")
    model = _load_model(config)
    categories = _categories(config)
    stopwords = load_stopwords(config.paths.stopwords)
    train = read_labeled_queries(paths["labels"], categories)
    test = read_labeled_queries(paths["test_labels"], categories)

    centroids = compute_centroids(model, train, categories, stopwords)
    predictions, unprojected = classify_queries(
        model, centroids, [(item.query_id, item.text) for item in test], config.classification.t, stopwords
    )
    predictions_path = _output(config, "predictions.tsv")
    write_predictions(predictions, predictions_path)
    scores = evaluate_classification(predictions, test, config.classification.averaging)
    logger.info(f"Precision {scores.precision:.4f}, F1 {scores.f1:.4f}")
    return {
        "artifacts": {"predictions": predictions_path},
        "stats": {"precision": scores.precision, "recall": scores.recall, "f1": scores.f1,
                  "unprojected": unprojected},
    }


@command("eval", "evaluate a TREC run against qrels")
def cmd_eval(config: RunConfig, args) -> dict:
    paths = config.require("run", "qrels")
    frame = evaluate_run(read_run(paths["run"]), read_qrels(paths["qrels"]))
    metrics_path = _output(config, "eval.metrics")
    write_metric_file(frame, metrics_path)
    summary = {metric: float(value) for metric, value in frame.loc["all"].items()}
    logger.info(" ".join(f"{k}={v:.4f}" for k, v in summary.items()))
    return {"artifacts": {"metrics": metrics_path}, "stats": summary}


@command("cv-expansion", "cross-validate expansion parameters against the MLE baseline")
def cmd_cv_expansion(config: RunConfig, args) -> dict:
    paths = config.require("queries", "qrels")
    report = run_expansion_experiment(
        _load_model(config),
        _load_index(config),
        read_queries(paths["queries"]),
        read_qrels(paths["qrels"]),
        grid=config.expansion,
        mu=config.retrieval.mu,
        depth=config.retrieval.depth,
        stopwords=load_stopwords(config.paths.stopwords),
        workers=config.workers,
        run_dir=_output(config, "cv_expansion", "runs", "") if args.dump_runs else None,
        progress=config.progress,
    )
    directory = _output(config, "cv_expansion", "")
    report.write(directory)
    print(report.table())
    return {
        "artifacts": {"report": directory},
        "stats": {"folds": report.folds, "p_values": {m: r.p_value for m, r in report.ttests.items()}},
    }


@command("cv-classify", "k-fold cross-validated query classification")
def cmd_cv_classify(config: RunConfig, args) -> dict:
    categories = _categories(config)
    labeled = read_labeled_queries(config.require("labels")["labels"], categories)
    cls = config.classification
    stopwords = load_stopwords(config.paths.stopwords)

    def _run(prefix=None):
        return cross_validate_classification(
            _load_model(config, prefix), labeled, cls.t_grid, cls.folds, config.seed, cls.averaging, categories, stopwords
        )

    result = _run()
    directory = _output(config, "cv_classify", "")
    result.folds.to_csv(os.path.join(directory, "folds.tsv"), sep="\t", index=False, float_format="%.6f")
    result.per_query_f1.to_csv(os.path.join(directory, "per_query_f1.tsv"), sep="\t", header=False, float_format="%.6f")
    stats = {"precision": result.precision, "f1": result.f1}
    if args.compare:
        test = result.compare(_run(args.compare))
        stats.update({"compare_model": args.compare, "p_value": test.p_value, "significant": test.significant})
    logger.info(f"Cross-validated precision {result.precision:.4f}, F1 {result.f1:.4f}")
    return {"artifacts": {"report": directory}, "stats": stats}


@command("tune", "grid-search learning rate and batch size by final training loss")
def cmd_tune(config: RunConfig, args) -> dict:
    index = _load_index(config)
    training = read_training_set(config.require("training")["training"], index.vocabulary)
    best, table = tune_hyperparameters(
        index,
        training,
        config.training,
        learning_rates=args.learning_rates,
        batch_sizes=args.batch_sizes,
        positives=args.positives,
        negative_multiples=args.negative_multiples,
    )
    table_path = _output(config, "tune.tsv")
    table.to_csv(table_path, sep="\t", index=False)
    best_path = _output(config, "tuned_training.yaml")
    with open(best_path, "w", encoding="utf-8") as f:
        yaml.safe_dump({"training": best.model_dump(mode="json")}, f, sort_keys=True)
    return {
        "artifacts": {"table": table_path, "best": best_path},
        "stats": {"learning_rate": best.learning_rate, "batch_size": best.batch_size},
    }


@command("sensitivity", "expansion parameter sweeps plus retraining over embedding size and training-set size")
def cmd_sensitivity(config: RunConfig, args) -> dict:
    paths = config.require("queries", "qrels")
    index = _load_index(config)
    queries = read_queries(paths["queries"])
    qrels = read_qrels(paths["qrels"])
    stopwords = load_stopwords(config.paths.stopwords)
    frame = parameter_sensitivity(
        _load_model(config),
        index,
        queries,
        qrels,
        grid=config.expansion,
        mu=config.retrieval.mu,
        depth=config.retrieval.depth,
        stopwords=stopwords,
        workers=config.workers,
        progress=config.progress,
    )

    sweep = config.sensitivity
    if sweep.dims or sweep.fractions:
        training_dir = config.require("training")["training"]
        training = read_training_set(training_dir, index.vocabulary)
        noise = None
        if config.training.kind == RPE:
            noise = load_noise(training_dir, training, config.training.noise_exponent)
        categories = _categories(config)
        retrained = training_sweeps(
            index,
            training,
            config.training,
            queries,
            qrels,
            dims=sweep.dims,
            fractions=sweep.fractions,
            labeled=_labeled(config, categories),
            alpha=config.expansion.alpha,
            num_terms=config.expansion.terms,
            classification=config.classification,
            categories=categories,
            mu=config.retrieval.mu,
            depth=config.retrieval.depth,
            stopwords=stopwords,
            noise=noise,
            workers=config.workers,
        )
        frame = pd.concat([frame, retrained], ignore_index=True)
    path = _output(config, "sensitivity.tsv")
    frame.to_csv(path, sep="\t", index=False, float_format="%.6f")
    return {"artifacts": {"sensitivity": path}, "stats": {"points": len(frame)}}


@command("compare", "contrast two checkpoints on expansion MAP and classification F1")
def cmd_compare(config: RunConfig, args) -> dict:
    paths = config.require("queries", "qrels")
    first, second = _load_model(config), _load_model(config, args.against)
    names = [first.kind, second.kind]
    if names[0] == names[1]:
        names = [config.paths.model, args.against]
    categories = _categories(config)
    comparison = compare_models(
        list(zip(names, (first, second))),
        _load_index(config),
        read_queries(paths["queries"]),
        read_qrels(paths["qrels"]),
        labeled=_labeled(config, categories),
        grid=config.expansion,
        classification=config.classification,
        categories=categories,
        mu=config.retrieval.mu,
        depth=config.retrieval.depth,
        stopwords=load_stopwords(config.paths.stopwords),
        seed=config.seed,
        workers=config.workers,
        progress=config.progress,
    )
    path = _output(config, "compare", "comparison.tsv")
    comparison.write(path)
    print(comparison.table().to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    return {"artifacts": {"comparison": path}, "stats": {"models": names, "signs": comparison.signs()}}


@command("toy-data", "write the synthetic two-topic toy collection and a matching config")
def cmd_toy_data(config: RunConfig, args) -> dict:
    directory = args.directory or os.path.join(config.paths.output, "toy")
    collection = topic_collection(num_topics=args.topics, seed=config.seed)
    paths = collection.write(directory)
    config_path = os.path.join(directory, "toy_config.yaml")
    toy = {"paths": {"corpus": paths["corpus"], "query_log": paths["query_log"], "queries": paths["queries"],
                     "qrels": paths["qrels"], "labels": paths["labels"], "test_labels": paths["labels"],
                     "categories": paths["categories"]}}
    with open(config_path, "w", encoding="utf-8") as f:
        yaml.safe_dump(toy, f, sort_keys=True)
    return {"artifacts": {**paths, "config": config_path}, "stats": {"documents": len(collection.documents)}}


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v]


def _ints(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relemb",
        description="Relevance-based word embeddings: indexing, training, expansion and classification.",
    )
    parser.add_argument("--config", help=f"YAML run config (default: ${CONFIG_ENV_VAR} if set)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value; repeatable")
    parser.add_argument("--log-file", help="also write logs to this file")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    parsers = {name: sub.add_parser(name, help=HELP[name], description=HELP[name]) for name in COMMANDS}
    parsers["search"].add_argument("--expand", action="store_true", help="expand queries with the trained model")
    parsers["cv-expansion"].add_argument("--dump-runs", action="store_true", help="write a TREC run per grid point")
    parsers["cv-classify"].add_argument("--compare", metavar="PREFIX", help="second checkpoint for a paired t-test")
    parsers["compare"].add_argument("--against", required=True, metavar="PREFIX",
                                    help="checkpoint to contrast with paths.model")
    parsers["tune"].add_argument("--learning-rates", type=_floats, default=[0.001, 0.01, 0.1, 1.0])
    parsers["tune"].add_argument("--batch-sizes", type=_ints, default=[64, 128, 256])
    parsers["tune"].add_argument("--positives", type=_ints, default=None, help="eta+ grid (rpe)")
    parsers["tune"].add_argument("--negative-multiples", type=_ints, default=None, help="eta-/eta+ grid (rpe)")
    parsers["toy-data"].add_argument("--directory", help="output directory (default: <output>/toy)")
    parsers["toy-data"].add_argument("--topics", type=int, default=2)
    return parser


def write_manifest(config: RunConfig, name: str, result: dict) -> str:
    path = _output(config, f"{name}.manifest.yaml")
    document = {"command": name, "config": config.echo(), **result}
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(document, f, sort_keys=True, allow_unicode=True, default_flow_style=False)
    return path


def _one_line(error: BaseException) -> str:
    return " ".join(str(error).split()) or type(error).__name__


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logger(PACKAGE_LOGGER, log_file=args.log_file, level=getattr(logging, args.log_level))

    try:
        config = load_run_config(args.config, args.overrides)
        logger.info(f"Running '{args.command}'")
        result = COMMANDS[args.command](config, args)
        write_manifest(config, args.command, result)
    except ConfigError as e:
        print(f"relemb: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInputError as e:
        print(f"relemb: {e}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except DivergenceError as e:
        print(f"relemb: training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (DataError, RelembError) as e:
        print(f"relemb: {e}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as e:
        print(f"relemb: missing input: {e.filename or e}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except ValueError as e:
        print(f"relemb: invalid input: {_one_line(e)}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:
        logger.debug("Unhandled error", exc_info=True)
        print(f"relemb: {type(e).__name__}: {_one_line(e)}", file=sys.stderr)
        return EXIT_FAILURE
    logger.info(f"'{args.command}' finished")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
