# -*- coding: utf-8 -*-
"""
Checkpoint files, all sharing one path prefix::

    <prefix>.manifest.yaml   kind, output layer, N, d, seed, config echo
    <prefix>.query.vec       W_Q in word2vec text format ("N d" then "term v1 .. vd")
    <prefix>.term.vec        W_w (RPE, RLM with the exact softmax)
    <prefix>.nodes.vec       internal tree nodes, "N-1 d" then "node v1 .. vd" (RLM-hs)
    <prefix>.tree            term<TAB>node path<TAB>code (RLM-hs)
    <prefix>.bias            term<TAB>b_w (only when the bias is enabled)

Values are printed with 17 significant digits so a reload is exact.
"""

import os
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from src.core.exceptions import CheckpointFormatError, MissingInputError
from src.embedding.huffman import HuffmanTree
from src.embedding.model import RLM, EmbeddingModel
from src.utils.logging import get_logger

logger = get_logger(__name__)

CHECKPOINT_VERSION = 1
SUFFIXES = {
    "manifest": ".manifest.yaml",
    "query": ".query.vec",
    "term": ".term.vec",
    "nodes": ".nodes.vec",
    "tree": ".tree",
    "bias": ".bias",
}


def checkpoint_paths(prefix: str) -> Dict[str, str]:
    return {name: prefix + suffix for name, suffix in SUFFIXES.items()}


def _fmt(row: np.ndarray) -> str:
    return " ".join(f"{v:.17g}" for v in row)


def write_vectors(path: str, labels: Sequence[str], matrix: np.ndarray) -> None:
    n, d = matrix.shape
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{n} {d}\n")
        for label, row in zip(labels, matrix):
            f.write(f"{label} {_fmt(row)}\n")


def read_vectors(path: str) -> Tuple[List[str], np.ndarray]:
    if not os.path.exists(path):
        raise MissingInputError(path, role="vector file")
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise CheckpointFormatError("expected header 'N d'", path=path, line=1)
        try:
            n, d = int(header[0]), int(header[1])
        except ValueError:
            raise CheckpointFormatError("expected header 'N d'", path=path, line=1) from None
        labels: List[str] = []
        matrix = np.zeros((n, d), dtype=np.float64)
        line_no = 1
        for line_no, line in enumerate(f, start=2):
            parts = line.rstrip("\r\n").split(" ")
            if len(parts) != d + 1:
                raise CheckpointFormatError(
                    f"expected a label and {d} values, found {len(parts) - 1} values", path=path, line=line_no
                )
            if len(labels) == n:
                raise CheckpointFormatError(f"more than {n} rows", path=path, line=line_no)
            try:
                matrix[len(labels)] = [float(v) for v in parts[1:]]
            except ValueError:
                raise CheckpointFormatError("non-numeric vector entry", path=path, line=line_no) from None
            labels.append(parts[0])
    if len(labels) != n:
        raise CheckpointFormatError(f"header announces {n} rows, found {len(labels)}", path=path, line=line_no)
    return labels, matrix


def save_model(model: EmbeddingModel, prefix: str, losses: Optional[Sequence[float]] = None) -> Dict[str, str]:
    """Write every checkpoint file for ``model``; returns the paths written."""
    directory = os.path.dirname(prefix)
    if directory:
        os.makedirs(directory, exist_ok=True)
    paths = checkpoint_paths(prefix)
    written = {}

    write_vectors(paths["query"], model.terms, model.query_vectors)
    written["query"] = paths["query"]
    if model.term_vectors is not None:
        write_vectors(paths["term"], model.terms, model.term_vectors)
        written["term"] = paths["term"]
    if model.uses_tree:
        write_vectors(paths["nodes"], [str(i) for i in range(model.tree.num_internal)], model.node_vectors)
        with open(paths["tree"], "w", encoding="utf-8") as f:
            f.writelines(line + "\n" for line in model.tree.to_lines(model.terms))
        written["nodes"], written["tree"] = paths["nodes"], paths["tree"]
    if model.bias is not None:
        with open(paths["bias"], "w", encoding="utf-8") as f:
            for term, value in zip(model.terms, model.bias):
                f.write(f"{term}\t{value:.17g}\n")
        written["bias"] = paths["bias"]

    metadata = {k: v for k, v in model.metadata.items() if k != "epoch_losses"}
    manifest = {
        "version": CHECKPOINT_VERSION,
        "kind": model.kind,
        "output": model.output,
        "num_terms": model.num_terms,
        "dim": model.dim,
        "bias": model.bias is not None,
        "metadata": metadata,
    }
    with open(paths["manifest"], "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, sort_keys=True, allow_unicode=True)
    written["manifest"] = paths["manifest"]

    losses = losses if losses is not None else model.metadata.get("epoch_losses")
    if losses:
        loss_path = os.path.join(directory or ".", "loss.tsv")
        with open(loss_path, "w", encoding="utf-8") as f:
            f.write("epoch\tloss\n")
            for epoch, value in enumerate(losses, start=1):
                f.write(f"{epoch}\t{value:.10g}\n")
        written["loss"] = loss_path

    logger.info(f"Saved {model.kind.upper()} checkpoint ({model.num_terms} terms, d={model.dim}) to {prefix}")
    return written


def _read_bias(path: str, terms: Sequence[str]) -> np.ndarray:
    index = {t: i for i, t in enumerate(terms)}
    bias = np.full(len(terms), np.nan)
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            term, sep, value = line.rstrip("\r\n").partition("\t")
            if not sep:
                raise CheckpointFormatError("expected 'term<TAB>value'", path=path, line=line_no)
            if term not in index:
                raise CheckpointFormatError(f"unknown term '{term}'", path=path, line=line_no)
            try:
                bias[index[term]] = float(value)
            except ValueError:
                raise CheckpointFormatError("non-numeric bias", path=path, line=line_no) from None
    if np.any(np.isnan(bias)):
        raise CheckpointFormatError("bias missing for some terms", path=path)
    return bias


def load_model(prefix: str) -> EmbeddingModel:
    """Inverse of save_model; header, term and dimension mismatches are rejected."""
    paths = checkpoint_paths(prefix)
    if not os.path.exists(paths["manifest"]):
        raise MissingInputError(paths["manifest"], role="checkpoint manifest")
    with open(paths["manifest"], "r", encoding="utf-8") as f:
        manifest = yaml.safe_load(f) or {}
    for key in ("kind", "output", "num_terms", "dim"):
        if key not in manifest:
            raise CheckpointFormatError(f"manifest lacks '{key}'", path=paths["manifest"])
    if manifest.get("version", CHECKPOINT_VERSION) != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {manifest['version']}", path=paths["manifest"])

    kind, output = manifest["kind"], manifest["output"]
    n, d = int(manifest["num_terms"]), int(manifest["dim"])
    terms, query_vectors = read_vectors(paths["query"])
    if query_vectors.shape != (n, d):
        raise CheckpointFormatError(f"query vectors are {query_vectors.shape}, manifest says ({n}, {d})", path=paths["query"])

    term_vectors = node_vectors = tree = bias = None
    if kind == RLM and output == "hs":
        _, node_vectors = read_vectors(paths["nodes"])
        if node_vectors.shape != (max(n - 1, 0), d):
            raise CheckpointFormatError("node vectors do not match the vocabulary", path=paths["nodes"])
        if not os.path.exists(paths["tree"]):
            raise MissingInputError(paths["tree"], role="Huffman tree")
        with open(paths["tree"], "r", encoding="utf-8") as f:
            tree = HuffmanTree.from_lines([line for line in f if line.strip()], terms, path=paths["tree"])
    else:
        term_labels, term_vectors = read_vectors(paths["term"])
        if term_vectors.shape[1] != d:
            raise CheckpointFormatError(
                f"term vectors have d={term_vectors.shape[1]}, query vectors d={d}", path=paths["term"]
            )
        if term_labels != terms:
            raise CheckpointFormatError("term vectors list different terms than query vectors", path=paths["term"])
    if manifest.get("bias"):
        bias = _read_bias(paths["bias"], terms)

    return EmbeddingModel(
        kind,
        terms,
        query_vectors,
        term_vectors=term_vectors,
        node_vectors=node_vectors,
        bias=bias,
        tree=tree,
        output=output,
        metadata=manifest.get("metadata") or {},
    )
