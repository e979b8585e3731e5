# -*- coding: utf-8 -*-
"""Readers and writers for query files, TREC runs and TREC qrels."""

from typing import Dict, Iterable, List, Mapping, Tuple

import pandas as pd

from src.core.exceptions import FormatError
from src.evaluation.metrics import Qrels
from src.retrieval.language_model import RankedList


def read_queries(path: str) -> List[Tuple[str, str]]:
    """``qid<TAB>query text`` lines, in file order."""
    queries = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            qid, sep, text = line.partition("\t")
            if not sep or not qid:
                raise FormatError("expected 'qid<TAB>query'", path=path, line=line_no)
            if qid in seen:
                raise FormatError(f"duplicate query id '{qid}'", path=path, line=line_no)
            seen.add(qid)
            queries.append((qid, text))
    return queries


def write_queries(queries: Iterable[Tuple[str, str]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for qid, text in queries:
            f.write(f"{qid}\t{text}\n")


def write_run(runs: Mapping[str, RankedList], path: str, tag: str = "relemb") -> None:
    """TREC run lines ``qid Q0 docid rank score tag``, queries in id order."""
    with open(path, "w", encoding="utf-8") as f:
        for qid in sorted(runs):
            for rank, (doc_id, score) in enumerate(runs[qid], start=1):
                f.write(f"{qid} Q0 {doc_id} {rank} {score:.10g} {tag}\n")


def read_run(path: str) -> Dict[str, RankedList]:
    frame = _read_columns(path, ["qid", "q0", "docid", "rank", "score", "tag"])
    frame["rank"] = frame["rank"].astype(int)
    frame["score"] = frame["score"].astype(float)
    runs = {}
    for qid, group in frame.groupby("qid", sort=True):
        group = group.sort_values(["score", "docid"], ascending=[False, True])
        runs[qid] = RankedList(qid, list(zip(group["docid"], group["score"])))
    return runs


def read_qrels(path: str) -> Qrels:
    frame = _read_columns(path, ["qid", "iter", "docid", "rel"])
    qrels = Qrels()
    for qid, doc_id, rel in zip(frame["qid"], frame["docid"], frame["rel"]):
        qrels.add(qid, doc_id, int(rel))
    return qrels


def write_qrels(qrels: Qrels, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for qid in qrels.query_ids:
            for doc_id, grade in sorted(qrels.for_query(qid).items()):
                f.write(f"{qid} 0 {doc_id} {grade}\n")


def _read_columns(path: str, names: List[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(
            path, sep=r"\s+", header=None, names=names, dtype=str, engine="python", on_bad_lines="error"
        )
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=names)
    except (pd.errors.ParserError, ValueError) as e:
        raise FormatError(f"malformed TREC file: {e}", path=path) from e
    if frame.isnull().values.any():
        bad = int(frame.isnull().any(axis=1).values.argmax()) + 1
        raise FormatError(f"expected {len(names)} columns", path=path, line=bad)
    return frame
