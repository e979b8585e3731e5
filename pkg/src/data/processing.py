# -*- coding: utf-8 -*-
"""
Query-log cleaning: navigational queries are dropped, the remaining ones are
stripped to lowercase alphanumeric tokens and deduplicated.
"""

import os
from dataclasses import dataclass
from typing import Generator, Iterable, Iterator, List, Optional, Set, Tuple

from tqdm import tqdm

from src.index.tokenizer import clean_text
from src.utils.logging import get_logger

logger = get_logger(__name__)

URL_MARKERS = ("http", "www.", ".com", ".net", ".org", ".edu")


@dataclass
class FilterStats:
    read: int = 0
    navigational: int = 0
    empty: int = 0
    duplicates: int = 0
    kept: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def is_navigational(query: str) -> bool:
    lowered = query.lower()
    return any(marker in lowered for marker in URL_MARKERS)


def filter_queries(raw: Iterable[str], stats: Optional[FilterStats] = None) -> Iterator[str]:
    """Yield each distinct cleaned query once, in first-seen order."""
    stats = stats if stats is not None else FilterStats()
    seen: Set[str] = set()
    for query in raw:
        stats.read += 1
        if is_navigational(query):
            stats.navigational += 1
            continue
        cleaned = clean_text(query)
        if not cleaned:
            stats.empty += 1
            continue
        if cleaned in seen:
            stats.duplicates += 1
            continue
        seen.add(cleaned)
        stats.kept += 1
        yield cleaned


class QueryLogLoader:
    """
    Streams a raw query log (one query per line, UTF-8) in batches and writes
    the cleaned, numbered query file.
    """

    def __init__(self, path: str, batch_size: int = 10000, progress: bool = False):
        self.path = path
        self.batch_size = batch_size
        self.progress = progress
        self.stats = FilterStats()

    def iter_batches(self, max_batch: Optional[int] = None) -> Generator[List[str], None, None]:
        """Yield batches of raw lines."""
        batch: List[str] = []
        batch_count = 0
        with open(self.path, "r", encoding="utf-8", errors="replace") as f:
            for line in f:
                batch.append(line.rstrip("\r\n"))
                if len(batch) >= self.batch_size:
                    yield batch
                    batch = []
                    batch_count += 1
                    if max_batch and batch_count >= max_batch:
                        return
        if batch:
            yield batch

    def iter_lines(self) -> Iterator[str]:
        for batch in tqdm(self.iter_batches(), desc="query log", disable=not self.progress):
            yield from batch

    def cleaned_queries(self) -> List[Tuple[str, str]]:
        """Cleaned queries numbered ``q1, q2, ...`` in first-seen order."""
        self.stats = FilterStats()
        queries = [(f"q{i}", q) for i, q in enumerate(filter_queries(self.iter_lines(), self.stats), start=1)]
        logger.info(f"Query log {self.path}: {self.stats.as_dict()}")
        return queries

    def export(self, output_path: str) -> FilterStats:
        """Write ``qid<TAB>query`` lines and return the filtering counts."""
        os.makedirs(os.path.dirname(os.path.abspath(output_path)), exist_ok=True)
        queries = self.cleaned_queries()
        with open(output_path, "w", encoding="utf-8") as f_out:
            for qid, query in queries:
                f_out.write(f"{qid}\t{query}\n")
        logger.info(f"Exported {len(queries)} queries to {output_path}")
        return self.stats
