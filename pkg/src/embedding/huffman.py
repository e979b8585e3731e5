# -*- coding: utf-8 -*-
"""
Huffman coding of the vocabulary for the hierarchical softmax.

Internal nodes are numbered 0..N-2 in merge order, the root being N-2. A
term's path lists the internal nodes from the root down together with the
branch sign taken at each: +1 for the left child (code 0), -1 for the right
child (code 1).
"""

import heapq
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from src.core.exceptions import FormatError
from src.utils.logging import get_logger

logger = get_logger(__name__)


@dataclass
class HuffmanTree:
    num_leaves: int
    points: List[np.ndarray]
    codes: List[np.ndarray]
    signs: List[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        self.signs = [1.0 - 2.0 * c.astype(np.float64) for c in self.codes]
        depth = max((len(p) for p in self.points), default=0)
        n = self.num_leaves
        # padded views for scoring every term at once
        self.point_matrix = np.zeros((n, depth), dtype=np.int64)
        self.sign_matrix = np.zeros((n, depth), dtype=np.float64)
        self.mask = np.zeros((n, depth), dtype=bool)
        for t in range(n):
            length = len(self.points[t])
            self.point_matrix[t, :length] = self.points[t]
            self.sign_matrix[t, :length] = self.signs[t]
            self.mask[t, :length] = True

    @property
    def num_internal(self) -> int:
        return max(self.num_leaves - 1, 0)

    @property
    def max_depth(self) -> int:
        return self.point_matrix.shape[1]

    def path_length(self, term_id: int) -> int:
        return len(self.points[term_id])

    def path_lengths(self) -> np.ndarray:
        return np.array([len(p) for p in self.points], dtype=np.int64)

    def expected_path_length(self, freqs: Sequence[float]) -> float:
        freqs = np.asarray(freqs, dtype=np.float64)
        return float((freqs * self.path_lengths()).sum() / freqs.sum())

    def to_lines(self, terms: Sequence[str]) -> List[str]:
        """``term<TAB>node,node,...<TAB>code`` per term."""
        lines = []
        for t, term in enumerate(terms):
            nodes = ",".join(str(int(p)) for p in self.points[t])
            code = "".join(str(int(c)) for c in self.codes[t])
            lines.append(f"{term}\t{nodes}\t{code}")
        return lines

    @classmethod
    def from_lines(cls, lines: Sequence[str], terms: Sequence[str], path: str = None) -> "HuffmanTree":
        index = {term: i for i, term in enumerate(terms)}
        points: List[np.ndarray] = [None] * len(terms)
        codes: List[np.ndarray] = [None] * len(terms)
        for line_no, line in enumerate(lines, start=1):
            parts = line.rstrip("\r\n").split("\t")
            if len(parts) != 3:
                raise FormatError("expected 'term<TAB>nodes<TAB>code'", path=path, line=line_no)
            term, nodes, code = parts
            if term not in index:
                raise FormatError(f"unknown term '{term}'", path=path, line=line_no)
            point = np.array([int(x) for x in nodes.split(",")] if nodes else [], dtype=np.int64)
            bits = np.array([int(c) for c in code], dtype=np.uint8)
            if len(point) != len(bits):
                raise FormatError("node list and code differ in length", path=path, line=line_no)
            points[index[term]] = point
            codes[index[term]] = bits
        missing = [terms[i] for i, p in enumerate(points) if p is None]
        if missing:
            raise FormatError(f"no path for term '{missing[0]}'", path=path)
        return cls(len(terms), points, codes)


def build_huffman(freqs: Sequence[float]) -> HuffmanTree:
    """
    Huffman tree over term weights (indexed by term id).

    Ties pop the lower term id first, leaves before internal nodes, and the
    first popped node becomes the left child.
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    n = len(freqs)
    if n == 0:
        raise ValueError("cannot build a Huffman tree over an empty vocabulary")
    if np.any(freqs <= 0) or not np.all(np.isfinite(freqs)):
        raise ValueError("Huffman weights must be finite and positive")

    # heap entries: (weight, order, node); leaves are nodes 0..n-1, internal node i is n+i
    heap: List[Tuple[float, int, int]] = [(float(freqs[t]), t, t) for t in range(n)]
    heapq.heapify(heap)
    left = np.zeros(max(n - 1, 0), dtype=np.int64)
    right = np.zeros(max(n - 1, 0), dtype=np.int64)
    for i in range(n - 1):
        w1, _, a = heapq.heappop(heap)
        w2, _, b = heapq.heappop(heap)
        left[i], right[i] = a, b
        heapq.heappush(heap, (w1 + w2, n + i, n + i))

    points: List[np.ndarray] = [np.zeros(0, dtype=np.int64)] * n
    codes: List[np.ndarray] = [np.zeros(0, dtype=np.uint8)] * n
    if n > 1:
        stack = [(2 * n - 2, [], [])]
        while stack:
            node, path, code = stack.pop()
            if node < n:
                points[node] = np.array(path, dtype=np.int64)
                codes[node] = np.array(code, dtype=np.uint8)
            else:
                i = node - n
                stack.append((int(left[i]), path + [i], code + [0]))
                stack.append((int(right[i]), path + [i], code + [1]))

    tree = HuffmanTree(n, points, codes)
    logger.debug(f"Built huffman tree over {n} terms with maximum depth {tree.max_depth}")
    return tree
