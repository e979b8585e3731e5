# -*- coding: utf-8 -*-

import re
from functools import lru_cache
from pathlib import Path
from typing import AbstractSet, FrozenSet, List, Optional

# runs of letters/digits; underscore and every other symbol split tokens
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

STOPWORDS_PATH = Path(__file__).parent / "data" / "inquery_stopwords.txt"


def tokenize(text: str, stopwords: AbstractSet[str] = frozenset()) -> List[str]:
    """Lowercase ``text``, split on non-alphanumerics and drop stopwords. No stemming."""
    return [tok for tok in _TOKEN_RE.findall(text.lower()) if tok not in stopwords]


def clean_text(text: str) -> str:
    """Lowercased text with every non-alphanumeric run collapsed to one space."""
    return " ".join(_TOKEN_RE.findall(text.lower()))


def load_stopwords(path: Optional[str] = None) -> FrozenSet[str]:
    """Read one stopword per line; the bundled INQUERY list when ``path`` is None."""
    if path is None:
        return _bundled_stopwords()
    return _read_stopwords(Path(path))


@lru_cache(maxsize=1)
def _bundled_stopwords() -> FrozenSet[str]:
    return _read_stopwords(STOPWORDS_PATH)


def _read_stopwords(path: Path) -> FrozenSet[str]:
    with open(path, "r", encoding="utf-8") as f:
        return frozenset(line.strip().lower() for line in f if line.strip())
