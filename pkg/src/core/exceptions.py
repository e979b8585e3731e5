# -*- coding: utf-8 -*-
"""
Exception hierarchy shared by every subpackage.

The CLI maps these onto exit statuses, so new errors should derive from one
of the categories below rather than from ``RelembError`` directly.
"""

from typing import Optional


class RelembError(Exception):
    """Base class for all errors raised by the package."""


class DataError(RelembError):
    """Input data is inconsistent with what an operation requires."""


class DuplicateDocumentError(DataError, ValueError):
    def __init__(self, doc_id: str):
        super().__init__(f"duplicate document id '{doc_id}'")
        self.doc_id = doc_id


class UnknownDocumentError(DataError, KeyError):
    def __init__(self, doc_id):
        super().__init__(f"unknown document id '{doc_id}'")
        self.doc_id = doc_id

    def __str__(self):
        return self.args[0]


class UnknownTermError(DataError, KeyError):
    def __init__(self, term):
        super().__init__(f"unknown term '{term}'")
        self.term = term

    def __str__(self):
        return self.args[0]


class EmptyQueryError(DataError, ValueError):
    """No query term survived the vocabulary lookup."""


class EmptyFeedbackError(DataError, ValueError):
    """A relevance model was requested from an empty feedback set."""


class NoUsableQueriesError(DataError, ValueError):
    """A bulk operation ended without a single usable query."""


class ProjectionError(DataError, ValueError):
    """A query could not be mapped into the embedding space."""


class EvaluationError(DataError, ValueError):
    """Judgments or predictions do not support the requested measure."""


class DivergenceError(RelembError, ArithmeticError):
    """Training produced a non-finite loss."""


class FormatError(DataError):
    """A persisted artifact could not be parsed."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(f"{where}{message}")
        self.path = path
        self.line = line


class CheckpointFormatError(FormatError):
    pass


class IndexFormatError(FormatError):
    pass


class ConfigError(RelembError, ValueError):
    pass


class MissingInputError(RelembError, FileNotFoundError):
    def __init__(self, path: str, role: str = "input"):
        super().__init__(f"missing {role}: {path}")
        self.path = path
        self.role = role

    def __str__(self):
        return self.args[0]
