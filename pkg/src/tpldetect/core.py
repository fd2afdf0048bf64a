"""Shared vocabulary types used across the pipeline."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class Language(str, enum.Enum):
    JAVA = "java"
    PYTHON = "python"


class Channel(str, enum.Enum):
    BYTECODE = "bytecode"
    SOURCE = "source"

    @property
    def code(self) -> int:
        return 0 if self is Channel.BYTECODE else 1

    @classmethod
    def from_code(cls, code: int) -> Channel:
        return (cls.BYTECODE, cls.SOURCE)[code]


class TPLDetectError(Exception):
    """Base class for all errors raised by this package."""


@dataclass(frozen=True)
class NormalizedDocument:
    doc_id: str
    channel: Channel
    language: Language
    tokens: tuple[str, ...]

    def text(self) -> str:
        return " ".join(self.tokens)


def make_doc_id(archive_id: str, relative_path: str, channel: Channel) -> str:
    return f"{archive_id}/{relative_path}#{channel.value}"


def split_doc_id(doc_id: str) -> tuple[str, str, str]:
    """Inverse of ``make_doc_id``: (archive_id, relative_path, channel)."""
    head, _, channel = doc_id.rpartition("#")
    archive_id, _, path = head.partition("/")
    return archive_id, path, channel


def language_of_path(path: str) -> Language | None:
    if path.endswith(".class"):
        return Language.JAVA
    if path.endswith(".py"):
        return Language.PYTHON
    return None
