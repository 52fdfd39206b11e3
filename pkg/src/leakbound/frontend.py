"""Convenience entry points: source text or file to a typed program and harness."""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Optional

from .lang.harness import HarnessSpec, resolve_harness
from .lang.parser import SourceUnit, parse
from .lang.typecheck import TypedProgram, typecheck


def load_source(source: SourceUnit | str, arch: int = 32, entry: Optional[str] = None) -> TypedProgram:
    """Parse and type-check a source unit or raw text."""
    if isinstance(source, str):
        source = SourceUnit.from_text(source)
    return typecheck(parse(source), arch, entry, source)


def load_file(path, arch: int = 32, entry: Optional[str] = None) -> TypedProgram:
    return load_source(SourceUnit.from_file(path), arch, entry)


def corpus_path(name: str) -> Path:
    """Path of a bundled corpus program (``.mc`` is appended when missing)."""
    if not name.endswith(".mc"):
        name += ".mc"
    return Path(str(resources.files("leakbound") / "corpus" / name))


def corpus_names() -> list[str]:
    folder = resources.files("leakbound") / "corpus"
    return sorted(p.name[:-3] for p in folder.iterdir() if p.name.endswith(".mc"))


def load_corpus(name: str, arch: int = 32) -> tuple[TypedProgram, HarnessSpec]:
    """A bundled program and its harness."""
    prog = load_file(corpus_path(name), arch)
    return prog, resolve_harness(prog)
