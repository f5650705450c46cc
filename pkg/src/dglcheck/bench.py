"""Benchmark manifests on disk.

Layout::

    <root>/<id>/question.md      natural-language problem
    <root>/<id>/expected.dgl     expected solution (modality-free formula)
    <root>/<id>/meta.json        {"min_writes": n, "tags": [...]}
    <root>/fewshot/<id>/...      same files plus model.dgl, a solved example
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import ir
from .parser import DglSyntaxError, parse_formula

BENCHMARK = "benchmark"
FEWSHOT = "fewshot-example"


class BenchmarkError(ValueError):
    pass


@dataclass(frozen=True)
class Benchmark:
    id: str
    question: str
    expected: str
    min_writes: int
    tags: tuple = ()
    role: str = BENCHMARK
    reference_model: str | None = None

    def expected_formula(self) -> ir.Formula:
        return parse_formula(self.expected)

    def meta(self) -> dict:
        return {"min_writes": self.min_writes, "tags": list(self.tags)}


@dataclass
class Suite:
    benchmarks: list
    fewshot: list = field(default_factory=list)

    def get(self, bench_id: str) -> Benchmark:
        for b in self.benchmarks + self.fewshot:
            if b.id == bench_id:
                return b
        raise KeyError(bench_id)


def default_root() -> Path:
    return Path(str(resources.files("dglcheck") / "data" / "benchmarks"))


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise BenchmarkError(f"missing {path.name} in {path.parent}") from None


def load_one(d: Path, role: str = BENCHMARK) -> Benchmark:
    question = _read(d / "question.md").strip()
    if not question:
        raise BenchmarkError(f"{d.name}: empty question")
    expected = _read(d / "expected.dgl").strip()
    try:
        meta = json.loads(_read(d / "meta.json"))
    except json.JSONDecodeError as e:
        raise BenchmarkError(f"{d.name}: bad meta.json: {e}") from None
    model = None
    if role == FEWSHOT:
        model = _read(d / "model.dgl").strip()
    b = Benchmark(
        id=d.name,
        question=question,
        expected=expected,
        min_writes=int(meta.get("min_writes", 0)),
        tags=tuple(meta.get("tags", ())),
        role=role,
        reference_model=model,
    )
    validate(b)
    return b


def validate(b: Benchmark) -> None:
    try:
        f = b.expected_formula()
    except DglSyntaxError as e:
        raise BenchmarkError(f"{b.id}: expected solution does not parse: {e}") from None
    if not ir.is_modality_free(f):
        raise BenchmarkError(f"{b.id}: expected solution must be modality-free")
    if b.min_writes < 1:
        raise BenchmarkError(f"{b.id}: min_writes must be at least 1")
    if b.role == FEWSHOT:
        try:
            parse_formula(b.reference_model or "")
        except DglSyntaxError as e:
            raise BenchmarkError(f"{b.id}: reference model does not parse: {e}") from None


def _norm(text: str) -> str:
    return " ".join(text.split()).lower()


def load_suite(root=None) -> Suite:
    root = Path(root) if root is not None else default_root()
    if not root.is_dir():
        raise BenchmarkError(f"benchmark directory not found: {root}")
    benches = [
        load_one(d)
        for d in sorted(root.iterdir())
        if d.is_dir() and d.name != "fewshot" and (d / "question.md").exists()
    ]
    fs_dir = root / "fewshot"
    fewshot = []
    if fs_dir.is_dir():
        fewshot = [
            load_one(d, FEWSHOT)
            for d in sorted(fs_dir.iterdir())
            if d.is_dir() and (d / "question.md").exists()
        ]
    ids = [b.id for b in benches + fewshot]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise BenchmarkError(f"duplicate ids: {', '.join(dupes)}")
    shots = {_norm(f.question) for f in fewshot} | {_norm(f.reference_model) for f in fewshot}
    for b in benches:
        if _norm(b.question) in shots:
            raise BenchmarkError(f"{b.id}: benchmark text appears in the few-shot store")
    return Suite(benches, fewshot)


def save_one(b: Benchmark, root) -> Path:
    root = Path(root)
    d = root / "fewshot" / b.id if b.role == FEWSHOT else root / b.id
    d.mkdir(parents=True, exist_ok=True)
    (d / "question.md").write_text(b.question + "\n", encoding="utf-8")
    (d / "expected.dgl").write_text(b.expected + "\n", encoding="utf-8")
    (d / "meta.json").write_text(json.dumps(b.meta()) + "\n", encoding="utf-8")
    if b.role == FEWSHOT:
        (d / "model.dgl").write_text((b.reference_model or "") + "\n", encoding="utf-8")
    return d


def save_suite(suite: Suite, root) -> None:
    for b in suite.benchmarks + suite.fewshot:
        save_one(b, root)
