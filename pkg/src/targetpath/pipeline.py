"""End-to-end analysis of one app: targets in, plans and diagnostics out."""

from __future__ import annotations

import json
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .callgraph import (
    DEFAULT_MAX_PATHS,
    AnalysisTimeout,
    TargetNotFound,
    build_partial_cg,
    enrich_paths,
    extract_paths,
)
from .dataflow import DataflowEngine
from .icc import IccMap, map_icc
from .ir import AppModel, MethodRef
from .plan import Plan, synthesize
from .program import ProgramIndex

DEFAULT_TIMEOUT = 300.0


@dataclass
class TargetReport:
    target: str
    status: str  # planned | no_plan | not_found | timed_out
    plans: list[Plan] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    seconds: float = 0.0


class Analyzer:
    """Shares the program index and ICC map across per-target analyses."""

    def __init__(self, model: AppModel):
        self.model = model
        self.index = ProgramIndex(model)
        self.icc: IccMap = map_icc(model, DataflowEngine(model, self.index))

    def resolve_target(self, text: str) -> Optional[MethodRef]:
        """Accepts a canonical method reference or ``fqcn.name`` when unique."""
        try:
            ref = MethodRef.parse(text)
            return ref if ref in self.index.methods else None
        except ValueError:
            pass
        cls, _, name = text.rpartition(".")
        hits = [r for r in self.index.methods if r.cls == cls and r.name == name]
        return hits[0] if len(hits) == 1 else None

    def analyze(self, target: str, max_paths: int = DEFAULT_MAX_PATHS,
                timeout: float = DEFAULT_TIMEOUT) -> TargetReport:
        start = time.monotonic()
        ref = self.resolve_target(target)
        if ref is None:
            return TargetReport(target, "not_found", diagnostics={
                "target": target, "status": "not_found",
                "issues": [{"kind": "target_not_found"}]})
        engine = DataflowEngine(self.model, self.index, self.icc)
        issues: list[dict] = []
        deadline = start + timeout
        try:
            cg = build_partial_cg(self.model, self.icc, ref, engine, deadline)
            paths = extract_paths(cg, max_paths, deadline)
            enriched = enrich_paths(paths, self.model, self.icc, engine,
                                    diagnostics=issues, deadline=deadline)
            plans = synthesize(enriched, self.icc, self.model, issues)
        except AnalysisTimeout:
            return TargetReport(str(ref), "timed_out", diagnostics={
                "target": str(ref), "status": "timed_out",
                "issues": [{"kind": "timed_out", "timeout": timeout}]},
                seconds=time.monotonic() - start)
        except TargetNotFound:  # pragma: no cover - resolve_target checked it
            return TargetReport(str(ref), "not_found")
        issues.extend(cg.diagnostics)
        if not cg.entry_nodes:
            issues.append({"kind": "no_entry_trigger", "path": [str(ref)]})
        status = "planned" if plans else "no_plan"
        diag = {
            "target": str(ref),
            "status": status,
            "cg": cg.to_json(),
            "paths": [p.to_json() for p in paths],
            "enriched_paths": len(enriched),
            "plans": len(plans),
            "issues": _dedupe(issues),
            "counts": dict(sorted(Counter(i["kind"] for i in _dedupe(issues)).items())),
            "dataflow": dict(sorted(engine.stats.items())),
        }
        return TargetReport(str(ref), status, plans, diag, time.monotonic() - start)

    def analyze_all(self, targets: list[str], max_paths: int = DEFAULT_MAX_PATHS,
                    timeout: float = DEFAULT_TIMEOUT, jobs: int = 1) -> list[TargetReport]:
        if jobs <= 1:
            return [self.analyze(t, max_paths, timeout) for t in targets]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda t: self.analyze(t, max_paths, timeout), targets))


def _dedupe(items: list[dict]) -> list[dict]:
    seen = set()
    out = []
    for i in items:
        key = json.dumps(i, sort_keys=True)
        if key not in seen:
            seen.add(key)
            out.append(i)
    return out


def analyze_target(model: AppModel, target: str, max_paths: int = DEFAULT_MAX_PATHS
                   ) -> TargetReport:
    return Analyzer(model).analyze(target, max_paths)
