"""Directory-backed scenario persistence.

One canonical ``.liveia`` document per scenario under ``<root>/scenarios/``,
plus a tab-separated lineage index. Writes are atomic (temp file + rename)
and serialized per scenario id; reads hand out immutable values, so no
coordination is needed across scenarios.
"""

from __future__ import annotations

import os
import threading
from collections import defaultdict
from dataclasses import replace
from pathlib import Path
from typing import Callable, Optional

from .dsl import parse_scenario, serialize_scenario
from .errors import NotFound, StaleRevision
from .scenario import Mutation, Scenario, apply_mutation, branch, fresh_id

INDEX_NAME = "index.tsv"
EXTENSION = ".liveia"


class ScenarioStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.dir = self.root / "scenarios"
        self.dir.mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, Scenario] = {}
        self._locks: defaultdict[str, threading.Lock] = defaultdict(threading.Lock)
        self._mutex = threading.Lock()

    # -- paths ---------------------------------------------------------------

    def path_for(self, scenario_id: str) -> Path:
        return self.dir / f"{scenario_id}{EXTENSION}"

    @property
    def index_path(self) -> Path:
        return self.dir / INDEX_NAME

    def _lock(self, scenario_id: str) -> threading.Lock:
        with self._mutex:
            return self._locks[scenario_id]

    # -- reads ---------------------------------------------------------------

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.dir.glob(f"*{EXTENSION}"))

    def exists(self, scenario_id: str) -> bool:
        return self.path_for(scenario_id).is_file()

    def load(self, scenario_id: str) -> Scenario:
        with self._mutex:
            cached = self._cache.get(scenario_id)
        if cached is not None:
            return cached
        path = self.path_for(scenario_id)
        if not path.is_file():
            raise NotFound(f"no scenario {scenario_id!r}")
        scenario = parse_scenario(path.read_text("utf-8"))
        with self._mutex:
            self._cache[scenario_id] = scenario
        return scenario

    def document(self, scenario_id: str) -> str:
        return serialize_scenario(self.load(scenario_id))

    def entries(self) -> list[tuple[str, str, str]]:
        """(id, parent_id, name) triples, sorted by id."""
        out = []
        for scenario_id in self.list_ids():
            s = self.load(scenario_id)
            out.append((s.scenario_id, s.parent_id or "", s.name))
        return out

    # -- writes --------------------------------------------------------------

    def _write(self, scenario: Scenario) -> None:
        path = self.path_for(scenario.scenario_id)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(serialize_scenario(scenario), "utf-8", newline="")
        os.replace(tmp, path)
        with self._mutex:
            self._cache[scenario.scenario_id] = scenario
        self._write_index()

    def _write_index(self) -> None:
        rows = [f"{sid}\t{parent}\t{name}" for sid, parent, name in self.entries()]
        tmp = self.index_path.with_suffix(".tmp")
        tmp.write_text("\n".join(rows) + ("\n" if rows else ""), "utf-8", newline="")
        os.replace(tmp, self.index_path)

    def create(self, document: str) -> Scenario:
        """Persist a new scenario from document text, assigning an id when
        the document does not carry one."""
        scenario = parse_scenario(document)
        if not scenario.scenario_id:
            scenario = replace(scenario, scenario_id=fresh_id())
        with self._lock(scenario.scenario_id):
            self._write(scenario)
        return scenario

    def save(self, scenario: Scenario) -> Scenario:
        if not scenario.scenario_id:
            scenario = replace(scenario, scenario_id=fresh_id())
        with self._lock(scenario.scenario_id):
            self._write(scenario)
        return scenario

    def mutate(
        self,
        scenario_id: str,
        mutation: Mutation,
        base_revision: Optional[int] = None,
        on_commit: Optional[Callable[[Scenario, Mutation], None]] = None,
    ) -> Scenario:
        """Apply a mutation under the scenario's writer lock.

        ``base_revision`` enables optimistic concurrency: a mismatch raises
        ``StaleRevision`` and leaves the store untouched. ``on_commit`` runs
        after the new document is durably written, still under the lock, so
        notification order matches revision order.
        """
        with self._lock(scenario_id):
            current = self.load(scenario_id)
            if base_revision is not None and base_revision != current.revision:
                raise StaleRevision(expected=current.revision, got=base_revision)
            updated = apply_mutation(current, mutation)
            self._write(updated)
            if on_commit is not None:
                on_commit(updated, updated.mutation_log[-1])
        return updated

    def branch(self, scenario_id: str, new_name: str) -> Scenario:
        parent = self.load(scenario_id)
        child = branch(parent, new_name)
        with self._lock(child.scenario_id):
            self._write(child)
        return child

    def delete(self, scenario_id: str) -> None:
        with self._lock(scenario_id):
            path = self.path_for(scenario_id)
            if not path.is_file():
                raise NotFound(f"no scenario {scenario_id!r}")
            path.unlink()
            with self._mutex:
                self._cache.pop(scenario_id, None)
            self._write_index()
