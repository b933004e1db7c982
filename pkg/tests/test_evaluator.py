import math
import time

import pytest

from routesmith.candidates import SEED_SOURCE
from routesmith.evaluator import (
    DISQUALIFIED,
    EvalManifest,
    EvalReport,
    Evaluator,
    InstanceResult,
    build,
    fitness_from_report,
)
from routesmith.instances import GenParams, generate, save


@pytest.fixture(scope="module")
def train_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("train")
    paths = []
    for seed in (1, 2):
        inst = generate(GenParams(n=15, seed=seed, capacity=25))
        paths.append(str(save(inst, root / f"inst-{seed}.txt")))
    return paths


def manifest_for(paths, **kw):
    kw.setdefault("per_instance_time", 5.0)
    kw.setdefault("per_instance_iterations", 300)
    return EvalManifest(instance_paths=tuple(paths), seeds=tuple(range(len(paths))), **kw)


CRASHING = """\
def select_by_llm_1(sol):
    raise RuntimeError("deliberate crash")


def sort_by_llm_1(customers, instance):
    pass
"""

SLEEPER = """\
import time


def select_by_llm_1(sol):
    time.sleep(3600)
    return [1]


def sort_by_llm_1(customers, instance):
    pass
"""

SILENT_EXIT = """\
import os


def select_by_llm_1(sol):
    os._exit(0)


def sort_by_llm_1(customers, instance):
    pass
"""

MEMORY_HOG = """\
def select_by_llm_1(sol):
    hog = [0] * (10 ** 9)
    return [len(hog)]


def sort_by_llm_1(customers, instance):
    pass
"""

FLOODER = """\
import sys


def select_by_llm_1(sol):
    while True:
        sys.stdout.write("x" * 65536)


def sort_by_llm_1(customers, instance):
    pass
"""


class TestBuild:
    def test_seed_source_builds_ok(self, tmp_path):
        artifact = build(SEED_SOURCE, tmp_path)
        assert artifact.path.exists()
        assert artifact.path.read_text() == SEED_SOURCE
        assert not artifact.cached

    def test_identical_source_served_from_cache(self, tmp_path):
        first = build(SEED_SOURCE, tmp_path)
        second = build(SEED_SOURCE, tmp_path)
        assert second.cached
        assert first.digest == second.digest
        assert first.path == second.path

    def test_compile_error_reported_with_log(self, tmp_path, train_files):
        ev = Evaluator(tmp_path, smoke_test=False)
        report = ev.evaluate_source("def broken(:\n", manifest_for(train_files))
        assert report.status == "compile_error"
        assert report.build_log


class TestFitnessFromReport:
    def _ok_report(self, objectives):
        return EvalReport(
            status="ok",
            per_instance=[
                InstanceResult(id=f"inst-{i:03d}", objective=o, feasible=True, iterations=10)
                for i, o in enumerate(objectives)
            ],
        )

    def test_matches_penalized_mean(self):
        report = self._ok_report([41.14, 41.14])
        assert fitness_from_report(report, 150, 2e-4) == pytest.approx(41.17, abs=1e-9)

    def test_zero_lambda_is_plain_mean(self):
        report = self._ok_report([1.0, 2.0, 3.0])
        assert fitness_from_report(report, 500, 0.0) == pytest.approx(2.0, abs=1e-12)

    def test_any_failure_disqualifies(self):
        assert fitness_from_report(EvalReport(status="compile_error"), 5, 2e-4) == DISQUALIFIED
        assert fitness_from_report(EvalReport(status="timeout"), 5, 2e-4) == DISQUALIFIED
        assert math.isinf(fitness_from_report(EvalReport(status="runtime_error"), 5, 2e-4))


class TestEvaluate:
    def test_seed_candidate_scores_ok(self, tmp_path, train_files):
        ev = Evaluator(tmp_path, workers=2, smoke_test=False)
        report = ev.evaluate_source(SEED_SOURCE, manifest_for(train_files))
        assert report.status == "ok"
        assert [r.id for r in report.per_instance] == ["inst-000", "inst-001"]
        assert all(math.isfinite(r.objective) and r.feasible for r in report.per_instance)
        assert all(r.iterations > 0 for r in report.per_instance)

    def test_crashing_candidate_is_runtime_error(self, tmp_path, train_files):
        ev = Evaluator(tmp_path, smoke_test=False)
        report = ev.evaluate_source(CRASHING, manifest_for(train_files[:1]))
        assert report.status == "runtime_error"
        assert "deliberate crash" in report.build_log

    def test_sleeper_times_out_within_grace(self, tmp_path, train_files):
        ev = Evaluator(tmp_path, smoke_test=False)
        started = time.monotonic()
        report = ev.evaluate_source(
            SLEEPER, manifest_for(train_files[:1], per_instance_time=0.5, per_instance_iterations=None)
        )
        elapsed = time.monotonic() - started
        assert report.status == "timeout"
        # 0.5 * 1.1 + 1.0 of run budget plus startup overhead
        assert elapsed < 30

    def test_silent_exit_is_invalid_output(self, tmp_path, train_files):
        ev = Evaluator(tmp_path, smoke_test=False)
        report = ev.evaluate_source(SILENT_EXIT, manifest_for(train_files[:1]))
        assert report.status == "invalid_output"

    def test_memory_hog_is_contained(self, tmp_path, train_files):
        ev = Evaluator(tmp_path, smoke_test=False)
        report = ev.evaluate_source(
            MEMORY_HOG,
            manifest_for(train_files[:1], memory_limit_bytes=1536 * 1024**2),
        )
        assert report.status == "runtime_error"

    def test_stdout_flood_is_contained(self, tmp_path, train_files):
        ev = Evaluator(tmp_path, smoke_test=False)
        started = time.monotonic()
        report = ev.evaluate_source(FLOODER, manifest_for(train_files[:1]))
        assert report.status == "invalid_output"
        assert "flood" in report.build_log
        assert time.monotonic() - started < 60

    def test_isolation_supervisor_survives_hostile_candidates(self, tmp_path, train_files):
        ev = Evaluator(tmp_path, workers=2, smoke_test=False)
        for source in (CRASHING, SILENT_EXIT):
            assert ev.evaluate_source(source, manifest_for(train_files[:1])).status != "ok"
        report = ev.evaluate_source(SEED_SOURCE, manifest_for(train_files))
        assert report.status == "ok"

    def test_deterministic_reports_under_iteration_budget(self, tmp_path, train_files):
        m = manifest_for(train_files)
        r1 = Evaluator(tmp_path / "a", smoke_test=False).evaluate_source(SEED_SOURCE, m)
        r2 = Evaluator(tmp_path / "b", smoke_test=False).evaluate_source(SEED_SOURCE, m)
        assert [x.objective for x in r1.per_instance] == [x.objective for x in r2.per_instance]
        assert [x.iterations for x in r1.per_instance] == [x.iterations for x in r2.per_instance]

    def test_report_cache_hit_bit_identical(self, tmp_path, train_files):
        ev = Evaluator(tmp_path, smoke_test=False)
        m = manifest_for(train_files)
        r1 = ev.evaluate_source(SEED_SOURCE, m)
        r2 = ev.evaluate_source(SEED_SOURCE, m)
        assert r2 is r1  # served from the report cache

    def test_cached_artifact_reproduces_uncached_report(self, tmp_path, train_files):
        m = manifest_for(train_files)
        shared_cache = tmp_path / "shared"
        fresh = Evaluator(shared_cache, smoke_test=False)
        r1 = fresh.evaluate_source(SEED_SOURCE, m)
        # second evaluator reuses the artifact cache (build served from disk)
        reuse = Evaluator(shared_cache, smoke_test=False)
        from routesmith.evaluator import build

        assert build(SEED_SOURCE, shared_cache / "artifacts").cached
        r2 = reuse.evaluate_source(SEED_SOURCE, m)
        assert [x.objective for x in r1.per_instance] == [x.objective for x in r2.per_instance]
        assert [x.iterations for x in r1.per_instance] == [x.iterations for x in r2.per_instance]

    def test_smoke_gate_fails_fast(self, tmp_path, train_files):
        ev = Evaluator(tmp_path, smoke_test=True)
        started = time.monotonic()
        report = ev.evaluate_source(CRASHING, manifest_for(train_files, per_instance_time=30.0))
        assert report.status == "runtime_error"
        assert "preflight" in report.build_log
        assert time.monotonic() - started < 30


class TestRevalidation:
    def test_fabricated_infeasible_solution_rejected(self, tmp_path, train_files):
        ev = Evaluator(tmp_path, smoke_test=False)
        record = {
            "objective": 1.0,
            "feasible": True,
            "iterations": 5,
            "tours": [[1, 1, 2]],  # duplicate customer
            "unassigned": [],
        }
        status, result = ev._revalidate("inst-000", record, train_files[0])
        assert status == "invalid_output" and result is None

    def test_objective_mismatch_rejected(self, tmp_path, train_files):
        ev = Evaluator(tmp_path, smoke_test=False)
        inst = generate(GenParams(n=15, seed=1, capacity=25))
        tours = [[c] for c in range(1, 16)]
        record = {
            "objective": 123.456,  # wrong on purpose
            "feasible": True,
            "iterations": 5,
            "tours": tours,
            "unassigned": [],
        }
        status, _ = ev._revalidate("inst-000", record, train_files[0])
        assert status == "invalid_output"

    def test_reported_infeasible_rejected(self, tmp_path, train_files):
        ev = Evaluator(tmp_path, smoke_test=False)
        record = {"objective": 1.0, "feasible": False, "iterations": 5}
        status, _ = ev._revalidate("inst-000", record, train_files[0])
        assert status == "invalid_output"
