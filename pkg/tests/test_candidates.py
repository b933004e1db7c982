import pytest

from routesmith.candidates import (
    SEED_SOURCE,
    CandidateBuildError,
    CandidateRuntime,
    check_source,
)
from routesmith.gateway import MOCK_CORPUS
from routesmith.lns import LnsConfig, run
from routesmith.model import validate
from routesmith.util import make_rng


class TestCheckSource:
    def test_seed_source_passes(self):
        check_source(SEED_SOURCE)

    def test_empty_source_rejected(self):
        with pytest.raises(CandidateBuildError):
            check_source("   \n")

    def test_syntax_error_rejected_with_message(self):
        with pytest.raises(CandidateBuildError) as err:
            check_source("def select_by_llm_1(sol:\n    pass")
        assert "syntax error" in str(err.value)

    def test_missing_function_rejected(self):
        with pytest.raises(CandidateBuildError) as err:
            check_source("def select_by_llm_1(sol):\n    return []\n")
        assert "sort_by_llm_1" in str(err.value)


class TestCandidateRuntime:
    def test_seed_pair_behaves_like_an_operator(self, gen):
        inst = gen(n=30, seed=1)
        from routesmith.lns import initial_solution

        sol = initial_solution(inst)
        pair = CandidateRuntime(SEED_SOURCE).make_pair()
        assert pair.origin == "external-candidate"
        ids = pair.remove(inst, sol, make_rng(4))
        assert ids and all(1 <= c <= 30 for c in ids)
        order = pair.order(inst, [3, 1, 2], sol, make_rng(4))
        assert sorted(order) == [1, 2, 3]

    def test_deterministic_under_fixed_rng(self, gen):
        inst = gen(n=30, seed=2)
        from routesmith.lns import initial_solution

        sol = initial_solution(inst)
        pair = CandidateRuntime(SEED_SOURCE).make_pair()
        assert pair.remove(inst, sol, make_rng(9)) == pair.remove(inst, sol, make_rng(9))

    def test_inplace_sort_protocol(self, gen):
        inst = gen(n=10, seed=3)
        source = (
            "def select_by_llm_1(sol):\n"
            "    return [1]\n"
            "def sort_by_llm_1(customers, instance):\n"
            "    customers.reverse()\n"
        )
        pair = CandidateRuntime(source).make_pair()
        assert pair.order(inst, [1, 2, 3], None, make_rng(0)) == [3, 2, 1]

    @pytest.mark.parametrize("idx", range(len(MOCK_CORPUS)))
    def test_every_corpus_entry_drives_a_clean_run(self, gen, idx):
        inst = gen(n=25, seed=4, capacity=25)
        pair = CandidateRuntime(MOCK_CORPUS[idx]).make_pair()
        best, stats = run(inst, pair, LnsConfig(max_iterations=300, seed=5))
        assert stats.status == "completed"
        assert validate(best).feasible
