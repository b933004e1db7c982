import pytest

from routesmith.errors import RenderError
from routesmith.prompts import (
    MUTATION_KINDS,
    TEMPLATE_IDS,
    TEMPLATES,
    bias_percent_text,
    prompt_digest,
    reference_bindings,
    render,
    runtime_bindings,
)


class TestRender:
    def test_system_message_always_first(self):
        for tid in TEMPLATE_IDS:
            messages = render(tid, reference_bindings())
            assert messages[0]["role"] == "system"
            if tid != "system":
                assert messages[1]["role"] == "user"

    def test_crossover_orders_better_before_worse(self):
        bindings = reference_bindings()
        bindings["code_parent_1"] = "ELITE_CODE"
        bindings["code_parent_2"] = "OTHER_CODE"
        body = render("crossover", bindings)[1]["content"]
        assert body.index("[Better Code]") < body.index("[Worse Code]")
        assert body.index("ELITE_CODE") < body.index("OTHER_CODE")

    def test_seed_embeds_headers_under_library_context(self):
        body = render("seed", reference_bindings())[1]["content"]
        anchor = body.index("# Libary context")
        assert body.index("struct Instance {") > anchor
        assert "# Example implementation" in body

    def test_rendering_is_deterministic(self):
        bindings = reference_bindings()
        a = render("crossover", bindings)
        b = render("crossover", bindings)
        assert a == b
        assert prompt_digest(a) == prompt_digest(b)

    def test_missing_binding_names_the_slot(self):
        bindings = reference_bindings()
        del bindings["code_parent_2"]
        with pytest.raises(RenderError) as err:
            render("crossover", bindings)
        assert err.value.slot == "code_parent_2"

    def test_unknown_template_rejected(self):
        with pytest.raises(RenderError):
            render("nope", reference_bindings())

    def test_no_residual_placeholders(self):
        all_slots = set().union(*(t.required_bindings for t in TEMPLATES.values()))
        for tid in TEMPLATE_IDS:
            for message in render(tid, reference_bindings()):
                for slot in all_slots:
                    assert "{%s}" % slot not in message["content"]

    def test_bias_percentage_is_rendered(self):
        for bias, literal in ((0.8, "(80"), (0.7, "(70")):
            body = render("crossover", reference_bindings(bias=bias))[1]["content"]
            assert literal in body
        assert bias_percent_text(0.8) == "80"

    def test_standard_crossover_instruction_is_unbiased(self):
        body = render("crossover-standard", reference_bindings())[1]["content"]
        assert "roughly half" in body
        assert "(80" not in body


class TestBindings:
    def test_runtime_bindings_cover_all_problems(self):
        for problem in ("cvrp", "vrptw", "pcvrp"):
            bindings = runtime_bindings(problem)
            messages = render("seed", bindings)
            assert "select_by_llm_1" in messages[1]["content"]
            assert bindings["problem_name_long"] in messages[0]["content"]

    def test_mutation_kind_templates_exist(self):
        assert set(MUTATION_KINDS) <= set(TEMPLATE_IDS)
        for kind in MUTATION_KINDS:
            body = render(kind, {**reference_bindings(), "code": "CODE_UNDER_TEST"})
            assert "CODE_UNDER_TEST" in body[1]["content"]
