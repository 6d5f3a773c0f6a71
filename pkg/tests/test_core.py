"""model-core: intervals, beliefs, memory size, validation."""

import pytest
from hypothesis import given, strategies as st

from stochworld import (
    Arrow,
    Belief,
    InconsistentObservationError,
    Model,
    ModelError,
    ProbInterval,
    State,
    TraceSpec,
    interval_product,
    memory_bits,
    step_belief,
    validate,
)

from helpers import chain_model


def iv(lo, hi=None):
    return ProbInterval(lo, lo if hi is None else hi)


class TestProbInterval:
    def test_point_identity(self):
        assert interval_product(iv(1), iv(0.5)) == iv(0.5)

    def test_bound_arithmetic(self):
        assert interval_product(iv(0, 1), iv(0.3, 0.7)) == iv(0.0, 0.7)

    def test_endpoint_multiplication(self):
        got = interval_product(iv(0.1, 0.8), iv(0.5))
        assert got.lo == pytest.approx(0.05)
        assert got.hi == pytest.approx(0.4)

    def test_rejects_inverted_bounds(self):
        with pytest.raises(ModelError):
            ProbInterval(0.7, 0.3)
        with pytest.raises(ModelError):
            ProbInterval(-0.5, 0.5)

    @given(
        st.tuples(*(st.floats(0, 1) for _ in range(4))).map(sorted),
        st.tuples(*(st.floats(0, 1) for _ in range(4))).map(sorted),
    )
    def test_product_monotone_under_widening(self, a, b):
        a_lo, a_in_lo, a_in_hi, a_hi = a
        b_lo, b_in_lo, b_in_hi, b_hi = b
        narrow = interval_product(iv(a_in_lo, a_in_hi), iv(b_in_lo, b_in_hi))
        wide = interval_product(iv(a_lo, a_hi), iv(b_lo, b_hi))
        assert wide.lo <= narrow.lo + 1e-12
        assert wide.hi >= narrow.hi - 1e-12


class TestBelief:
    def test_normalizes_small_drift(self):
        b = Belief({"x": 0.5, "y": 0.5 + 1e-8})
        assert sum(b.probs.values()) == pytest.approx(1.0, abs=1e-9)

    def test_rejects_nonpositive(self):
        with pytest.raises(ModelError):
            Belief({"x": 1.0, "y": 0.0})

    def test_rejects_bad_total(self):
        with pytest.raises(ModelError):
            Belief({"x": 0.4})


class TestMemoryBits:
    def test_fomm_is_zero(self, m1, fig3, cycle3):
        for model in (m1, fig3, cycle3):
            assert memory_bits(model) == 0

    def test_three_red_one_blue(self):
        model = chain_model(
            {"a": {"b": 1.0}, "b": {"c": 1.0}, "c": {"d": 1.0}, "d": {"a": 1.0}},
            initial="a",
            obs_of={"a": "red", "b": "red", "c": "red", "d": "blue"},
        )
        assert memory_bits(model) == 2

    def test_unique_colours(self, m2):
        assert memory_bits(m2) == 1  # two blacks, two whites
        distinct = chain_model(
            {"a": {"b": 1.0}, "b": {"a": 1.0}},
            initial="a",
            obs_of={"a": "x", "b": "y"},
        )
        assert memory_bits(distinct) == 0

    def test_invariant_under_renaming(self, m2):
        renamed = chain_model(
            {"k1": {"k2": 1.0}, "k2": {"k3": 1.0}, "k3": {"k4": 1.0}, "k4": {"k1": 1.0}},
            initial="k1",
            obs_of={"k1": "B", "k2": "B", "k3": "W", "k4": "W"},
        )
        assert memory_bits(renamed) == memory_bits(m2)


class TestStepBelief:
    def test_coin_identifies_state(self, m1):
        b = step_belief(m1, Belief({"B": 1.0}), "true", "W")
        assert b.probs == {"W": 1.0}

    def test_bbww_two_thread_elimination(self, m2):
        b = Belief({"B1": 0.5, "B2": 0.5})
        b = step_belief(m2, b, "true", "B")
        b = step_belief(m2, b, "true", "W")
        assert b.probs == {"W1": 1.0}
        assert not b.approximate

    def test_unknown_observation(self, m1):
        with pytest.raises(ModelError):
            step_belief(m1, Belief({"B": 1.0}), "true", "purple")

    def test_impossible_observation(self, m2):
        with pytest.raises(InconsistentObservationError):
            step_belief(m2, Belief({"B1": 1.0}), "true", "W")

    def test_interval_models_flag_approximate(self, house):
        b = step_belief(house, Belief({"r1": 1.0}), "move", "on")
        assert b.approximate
        assert b.probs == {"r2": 1.0}

    @given(st.integers(0, 2**32 - 1))
    def test_preserves_simplex(self, seed):
        import random

        rng = random.Random(seed)
        from helpers import random_connected_chain

        model = random_connected_chain(rng, rng.randint(2, 5))
        ids = [s.id for s in model.states]
        picks = rng.sample(ids, rng.randint(1, len(ids)))
        weights = [rng.random() + 0.05 for _ in picks]
        total = sum(weights)
        belief = Belief({s: w / total for s, w in zip(picks, weights)})
        obs = rng.choice([s for s in ids])
        try:
            out = step_belief(model, belief, "true", obs)
        except InconsistentObservationError:
            return
        assert sum(out.probs.values()) == pytest.approx(1.0, abs=1e-9)
        assert all(p > 0 for p in out.probs.values())


class TestValidate:
    def test_coin_clean(self, m1):
        report = validate(m1)
        assert report.ok and not report.warnings

    def test_white_peak_deficit_is_warning(self, fig3):
        report = validate(fig3)
        assert report.ok
        assert any("white peak" in w for w in report.warnings)

    def test_deficit_outside_peak_is_violation(self):
        bad = chain_model({"a": {"b": 0.8}, "b": {"a": 1.0}}, initial="a")
        report = validate(bad)
        assert not report.ok

    def test_mdp_plus_interval_sums(self, rain):
        assert validate(rain).ok
        squeezed = Model(
            "mdp-plus",
            ("wet",),
            ("rain", "dry"),
            (State("w", True, TraceSpec({"wet": ProbInterval(0, 1)})),),
            (
                Arrow("w", "rain", "w", ProbInterval(0.3, 0.4), ProbInterval.point(1)),
                Arrow("w", "dry", "w", ProbInterval(0.3, 0.4), ProbInterval.point(1)),
            ),
        )
        report = validate(squeezed)
        assert any("exclude any policy" in v for v in report.violations)

    def test_structural_dangling_state(self):
        broken = Model(
            "fomm",
            ("a",),
            ("true",),
            (State("a", True, TraceSpec({"a": ProbInterval.point(1)})),),
            (Arrow("a", "true", "ghost"),),
        )
        report = validate(broken)
        assert any("undeclared" in s for s in report.structural)

    def test_two_initials_structural(self):
        broken = Model(
            "fomm",
            ("a", "b"),
            ("true",),
            (
                State("a", True, TraceSpec({"a": ProbInterval.point(1)})),
                State("b", True, TraceSpec({"b": ProbInterval.point(1)})),
            ),
            (),
        )
        assert validate(broken).structural

    def test_smdp_interval_rule(self):
        model = Model(
            "smdp",
            ("x",),
            ("a",),
            (State("s", True, TraceSpec({"x": ProbInterval.point(1)})),),
            (Arrow("s", "a", "s", ProbInterval(0, 1), ProbInterval(0.25, 0.5)),),
        )
        report = validate(model)
        assert any("[0,0], [0,1] or [1,1]" in v for v in report.violations)

    def test_idempotent_and_pure(self, fig3):
        first = validate(fig3)
        second = validate(fig3)
        assert first.structural == second.structural
        assert first.violations == second.violations
        assert first.warnings == second.warnings

    def test_mdp_agent_must_be_free(self):
        from stochworld import parse_model

        model = parse_model(
            "model mdp\nobs x\nact a\nstate s initial trace x=1\n"
            "arrow s a s lp=0.5 ap=1\n"
        )
        report = validate(model)
        assert any("[0,1]" in v for v in report.violations)

    def test_mdp_world_must_be_points(self):
        from stochworld import parse_model

        model = parse_model(
            "model mdp\nobs x\nact a\nstate s initial trace x=1\n"
            "arrow s a s ap=[0.4,0.6]\n"
        )
        report = validate(model)
        assert any("must be a point" in v for v in report.violations)

    def test_hmm_needs_deterministic_trace(self):
        model = Model(
            "hmm",
            ("x", "y"),
            ("true",),
            (
                State(
                    "s",
                    True,
                    TraceSpec({"x": ProbInterval.point(0.5), "y": ProbInterval.point(0.5)}),
                ),
            ),
            (Arrow("s", "true", "s"),),
        )
        report = validate(model)
        assert any("deterministic observation" in v for v in report.violations)
