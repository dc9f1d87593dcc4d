import itertools
import random

import pytest

from vizplan.errors import DomainExplosion, OutOfDomain, UnboundChoice
from vizplan.oracle import oracle_eval
from vizplan.plan import (AggSpec, Between, EnumDomain, Eq, Filter,
                          GroupByAgg, InterfaceSpec, Interaction,
                          IntervalDomain, LiteralChoice, Scan, SourceDecl,
                          SubplanChoice, View, bind, choice_dependencies,
                          count_bindings, enumerate_bindings, plan_choices,
                          sample_bindings, spec_from_json, spec_to_json,
                          validate_spec)

YEARS = IntervalDomain(1990, 2020, 1)


def congress_plan():
    return GroupByAgg(
        ["member"], [AggSpec("count", None, "votes")],
        Filter(Between("year", LiteralChoice("year_lo", YEARS),
                       LiteralChoice("year_hi", YEARS)),
               Filter(Eq("chamber", LiteralChoice(
                   "chamber", EnumDomain(("house", "senate")))),
                   Scan("votes"))))


def congress_spec():
    return InterfaceSpec(
        sources=[SourceDecl("votes", "votes.csv",
                            [("member", "string"), ("chamber", "string"),
                             ("year", "int64")])],
        views=[View("member_votes", congress_plan())],
        interactions=[
            Interaction("chamber_select", "member_votes", ["chamber"],
                        "discrete", 500.0),
            Interaction("year_slider", "member_votes",
                        ["year_lo", "year_hi"], "continuous", 20.0),
        ])


class TestValidate:
    def test_congress_spec_is_clean(self):
        assert validate_spec(congress_spec()) == []

    def test_dangling_choice(self):
        spec = congress_spec()
        bad = InterfaceSpec(spec.sources, spec.views, [
            Interaction("x", "member_votes", ["zz"], "discrete", 100.0)])
        codes = [d.code for d in validate_spec(bad)]
        assert "DanglingChoice" in codes

    def test_domain_type_mismatch(self):
        plan = Filter(Eq("year", LiteralChoice(
            "y", EnumDomain(("house",)))), Scan("votes"))
        spec = InterfaceSpec(congress_spec().sources,
                             [View("v", plan)],
                             [Interaction("i", "v", ["y"], "discrete", 10.0)])
        codes = [d.code for d in validate_spec(spec)]
        assert "DomainTypeMismatch" in codes

    def test_non_positive_latency(self):
        spec = congress_spec()
        bad = InterfaceSpec(spec.sources, spec.views, [
            Interaction("chamber_select", "member_votes", ["chamber"],
                        "discrete", 0.0),
            spec.interactions[1]])
        codes = [d.code for d in validate_spec(bad)]
        assert "NonPositiveLatency" in codes

    def test_unknown_relation(self):
        spec = InterfaceSpec([], [View("v", Scan("ghost"))], [])
        codes = [d.code for d in validate_spec(spec)]
        assert "UnknownRelation" in codes

    def test_unbound_choice_rejected(self):
        spec = congress_spec()
        bad = InterfaceSpec(spec.sources, spec.views, [spec.interactions[0]])
        codes = [d.code for d in validate_spec(bad)]
        assert "UnboundChoice" in codes


class TestBind:
    def test_congress_binding(self):
        concrete = bind(congress_plan(), {"chamber": "house",
                                          "year_lo": 2001, "year_hi": 2020})
        expected = GroupByAgg(
            ["member"], [AggSpec("count", None, "votes")],
            Filter(Between("year", 2001, 2020),
                   Filter(Eq("chamber", "house"), Scan("votes"))))
        assert concrete == expected

    def test_identity_on_choice_free_plan(self):
        plan = Filter(Eq("chamber", "house"), Scan("votes"))
        assert bind(plan, {}) == plan

    def test_out_of_domain(self):
        dom = IntervalDomain(1990, 2024, 1)
        plan = Filter(Between("year", LiteralChoice("y", dom), None),
                      Scan("votes"))
        with pytest.raises(OutOfDomain):
            bind(plan, {"y": 2050})

    def test_unbound(self):
        with pytest.raises(UnboundChoice):
            bind(congress_plan(), {"chamber": "house"})

    def test_subplan_choice_binding(self):
        plan = SubplanChoice("pick", [Scan("a"), Scan("b")])
        assert bind(plan, {"pick": 1}) == Scan("b")
        with pytest.raises(OutOfDomain):
            bind(plan, {"pick": 2})

    def test_agreeing_bindings_bind_identically(self):
        rng = random.Random(7)
        plan = congress_plan()
        for _ in range(20):
            b = {"chamber": rng.choice(["house", "senate"]),
                 "year_lo": rng.randrange(1990, 2021),
                 "year_hi": rng.randrange(1990, 2021)}
            if b["year_lo"] > b["year_hi"]:
                b["year_lo"], b["year_hi"] = b["year_hi"], b["year_lo"]
            assert bind(plan, dict(b)) == bind(plan, dict(b))


class TestEnumerate:
    def test_single_slider_domain(self):
        dom = IntervalDomain(0, 9, 1)
        plan = Filter(Eq("x", LiteralChoice("c", EnumDomain(tuple(range(10))))),
                      Scan("t"))
        spec = InterfaceSpec(
            [SourceDecl("t", "t.csv", [("x", "int64")])],
            [View("v", plan)],
            [Interaction("i", "v", ["c"], "discrete", 10.0)])
        assert count_bindings(spec, spec.interaction("i")) == 10

    def test_two_choice_cross_product(self):
        plan = Filter(Eq("x", LiteralChoice("a", EnumDomain((1, 2, 3, 4)))),
                      Filter(Eq("y", LiteralChoice("b", EnumDomain((1, 2, 3, 4, 5)))),
                             Scan("t")))
        spec = InterfaceSpec(
            [SourceDecl("t", "t.csv", [("x", "int64"), ("y", "int64")])],
            [View("v", plan)],
            [Interaction("i", "v", ["a", "b"], "discrete", 10.0)])
        assert count_bindings(spec, spec.interaction("i")) == 20

    def test_range_pair_count_matches_bruteforce(self):
        spec = congress_spec()
        n = count_bindings(spec, spec.interaction("year_slider"))
        brute = sum(1 for lo, hi in itertools.product(range(1990, 2021),
                                                      repeat=2) if lo <= hi)
        assert n == brute == 496

    def test_other_choices_held_at_first_value(self):
        spec = congress_spec()
        for b in enumerate_bindings(spec, spec.interaction("year_slider")):
            assert b["chamber"] == "house"

    def test_domain_explosion(self):
        spec = congress_spec()
        with pytest.raises(DomainExplosion):
            list(enumerate_bindings(spec, spec.interaction("year_slider"),
                                    cap=100))

    def test_bindings_evaluate_without_errors(self, congress_env):
        db, spec, _stats = congress_env
        view = spec.view("member_votes")
        rng = random.Random(5)
        bindings = list(enumerate_bindings(spec,
                                           spec.interaction("year_slider")))
        for b in rng.sample(bindings, 25):
            oracle_eval(bind(view.plan, b), db)

    def test_sampling_is_seeded(self):
        spec = congress_spec()
        inter = spec.interaction("year_slider")
        a = sample_bindings(spec, inter, 50, seed=9)
        b = sample_bindings(spec, inter, 50, seed=9)
        c = sample_bindings(spec, inter, 50, seed=10)
        assert a == b
        assert a != c
        assert all(x["year_lo"] <= x["year_hi"] for x in a)


class TestChoiceDependencies:
    def test_path_to_root(self):
        spec = congress_spec()
        deps = choice_dependencies(spec)
        # chamber filter sits below the year filter below the group-by
        assert deps["chamber"] == frozenset({
            "member_votes:$", "member_votes:$.in", "member_votes:$.in.in"})
        assert deps["year_lo"] == frozenset({
            "member_votes:$", "member_votes:$.in"})
        assert deps["year_lo"] == deps["year_hi"]
        # the group-by (root) is invalidated by every choice
        for cid in ("chamber", "year_lo", "year_hi"):
            assert "member_votes:$" in deps[cid]

    def test_no_choices_empty_map(self):
        spec = InterfaceSpec(
            [SourceDecl("t", "t.csv", [("x", "int64")])],
            [View("v", Scan("t"))], [])
        assert choice_dependencies(spec) == {}

    def test_ancestor_closed(self):
        spec = congress_spec()
        for deps in choice_dependencies(spec).values():
            for node_id in deps:
                path = node_id.split(":", 1)[1]
                parts = path.split(".")
                for k in range(1, len(parts)):
                    assert f"member_votes:{'.'.join(parts[:k])}" in deps


class TestSerialization:
    def test_round_trip(self):
        spec = congress_spec()
        assert spec_from_json(spec_to_json(spec)) == spec

    def test_version_required(self):
        obj = spec_to_json(congress_spec())
        obj["spec_version"] = 99
        with pytest.raises(ValueError):
            spec_from_json(obj)

    def test_choices_discovered(self):
        found = plan_choices(congress_plan())
        assert set(found) == {"chamber", "year_lo", "year_hi"}
        assert found["chamber"].kind == "literal"
        assert found["chamber"].column == "chamber"
