from vizplan import datagen
from vizplan.costmodel import CostReport, DEFAULT_CALIBRATION, assess
from vizplan.deployment import (CLIENT, CLOUD, SERVER, DeploymentModel, Link,
                                Site, default_deployment)
from vizplan.optimizer import (enumerate_candidates, feasible_set, pareto,
                               view_strategies)
from vizplan.physical import BaselineStrategy, PhysicalPlan
from vizplan.plan import InterfaceSpec, Interaction, Scan, SourceDecl, View
from vizplan.relation import Relation, dataset_stats


def _has(provenance, fragment):
    return any(fragment in entry for entry in provenance)


class TestEnumeration:
    def test_congress_contains_three_families(self, congress_env, dm):
        _db, spec, stats = congress_env
        candidates, truncated = enumerate_candidates(spec, dm, stats)
        assert not truncated
        assert any(_has(p.provenance, "R1:baseline") for p in candidates)
        assert any(_has(p.provenance, "R2:prefix_sum_cube")
                   and _has(p.provenance, "eval=server")
                   and not _has(p.provenance, "R3:")
                   for p in candidates)
        assert any(_has(p.provenance, "R2:prefix_sum_cube")
                   and _has(p.provenance, "eval=client")
                   and _has(p.provenance, "R3:replicate[chamber]")
                   for p in candidates)

    def test_choice_free_view_only_baseline(self, dm):
        spec = InterfaceSpec(
            [SourceDecl("t", "t.csv", [("x", "int64")])],
            [View("v", Scan("t"))], [])
        stats = dataset_stats(
            {"t": Relation.from_rows("t", [("x", "int64")], [[1], [2]])})
        strategies = view_strategies(spec, "v", stats)
        # the bare scan still admits a base-scan cache; baseline leads
        assert isinstance(strategies[0], BaselineStrategy)
        candidates, _ = enumerate_candidates(spec, dm, stats)
        assert _has(candidates[0].provenance, "R1:baseline")

    def test_candidate_cap_truncates(self, congress_env, dm):
        _db, spec, stats = congress_env
        candidates, truncated = enumerate_candidates(spec, dm, stats,
                                                     candidate_cap=5)
        assert truncated
        assert len(candidates) == 5

    def test_deterministic_ordering(self, congress_env, dm):
        _db, spec, stats = congress_env
        a, _ = enumerate_candidates(spec, dm, stats)
        b, _ = enumerate_candidates(spec, dm, stats)
        assert [p.plan_id for p in a] == [p.plan_id for p in b]


class TestJoinPruning:
    def test_unbounded_join_blocks_structure_rewrites(self, dm):
        db, spec = datagen.gen_join(17, max_fanout=None)
        stats = dataset_stats(db)
        candidates, _ = enumerate_candidates(spec, dm, stats)
        assert candidates, "baseline family must survive"
        for p in candidates:
            assert not _has(p.provenance, "R2:"), p.provenance

    def test_declared_fanout_reenables(self, join_env, dm):
        _db, spec, stats = join_env
        candidates, _ = enumerate_candidates(spec, dm, stats)
        assert any(_has(p.provenance, "R2:") for p in candidates)

    def test_pruning_is_noop_for_bounded_specs(self, join_env, dm,
                                               monkeypatch):
        _db, spec, stats = join_env
        before, _ = enumerate_candidates(spec, dm, stats)
        monkeypatch.setattr(
            "vizplan.optimizer._residual_has_unbounded_join",
            lambda residual: False)
        after, _ = enumerate_candidates(spec, dm, stats)
        assert [p.plan_id for p in before] == [p.plan_id for p in after]


class TestFeasibleSet:
    def test_unlimited_bounds_make_everything_feasible(self, congress_env):
        _db, spec, stats = congress_env
        relaxed = InterfaceSpec(spec.sources, spec.views, [
            Interaction(i.name, i.view, i.bound_choices, i.kind, 10 ** 9)
            for i in spec.interactions])
        dm = DeploymentModel(
            sites=[Site(CLIENT, None), Site(SERVER, None), Site(CLOUD, None)],
            links=default_deployment().links)
        candidates, _ = enumerate_candidates(relaxed, dm, stats)
        result = feasible_set(candidates, relaxed, dm, DEFAULT_CALIBRATION,
                              stats)
        assert len(result.entries) == len(candidates)
        assert result.diagnostic is None

    def test_impossible_constraints_yield_diagnostic(self, congress_env):
        _db, spec, stats = congress_env
        harsh = InterfaceSpec(spec.sources, spec.views, [
            Interaction(i.name, i.view, i.bound_choices, i.kind, 0.001)
            for i in spec.interactions])
        dm = DeploymentModel(
            sites=[Site(CLIENT, 0), Site(SERVER, 0), Site(CLOUD, None)],
            links=[Link(CLIENT, SERVER, 50.0, 10.0),
                   Link(SERVER, CLOUD, 50.0, 10.0)])
        candidates, _ = enumerate_candidates(harsh, dm, stats)
        result = feasible_set(candidates, harsh, dm, DEFAULT_CALIBRATION,
                              stats)
        assert result.entries == ()
        assert result.diagnostic is not None
        assert result.diagnostic.interaction is not None

    def test_congress_families_split(self, congress_env, dm, base_cal):
        _db, spec, stats = congress_env
        candidates, _ = enumerate_candidates(spec, dm, stats)
        result = feasible_set(candidates, spec, dm, base_cal, stats)
        feasible_ids = {p.plan_id for p, _r in result.entries}
        for p in candidates:
            if _has(p.provenance, "R1:baseline"):
                assert p.plan_id not in feasible_ids
        assert any(_has(p.provenance, "eval=server") for p, _ in
                   result.entries)
        assert any(_has(p.provenance, "eval=client") for p, _ in
                   result.entries)


def _fake_entry(spec, client_bytes, server_bytes, tag):
    plan = PhysicalPlan([BaselineStrategy(f"v{tag}")])
    report = CostReport({}, {CLIENT: client_bytes, SERVER: server_bytes,
                             CLOUD: 0}, True, (), (), {})
    return plan, report


class TestPareto:
    def test_single_plan_is_the_frontier(self):
        spec = InterfaceSpec([], [], [])
        entries = [_fake_entry(spec, 10, 10, 1)]
        points = pareto(entries, spec)
        assert len(points) == 1
        assert (points[0].client_bytes, points[0].server_bytes) == (10, 10)

    def test_dominance_by_inspection(self):
        spec = InterfaceSpec([], [], [])
        entries = [_fake_entry(spec, 10, 10, 1),
                   _fake_entry(spec, 5, 20, 2),
                   _fake_entry(spec, 10, 5, 3)]
        points = pareto(entries, spec)
        pairs = {(p.client_bytes, p.server_bytes) for p in points}
        assert pairs == {(5, 20), (10, 5)}

    def test_no_dominated_point_survives(self, congress_env, dm, base_cal):
        _db, spec, stats = congress_env
        candidates, _ = enumerate_candidates(spec, dm, stats)
        result = feasible_set(candidates, spec, dm, base_cal, stats)
        points = pareto(result.entries, spec)
        for p in points:
            for q in points:
                if p is q:
                    continue
                dominated = (q.client_bytes <= p.client_bytes
                             and q.server_bytes <= p.server_bytes
                             and (q.client_bytes < p.client_bytes
                                  or q.server_bytes < p.server_bytes))
                assert not dominated

    def test_congress_frontier_has_both_styles(self, congress_env, dm,
                                               base_cal):
        _db, spec, stats = congress_env
        candidates, _ = enumerate_candidates(spec, dm, stats)
        result = feasible_set(candidates, spec, dm, base_cal, stats)
        points = pareto(result.entries, spec)
        assert len(points) >= 2
        assert any(p.server_bytes > p.client_bytes for p in points)
        assert any(p.client_bytes > p.server_bytes for p in points)

    def test_budget_monotonicity(self, congress_env, dm, base_cal):
        _db, spec, stats = congress_env
        candidates, _ = enumerate_candidates(spec, dm, stats)
        result = feasible_set(candidates, spec, dm, base_cal, stats)
        points = pareto(result.entries, spec)
        doubled = DeploymentModel(
            sites=[Site(s.id,
                        None if s.memory_budget_bytes is None
                        else s.memory_budget_bytes * 2,
                        s.compute_scale) for s in dm.sites],
            links=dm.links)
        for p in points:
            assert assess(p.plan, spec, doubled, base_cal, stats).feasible
