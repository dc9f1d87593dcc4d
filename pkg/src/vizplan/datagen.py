"""Seeded synthetic datasets and interface specs for demos and tests.

The bundled "congress" interface (vote counts by member, filtered by a
chamber dropdown and a year-range slider) exercises every part of the
pipeline; the other generators cover a single hash-filter view, a
range-slider aggregation view, a bounded key-FK join, and a wide table
for latency measurements.
"""

from __future__ import annotations

import os
import random

from .plan import (AggSpec, Between, EnumDomain, Eq, Filter, GroupByAgg,
                   InterfaceSpec, Interaction, IntervalDomain, Join,
                   LiteralChoice, Scan, SourceDecl, View, save_spec)
from .relation import Relation, write_csv

YEAR_LO, YEAR_HI = 1990, 2020


def gen_congress(seed: int = 7) -> tuple[dict, InterfaceSpec]:
    rng = random.Random(seed)
    members = [(f"H{i:03d}", "house") for i in range(1, 61)] + \
              [(f"S{i:03d}", "senate") for i in range(1, 41)]
    cols: dict[str, list] = {"member": [], "chamber": [], "year": []}
    for member, chamber in members:
        for year in range(YEAR_LO, YEAR_HI + 1):
            for _ in range(rng.randint(2, 10)):
                cols["member"].append(member)
                cols["chamber"].append(chamber)
                cols["year"].append(year)
    schema = [("member", "string"), ("chamber", "string"), ("year", "int64")]
    votes = Relation("votes", schema,
                     [cols["member"], cols["chamber"], cols["year"]])

    year_domain = IntervalDomain(YEAR_LO, YEAR_HI, 1)
    plan = GroupByAgg(
        keys=["member"],
        aggs=[AggSpec("count", None, "votes")],
        input=Filter(
            Between("year",
                    LiteralChoice("year_lo", year_domain),
                    LiteralChoice("year_hi", year_domain)),
            Filter(Eq("chamber",
                      LiteralChoice("chamber",
                                    EnumDomain(("house", "senate")))),
                   Scan("votes"))))
    spec = InterfaceSpec(
        sources=[SourceDecl("votes", "votes.csv", schema)],
        views=[View("member_votes", plan)],
        interactions=[
            Interaction("chamber_select", "member_votes", ["chamber"],
                        "discrete", 500.0),
            Interaction("year_slider", "member_votes",
                        ["year_lo", "year_hi"], "continuous", 20.0),
        ])
    return {"votes": votes}, spec


def gen_filter(seed: int = 11) -> tuple[dict, InterfaceSpec]:
    rng = random.Random(seed)
    cities = [f"city_{i:02d}" for i in range(12)]
    n = 4000
    schema = [("id", "int64"), ("city", "string"), ("value", "float64")]
    rel = Relation("events", schema, [
        list(range(n)),
        [cities[rng.randrange(len(cities))] for _ in range(n)],
        [round(rng.uniform(0, 100), 3) for _ in range(n)],
    ])
    plan = Filter(Eq("city", LiteralChoice("city", EnumDomain(tuple(cities)))),
                  Scan("events"))
    spec = InterfaceSpec(
        sources=[SourceDecl("events", "events.csv", schema)],
        views=[View("city_events", plan)],
        interactions=[Interaction("city_pick", "city_events", ["city"],
                                  "discrete", 200.0)])
    return {"events": rel}, spec


def gen_cube(seed: int = 13) -> tuple[dict, InterfaceSpec]:
    rng = random.Random(seed)
    sensors = [f"s{i:02d}" for i in range(25)]
    n = 6000
    day_lo, day_hi = 1, 30
    schema = [("sensor", "string"), ("day", "int64"), ("value", "float64")]
    rel = Relation("readings", schema, [
        [sensors[rng.randrange(len(sensors))] for _ in range(n)],
        [rng.randint(day_lo, day_hi) for _ in range(n)],
        [round(rng.uniform(-5, 5), 4) for _ in range(n)],
    ])
    day_domain = IntervalDomain(day_lo, day_hi, 1)
    plan = GroupByAgg(
        keys=["sensor"],
        aggs=[AggSpec("sum", "value", "total"), AggSpec("count", None, "n")],
        input=Filter(Between("day",
                             LiteralChoice("day_lo", day_domain),
                             LiteralChoice("day_hi", day_domain)),
                     Scan("readings")))
    spec = InterfaceSpec(
        sources=[SourceDecl("readings", "readings.csv", schema)],
        views=[View("sensor_totals", plan)],
        interactions=[Interaction("day_slider", "sensor_totals",
                                  ["day_lo", "day_hi"], "continuous", 20.0)])
    return {"readings": rel}, spec


def gen_join(seed: int = 17, max_fanout: int | None = 1
             ) -> tuple[dict, InterfaceSpec]:
    """Key-FK join spec; ``max_fanout=None`` leaves the join undeclared."""
    rng = random.Random(seed)
    n_members = 100
    parties = ["gold", "teal", "rust", "plum"]
    members_schema = [("member_id", "int64"), ("party", "string")]
    members = Relation("members", members_schema, [
        list(range(n_members)),
        [parties[rng.randrange(len(parties))] for _ in range(n_members)],
    ])
    n_votes = 1500
    year_lo, year_hi = 2000, 2014
    votes_schema = [("member_id", "int64"), ("year", "int64")]
    votes = Relation("rollcalls", votes_schema, [
        [rng.randrange(n_members) for _ in range(n_votes)],
        [rng.randint(year_lo, year_hi) for _ in range(n_votes)],
    ])
    year_domain = IntervalDomain(year_lo, year_hi, 1)
    plan = GroupByAgg(
        keys=["party"],
        aggs=[AggSpec("count", None, "n")],
        input=Join(
            Filter(Between("year",
                           LiteralChoice("jyear_lo", year_domain),
                           LiteralChoice("jyear_hi", year_domain)),
                   Scan("rollcalls")),
            Scan("members"),
            on=[("member_id", "member_id")],
            max_fanout=max_fanout))
    spec = InterfaceSpec(
        sources=[SourceDecl("rollcalls", "rollcalls.csv", votes_schema),
                 SourceDecl("members", "members.csv", members_schema)],
        views=[View("party_counts", plan)],
        interactions=[Interaction("year_window", "party_counts",
                                  ["jyear_lo", "jyear_hi"],
                                  "discrete", 200.0)])
    return {"rollcalls": votes, "members": members}, spec


def gen_wide(seed: int = 23, rows: int = 10 ** 6, stations: int = 200,
             days: int = 500) -> tuple[dict, InterfaceSpec]:
    """Large flat table for latency measurements."""
    rng = random.Random(seed)
    names = [f"st{i:03d}" for i in range(stations)]
    schema = [("station", "string"), ("day", "int64"), ("value", "float64")]
    rel = Relation("telemetry", schema, [
        [names[rng.randrange(stations)] for _ in range(rows)],
        [rng.randrange(1, days + 1) for _ in range(rows)],
        [rng.uniform(0, 1000) for _ in range(rows)],
    ])
    day_domain = IntervalDomain(1, days, 1)
    plan = GroupByAgg(
        keys=["station"],
        aggs=[AggSpec("sum", "value", "total"), AggSpec("count", None, "n")],
        input=Filter(Between("day",
                             LiteralChoice("wday_lo", day_domain),
                             LiteralChoice("wday_hi", day_domain)),
                     Scan("telemetry")))
    spec = InterfaceSpec(
        sources=[SourceDecl("telemetry", "telemetry.csv", schema)],
        views=[View("station_totals", plan)],
        interactions=[Interaction("day_brush", "station_totals",
                                  ["wday_lo", "wday_hi"],
                                  "continuous", 20.0)])
    return {"telemetry": rel}, spec


GENERATORS = {
    "congress": gen_congress,
    "filter": gen_filter,
    "cube": gen_cube,
    "join": gen_join,
    "wide": gen_wide,
}


def write_dataset(db: dict, spec: InterfaceSpec, out_dir: str) -> list[str]:
    """Write each relation as CSV plus the spec document; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for source in spec.sources:
        path = os.path.join(out_dir, source.path)
        write_csv(db[source.relation], path)
        paths.append(path)
    spec_path = os.path.join(out_dir, "spec.json")
    save_spec(spec, spec_path)
    paths.append(spec_path)
    return paths
