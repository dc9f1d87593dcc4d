"""Latency-feasible physical plan synthesis for interactive data views.

Given an interface spec (choice-parameterized query plans plus
per-interaction latency bounds) and a deployment model, the optimizer
searches data-structure choices and placements, reports the Pareto
frontier of client/server resource use, and the executor runs any
synthesized plan against a brute-force oracle.
"""

from .costmodel import Calibration, DEFAULT_CALIBRATION, assess, calibrate
from .deployment import (DeploymentModel, Link, Site, default_deployment,
                         fits, transfer_cost)
from .executor import Sampling, Session, TraceEvent, verify
from .optimizer import (ParetoPoint, enumerate_candidates, feasible_set,
                        pareto)
from .oracle import oracle_eval
from .physical import BaselineStrategy, PhysicalPlan, StructureStrategy
from .plan import (AggSpec, And, Between, Binding, ChoicePlan, EnumDomain,
                   Eq, Filter, GroupByAgg, InterfaceSpec, Interaction,
                   IntervalDomain, Join, LiteralChoice, Project, Scan,
                   SourceDecl, SubplanChoice, View, bind, choice_dependencies,
                   enumerate_bindings, validate_spec)
from .relation import ColumnStats, Relation, compute_stats, load_csv
from .structures import (BaseScanKind, BuiltStructure, HashIndexKind,
                         MatchResult, PrefixSumCubeKind,
                         SortedRangeIndexKind, build, estimate,
                         eval_structure, match, match_all)

__version__ = "0.1.0"
