"""Intersectional fairness auditing and fair interpretable classifiers.

Measures (SD, SPSF, FPSF) over conjunction or linear-threshold subgroups,
exact most-unfair-subgroup search, and 0-1-loss linear / DNF classifiers
trained under a fairness threshold with lazily added cuts.
"""

from .auditor import (
    AuditObjective,
    AuditResult,
    GammaCheck,
    audit_conjunction_bnb,
    audit_conjunction_milp,
    audit_linear_milp,
    check_gamma,
    logistic_warm_start,
    make_objective,
)
from .dataset import AuditDataset, ColumnMeta, DiscretizationRule, RawTable, build_dataset, ingest_csv, load_schema, split
from .kernels import BACKEND
from .metrics import (
    Measure,
    MetricReport,
    PredictionVector,
    enumerate_measure,
    evaluate_measure,
    fpsf,
    fpsf_from_spsf_conditional,
    gamma_bound_for_msd,
    msd_enumerate,
    spsf,
    spsf_from_sd,
    subgroup_discrepancy,
)
from .milp import MilpModel, MilpSolution, Status, export_lp, import_solution, read_lp, solve, solve_with
from .subgroups import Conjunction, LinearThresholdGroup, describe, enumerate_conjunctions, membership
from .trainer import (
    DnfSpec,
    FairnessCut,
    LinearClassifierSpec,
    TrainConfig,
    TrainResult,
    TrainStatus,
    build_master_dnf,
    build_master_linear,
    evaluate,
    render_cut,
    train,
)

__version__ = "0.1.0"
