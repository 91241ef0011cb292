"""Regularized L-shaped solver for two-stage stochastic linear programs.

Core pieces: a problem model with generators and SMPS parsing, a dense
simplex LP engine with dual extraction, a sampling oracle, the two-loop
proximal-bundle driver with four step-size policies, SAA bound
estimation, and an HTTP service + CLI on top.
"""

from .bundle import BundleModel, Cut, init_bundle
from .errors import SolverError
from .instance import (
    BlockDiscrete,
    FiniteList,
    IndependentDiscrete,
    Scenario,
    TwoStageProblem,
    build_extensive_form,
    gen_inventory,
    gen_random,
    tiny_inventory,
    validate,
)
from .lp import LinearProgram, LpSolution, solve_lp
from .oracle import (
    Estimate,
    Estimator,
    NoiseModel,
    SampleSet,
    draw_sample_set,
    estimate,
    exact_objective,
    exact_sample_set,
    exhaustive_noise_bounds,
)
from .prox import ProxResult, Region, solve_prox_step
from .recourse import SecondStageEngine, SecondStageResult, solve_second_stage
from .saa import evaluate_candidates, saa_lower_bound, sample_plan
from .smps import SmpsTriplet, parse_native, parse_smps, write_native
from .solver import (
    Constant,
    Optimal,
    Practical,
    RunResult,
    SharpConstant,
    SharpOptimal,
    SolverConfig,
    exact_proximal_gap,
    inner_loop_bound,
    next_step_size,
    run,
    serious_test,
    theory_bounds,
)

__version__ = "0.1.0"
