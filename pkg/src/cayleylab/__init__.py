"""Random walks and wired spanning forests on Cayley graphs.

A Monte Carlo laboratory: concrete group families (Z^d, Heisenberg,
lamplighter, free groups, products), word-metric ball oracles, symmetric
walk observables (occupation times, exit times, return probabilities),
loop-erased walks, wired spanning forest samplers, and numeric evaluation
of the ball-volume bounds these observables are compared against.
"""

from .bounds import (BoundParams, ExponentialVolume, FreeGroupVolume,
                     PolynomialVolume, TabulatedVolume, heat_kernel_bound,
                     hitting_bound_check, occupation_split, return_bound,
                     volume_doubling_table, wsf_split)
from .errors import (CapacityError, CayleyLabError, ExperimentError, FitError,
                     InputError, NumericError, ParameterError, SamplingError)
from .groups import (FreeGroup, GroupModel, Heisenberg3, LamplighterZ2OverZ,
                     ProductGroup, ZPower, parse_group)
from .harness import (ExperimentConfig, ExponentFit, fit_exponent,
                      records_to_csv, records_to_json, run_experiment,
                      trial_rng)
from .lerw import loop_erase, sample_lerw
from .metric import BEYOND, DistanceOracle, build_ball
from .stats import EstimateRecord, summarize
from .walk import (EscapeRadius, HitSet, OccupationResult, StepDistribution,
                   Trajectory, estimate_return_probability,
                   make_step_distribution, sample_exit_time,
                   sample_hits_target, sample_occupation_time,
                   sample_trajectory)
from .wsf import (ComponentStats, RayTrace, TruncatedForest, WiredBallGraph,
                  WiredForest, build_wired_ball, component_stats,
                  ray_decomposition_trace, wilson_rooted_at_infinity_truncated,
                  wilson_wired)

__version__ = "0.1.0"
