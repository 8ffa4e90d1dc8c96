"""Risk-aware online motion planning over Gaussian-process hazard estimates."""

from .cost import RiskConstraint
from .gp import DomainError, GaussianBelief, GpModel, SquaredExponential
from .graph_planner import (
    GoalBox,
    GoalDisc,
    GraphConfig,
    GraphPlanner,
    Trajectory,
    check_trigger,
    edge_cost,
    heuristic,
    run_episode,
)
from .risk import RiskMetric, cvar, value_at_risk
from .runner import export_field, run
from .scenario import ConfigError, Scenario, load_scenario
from .smooth_planner import (
    FactorGraphProblem,
    FactorWeights,
    SmoothConfig,
    fix_factors,
    initial_trajectory,
    optimize,
    run_episode_igp,
)
from .trace import EpisodeTrace, read_trace
from .world import Circle, HazardSource, Rect, World

__version__ = "0.1.0"
