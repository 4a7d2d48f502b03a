"""Cell-free massive MIMO downlink simulator with subgroup multicast service."""

from .config import DeploymentSpec, SystemConfig, preset
from .errors import (
    CampaignError,
    ConfigError,
    NumericalError,
    StatsError,
    SynthesisError,
)
from .geometry import Deployment, build_deployment
from .grouping import GroupAssignment, kmeans_subgroups, make_plan
from .pilots import PilotPlan, assign_pilots_and_cluster
from .estimation import CompositeStats, composite_stats
from .precoding import GroupPrecoders, cb_precoders, centralized_precoders
from .evaluation import SeReport
from .harness import CampaignResult, run_campaign, run_snapshot, write_outputs

__version__ = "0.1.0"

__all__ = [
    "CampaignError",
    "CampaignResult",
    "CompositeStats",
    "ConfigError",
    "Deployment",
    "DeploymentSpec",
    "GroupAssignment",
    "GroupPrecoders",
    "NumericalError",
    "PilotPlan",
    "SeReport",
    "StatsError",
    "SynthesisError",
    "SystemConfig",
    "assign_pilots_and_cluster",
    "build_deployment",
    "cb_precoders",
    "centralized_precoders",
    "composite_stats",
    "kmeans_subgroups",
    "make_plan",
    "preset",
    "run_campaign",
    "run_snapshot",
    "write_outputs",
]
