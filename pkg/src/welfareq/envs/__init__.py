from .resource import RESOURCE_TYPES, ResourceGathering, RgConfig, build_rg
from .synthetic import (
    AllocationInstance,
    best_allocation_nsw,
    build_allocation_momdp,
    build_fig1,
    build_fig3,
    fig3_tracking_policy,
)
from .taxi import DEFAULT_PAIRS, Taxi, TaxiConfig, TaxiState, build_taxi

__all__ = [
    "AllocationInstance",
    "DEFAULT_PAIRS",
    "RESOURCE_TYPES",
    "ResourceGathering",
    "RgConfig",
    "Taxi",
    "TaxiConfig",
    "TaxiState",
    "best_allocation_nsw",
    "build_allocation_momdp",
    "build_fig1",
    "build_fig3",
    "build_rg",
    "build_taxi",
    "fig3_tracking_policy",
]
