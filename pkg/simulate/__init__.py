from simulate.samples import (
    ArTrajectory,
    FixedDesignSample,
    RandomDesignSample,
    design_points,
    simulate_ar,
    simulate_fixed_design,
    simulate_random_design,
)
from simulate.rearrange import Rearrangement, rearrange_blocks

__all__ = [
    "ArTrajectory",
    "FixedDesignSample",
    "RandomDesignSample",
    "design_points",
    "simulate_ar",
    "simulate_fixed_design",
    "simulate_random_design",
    "Rearrangement",
    "rearrange_blocks",
]
