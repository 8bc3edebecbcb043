"""Exact rank-one towers, conjugated block permutations and Poisson cylinder probabilities."""

from .conjugator import (BlockPermutation, ConjugationPlan, InvolutionR, apply_perm,
                         build_block_perm, build_plan, homoclinic_quantities, t_power)
from .errors import Rank1Error
from .experiments import (AverageTrace, checkpoints, gap_condition_check, nonrecurrence_run,
                          oracle_run, theorem1_run)
from .poisson import (CylinderEvent, ExactProb, cylinder_prob, mc_oracle, nonrecurrence_prob,
                      suspension_correlation, to_float)
from .sequences import SequencePair
from .tower import (ConstructionParams, FloorSet, TowerSchedule, build_schedule, correlation,
                    lift, measure, set_algebra, shift)

__all__ = [
    "AverageTrace", "BlockPermutation", "ConjugationPlan", "ConstructionParams", "CylinderEvent",
    "ExactProb", "FloorSet", "InvolutionR", "Rank1Error", "SequencePair", "TowerSchedule",
    "apply_perm", "build_block_perm", "build_plan", "build_schedule", "checkpoints",
    "correlation", "cylinder_prob", "gap_condition_check", "homoclinic_quantities", "lift",
    "mc_oracle", "measure", "nonrecurrence_prob", "nonrecurrence_run", "oracle_run",
    "set_algebra", "shift", "suspension_correlation", "t_power", "theorem1_run", "to_float",
]
