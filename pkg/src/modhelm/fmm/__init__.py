"""Fast multipole method for the 2-D Yukawa kernel ``K_0(|x - y|/alpha)``."""

from .summation import (FieldResult, FMMPlan, ParticleSystem, direct_evaluate, evaluate,
                       truncation_order)
from .expansions import l2l, l2p, m2l, m2m, m2p, p2l, p2m
from .tree import QuadTree, build_lists, build_tree

__all__ = [
    "FieldResult", "FMMPlan", "ParticleSystem", "QuadTree", "build_lists", "build_tree",
    "direct_evaluate", "evaluate", "l2l", "l2p", "m2l", "m2m", "m2p", "p2l", "p2m",
    "truncation_order",
]
