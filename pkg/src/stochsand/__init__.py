"""Stochastic sandpiles with uniform and p-toppling rules.

Exact gambler's-ruin and hole probabilities on line segments, the stationary
law of the driven chain, a brute-force oracle, and simulation harnesses on
2D boxes and for single-source stabilization on the integer line.
"""
from .analytics import (HoleTable, SgrTable, SolverDiverged, hole_closed_form,
                        hole_solve_recurrence, sgr_closed_form, sgr_row_sums,
                        sgr_solve_recurrence)
from .lattice import (Box2D, BudgetExceeded, C, LineZ, PToppling, SandpileConfig, Segment1D,
                      SRW1D, StabilizationOutcome, TopplingPolicy, Uniform1D, sample_emission,
                      stabilize, stabilize_many, stabilize_tracked)
from .oracle import StateSpaceTooLarge, absorption_distribution
from .rng import make_rng

__version__ = "0.1.0"
