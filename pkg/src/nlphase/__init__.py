"""Numerical laboratory for nonlocal phase transitions in periodic media.

Discretizes heterogeneous nonlocal Ginzburg-Landau energies on periodic
strips, constructs planelike constrained minimizers, measures density and
energy estimates, builds comparison barriers, computes nonlocal perimeters,
and runs sharp-interface limit experiments.
"""

from .model import (KernelSpec, PotentialSpec, eval_kernel, eval_potential,
                    eval_potential_derivative, gamma_of, psi_s,
                    validate_hypotheses)
from .lattice import (Direction, Field, StripDomain, build_domain,
                      birkhoff_shift, canonical_rep, equivalent,
                      image_enumeration)
from .energy import (BallWindow, BoxWindow, PERIOD, EnergyReport, WeightTable,
                     apply_LK, ball_at_cell, ball_at_world, build_weights,
                     energy_gradient, rescale_field, total_energy)

__all__ = [
    "KernelSpec", "PotentialSpec", "eval_kernel", "eval_potential",
    "eval_potential_derivative", "gamma_of", "psi_s", "validate_hypotheses",
    "Direction", "Field", "StripDomain", "build_domain", "birkhoff_shift",
    "canonical_rep", "equivalent", "image_enumeration",
    "BallWindow", "BoxWindow", "PERIOD", "EnergyReport", "WeightTable",
    "apply_LK", "ball_at_cell", "ball_at_world", "build_weights",
    "energy_gradient", "rescale_field", "total_energy",
]

__version__ = "0.1.0"
