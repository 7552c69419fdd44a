"""Multiscale solvers for spin dynamics driven by high-frequency fields.

Kernel-averaged temporal upscaling for a single magnetic moment and
spatio-temporal upscaling for a periodic chain of exchange-coupled
moments, with resolved and period-averaged reference solvers and a
convergence-experiment harness.
"""

from .fields import (TwoScaleField, chain_pulse_field, circular_cos_field,
                     circular_field, constant_field, make_field, squared_field)
from .hmm_chain import (ChainConfig, ChainMacroTrajectory, chain_micro_solve,
                        chain_run, chain_upscale, exchange_field,
                        interpolate_macro, macro_average, macro_average_state)
from .hmm_single import (HmmConfig, MacroNonConvergedError, MacroTrajectory,
                         macro_step, micro_solve, run_hmm, upscale)
from .integrators import (MidpointConfig, NonConvergedError, Trajectory,
                          integrate, midpoint_step, precession_path,
                          precession_step)
from .kernels import AveragingKernel, build_kernel, weighted_average
from .reference import (DnsConfig, dns_chain, dns_single, effective_solve,
                        m1_oracle, scaled_micro)
from .vecmath import as_spin, cross, ll_rhs, precession_rhs, vec3

__version__ = "0.1.0"

__all__ = [
    "AveragingKernel", "ChainConfig", "ChainMacroTrajectory", "DnsConfig",
    "HmmConfig", "MacroNonConvergedError", "MacroTrajectory", "MidpointConfig",
    "NonConvergedError", "Trajectory", "TwoScaleField", "as_spin",
    "build_kernel", "chain_micro_solve", "chain_pulse_field", "chain_run",
    "chain_upscale", "circular_cos_field", "circular_field", "constant_field",
    "cross", "dns_chain", "dns_single", "effective_solve", "exchange_field",
    "integrate", "interpolate_macro", "ll_rhs", "m1_oracle", "macro_average",
    "macro_average_state", "macro_step", "make_field", "micro_solve",
    "midpoint_step", "precession_path", "precession_rhs", "precession_step",
    "run_hmm", "scaled_micro", "squared_field", "upscale", "vec3",
    "weighted_average",
]
