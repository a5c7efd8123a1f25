"""aiamd: two-stage splitting integrators with adaptive parameter selection.

Given a system and a step size, the adaptive selection picks the member of
the one-parameter two-stage integrator family that minimizes a closed-form
harmonic energy-error bound over the frequency range the system actually
exercises.  MD and HMC drivers, holonomic distance constraints and sampling
diagnostics round out the toolkit.
"""

from .adaptive import (AiaResult, B_MAX, B_MIN, DEFAULT_SAFETY_FACTOR, TimestepCheck,
                       bond_periods, dimensionless_step, energy_error_bound,
                       energy_error_bound_verlet, max_stable_dt, optimal_b, select_b,
                       stability_limit, verlet_timestep_check, worst_case_error)
from .analysis import (Histogram, IacfResult, TimeSeries, acf, histogram, iacf,
                       radius_of_gyration, rmsd, rmst, temperature)
from .errors import (AiamdError, CoincidentParticlesError, ConfigError,
                     ConstraintConvergenceError, ConstraintViolationError,
                     NoBondsError, NumericalDivergenceError,
                     SingularConstraintJacobianError, UnstableStepSizeError,
                     ZeroVarianceError)
from .forces import ForceEval, candidate_pairs, harmonic_bond_eval, lennard_jones_eval, total_energy, total_eval
from .integrators import (ConstraintSolve, IntegratorSpec, PRESET_B, Trajectory,
                          constrained_half_step, drift, integrate, kick, rattle_step,
                          two_stage_constrained_step, two_stage_step, verlet_step)
from .samplers import (HmcConfig, RunReport, TemperatureRescale, TrajectoryFrame,
                       metropolis_accept, resample_momenta, run_hmc, run_md)
from .system import (Bond, Constraint, LennardJones, PhaseState, System,
                     build_constrained_dumbbell, build_harmonic_chain, build_lj_cluster,
                     degrees_of_freedom, kinetic_energy)

__version__ = "0.1.0"
