"""Randomized implicit two-stage Runge-Kutta schemes.

Integrators for the semi-implicit (`s1`) and implicit (`s2`) randomized
midpoint schemes and their deterministic/explicit relatives, probabilistic
stability regions on the linear test equation, and a Monte Carlo harness
for empirical convergence orders.
"""

from .ivp import (IVP, FixedTau, SchemeId, TauStream, TimeGrid, Trajectory,
                  dahlquist, holder_problem, make_grid, stiff_problem, tau_stream)
from .schemes import (AFFINE, NEWTON, PICARD, ContractionViolated, NonConvergence,
                      SingularStage, StageSolverConfig, StageSolverError, StepResult,
                      integrate, integrate_paths, solve_stage_affine, solve_stage_newton,
                      solve_stage_picard, step_det_rk2, step_det_s1, step_det_s2,
                      step_rand_expl_rk2, step_s1, step_s2)
from .stability import (EmptyContour, NonIntegrable, PoleAtStage, RegionGrid,
                        StabilityVerdict, amplification, as_functional, classify_point,
                        contour_extract, empirical_decay_rate, find_ms_interval_endpoint,
                        ms_functional_closed, ms_functional_quadrature, ms_interval_gap,
                        sample_ms_gain, scan_region)
from .experiments import (DegenerateFit, ErrorEstimate, NotOnReferenceGrid, OrderFit,
                          StiffPath, convergence_order, mc_error, reference_solution,
                          stiff_demo, worker_count)

__version__ = "0.1.0"
