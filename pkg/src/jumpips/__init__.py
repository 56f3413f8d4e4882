"""Jump-type interacting particle systems in a box: rates, simulators, Dirichlet-form tools."""
from .geometry import Configuration, Domain, apply_move, birth, death, lattice_configuration
from .potentials import PotentialSpec, hamiltonian, local_energy, move_energy_delta
from .kernels import EnvelopeSpec, KernelSpec, default_envelope, eval_kernel, make_proposal, validate_kernel
from .rates import RateSpec, detailed_balance_residual, jump_rate, log_jump_rate, reverse_factor
from .dynamics import (SimParams, Trajectory, generator_apply, metropolis_reference, poisson_samples,
                       run_glauber, run_jump_chain, run_thinning, thinning_endpoints)
from .functionals import (CutoffSequence, TestFunction, bound_sums, chi_a, d_a, dirichlet_energy,
                          discrete_gradient, in_M_a, square_field)
from .config import RunConfig, parse_config

__version__ = "0.1.0"
