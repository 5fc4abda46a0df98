"""Periodic-lattice simulator for a stiffly coupled canonical pair field.

One slow canonical pair (p, q) couples to stiff auxiliary pairs whose
slaved limit turns the slow pair into a Schrodinger wavefunction
psi = (q + ip)/sqrt(2).  The package evolves the full field system,
computes its conserved charges, and cross-checks them against quantum
expectation values and an independent Schrodinger solver.
"""

from .scenario import VERSION as __version__  # noqa: F401

from .lattice import (  # noqa: F401
    ComplexLattice,
    Grid,
    RealLattice,
    integrate,
    inner_product,
    make_grid,
    spectral_derivative,
)
from .dynamics import (  # noqa: F401
    FieldState,
    PhysicalConstants,
    Potential,
    Stepper,
    adiabatic_residual,
    equations_of_motion,
    hamiltonian_density,
    init_adiabatic,
    step_full,
    total_energy,
)
from .charges import (  # noqa: F401
    ChargeRecord,
    angular_momentum_charge,
    compute_charge_record,
    momentum_balance_residual,
    momentum_charge,
    momentum_charge_reduced,
    momentum_correction_term,
    momentum_density,
    phase_charge,
    write_charges_csv,
)
from .quantum import (  # noqa: F401
    EhrenfestReport,
    SchrodingerStepper,
    Wavefunction,
    angular_momentum_expectation,
    ehrenfest_check,
    force_expectation,
    from_wavefunction,
    gaussian_packet,
    l2_distance,
    momentum_expectation,
    plane_wave,
    position_expectation,
    schrodinger_step,
    state_to_wavefunction,
    to_wavefunction,
)
from .scenario import (  # noqa: F401
    ConfigError,
    ScenarioConfig,
    ScenarioError,
    load_config,
    parse_config,
    run_scenario,
)
from . import io  # noqa: F401
