"""Driven Rice-Mele lattice simulator.

Tools for interacting Thouless pumps on a staggered, dimerized chain of
three-level sites: exact Fock-space Hamiltonians, unitary and open-system
dynamics, Bloch and center-of-mass band topology, and Floquet analysis,
plus a scenario runner with a command-line front end.
"""

from .model import (Boundary, DriveKind, DriveProtocol, FockBasis,
                    LatticeSpec, build_fock_basis,
                    build_many_body_hamiltonian,
                    build_single_particle_hamiltonian, from_mhz, to_mhz,
                    time_dependent_hamiltonian)
from .bands import (BandLabel, BandResult, BlochGrid, ComBandResult,
                    ContinuityError, GapClosureError, band_structure,
                    bloch_hamiltonian_cell, bloch_hamiltonian_single,
                    chern_number, com_band_structure,
                    effective_subspace_hamiltonian, fukui_hatsugai_curvature)
from .dynamics import (LindbladTrace, NoiseModel, PositivityLossWarning,
                       SectorBasis, StepTooLargeError, UnitaryTrace,
                       adjacent_pair_weight, center_of_mass,
                       density_correlations, double_occupancy_total,
                       evolve_lindblad, evolve_lindblad_cycles, evolve_unitary,
                       evolve_unitary_cycles,
                       mean_occupations, occupation_distribution,
                       prepare_site_excitation, return_probability)
from .floquet import (FloquetSpectrum, build_floquet_hamiltonian,
                      floquet_spectrum, fold_quasienergy,
                      physical_quasienergies, verify_bloch_equivalence)
from .heatmap import emit_heatmap
from .scenarios import (ALL_SCENARIOS, BANDS_SCENARIOS, CATALOG, ConfigError,
                        DYNAMICS_SCENARIOS, SWEEP_SCENARIOS, resolve_config,
                        run_scenario, run_sweep, scenario_defaults)

__version__ = "0.1.0"

__all__ = [
    "Boundary", "DriveKind", "DriveProtocol", "FockBasis", "LatticeSpec",
    "build_fock_basis", "build_many_body_hamiltonian",
    "build_single_particle_hamiltonian", "from_mhz", "to_mhz",
    "time_dependent_hamiltonian",
    "BandLabel", "BandResult", "BlochGrid", "ComBandResult",
    "ContinuityError", "GapClosureError", "band_structure",
    "bloch_hamiltonian_cell", "bloch_hamiltonian_single", "chern_number",
    "com_band_structure", "effective_subspace_hamiltonian",
    "fukui_hatsugai_curvature",
    "LindbladTrace", "NoiseModel", "PositivityLossWarning", "SectorBasis",
    "StepTooLargeError", "UnitaryTrace", "adjacent_pair_weight",
    "center_of_mass", "density_correlations", "double_occupancy_total",
    "evolve_lindblad", "evolve_lindblad_cycles", "evolve_unitary",
    "evolve_unitary_cycles",
    "mean_occupations", "occupation_distribution", "prepare_site_excitation",
    "return_probability",
    "FloquetSpectrum", "build_floquet_hamiltonian", "floquet_spectrum",
    "fold_quasienergy", "physical_quasienergies", "verify_bloch_equivalence",
    "ALL_SCENARIOS", "BANDS_SCENARIOS", "CATALOG", "ConfigError",
    "DYNAMICS_SCENARIOS", "SWEEP_SCENARIOS", "emit_heatmap",
    "resolve_config", "run_scenario", "run_sweep", "scenario_defaults",
    "__version__",
]
