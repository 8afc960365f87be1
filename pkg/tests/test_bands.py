"""Band structure, topological invariants and pair bands."""

import math

import numpy as np
import pytest

from ricepump import (BandLabel, BlochGrid, DriveKind, DriveProtocol,
                      GapClosureError, LatticeSpec, band_structure,
                      bloch_hamiltonian_cell, bloch_hamiltonian_single,
                      build_fock_basis, build_many_body_hamiltonian,
                      com_band_structure, effective_subspace_hamiltonian,
                      from_mhz, fukui_hatsugai_curvature, to_mhz)


def pump_drive(stagger_mhz=80.0, delta_mhz=8.0, j_mhz=8.0, period=0.4,
               **kw):
    return DriveProtocol(kind=DriveKind.BULK, j_hop=from_mhz(j_mhz),
                         delta0=from_mhz(delta_mhz),
                         stagger0=from_mhz(stagger_mhz), period=period, **kw)


@pytest.fixture(scope="module")
def pump_bands():
    drive = pump_drive()
    grid = BlochGrid(n_k=32, n_t=32)

    def field(k, t):
        return bloch_hamiltonian_cell(k, t, drive)

    return band_structure(field, grid, period=drive.period)


def test_pump_cycle_chern_numbers(pump_bands):
    assert pump_bands.chern == (1, -1)


def test_chern_numbers_sum_to_zero(pump_bands):
    assert sum(pump_bands.chern) == 0


def test_minimum_gap_matches_avoided_crossing(pump_bands):
    # the gap closes down to 4 min(J, delta0) at the zone edge when the
    # stagger envelope crosses zero
    assert to_mhz(pump_bands.gap_min) == pytest.approx(32.0, rel=0.05)


def test_curvature_is_gauge_invariant(pump_bands):
    drive = pump_drive()
    grid = BlochGrid(n_k=16, n_t=16)
    ks = grid.k_values()
    ts = grid.t_values(drive.period)
    states = np.empty((16, 16, 2), dtype=complex)
    for i, k in enumerate(ks):
        for j, t in enumerate(ts):
            _, vecs = np.linalg.eigh(bloch_hamiltonian_cell(k, t, drive))
            states[i, j] = vecs[:, 0]
    reference = fukui_hatsugai_curvature(states)
    rng = np.random.default_rng(5)
    for _ in range(20):
        phases = np.exp(2j * math.pi * rng.random((16, 16)))
        assert np.allclose(
            fukui_hatsugai_curvature(states * phases[:, :, None]),
            reference, atol=1e-12)


def test_two_bloch_forms_share_spectrum():
    drive = pump_drive(stagger_mhz=40.0, delta_mhz=5.0, j_mhz=7.0,
                       phase0=0.7)
    worst = 0.0
    for k in np.linspace(-math.pi, math.pi, 17):
        for t in np.linspace(0.0, drive.period, 13):
            e_cell = np.linalg.eigvalsh(bloch_hamiltonian_cell(k, t, drive))
            e_single = np.linalg.eigvalsh(
                bloch_hamiltonian_single(0.5 * k, t, drive))
            worst = max(worst, np.abs(e_cell - e_single).max())
    assert worst < 1e-10


def test_gap_closure_detected_without_dimerization():
    # delta0 = 0 leaves the spectrum gapless when the stagger envelope
    # crosses zero; the scan must refuse to assign a Chern number
    drive = pump_drive(delta_mhz=0.0)
    grid = BlochGrid(n_k=32, n_t=32)

    def field(k, t):
        return bloch_hamiltonian_cell(k, t, drive)

    with pytest.raises(GapClosureError):
        band_structure(field, grid, period=drive.period)


def test_com_reduction_reproduces_single_particle_bands():
    # the one-particle center-of-mass reduction must collapse onto the
    # analytic two-band cell matrix
    spec = LatticeSpec(n_sites=4, interaction_u=from_mhz(-190.0))
    drive = pump_drive()
    grid = BlochGrid(n_k=16, n_t=16)
    result = com_band_structure(spec, drive, n_particles=1, grid=grid)

    def field(k, t):
        return bloch_hamiltonian_cell(k, t, drive)

    reference = band_structure(field, grid, period=drive.period)
    assert np.abs(result.energies - reference.energies).max() < 1e-10
    assert result.chern == reference.chern


@pytest.fixture(scope="module")
def bound_bands():
    spec = LatticeSpec(n_sites=9, interaction_u=from_mhz(-190.0),
                       first_index=18)
    drive = pump_drive(stagger_mhz=8.0, delta_mhz=12.0, j_mhz=12.0)
    return com_band_structure(spec, drive, n_particles=2, ring_cells=6,
                              grid=BlochGrid(n_k=16, n_t=128))


def test_bound_state_band_charges(bound_bands):
    bound = [i for i, lab in enumerate(bound_bands.labels)
             if lab is BandLabel.BOUND]
    assert len(bound) == 2
    assert sorted(bound_bands.chern[i] for i in bound) == [-1, 1]


def test_bound_band_doublon_weight(bound_bands):
    for i, lab in enumerate(bound_bands.labels):
        if lab is BandLabel.BOUND:
            assert bound_bands.double_occupancy[i] > 0.5


def test_no_interaction_means_no_isolated_band():
    spec = LatticeSpec(n_sites=9, interaction_u=0.0, first_index=18)
    drive = pump_drive(stagger_mhz=8.0, delta_mhz=12.0, j_mhz=12.0)
    result = com_band_structure(spec, drive, n_particles=2, ring_cells=6,
                                grid=BlochGrid(n_k=8, n_t=64))
    assert BandLabel.BOUND not in result.labels
    assert BandLabel.RESONANT not in result.labels


def test_pair_binding_energy_second_order():
    # two sites, strong attraction: the bound level sits at
    # U + 2 hop^2 / U + O(hop^4 / U^3)
    u = from_mhz(-2000.0)
    hop = from_mhz(10.0)
    spec = LatticeSpec(n_sites=2, interaction_u=u)
    basis = build_fock_basis(spec, 2)
    h = np.asarray(build_many_body_hamiltonian(spec, basis, 0.0, 0.0, hop))
    lowest = np.linalg.eigvalsh(h).min()
    # both doublon configurations repel off (1, 1): shift 2 * 2 hop^2 / U
    predicted = u + 4.0 * hop ** 2 / u
    assert abs(lowest - predicted) < 40.0 * abs(hop ** 3 / u ** 2)


def test_effective_pair_model_tracks_full_spectrum():
    # strong attraction confines the pair to doublon and adjacent
    # configurations; the reduced matrix must reproduce the low band
    spec = LatticeSpec(n_sites=7, interaction_u=from_mhz(-190.0))
    stagger = from_mhz(8.0)
    delta = from_mhz(6.0)
    j = from_mhz(12.0)
    basis = build_fock_basis(spec, 2)
    full = np.asarray(build_many_body_hamiltonian(spec, basis, stagger,
                                                  delta, j))
    evals = np.linalg.eigvalsh(full)
    u_half = 0.5 * float(np.mean(spec.interaction_array))
    low = evals[evals < u_half]
    reduced = np.asarray(effective_subspace_hamiltonian(spec, stagger,
                                                        delta, j))
    assert reduced.shape == (13, 13)
    approx = np.sort(np.linalg.eigvalsh(reduced))[:len(low)]
    assert to_mhz(np.abs(approx - low).max()) < 0.5


def test_effective_pair_model_couplings():
    spec = LatticeSpec(n_sites=3, interaction_u=from_mhz(-100.0))
    h = np.asarray(effective_subspace_hamiltonian(spec, 0.0, 0.0,
                                                  from_mhz(5.0)))
    # doublon(1) <-> pair(1,2) carries the bosonic sqrt(2) enhancement
    assert h[0, 1] == pytest.approx(-math.sqrt(2.0) * from_mhz(5.0))
    assert h[0, 0] == pytest.approx(from_mhz(-100.0))


def test_grid_validation():
    with pytest.raises(ValueError):
        BlochGrid(n_k=2, n_t=32)


def test_disordered_drive_has_no_bloch_form():
    drive = pump_drive(disorder_w=1.0, disorder_seed=1)
    with pytest.raises(ValueError):
        bloch_hamiltonian_cell(0.1, 0.0, drive)
