"""Hamiltonian construction against closed-form references."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ricepump import (Boundary, DriveKind, DriveProtocol, LatticeSpec,
                      build_fock_basis, build_many_body_hamiltonian,
                      build_single_particle_hamiltonian, from_mhz,
                      time_dependent_hamiltonian, to_mhz)


def dense(h):
    return np.asarray(h.todense()) if hasattr(h, "todense") else np.asarray(h)


def test_unit_conversion_roundtrip():
    assert from_mhz(1.0) == pytest.approx(2.0 * math.pi)
    assert to_mhz(from_mhz(-190.0)) == pytest.approx(-190.0)


def test_dimer_spectrum_closed_form():
    # two sites, stagger D and hop -J - delta on the first bond:
    # eigenvalues are +/- sqrt(D^2 + (J + delta)^2)
    spec = LatticeSpec(n_sites=2, interaction_u=0.0)
    h = dense(build_single_particle_hamiltonian(spec, 3.0, 0.5, 2.0))
    assert h[0, 0] == pytest.approx(-3.0)   # odd site carries -D
    assert h[1, 1] == pytest.approx(+3.0)
    assert h[0, 1] == pytest.approx(-2.5)
    expected = math.sqrt(3.0 ** 2 + 2.5 ** 2)
    assert np.linalg.eigvalsh(h) == pytest.approx([-expected, expected])


def test_fully_dimerized_chain_spectrum():
    # delta = J kills every even bond; the chain splits into dimers with
    # eigenvalues +/- 2J each
    spec = LatticeSpec(n_sites=4, interaction_u=0.0)
    h = dense(build_single_particle_hamiltonian(spec, 0.0, 2.0, 2.0))
    assert np.linalg.eigvalsh(h) == pytest.approx([-4.0, -4.0, 4.0, 4.0])


def test_bond_sign_alternation():
    spec = LatticeSpec(n_sites=5, interaction_u=0.0)
    h = dense(build_single_particle_hamiltonian(spec, 0.0, 0.25, 1.0))
    hops = [h[i, i + 1] for i in range(4)]
    assert hops == pytest.approx([-1.25, -0.75, -1.25, -0.75])


def test_subset_lattice_keeps_parent_parity():
    # a subset starting on an even parent site flips both patterns
    spec = LatticeSpec(n_sites=4, interaction_u=0.0, first_index=18)
    assert list(spec.site_indices) == [18, 19, 20, 21]
    assert list(spec.stagger_signs) == [1, -1, 1, -1]
    h = dense(build_single_particle_hamiltonian(spec, 2.0, 0.5, 1.0))
    assert h[0, 0] == pytest.approx(+2.0)
    assert h[0, 1] == pytest.approx(-0.5)   # bond (18,19): even parity
    assert h[1, 2] == pytest.approx(-1.5)


def test_basis_dimensions():
    spec3 = LatticeSpec(n_sites=7, interaction_u=0.0)
    assert build_fock_basis(spec3, 1).dim == 7
    assert build_fock_basis(spec3, 2).dim == 7 * 8 // 2
    spec2 = LatticeSpec(n_sites=7, local_dim=2, interaction_u=0.0)
    assert build_fock_basis(spec2, 2).dim == 7 * 6 // 2


def test_single_particle_sector_matches_site_matrix():
    spec = LatticeSpec(n_sites=6, interaction_u=from_mhz(-190.0))
    basis = build_fock_basis(spec, 1)
    h_many = dense(build_many_body_hamiltonian(spec, basis, 1.3, 0.4, 0.9))
    h_site = dense(build_single_particle_hamiltonian(spec, 1.3, 0.4, 0.9))
    # one-particle basis order coincides with site order
    assert np.allclose(h_many, h_site)


def test_pair_hopping_carries_bose_factor():
    spec = LatticeSpec(n_sites=2, interaction_u=5.0)
    basis = build_fock_basis(spec, 2)
    h = dense(build_many_body_hamiltonian(spec, basis, 0.0, 0.5, 2.0))
    i20 = basis.index((2, 0))
    i11 = basis.index((1, 1))
    assert h[i11, i20] == pytest.approx(-2.5 * math.sqrt(2.0))
    assert h[i20, i20] == pytest.approx(5.0)   # U/2 * n (n - 1) with n = 2
    assert h[i11, i11] == pytest.approx(0.0)


def test_occupancy_cutoff_blocks_hopping():
    # local_dim 3 forbids triple occupation: no matrix element may connect
    # (2, 1) to a (3, 0) state, so the basis simply lacks it
    spec = LatticeSpec(n_sites=2, interaction_u=0.0)
    basis = build_fock_basis(spec, 3)
    assert basis.dim == 2
    with pytest.raises(KeyError):
        basis.index((3, 0))


def test_interaction_per_site_array():
    spec = LatticeSpec(n_sites=3, interaction_u=(1.0, 2.0, 3.0))
    basis = build_fock_basis(spec, 2)
    h = dense(build_many_body_hamiltonian(spec, basis, 0.0, 0.0, 0.0))
    assert h[basis.index((0, 2, 0)), basis.index((0, 2, 0))] == pytest.approx(2.0)
    assert h[basis.index((0, 0, 2)), basis.index((0, 0, 2))] == pytest.approx(3.0)


def test_drive_validation():
    with pytest.raises(ValueError):
        DriveProtocol(kind=DriveKind.BULK, j_hop=1.0, delta0=1.0,
                      stagger0=1.0, period=0.0)
    with pytest.raises(ValueError):
        DriveProtocol(kind=DriveKind.BULK, j_hop=-1.0, delta0=1.0,
                      stagger0=1.0, period=1.0)
    with pytest.raises(ValueError):
        DriveProtocol(kind=DriveKind.BULK, j_hop=math.nan, delta0=1.0,
                      stagger0=1.0, period=1.0)


def test_bulk_drive_quadrature():
    drive = DriveProtocol(kind=DriveKind.BULK, j_hop=1.0, delta0=3.0,
                          stagger0=7.0, period=2.0)
    env0, delta0 = drive.modulation(0.0)
    assert env0 == pytest.approx(1.0)
    assert delta0 == pytest.approx(0.0)
    env_q, delta_q = drive.modulation(0.5)
    assert env_q == pytest.approx(0.0, abs=1e-15)
    assert delta_q == pytest.approx(3.0)


def test_edge_drive_quadrature():
    drive = DriveProtocol(kind=DriveKind.EDGE, j_hop=1.0, delta0=3.0,
                          stagger0=7.0, period=4.0)
    env0, delta0 = drive.modulation(0.0)
    assert env0 == pytest.approx(0.0, abs=1e-15)
    assert delta0 == pytest.approx(-3.0)
    env_q, delta_q = drive.modulation(1.0)
    assert env_q == pytest.approx(1.0)
    assert delta_q == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(num=st.integers(min_value=0, max_value=1023),
       cycles=st.integers(min_value=0, max_value=9))
def test_drive_exactly_periodic(num, cycles):
    # dyadic sample times survive fmod without rounding, so periodicity
    # must hold bit for bit
    drive = DriveProtocol(kind=DriveKind.BULK, j_hop=1.0, delta0=2.0,
                          stagger0=5.0, period=0.5, phase0=0.3)
    t = num / 1024.0 * drive.period
    assert drive.modulation(t + cycles * drive.period) == drive.modulation(t)


def test_disorder_profile_seeded():
    kw = dict(kind=DriveKind.BULK, j_hop=1.0, delta0=1.0, stagger0=1.0,
              period=1.0, disorder_w=2.0)
    a = DriveProtocol(disorder_seed=7, **kw).disorder_profile(20)
    b = DriveProtocol(disorder_seed=7, **kw).disorder_profile(20)
    c = DriveProtocol(disorder_seed=8, **kw).disorder_profile(20)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.all(np.abs(a) <= 0.5)


def test_offset_and_disorder_enter_static_stagger():
    drive = DriveProtocol(kind=DriveKind.BULK, j_hop=1.0, delta0=1.0,
                          stagger0=4.0, period=1.0, offset_r=0.25,
                          disorder_w=1.5, disorder_seed=3)
    static = drive.static_stagger(8)
    xi = drive.disorder_profile(8)
    assert static == pytest.approx(4.0 * (0.25 + 1.5 * xi))


@pytest.mark.parametrize("kind,phase0", [(DriveKind.BULK, 0.0),
                                         (DriveKind.BULK, 1.1),
                                         (DriveKind.EDGE, 0.4)])
def test_affine_builder_matches_direct_assembly(kind, phase0):
    spec = LatticeSpec(n_sites=5, interaction_u=from_mhz(-190.0))
    drive = DriveProtocol(kind=kind, j_hop=from_mhz(8.0),
                          delta0=from_mhz(8.0), stagger0=from_mhz(80.0),
                          period=0.4, phase0=phase0, offset_r=0.3,
                          disorder_w=0.7, disorder_seed=11)
    basis = build_fock_basis(spec, 2)
    builder = time_dependent_hamiltonian(spec, basis, drive)
    for t in (0.0, 0.13, 0.2, 0.37, 1.03):
        staggers, delta = drive.instantaneous(t, spec.n_sites)
        direct = dense(build_many_body_hamiltonian(spec, basis, staggers,
                                                   delta, drive.j_hop))
        assert np.allclose(builder(t), direct, atol=1e-12)


def test_static_drive_is_constant():
    drive = DriveProtocol(kind=DriveKind.STATIC, j_hop=1.0, delta0=0.7,
                          stagger0=2.0, period=1.0)
    assert drive.modulation(0.0) == drive.modulation(0.381)


def test_periodic_boundary_adds_wrap_bond():
    spec = LatticeSpec(n_sites=4, interaction_u=0.0,
                       boundary=Boundary.PERIODIC)
    h = dense(build_single_particle_hamiltonian(spec, 0.0, 0.5, 1.0))
    assert h[3, 0] != 0.0
    assert h[3, 0] == pytest.approx(-0.5)   # bond 4 sits on an even site
