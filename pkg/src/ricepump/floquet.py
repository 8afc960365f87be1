"""Floquet analysis of the periodically driven chain.

The harmonically driven single-particle Hamiltonian

    H(t) = H_static + stagger0 * env(t) * S + delta(t) * D

has exactly one Fourier harmonic for both drive shapes, so the Floquet
quasienergy operator truncates to a block-tridiagonal matrix on the
extended space |harmonic m> x |site>, m = -M..M:

    K[(m', j'), (m, j)] = H_static[j', j] + m w delta_mm' delta_jj'
                          + H1[j', j] delta_{m', m+1} + h.c.

with H1 the first Fourier coefficient of the drive terms.  Eigenvalues
repeat in copies shifted by multiples of the drive frequency; folding
into (-w/2, w/2] and keeping the copy centred on harmonic zero recovers
the physical quasienergies.  Truncation quality is measured by the
harmonic weight profile of each eigenstate: converged states keep all
but a set tolerance of their weight away from the truncation edge.

Also provides the numerical check that the two Bloch parametrizations in
:mod:`bands` (two-site cell and synthetic half-cell forms) are spectrally
identical, which pins the gauge relation between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bands import BlochGrid, bloch_hamiltonian_cell, bloch_hamiltonian_single
from .model import (DriveKind, DriveProtocol, LatticeSpec,
                    build_single_particle_hamiltonian)


def _first_harmonic_coefficients(drive: DriveProtocol) -> tuple[complex, complex]:
    """Fourier coefficients c1 of the envelope and of delta(t).

    env(t) = c_env e^{iwt} + c.c. and delta(t) = c_delta e^{iwt} + c.c.
    """
    phase = np.exp(1j * drive.phase0)
    if drive.kind == DriveKind.BULK:
        # env = cos(wt + p0), delta = delta0 sin(wt + p0)
        return 0.5 * phase, drive.delta0 * phase / 2j
    if drive.kind == DriveKind.EDGE:
        # env = sin(wt + p0), delta = -delta0 cos(wt + p0)
        return phase / 2j, -0.5 * drive.delta0 * phase
    raise ValueError("a static drive has no Floquet harmonics")


def build_floquet_hamiltonian(spec: LatticeSpec, drive: DriveProtocol,
                              n_harmonics: int) -> np.ndarray:
    """Truncated quasienergy operator on the extended harmonic space.

    Returns a dense Hermitian matrix of dimension
    ``n_sites * (2 * n_harmonics + 1)``; harmonic blocks are ordered from
    -n_harmonics to +n_harmonics.
    """
    if n_harmonics < 1:
        raise ValueError("need at least one harmonic block")
    n = spec.n_sites
    static = build_single_particle_hamiltonian(
        spec, drive.static_stagger(n), 0.0, drive.j_hop)
    stagger_op = build_single_particle_hamiltonian(spec, 1.0, 0.0, 0.0)
    dimer_op = build_single_particle_hamiltonian(spec, 0.0, 1.0, 0.0)
    c_env, c_delta = _first_harmonic_coefficients(drive)
    h1 = drive.stagger0 * c_env * stagger_op + c_delta * dimer_op

    blocks = 2 * n_harmonics + 1
    k = np.zeros((blocks * n, blocks * n), dtype=complex)
    omega = drive.omega
    for b in range(blocks):
        m = b - n_harmonics
        lo = b * n
        k[lo:lo + n, lo:lo + n] = static + m * omega * np.eye(n)
        if b + 1 < blocks:
            hi = (b + 1) * n
            k[hi:hi + n, lo:lo + n] = h1
            k[lo:lo + n, hi:hi + n] = h1.conj().T
    return k


def fold_quasienergy(energy, omega: float):
    """Map quasienergies into the first zone (-omega/2, omega/2]."""
    energy = np.asarray(energy, dtype=float)
    folded = energy - omega * np.ceil(energy / omega - 0.5)
    return folded if folded.ndim else float(folded)


@dataclass(frozen=True)
class FloquetSpectrum:
    """Eigensystem of the truncated quasienergy operator."""

    omega: float
    n_harmonics: int
    n_sites: int
    quasienergies: np.ndarray      # raw extended-space eigenvalues, ascending
    folded: np.ndarray             # same states folded into the first zone
    vectors: np.ndarray            # extended-space eigenvectors (columns)
    harmonic_weights: np.ndarray   # (n_states, 2 M + 1) block weights

    def mean_harmonic(self) -> np.ndarray:
        """Weight-averaged harmonic index of each eigenstate."""
        m = np.arange(-self.n_harmonics, self.n_harmonics + 1)
        return self.harmonic_weights @ m

    def central_weight(self, margin: int = 2) -> np.ndarray:
        """Weight within ``n_harmonics - margin`` of the centre block.

        Values near one certify that the truncation did not clip the
        state; the margin leaves room for the shifted copies used in
        physical-state selection.
        """
        m = np.arange(-self.n_harmonics, self.n_harmonics + 1)
        keep = np.abs(m) <= self.n_harmonics - margin
        return self.harmonic_weights[:, keep].sum(axis=1)


def floquet_spectrum(spec: LatticeSpec, drive: DriveProtocol,
                     n_harmonics: int) -> FloquetSpectrum:
    """Diagonalize the truncated quasienergy operator."""
    k = build_floquet_hamiltonian(spec, drive, n_harmonics)
    energies, vectors = np.linalg.eigh(k)
    n = spec.n_sites
    blocks = 2 * n_harmonics + 1
    weights = (np.abs(vectors) ** 2).reshape(blocks, n, -1).sum(axis=1).T
    return FloquetSpectrum(
        omega=drive.omega, n_harmonics=n_harmonics, n_sites=n,
        quasienergies=energies, folded=fold_quasienergy(energies, drive.omega),
        vectors=vectors, harmonic_weights=weights)


def physical_quasienergies(spectrum: FloquetSpectrum,
                           center_tol: float = 0.5) -> np.ndarray:
    """One folded quasienergy per physical state, sorted.

    The extended spectrum holds each physical state in copies shifted by
    integer multiples of the drive frequency; the copy whose mean
    harmonic index lies within ``center_tol`` of zero is the centred one.
    Exactly ``n_sites`` states must survive the cut, otherwise the
    truncation is too tight and a ``RuntimeError`` is raised.
    """
    mean_m = spectrum.mean_harmonic()
    keep = np.abs(mean_m) <= center_tol
    if keep.sum() != spectrum.n_sites:
        raise RuntimeError(
            f"harmonic centring selected {int(keep.sum())} states instead of "
            f"{spectrum.n_sites}; increase n_harmonics")
    return np.sort(spectrum.folded[keep])


def verify_bloch_equivalence(drive: DriveProtocol, grid: BlochGrid,
                             d: float = 1.0) -> float:
    """Largest spectral mismatch between the two Bloch parametrizations.

    The synthetic half-cell form at momentum ``kx`` must have the same
    eigenvalues as the two-site-cell form at ``k = 2 kx / d``; the two
    matrices differ only by a momentum-dependent unitary.  Returns the
    maximum absolute eigenvalue difference over the grid, which should
    sit at roundoff for any valid drive.
    """
    ks = grid.k_values(d)
    ts = grid.t_values(drive.period)
    worst = 0.0
    for k in ks:
        kx = 0.5 * k * d
        for t in ts:
            e_cell = np.linalg.eigvalsh(bloch_hamiltonian_cell(k, t, drive, d))
            e_single = np.linalg.eigvalsh(bloch_hamiltonian_single(kx, t, drive))
            worst = max(worst, float(np.abs(e_cell - e_single).max()))
    return worst
