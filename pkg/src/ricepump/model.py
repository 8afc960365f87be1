"""Lattice geometry, drive protocols, Fock bases and Hamiltonian builders.

Everything downstream (band structure, time evolution, scenarios) is built
from the pieces in this module.  Conventions used throughout the package:

* Energies and rates are angular frequencies in rad/us.  Configuration
  files and human-facing outputs use ordinary frequencies in MHz; the
  conversion factor is 2*pi (1 MHz = 1/us).
* Sites carry the physical one-based index ``j`` of the full device chain.
  A :class:`LatticeSpec` for a subset of a longer chain records the index
  of its first site so that the staggered sign ``(-1)**j`` matches the
  parent chain (subset runs must reproduce full-chain physics).
* Site ``j`` contributes ``(-1)**j * stagger`` to the on-site energy and
  the bond ``(j, j+1)`` has hopping amplitude ``-j_hop + (-1)**j * delta``,
  so site 1 sits at ``-stagger`` and bond (1, 2) is ``-j_hop - delta``.
* The unit cell holds two sites; the cell size ``d`` is the lattice
  constant and the site spacing is ``d / 2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

TWO_PI = 2.0 * math.pi

# Builders return dense arrays below this dimension and CSR matrices above.
DENSE_LIMIT = 512


def from_mhz(value):
    """Convert an ordinary frequency in MHz to an angular one in rad/us."""
    return TWO_PI * np.asarray(value) if np.ndim(value) else TWO_PI * float(value)


def to_mhz(value):
    """Convert an angular frequency in rad/us to an ordinary one in MHz."""
    return np.asarray(value) / TWO_PI if np.ndim(value) else float(value) / TWO_PI


class Boundary(str, enum.Enum):
    OPEN = "open"
    PERIODIC = "periodic"


class DriveKind(str, enum.Enum):
    BULK = "bulk"
    EDGE = "edge"
    STATIC = "static"


@dataclass(frozen=True)
class LatticeSpec:
    """Static description of a dimerized chain segment.

    Parameters
    ----------
    n_sites:
        Number of sites in the segment (at least 2).
    local_dim:
        On-site Hilbert space dimension; 3 keeps occupations 0, 1, 2
        (transmon-style three-level truncation), 2 is the hard-core limit.
    lattice_constant:
        Unit-cell size ``d``; sites are spaced ``d / 2`` apart.
    interaction_u:
        On-site interaction ``U`` in rad/us, scalar or one value per site.
        The interaction energy of occupation ``n`` is ``U/2 * n * (n - 1)``.
    boundary:
        Open segment or a closed ring (ring requires an even site count so
        the two-site pattern wraps consistently).
    first_index:
        Physical index of the first site in the parent chain; fixes the
        parity of the staggered sign for subset runs.
    """

    n_sites: int
    local_dim: int = 3
    lattice_constant: float = 1.0
    interaction_u: float | tuple = 0.0
    boundary: Boundary = Boundary.OPEN
    first_index: int = 1

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("n_sites must be at least 2")
        if self.local_dim not in (2, 3):
            raise ValueError("local_dim must be 2 or 3")
        if self.lattice_constant <= 0:
            raise ValueError("lattice_constant must be positive")
        boundary = Boundary(self.boundary)
        object.__setattr__(self, "boundary", boundary)
        if boundary is Boundary.PERIODIC and self.n_sites % 2:
            raise ValueError("periodic boundary requires an even site count")
        u = np.atleast_1d(np.asarray(self.interaction_u, dtype=float))
        if u.size == 1:
            u = np.full(self.n_sites, u[0])
        if u.size != self.n_sites:
            raise ValueError("interaction_u must be scalar or one value per site")
        if not np.all(np.isfinite(u)):
            raise ValueError("interaction_u must be finite")
        object.__setattr__(self, "interaction_u", tuple(u))

    @property
    def site_indices(self) -> np.ndarray:
        """Physical site indices j (one-based, parent-chain numbering)."""
        return np.arange(self.first_index, self.first_index + self.n_sites)

    @property
    def stagger_signs(self) -> np.ndarray:
        """The per-site sign (-1)**j applied to the staggered energy."""
        return np.where(self.site_indices % 2 == 0, 1.0, -1.0)

    @property
    def interaction_array(self) -> np.ndarray:
        return np.asarray(self.interaction_u, dtype=float)


@dataclass(frozen=True)
class DriveProtocol:
    """Time-dependent modulation of the chain parameters.

    The instantaneous parameters are the staggered on-site amplitude
    ``stagger(t)`` (per site once offset and disorder are included) and the
    hopping modulation ``delta(t)``:

    * ``bulk``:   ``stagger_l(t) = stagger0 * (cos(w t + phase0) + offset_r
      + disorder_w * xi_l)`` and ``delta(t) = delta0 * sin(w t + phase0)``
      with ``w = 2 pi / period``.
    * ``edge``:   ``stagger(t) = stagger0 * sin(2 pi t / period + phase0)``
      and ``delta(t) = -delta0 * cos(2 pi t / period + phase0)`` (plus the
      same offset/disorder terms inside the bracket).
    * ``static``: ``stagger_l = stagger0 * (1 + offset_r + disorder_w *
      xi_l)`` and ``delta = delta0``, constant in time.

    ``xi_l`` is drawn once per site, uniformly on [-0.5, 0.5], from a
    PCG64 generator seeded with ``disorder_seed`` (numpy's named 64-bit
    generator; its stream is platform stable), and is held fixed for the
    whole evolution.

    All amplitudes are angular frequencies in rad/us; ``period`` is in us.
    """

    kind: DriveKind
    j_hop: float
    delta0: float
    stagger0: float
    period: float
    phase0: float = 0.0
    offset_r: float = 0.0
    disorder_w: float = 0.0
    disorder_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", DriveKind(self.kind))
        if self.period <= 0:
            raise ValueError("period must be positive")
        if self.j_hop < 0:
            raise ValueError("j_hop must be non-negative")
        for name in ("j_hop", "delta0", "stagger0", "period", "phase0",
                     "offset_r", "disorder_w"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def omega(self) -> float:
        """Angular drive frequency 2*pi/period in rad/us."""
        return TWO_PI / self.period

    def disorder_profile(self, n_sites: int) -> np.ndarray:
        """Per-site disorder pattern xi_l, uniform on [-0.5, 0.5]."""
        rng = np.random.Generator(np.random.PCG64(self.disorder_seed))
        return rng.uniform(-0.5, 0.5, n_sites)

    def modulation(self, t: float) -> tuple[float, float]:
        """Scalar drive envelopes at time ``t``.

        Returns ``(envelope, delta)`` where the staggered amplitude on site
        ``l`` is ``stagger0 * (envelope + offset_r + disorder_w * xi_l)``.
        The phase is reduced modulo one period before the trigonometric
        evaluation so the drive is exactly periodic in floating point.
        """
        if self.kind is DriveKind.STATIC:
            return 1.0, self.delta0
        phase = TWO_PI * math.fmod(t, self.period) / self.period + self.phase0
        if self.kind is DriveKind.BULK:
            return math.cos(phase), self.delta0 * math.sin(phase)
        return math.sin(phase), -self.delta0 * math.cos(phase)

    def static_stagger(self, n_sites: int) -> np.ndarray:
        """Time-independent part of the per-site staggered amplitude."""
        static = np.full(n_sites, self.stagger0 * self.offset_r)
        if self.disorder_w != 0.0:
            static += self.stagger0 * self.disorder_w * self.disorder_profile(n_sites)
        return static

    def instantaneous(self, t: float, n_sites: int) -> tuple[np.ndarray, float]:
        """Per-site staggered amplitude and hopping modulation at time ``t``.

        The returned staggered values do not include the alternating sign;
        the Hamiltonian builders apply ``(-1)**j`` themselves.
        """
        envelope, delta = self.modulation(t)
        return self.stagger0 * envelope + self.static_stagger(n_sites), delta


def _occupation_states(n_sites: int, n_particles: int, max_occ: int):
    """Yield occupation tuples summing to n_particles, max head first."""
    if n_sites == 1:
        if n_particles <= max_occ:
            yield (n_particles,)
        return
    for head in range(min(n_particles, max_occ), -1, -1):
        for tail in _occupation_states(n_sites - 1, n_particles - head, max_occ):
            yield (head,) + tail


@dataclass(frozen=True)
class FockBasis:
    """Enumerated occupation basis of a fixed particle-number sector."""

    spec: LatticeSpec
    n_particles: int
    states: np.ndarray  # (dim, n_sites) int8
    index_of: dict

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    def index(self, occupations) -> int:
        """Index of an occupation tuple; raises KeyError if not in basis."""
        return self.index_of[tuple(int(n) for n in occupations)]


def build_fock_basis(spec: LatticeSpec, n_particles: int) -> FockBasis:
    """Enumerate the fixed-particle-number occupation basis of a lattice.

    States are ordered lexicographically with the occupation of site 1
    most significant and descending, so for one particle the basis order
    coincides with the site order.  Dimensions: N for one particle,
    N(N+1)/2 for two particles with local_dim 3, N(N-1)/2 with local_dim 2.
    """
    max_occ = spec.local_dim - 1
    if not 0 <= n_particles <= max_occ * spec.n_sites:
        raise ValueError("n_particles outside the representable range")
    states = np.array(
        list(_occupation_states(spec.n_sites, n_particles, max_occ)), dtype=np.int8
    ).reshape(-1, spec.n_sites)
    index_of = {tuple(int(n) for n in row): i for i, row in enumerate(states)}
    return FockBasis(spec=spec, n_particles=n_particles, states=states,
                     index_of=index_of)


def _bond_hops(spec: LatticeSpec, delta: float, j_hop: float):
    """Hopping amplitude per bond; bond i couples local sites (i, i+1)."""
    j_orig = spec.site_indices
    n_bonds = spec.n_sites if spec.boundary is Boundary.PERIODIC else spec.n_sites - 1
    signs = np.where(j_orig[:n_bonds] % 2 == 0, 1.0, -1.0)
    return -j_hop + signs * delta


def _finalize(h: np.ndarray):
    if h.shape[0] >= DENSE_LIMIT:
        return sparse.csr_array(h)
    return h


def build_single_particle_hamiltonian(spec: LatticeSpec, stagger, delta: float,
                                      j_hop: float):
    """One-particle Hamiltonian matrix in the site basis.

    ``stagger`` is a scalar or per-site array of staggered amplitudes
    (without the alternating sign); ``delta`` the hopping modulation.
    The diagonal is ``(-1)**j * stagger_j``; off-diagonals alternate
    ``-j_hop - delta``, ``-j_hop + delta`` starting with the former on
    bond (1, 2) when ``first_index`` is 1.
    """
    n = spec.n_sites
    stagger = np.broadcast_to(np.asarray(stagger, dtype=float), (n,))
    h = np.zeros((n, n))
    np.fill_diagonal(h, spec.stagger_signs * stagger)
    hops = _bond_hops(spec, delta, j_hop)
    for i in range(n - 1):
        h[i, i + 1] = h[i + 1, i] = hops[i]
    if spec.boundary is Boundary.PERIODIC:
        h[n - 1, 0] += hops[n - 1]
        h[0, n - 1] += hops[n - 1]
    return _finalize(h)


def build_many_body_hamiltonian(spec: LatticeSpec, basis: FockBasis, stagger,
                                delta: float, j_hop: float):
    """Bose-Hubbard Hamiltonian on a fixed particle-number Fock basis.

    Hopping carries the bosonic matrix element sqrt((n_i + 1) * n_j) and
    moves one particle between neighbouring sites; the diagonal collects
    ``(-1)**j * stagger_j * n_j + U_j/2 * n_j (n_j - 1)``.  Occupations
    above ``local_dim - 1`` are excluded by the basis, which truncates the
    hopping automatically.  Conserves total particle number by construction.
    """
    n = spec.n_sites
    stagger = np.broadcast_to(np.asarray(stagger, dtype=float), (n,))
    occ = basis.states.astype(float)
    diag = occ @ (spec.stagger_signs * stagger)
    diag += 0.5 * (occ * (occ - 1.0)) @ spec.interaction_array

    hops = _bond_hops(spec, delta, j_hop)
    bonds = [(i, i + 1) for i in range(n - 1)]
    if spec.boundary is Boundary.PERIODIC:
        bonds.append((n - 1, 0))

    rows, cols, vals = [], [], []
    max_occ = spec.local_dim - 1
    for s, state in enumerate(basis.states):
        for b, (i, j) in enumerate(bonds):
            # move one particle from site j onto site i (a_i^dag a_j)
            if state[j] > 0 and state[i] < max_occ:
                target = list(state)
                target[j] -= 1
                target[i] += 1
                r = basis.index_of[tuple(target)]
                amp = hops[b] * math.sqrt((state[i] + 1.0) * state[j])
                rows.append(r)
                cols.append(s)
                vals.append(amp)
            # and the reverse move (a_j^dag a_i)
            if state[i] > 0 and state[j] < max_occ:
                target = list(state)
                target[i] -= 1
                target[j] += 1
                r = basis.index_of[tuple(target)]
                amp = hops[b] * math.sqrt((state[j] + 1.0) * state[i])
                rows.append(r)
                cols.append(s)
                vals.append(amp)
    h = np.zeros((basis.dim, basis.dim))
    np.add.at(h, (rows, cols), vals)
    h[np.arange(basis.dim), np.arange(basis.dim)] = diag
    return _finalize(h)


def time_dependent_hamiltonian(spec: LatticeSpec, basis: FockBasis,
                               drive: DriveProtocol):
    """Fast builder ``t -> H(t)`` for a driven lattice.

    Every drive law is affine in the two scalar envelopes, so the matrix
    is decomposed once as ``H(t) = H_static + envelope(t) * H_stagger +
    delta(t) * H_dimer`` and each evaluation is two scaled adds.  Returns
    a dense-matrix closure (the basis sizes used for time evolution stay
    well below the dense limit).
    """
    n = spec.n_sites
    static = drive.static_stagger(n)
    h_static = np.asarray(build_many_body_hamiltonian(spec, basis, static, 0.0,
                                                      drive.j_hop))
    h_stagger = np.asarray(
        build_many_body_hamiltonian(spec, basis, static + drive.stagger0, 0.0,
                                    drive.j_hop)) - h_static
    h_dimer = np.asarray(
        build_many_body_hamiltonian(spec, basis, static, 1.0, drive.j_hop)
    ) - h_static

    def builder(t: float) -> np.ndarray:
        envelope, delta = drive.modulation(t)
        return h_static + envelope * h_stagger + delta * h_dimer

    return builder
