"""Bloch bands, Berry curvature and Chern numbers of the driven chain.

The pump cycle makes time a second Brillouin-zone direction: eigenstates
on a ``(k, t)`` grid covering one momentum zone and one drive period form
a torus, and each gapped band carries an integer Chern number.  Numbers
are computed with the plaquette-link discretization (products of overlap
phases around grid plaquettes), which yields exact integers for any grid
fine enough to resolve the gaps and is invariant under per-state gauge
changes.

The curvature sign convention is fixed so that a band's Chern number
equals its center-of-mass displacement per pump cycle in units of the
lattice constant (forward transport of the band that starts on the
low-energy sublattice gives +1).

Two single-particle Bloch parametrizations appear:

* :func:`bloch_hamiltonian_cell` is the standard two-site-cell matrix,
  exactly periodic over the physical zone ``k in [-pi/d, pi/d)``.  All
  Chern numbers are computed from it (or from the many-body reduction,
  which matches it for one particle).
* :func:`bloch_hamiltonian_single` is the synthetic two-dimensional
  lattice form with a half-cell momentum argument; it is related to the
  cell form by a k-dependent gauge and has the same spectrum, which the
  floquet module verifies numerically.

Two-particle center-of-mass bands come from reducing the interacting
problem by one-cell co-translations, leaving a relative-coordinate
Hamiltonian ``H(K, t)`` that is smooth and exactly periodic in the
center-of-mass momentum ``K``.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import DriveProtocol, LatticeSpec, TWO_PI


class GapClosureError(RuntimeError):
    """A band gap fell below tolerance somewhere on the grid."""


class ContinuityError(RuntimeError):
    """Band identity could not be followed across the grid."""


class BandLabel(str, enum.Enum):
    BOUND = "bound_state"
    SCATTERING = "scattering"
    RESONANT = "resonant_isolated"


@dataclass(frozen=True)
class BlochGrid:
    """Uniform discretization of the (momentum, time) torus."""

    n_k: int = 64
    n_t: int = 64

    def __post_init__(self):
        if self.n_k < 4 or self.n_t < 4:
            raise ValueError("grid needs at least 4 points per direction")

    def k_values(self, d: float = 1.0) -> np.ndarray:
        """Momenta covering one Brillouin zone [-pi/d, pi/d)."""
        return np.linspace(-math.pi / d, math.pi / d, self.n_k, endpoint=False)

    def t_values(self, period: float) -> np.ndarray:
        """Times covering one drive period [0, T)."""
        return np.linspace(0.0, period, self.n_t, endpoint=False)


def _uniform_drive(drive: DriveProtocol, t: float) -> tuple[float, float]:
    """Scalar (stagger, delta) at time t; disorder has no Bloch form."""
    if drive.disorder_w != 0.0:
        raise ValueError("Bloch Hamiltonians require disorder_w = 0")
    envelope, delta = drive.modulation(t)
    return drive.stagger0 * (envelope + drive.offset_r), delta


def bloch_hamiltonian_cell(k: float, t: float, drive: DriveProtocol,
                           d: float = 1.0) -> np.ndarray:
    """Two-site-cell Bloch matrix at crystal momentum ``k`` and time ``t``.

    With the cell holding sites (odd, even), the diagonal is
    ``(-stagger, +stagger)`` and the off-diagonal element is
    ``-(J + delta) - (J - delta) * exp(-i k d)``.  Exactly periodic in
    ``k`` with period ``2 pi / d``.
    """
    stagger, delta = _uniform_drive(drive, t)
    j = drive.j_hop
    f = -(j + delta) - (j - delta) * np.exp(-1j * k * d)
    return np.array([[-stagger, f], [np.conj(f), stagger]])


def bloch_hamiltonian_single(kx: float, t: float,
                             drive: DriveProtocol) -> np.ndarray:
    """Synthetic-lattice Bloch matrix at half-cell momentum ``kx``.

    The drive phase acts as a second momentum, giving the two-band matrix
    ``[[-stagger(t), 2 (J cos kx + i delta(t) sin kx)], [c.c.,
    +stagger(t)]]``.  Its eigenvalues are the instantaneous band energies;
    ``kx`` spans the zone once over ``[-pi/2, pi/2)`` (the matrix is
    gauge-periodic with period pi).
    """
    stagger, delta = _uniform_drive(drive, t)
    off = 2.0 * (drive.j_hop * np.cos(kx) + 1j * delta * np.sin(kx))
    return np.array([[-stagger, off], [np.conj(off), stagger]])


def _eigensystem_on_grid(field, ks: np.ndarray, ts: np.ndarray):
    """Diagonalize ``field(k, t)`` on the grid; ascending eigenvalues."""
    probe = np.asarray(field(ks[0], ts[0]))
    dim = probe.shape[0]
    h = np.empty((len(ks), len(ts), dim, dim), dtype=complex)
    for i, k in enumerate(ks):
        for j, t in enumerate(ts):
            h[i, j] = field(k, t)
    if not np.allclose(h, np.conj(np.swapaxes(h, -1, -2)), atol=1e-12):
        raise ValueError("hamiltonian field is not Hermitian")
    energies, vectors = np.linalg.eigh(h)
    return energies, vectors


def fukui_hatsugai_curvature(states: np.ndarray) -> np.ndarray:
    """Per-plaquette Berry curvature of one band on the torus.

    ``states`` has shape (n_k, n_t, dim); rows wrap periodically in both
    directions.  Returns the plaquette phases, oriented so that the sum
    over the grid is ``2 pi`` times the Chern number in the transport
    convention described in the module docstring.  Invariant under
    per-state phase changes.
    """
    u = states
    link_k = np.einsum("ktd,ktd->kt", u.conj(), np.roll(u, -1, axis=0))
    link_t = np.einsum("ktd,ktd->kt", u.conj(), np.roll(u, -1, axis=1))
    smallest = min(np.abs(link_k).min(), np.abs(link_t).min())
    if smallest < 1e-12:
        raise GapClosureError(
            "vanishing overlap between neighbouring grid states; "
            "the band is degenerate at the grid scale")
    loop = (link_k
            * np.roll(link_t, -1, axis=0)
            * np.conj(np.roll(link_k, -1, axis=1))
            * np.conj(link_t))
    return np.angle(loop)


def _integer_chern(curvature: np.ndarray) -> int:
    total = curvature.sum() / TWO_PI
    nearest = round(total)
    if abs(total - nearest) > 1e-6:
        raise ContinuityError(
            f"plaquette curvature sum {total:.3e} is not an integer; "
            "grid too coarse for this band")
    return int(nearest)


@dataclass(frozen=True)
class BandResult:
    """Band energies, curvature and Chern numbers on a (k, t) grid."""

    k_values: np.ndarray
    t_values: np.ndarray
    energies: np.ndarray   # (n_bands, n_k, n_t)
    curvature: np.ndarray  # (n_bands, n_k, n_t) plaquette phases
    chern: tuple
    gap_min: float


def band_structure(field, grid: BlochGrid, *, period: float, d: float = 1.0,
                   gap_tol: float | None = None) -> BandResult:
    """Bands and Chern numbers of a Bloch Hamiltonian field.

    ``field(k, t)`` must return a Hermitian matrix, periodic over the
    zone ``[-pi/d, pi/d)`` and the drive period.  Bands are indexed in
    ascending energy order; a gap smaller than ``gap_tol`` (default
    ``1e-6 * max |E|``) anywhere on the grid raises
    :class:`GapClosureError`.
    """
    ks = grid.k_values(d)
    ts = grid.t_values(period)
    energies, vectors = _eigensystem_on_grid(field, ks, ts)
    scale = np.abs(energies).max()
    tol = gap_tol if gap_tol is not None else 1e-6 * scale
    gaps = np.diff(energies, axis=-1)
    gap_min = float(gaps.min())
    if gap_min < tol:
        k_i, t_i, _ = np.unravel_index(np.argmin(gaps), gaps.shape)
        raise GapClosureError(
            f"band gap {gap_min:.3e} below tolerance {tol:.3e} at "
            f"k={ks[k_i]:.4f}, t={ts[t_i]:.4f}")
    n_bands = energies.shape[-1]
    curvature = np.stack(
        [fukui_hatsugai_curvature(vectors[..., m]) for m in range(n_bands)])
    chern = tuple(_integer_chern(curvature[m]) for m in range(n_bands))
    return BandResult(k_values=ks, t_values=ts,
                      energies=np.moveaxis(energies, -1, 0),
                      curvature=curvature, chern=chern, gap_min=gap_min)


def chern_number(grid: BlochGrid, field, band_index: int, *, period: float,
                 d: float = 1.0, gap_tol: float | None = None) -> int:
    """Chern number of one gapped band of ``field`` over the torus."""
    result = band_structure(field, grid, period=period, d=d, gap_tol=gap_tol)
    return result.chern[band_index]


# ---------------------------------------------------------------------------
# Two-particle center-of-mass bands
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComBandResult:
    """Center-of-mass bands of the interacting two-particle problem.

    ``chern`` holds ``None`` for bands that are not gapped (or not
    trackable) over the whole torus; ``double_occupancy`` is the grid
    average of the weight on doubly-occupied configurations per band.
    """

    k_values: np.ndarray
    t_values: np.ndarray
    energies: np.ndarray   # (n_bands, n_k, n_t)
    curvature: np.ndarray  # (n_bands, n_k, n_t); zero rows where untracked
    chern: tuple
    labels: tuple
    gap_min: float
    double_occupancy: np.ndarray
    band_gaps: np.ndarray  # per-band min distance to any other band


def _com_classes(n_particles: int, r_max: int, local_dim: int):
    """Co-translation classes: particle positions with the leftmost in
    the first cell and mutual span at most ``r_max`` sites."""
    if n_particles == 1:
        return [(0,), (1,)]
    if n_particles != 2:
        raise ValueError("center-of-mass reduction supports 1 or 2 particles")
    reps = []
    for s in (0, 1):
        first = 0 if local_dim > 2 else 1
        for r in range(first, r_max + 1):
            reps.append((s, s + r))
    return reps


def _com_model(n_particles: int, r_max: int, local_dim: int):
    """Structural matrix elements of the translation-reduced Hamiltonian.

    Returns the class list plus flat arrays (rows, cols, coef_j,
    coef_delta, cell_shift) for the hopping entries and per-class
    coefficients (stagger, interaction) for the diagonal.  The entry
    value at momentum K and time t is
    ``(coef_j * j_hop + coef_delta * delta(t)) * exp(-i K d * cell_shift)``.
    """
    reps = _com_classes(n_particles, r_max, local_dim)
    index_of = {rep: i for i, rep in enumerate(reps)}
    rows, cols, coef_j, coef_delta, shifts = [], [], [], [], []
    for col, rep in enumerate(reps):
        occ = Counter(rep)
        for q in sorted(occ):
            for step in (1, -1):
                q2 = q + step
                if occ.get(q2, 0) >= local_dim - 1:
                    continue
                moved = list(rep)
                moved.remove(q)
                moved.append(q2)
                moved.sort()
                if moved[-1] - moved[0] > r_max:
                    continue
                shift = 0
                if moved[0] < 0:
                    moved = [p + 2 for p in moved]
                    shift = -1
                elif moved[0] > 1:
                    moved = [p - 2 for p in moved]
                    shift = 1
                row = index_of[tuple(moved)]
                bose = math.sqrt(occ[q] * (occ.get(q2, 0) + 1.0))
                bond = min(q, q2)
                # bond (p, p+1) carries -j_hop + (-1)**(p+1) * delta
                sign = 1.0 if (bond + 1) % 2 == 0 else -1.0
                rows.append(row)
                cols.append(col)
                coef_j.append(-bose)
                coef_delta.append(sign * bose)
                shifts.append(shift)
    stag_coef = np.array(
        [sum((1.0 if (q + 1) % 2 == 0 else -1.0) * n for q, n in
             Counter(rep).items()) for rep in reps])
    inter_coef = np.array(
        [sum(0.5 * n * (n - 1) for n in Counter(rep).values()) for rep in reps])
    double_occ = np.array(
        [1.0 if any(n >= 2 for n in Counter(rep).values()) else 0.0
         for rep in reps])
    return (reps, np.array(rows), np.array(cols), np.array(coef_j),
            np.array(coef_delta), np.array(shifts), stag_coef, inter_coef,
            double_occ)


def reduced_hamiltonian_column(model, k: float, staggers: np.ndarray,
                               deltas: np.ndarray, j_hop: float, u: float,
                               d: float) -> np.ndarray:
    """Stack of reduced Hamiltonians H(K=k, t) for one momentum column."""
    (reps, rows, cols, coef_j, coef_delta, shifts, stag_coef, inter_coef,
     _) = model
    dim = len(reps)
    nt = len(deltas)
    phases = np.exp(-1j * k * d * shifts)
    vals = (coef_j * j_hop)[None, :] * phases[None, :] \
        + deltas[:, None] * (coef_delta * phases)[None, :]
    h = np.zeros((nt, dim, dim), dtype=complex)
    t_idx = np.repeat(np.arange(nt), len(rows))
    np.add.at(h, (t_idx, np.tile(rows, nt), np.tile(cols, nt)),
              vals.reshape(-1))
    diag = staggers[:, None] * stag_coef[None, :] + u * inter_coef[None, :]
    h[:, np.arange(dim), np.arange(dim)] += diag
    return h


def _track_columns(energies: np.ndarray, vectors: np.ndarray):
    """Follow band identity over the grid by maximum-overlap assignment.

    Returns tracked (energies, vectors, min_overlap_per_band,
    wrap_ok_per_band).  Tracking runs along t within each momentum column
    and along the t=0 row between columns.
    """
    nk, nt, dim, nb = vectors.shape
    order = np.empty((nk, nt, nb), dtype=int)
    order[0, 0] = np.arange(nb)
    min_overlap = np.ones(nb)

    def assign(prev_vectors, new_vectors):
        ov = np.abs(prev_vectors.conj().T @ new_vectors) ** 2
        row, col = linear_sum_assignment(-ov)
        return col, ov[row, col]

    for it in range(1, nt):
        prev = vectors[0, it - 1][:, order[0, it - 1]]
        col, quality = assign(prev, vectors[0, it])
        order[0, it] = col
        min_overlap = np.minimum(min_overlap, quality)
    for ik in range(1, nk):
        prev = vectors[ik - 1, 0][:, order[ik - 1, 0]]
        col, quality = assign(prev, vectors[ik, 0])
        order[ik, 0] = col
        min_overlap = np.minimum(min_overlap, quality)
        for it in range(1, nt):
            prev = vectors[ik, it - 1][:, order[ik, it - 1]]
            col, quality = assign(prev, vectors[ik, it])
            order[ik, it] = col
            min_overlap = np.minimum(min_overlap, quality)

    ii, jj = np.meshgrid(np.arange(nk), np.arange(nt), indexing="ij")
    tracked_e = energies[ii[..., None], jj[..., None], order]
    tracked_v = vectors[ii[..., None, None], jj[..., None, None],
                        np.arange(dim)[None, None, :, None], order[:, :, None, :]]

    wrap_ok = np.ones(nb, dtype=bool)
    for b in range(nb):
        along_t = np.abs(np.einsum("kd,kd->k", tracked_v[:, -1, :, b].conj(),
                                   tracked_v[:, 0, :, b])) ** 2
        along_k = np.abs(np.einsum("td,td->t", tracked_v[-1, :, :, b].conj(),
                                   tracked_v[0, :, :, b])) ** 2
        wrap_ok[b] = along_t.min() > 0.5 and along_k.min() > 0.5
    return tracked_e, tracked_v, min_overlap, wrap_ok


def com_band_structure(spec: LatticeSpec, drive: DriveProtocol,
                       n_particles: int = 2, ring_cells: int = 6,
                       grid: BlochGrid | None = None,
                       track_tol: float = 0.5) -> ComBandResult:
    """Center-of-mass bands of the interacting pump over (K, t).

    The two-particle problem on the infinite chain is reduced by one-cell
    co-translations to a relative-coordinate Hamiltonian whose dimension
    is set by a maximum particle separation of ``2 * ring_cells - 1``
    sites (the span that fits a ring of ``ring_cells`` unit cells; bound
    and resonant bands converge exponentially in this cutoff, checked by
    doubling).  Eigenstates are tracked by overlap continuity and each
    trackable gapped band gets a plaquette-sum Chern number; bands whose
    tracking quality falls below ``track_tol`` or that touch another band
    keep ``chern=None`` and at most a scattering label.

    Requires a disorder-free drive and uniform interaction (co-translation
    symmetry).
    """
    if grid is None:
        grid = BlochGrid(n_k=64, n_t=256)
    if drive.disorder_w != 0.0:
        raise ValueError("center-of-mass reduction requires disorder_w = 0")
    u_arr = spec.interaction_array
    if not np.allclose(u_arr, u_arr[0]):
        raise ValueError("center-of-mass reduction requires uniform interaction")
    u = float(u_arr[0])
    d = spec.lattice_constant
    r_max = 2 * ring_cells - 1
    model = _com_model(n_particles, r_max, spec.local_dim)
    double_occ_mask = model[-1]

    ks = grid.k_values(d)
    ts = grid.t_values(drive.period)
    staggers = np.empty(grid.n_t)
    deltas = np.empty(grid.n_t)
    for j, t in enumerate(ts):
        staggers[j], deltas[j] = _uniform_drive(drive, t)

    dim = len(model[0])
    energies = np.empty((grid.n_k, grid.n_t, dim))
    vectors = np.empty((grid.n_k, grid.n_t, dim, dim), dtype=complex)
    for i, k in enumerate(ks):
        h = reduced_hamiltonian_column(model, k, staggers, deltas,
                                       drive.j_hop, u, d)
        energies[i], vectors[i] = np.linalg.eigh(h)

    tracked_e, tracked_v, min_overlap, wrap_ok = _track_columns(energies,
                                                                vectors)

    # distance from each tracked band to the nearest other band, anywhere
    band_gaps = np.empty(dim)
    for b in range(dim):
        others = np.delete(tracked_e, b, axis=-1)
        band_gaps[b] = np.abs(others - tracked_e[..., b:b + 1]).min()
    gap_min = float(np.diff(np.sort(tracked_e, axis=-1), axis=-1).min())

    scale = np.abs(tracked_e).max()
    trackable = (min_overlap >= track_tol) & wrap_ok & (band_gaps > 1e-6 * scale)

    weight = np.abs(tracked_v) ** 2
    double_w = np.einsum("ktcb,c->bkt", weight, double_occ_mask)
    mean_dw = double_w.mean(axis=(1, 2))

    curvature = np.zeros((dim, grid.n_k, grid.n_t))
    chern: list = [None] * dim
    for b in range(dim):
        if not trackable[b]:
            continue
        try:
            curvature[b] = fukui_hatsugai_curvature(tracked_v[..., b])
            chern[b] = _integer_chern(curvature[b])
        except (GapClosureError, ContinuityError):
            trackable[b] = False
            curvature[b] = 0.0
            chern[b] = None

    labels = []
    for b in range(dim):
        if mean_dw[b] > 0.5:
            labels.append(BandLabel.BOUND)
        elif trackable[b] and mean_dw[b] > 0.15:
            labels.append(BandLabel.RESONANT)
        else:
            labels.append(BandLabel.SCATTERING)

    return ComBandResult(
        k_values=ks, t_values=ts,
        energies=np.moveaxis(tracked_e, -1, 0),
        curvature=curvature, chern=tuple(chern), labels=tuple(labels),
        gap_min=gap_min, double_occupancy=mean_dw, band_gaps=band_gaps)


def effective_subspace_hamiltonian(spec: LatticeSpec, stagger, delta: float,
                                   j_hop: float) -> np.ndarray:
    """Hamiltonian projected on doublon and adjacent-pair configurations.

    The ordered basis interleaves doubly-occupied sites with neighbouring
    singly-occupied pairs: ``|2_1>, |1_1 1_2>, |2_2>, |1_2 1_3>, ...``
    (dimension ``2 N - 1``).  A doublon at site j has energy
    ``2 (-1)**j stagger_j + U_j``, a pair has the sum of its two on-site
    energies, and the only couplings are ``sqrt(2) * hop`` between a
    doublon and the pairs sharing one of its sites.  In the strong
    interaction limit this reproduces the bound-state physics with an
    effective second-order hopping of order ``(j_hop + delta)**2 / U``.
    """
    if spec.local_dim < 3:
        raise ValueError("doublon subspace requires local_dim >= 3")
    n = spec.n_sites
    stagger = np.broadcast_to(np.asarray(stagger, dtype=float), (n,))
    signs = spec.stagger_signs
    u = spec.interaction_array
    onsite = signs * stagger
    hops = -j_hop + np.where(spec.site_indices[:n - 1] % 2 == 0, 1.0, -1.0) \
        * delta
    dim = 2 * n - 1
    h = np.zeros((dim, dim))
    for i in range(n):
        h[2 * i, 2 * i] = 2.0 * onsite[i] + u[i]
    for i in range(n - 1):
        h[2 * i + 1, 2 * i + 1] = onsite[i] + onsite[i + 1]
        amp = math.sqrt(2.0) * hops[i]
        h[2 * i, 2 * i + 1] = h[2 * i + 1, 2 * i] = amp
        h[2 * i + 1, 2 * i + 2] = h[2 * i + 2, 2 * i + 1] = amp
    return h
