"""Named experiment scenarios, sweep orchestration and file emission.

Each scenario is a fully-resolved parameter set for one published pump
experiment (single-particle transport, interaction-bound transport,
resonant pair transport, edge transfer, band exports) or for a robustness
sweep.  Configuration files override catalog defaults; the resolved
configuration is validated against a JSON schema, echoed into the run
manifest, and every emitted file is checksummed so a run can be audited
after the fact.

Conventions at this boundary: energies in MHz (converted to angular
frequencies internally), times in microseconds, site labels are the
original chain indices (subset runs keep their parent-chain numbering so
the staggering parity is preserved).
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np

from .bands import BlochGrid, band_structure, bloch_hamiltonian_cell, \
    com_band_structure
from .dynamics import NoiseModel, SectorBasis, center_of_mass, \
    density_correlations, evolve_lindblad_cycles, evolve_unitary_cycles, \
    occupation_distribution, prepare_site_excitation, return_probability
from .heatmap import emit_heatmap
from .model import Boundary, DriveKind, DriveProtocol, LatticeSpec, \
    build_fock_basis, from_mhz, time_dependent_hamiltonian, to_mhz

try:  # version recorded in manifests; fall back when not installed
    from importlib.metadata import version as _pkg_version
    PACKAGE_VERSION = _pkg_version("ricepump")
except Exception:  # pragma: no cover
    PACKAGE_VERSION = "unknown"


class ConfigError(ValueError):
    """Configuration rejected before any computation started."""

    def __init__(self, message: str, details=None):
        super().__init__(message)
        self.details = details


DYNAMICS_SCENARIOS = (
    "fig1_forward", "fig1_backward", "fig2_bound", "fig3_resonant",
    "control_nointeraction", "fig4_edge_left", "fig4_edge_right",
    "edge_slow")
BANDS_SCENARIOS = ("bands_fig1e", "bands_bound", "bands_resonant")
SWEEP_SCENARIOS = ("sweep_period", "sweep_offset", "sweep_disorder")
ALL_SCENARIOS = DYNAMICS_SCENARIOS + BANDS_SCENARIOS + SWEEP_SCENARIOS

# parameters a sweep axis may address, as dotted config paths
SWEEPABLE = ("drive.period_us", "drive.offset_r", "drive.disorder_w",
             "drive.stagger0_mhz", "drive.delta0_mhz")

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario"],
    "properties": {
        "scenario": {"enum": list(ALL_SCENARIOS)},
        "lattice": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_sites": {"type": "integer", "minimum": 2},
                "first_index": {"type": "integer", "minimum": 1},
                "local_dim": {"type": "integer", "minimum": 2, "maximum": 4},
                "interaction_mhz": {
                    "anyOf": [{"type": "number"},
                              {"type": "array", "items": {"type": "number"},
                               "minItems": 1}]},
            },
        },
        "drive": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["bulk", "edge", "static"]},
                "j_mhz": {"type": "number", "minimum": 0},
                "delta0_mhz": {"type": "number"},
                "stagger0_mhz": {"type": "number"},
                "period_us": {"type": "number", "exclusiveMinimum": 0},
                "phase0": {"type": "number"},
                "offset_r": {"type": "number"},
                "disorder_w": {"type": "number", "minimum": 0},
                "disorder_seed": {"type": "integer", "minimum": 0},
            },
        },
        "n_particles": {"type": "integer", "minimum": 1},
        "initial_state": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["fock", "wannier"]},
                "occupations": {
                    "type": "object",
                    "additionalProperties": {"type": "integer", "minimum": 1},
                    "minProperties": 1},
                "band": {"enum": ["lower", "upper", "bound"]},
            },
        },
        "evolution": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_cycles": {"type": "integer", "minimum": 1},
                "frames_per_cycle": {"type": "integer", "minimum": 2},
                "steps_per_cycle": {"type": ["integer", "null"],
                                    "minimum": 8},
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "t1_us": {"type": "number", "exclusiveMinimum": 0},
                "t_phi_us": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "axes": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["parameter", "values"],
                        "properties": {
                            "parameter": {"enum": list(SWEEPABLE)},
                            "values": {"type": "array", "minItems": 1,
                                       "items": {"type": "number"}},
                        },
                    },
                },
                "seeds": {"type": "integer", "minimum": 1},
                "base_seed": {"type": "integer", "minimum": 0},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_k": {"type": "integer", "minimum": 4},
                "n_t": {"type": "integer", "minimum": 4},
            },
        },
        "ring_cells": {"type": "integer", "minimum": 2},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"heatmaps": {"type": "boolean"}},
        },
    },
}

# interaction strength of the transmon array, shared by every scenario
_U_MHZ = -190.0

_BASE = {
    "lattice": {"n_sites": 36, "first_index": 1, "local_dim": 3,
                "interaction_mhz": _U_MHZ},
    "drive": {"kind": "bulk", "j_mhz": 8.0, "delta0_mhz": 8.0,
              "stagger0_mhz": 80.0, "period_us": 0.4, "phase0": 0.0,
              "offset_r": 0.0, "disorder_w": 0.0, "disorder_seed": 0},
    "n_particles": 1,
    "initial_state": {"type": "wannier", "occupations": {"19": 1},
                      "band": "lower"},
    "evolution": {"n_cycles": 1, "frames_per_cycle": 32,
                  "steps_per_cycle": None},
    "noise": {"enabled": False, "t1_us": 25.0, "t_phi_us": 1.0},
    "output": {"heatmaps": True},
}


# mapping-valued leaves that an override replaces instead of merging into
_ATOMIC_KEYS = frozenset({"occupations"})


def _merged(*layers) -> dict:
    out: dict = {}
    for layer in layers:
        for key, value in layer.items():
            if isinstance(value, dict) and isinstance(out.get(key), dict) \
                    and key not in _ATOMIC_KEYS:
                out[key] = _merged(out[key], value)
            else:
                out[key] = copy.deepcopy(value)
    return out


def _catalog() -> dict:
    nine = {"lattice": {"n_sites": 9, "first_index": 18},
            "drive": {"j_mhz": 12.0, "delta0_mhz": 12.0, "stagger0_mhz": 8.0},
            "n_particles": 2,
            "evolution": {"frames_per_cycle": 40}}
    edge = {"lattice": {"n_sites": 6, "first_index": 19},
            "drive": {"kind": "edge", "j_mhz": 12.0, "delta0_mhz": 12.0,
                      "stagger0_mhz": -0.5, "period_us": 4.0},
            "n_particles": 2,
            "evolution": {"frames_per_cycle": 48}}
    cat = {
        "fig1_forward": {},
        "fig1_backward": {
            "initial_state": {"occupations": {"18": 1}, "band": "upper"}},
        "fig2_bound": _merged(nine, {
            "initial_state": {"type": "wannier", "occupations": {"21": 2},
                              "band": "bound"}}),
        "fig3_resonant": _merged(nine, {
            "drive": {"stagger0_mhz": 150.0, "delta0_mhz": -12.0},
            "initial_state": {"type": "fock", "occupations": {"22": 2}},
            "evolution": {"n_cycles": 2}}),
        "control_nointeraction": _merged(nine, {
            "lattice": {"interaction_mhz": 0.0},
            "drive": {"stagger0_mhz": 150.0, "delta0_mhz": -12.0,
                      "phase0": math.pi / 2},
            "initial_state": {"type": "fock",
                              "occupations": {"22": 1, "23": 1}}}),
        "fig4_edge_left": _merged(edge, {
            "initial_state": {"type": "fock", "occupations": {"19": 2}}}),
        "fig4_edge_right": _merged(edge, {
            "initial_state": {"type": "fock", "occupations": {"24": 2}}}),
        "edge_slow": _merged(edge, {
            "drive": {"j_mhz": 25.0, "delta0_mhz": 25.0, "period_us": 40.0},
            "initial_state": {"type": "fock", "occupations": {"19": 2}}}),
        "sweep_period": {
            "sweep": {"axes": [{"parameter": "drive.period_us",
                                "values": [round(0.2 * i, 10)
                                           for i in range(1, 16)]}],
                      "seeds": 1, "base_seed": 0}},
        "sweep_offset": {
            "initial_state": {"type": "fock", "occupations": {"17": 1}},
            "evolution": {"n_cycles": 8, "frames_per_cycle": 4},
            "noise": {"enabled": True},
            "sweep": {"axes": [{"parameter": "drive.offset_r",
                                "values": [round(0.1 * i, 10)
                                           for i in range(0, 21)]}],
                      "seeds": 1, "base_seed": 0}},
        "sweep_disorder": {
            "initial_state": {"type": "fock", "occupations": {"17": 1}},
            "evolution": {"n_cycles": 8, "frames_per_cycle": 4},
            "sweep": {"axes": [{"parameter": "drive.disorder_w",
                                "values": [round(0.5 * i, 10)
                                           for i in range(1, 9)]}],
                      "seeds": 50, "base_seed": 0}},
        "bands_fig1e": {"grid": {"n_k": 64, "n_t": 64}},
        "bands_bound": _merged(nine, {
            "grid": {"n_k": 32, "n_t": 256}, "ring_cells": 6}),
        "bands_resonant": _merged(nine, {
            "drive": {"stagger0_mhz": 150.0, "delta0_mhz": -12.0},
            "grid": {"n_k": 32, "n_t": 256}, "ring_cells": 6}),
    }
    return {name: _merged(_BASE, overrides) for name, overrides in cat.items()}


CATALOG = _catalog()


def scenario_defaults(name: str) -> dict:
    """Fully-resolved default configuration for a named scenario."""
    if name not in CATALOG:
        raise ConfigError(f"unknown scenario {name!r}",
                          {"known": sorted(ALL_SCENARIOS)})
    return _merged({"scenario": name}, CATALOG[name])


def resolve_config(data) -> dict:
    """Merge user overrides onto catalog defaults and validate the result."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    name = data.get("scenario")
    if name not in CATALOG:
        raise ConfigError(f"unknown scenario {name!r}",
                          {"known": sorted(ALL_SCENARIOS)})
    cfg = _merged(scenario_defaults(name), data)
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        raise ConfigError(f"invalid configuration: {err.message}",
                          {"path": list(err.absolute_path)}) from err
    _cross_validate(cfg)
    return cfg


def _cross_validate(cfg: dict) -> None:
    lat = cfg["lattice"]
    first = lat["first_index"]
    last = first + lat["n_sites"] - 1
    if cfg["scenario"] in BANDS_SCENARIOS:
        # band exports never prepare a state, so skip the initial-state
        # consistency checks and only require a usable drive
        if cfg["drive"]["kind"] == "static":
            raise ConfigError("band export needs a periodic drive")
        return
    init = cfg["initial_state"]
    occupations = {}
    for key, value in init["occupations"].items():
        try:
            site = int(key)
        except ValueError:
            raise ConfigError(f"occupation site {key!r} is not an integer")
        occupations[site] = value
    for site, occ in occupations.items():
        if not first <= site <= last:
            raise ConfigError(
                f"initial site {site} outside lattice [{first}, {last}]")
        if occ > lat["local_dim"] - 1:
            raise ConfigError(
                f"occupation {occ} on site {site} exceeds the local cutoff")
    total = sum(occupations.values())
    if total != cfg["n_particles"]:
        raise ConfigError(
            f"initial occupations carry {total} particles, "
            f"expected {cfg['n_particles']}")
    if init["type"] == "wannier":
        if "band" not in init:
            raise ConfigError("wannier initial state needs a band")
        if init["band"] == "bound":
            u = lat["interaction_mhz"]
            u_mean = float(np.mean(u)) if isinstance(u, list) else float(u)
            if u_mean >= 0:
                raise ConfigError(
                    "bound-band projection needs attractive interaction")
    if cfg["scenario"] in SWEEP_SCENARIOS:
        if "sweep" not in cfg or not cfg["sweep"].get("axes"):
            raise ConfigError("sweep scenario without sweep axes")
    mhz_scale = abs(cfg["drive"]["j_mhz"]) + abs(cfg["drive"]["delta0_mhz"]) \
        + abs(cfg["drive"]["stagger0_mhz"])
    if mhz_scale == 0.0:
        raise ConfigError("drive has no energy scale")


# ---------------------------------------------------------------------------
# Construction helpers
# ---------------------------------------------------------------------------

def _lattice_from(cfg: dict) -> LatticeSpec:
    lat = cfg["lattice"]
    u = lat["interaction_mhz"]
    interaction = tuple(from_mhz(float(x)) for x in u) \
        if isinstance(u, list) else from_mhz(float(u))
    return LatticeSpec(n_sites=lat["n_sites"], local_dim=lat["local_dim"],
                       interaction_u=interaction, boundary=Boundary.OPEN,
                       first_index=lat["first_index"])


def _drive_from(cfg: dict) -> DriveProtocol:
    drv = cfg["drive"]
    return DriveProtocol(
        kind=DriveKind(drv["kind"]), j_hop=from_mhz(drv["j_mhz"]),
        delta0=from_mhz(drv["delta0_mhz"]),
        stagger0=from_mhz(drv["stagger0_mhz"]), period=drv["period_us"],
        phase0=drv["phase0"], offset_r=drv["offset_r"],
        disorder_w=drv["disorder_w"], disorder_seed=drv["disorder_seed"])


def _initial_state(cfg: dict, spec: LatticeSpec, basis, builder) -> np.ndarray:
    init = cfg["initial_state"]
    occupations = {int(k): v for k, v in init["occupations"].items()}
    psi = prepare_site_excitation(basis, occupations)
    if init["type"] == "fock":
        return psi
    # band-projected ("wannier-like") preparation: project the bare site
    # excitation onto an eigen-subspace of the t=0 Hamiltonian
    evals, vecs = np.linalg.eigh(np.asarray(builder(0.0)))
    band = init["band"]
    if band == "bound":
        u_mean = float(np.mean(spec.interaction_array))
        sel = evals < 0.5 * u_mean
    elif band == "lower":
        sel = evals < 0.0
    else:
        sel = evals > 0.0
    if not sel.any():
        raise ConfigError(f"no eigenstates in the {band} band at t=0")
    projected = vecs[:, sel] @ (vecs[:, sel].conj().T @ psi)
    weight = float(np.linalg.norm(projected) ** 2)
    if weight < 0.5:
        raise ConfigError(
            f"initial site state has only {weight:.3f} weight in the "
            f"{band} band; projection would distort it")
    return projected / math.sqrt(weight)


# ---------------------------------------------------------------------------
# File emission
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if not isinstance(v, str) else v
                             for v in row])


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True,
                               default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ManifestWriter:
    """Run manifest written before any data and finalized afterwards."""

    def __init__(self, out_dir: Path, cfg: dict, extra=None):
        self.out_dir = Path(out_dir)
        self.path = self.out_dir / "manifest.json"
        self.started = time.monotonic()
        self.payload = {
            "tool": "ricepump",
            "version": PACKAGE_VERSION,
            "scenario": cfg["scenario"],
            "config": cfg,
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "integrator": {
                "unitary": "midpoint exponential, |H| h <= 0.1",
                "open_system": "split-step midpoint with exact no-jump decay",
            },
            "status": "running",
            "files": {},
        }
        if extra:
            self.payload.update(extra)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(self.path, self.payload)

    def finalize(self, status: str = "complete", error: dict | None = None):
        files = {}
        for item in sorted(self.out_dir.rglob("*")):
            if item.is_file() and item != self.path:
                files[item.relative_to(self.out_dir).as_posix()] = \
                    _sha256(item)
        self.payload["files"] = files
        self.payload["status"] = status
        self.payload["wall_seconds"] = round(
            time.monotonic() - self.started, 3)
        if error is not None:
            self.payload["error"] = error
        _write_json(self.path, self.payload)
        return self.payload


# ---------------------------------------------------------------------------
# Dynamics scenarios
# ---------------------------------------------------------------------------

def _run_dynamics(cfg: dict, out_dir: Path, *, subdir: str = "",
                  init_override=None) -> dict:
    """Execute one dynamics scenario; emit CSVs/heatmaps; return summary."""
    spec = _lattice_from(cfg)
    drive = _drive_from(cfg)
    basis = build_fock_basis(spec, cfg["n_particles"])
    builder = time_dependent_hamiltonian(spec, basis, drive)
    local_cfg = cfg if init_override is None else _merged(
        cfg, {"initial_state": init_override})
    psi0 = _initial_state(local_cfg, spec, basis, builder)
    evo = cfg["evolution"]
    noisy = cfg["noise"]["enabled"]

    target = out_dir / subdir if subdir else out_dir
    target.mkdir(parents=True, exist_ok=True)

    if noisy:
        sector = SectorBasis(spec, cfg["n_particles"])
        noise = NoiseModel(t1=cfg["noise"]["t1_us"],
                           t_phi=cfg["noise"]["t_phi_us"])
        embedded = sector.embed(cfg["n_particles"], psi0)
        rho0 = np.outer(embedded, embedded.conj())
        trace = evolve_lindblad_cycles(
            spec, drive, rho0, evo["n_cycles"], sector_basis=sector,
            noise=noise, frames_per_cycle=evo["frames_per_cycle"],
            steps_per_cycle=evo["steps_per_cycle"])
        states = trace.rhos
        obs_basis = sector
        reference = embedded
        hygiene = {"trace_drift": trace.trace_drift,
                   "min_eigenvalue": trace.min_eigenvalue}
    else:
        trace = evolve_unitary_cycles(
            builder, psi0, drive.period, evo["n_cycles"],
            frames_per_cycle=evo["frames_per_cycle"],
            steps_per_cycle=evo["steps_per_cycle"])
        states = trace.states
        obs_basis = basis
        reference = psi0
        norms = np.linalg.norm(states, axis=1)
        hygiene = {"norm_drift": float(np.abs(norms - 1.0).max()),
                   "steps": trace.steps}

    times = trace.times
    frames = len(times)
    sites = spec.site_indices
    n_levels = spec.local_dim
    distributions = np.empty((frames, spec.n_sites, n_levels))
    coms = np.empty(frames)
    echoes = np.empty(frames)
    for i in range(frames):
        distributions[i] = occupation_distribution(obs_basis, states[i])
        coms[i] = center_of_mass(obs_basis, states[i])
        echoes[i] = return_probability(reference, states[i])

    pop_rows = [(times[i], sites[s], *distributions[i, s])
                for i in range(frames) for s in range(spec.n_sites)]
    _write_csv(target / "populations.csv",
               ["time_us", "site"] + [f"p{n}" for n in range(n_levels)],
               pop_rows)
    _write_csv(target / "com.csv", ["time_us", "com_cells", "loschmidt"],
               [(times[i], coms[i], echoes[i]) for i in range(frames)])

    fpc = evo["frames_per_cycle"]
    cycle_marks = [c * fpc for c in range(evo["n_cycles"] + 1)]
    per_cycle = [float(coms[cycle_marks[c + 1]] - coms[cycle_marks[c]])
                 for c in range(evo["n_cycles"])]
    summary = {
        "scenario": cfg["scenario"],
        "n_cycles": evo["n_cycles"],
        "delta_x_over_d": per_cycle[0],
        "per_cycle_shifts": per_cycle,
        "total_shift_over_d": float(coms[-1] - coms[0]),
        "final_loschmidt": float(echoes[-1]),
        "max_single_occupancy": float(distributions[:, :, 1].max()),
        **hygiene,
    }
    if n_levels > 2:
        summary["max_double_occupancy"] = float(
            distributions[:, :, 2].max())
        edge_final = distributions[-1, :, 2]
        summary["final_edge_double_occupancy"] = {
            str(sites[0]): float(edge_final[0]),
            str(sites[-1]): float(edge_final[-1])}

    if cfg["n_particles"] >= 2 and not noisy:
        corr_rows = []
        offdiag_max = 0.0
        sum_err = 0.0
        pair_weight = np.empty(frames)
        for i in range(frames):
            gamma = density_correlations(obs_basis, states[i])
            total = float(np.abs(gamma).sum())
            offdiag = total - float(np.abs(np.diag(gamma)).sum())
            offdiag_max = max(offdiag_max,
                              offdiag / total if total else 0.0)
            expected = cfg["n_particles"] * (cfg["n_particles"] - 1)
            sum_err = max(sum_err, abs(float(gamma.sum()) - expected))
            pair_weight[i] = 0.5 * float(
                np.trace(gamma, offset=1) + np.trace(gamma, offset=-1))
            for a in range(spec.n_sites):
                for b in range(spec.n_sites):
                    corr_rows.append((times[i], sites[a], sites[b],
                                      gamma[a, b]))
        _write_csv(target / "correlations.csv",
                   ["time_us", "site_i", "site_j", "gamma"], corr_rows)
        summary["offdiag_gamma_fraction_max"] = offdiag_max
        summary["gamma_sum_rule_error"] = sum_err
        summary["adjacent_pair_weight_max_per_cycle"] = [
            float(pair_weight[cycle_marks[c]:cycle_marks[c + 1] + 1].max())
            for c in range(evo["n_cycles"])]

    if cfg["output"]["heatmaps"]:
        level = 2 if (cfg["n_particles"] >= 2 and n_levels > 2) else 1
        emit_heatmap(distributions[:, :, level].T,
                     target / f"population_p{level}.svg",
                     title=f"{cfg['scenario']} P(n={level})",
                     row_labels=list(sites),
                     col_labels=[f"{t:.3g}" for t in times],
                     vmin=0.0, vmax=1.0)
        if cfg["n_particles"] >= 2 and not noisy:
            gamma = density_correlations(obs_basis, states[-1])
            emit_heatmap(gamma, target / "correlations_final.svg",
                         title=f"{cfg['scenario']} density correlations",
                         row_labels=list(sites), col_labels=list(sites))
    _write_json(target / "summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# Band scenarios
# ---------------------------------------------------------------------------

def _run_bands(cfg: dict, out_dir: Path) -> dict:
    drive = _drive_from(cfg)
    grid = BlochGrid(n_k=cfg["grid"]["n_k"], n_t=cfg["grid"]["n_t"])
    name = cfg["scenario"]
    if name == "bands_fig1e":
        def field(k, t):
            return bloch_hamiltonian_cell(k, t, drive)
        result = band_structure(field, grid, period=drive.period)
        labels = None
        doublon = None
    else:
        spec = _lattice_from(cfg)
        result = com_band_structure(spec, drive, n_particles=2,
                                    ring_cells=cfg["ring_cells"], grid=grid)
        labels = [label.value for label in result.labels]
        doublon = [float(x) for x in result.double_occupancy]

    n_bands = result.energies.shape[0]
    rows = []
    for band in range(n_bands):
        for ik in range(len(result.k_values)):
            for it in range(len(result.t_values)):
                rows.append((ik, it, band,
                             to_mhz(result.energies[band, ik, it]),
                             result.curvature[band, ik, it]))
    _write_csv(out_dir / "bands.csv",
               ["k_index", "t_index", "band", "energy_mhz", "curvature"],
               rows)
    summary = {
        "scenario": name,
        "n_bands": n_bands,
        "chern": [None if c is None else int(c) for c in result.chern],
        "gap_min_mhz": to_mhz(result.gap_min),
        "mean_energy_mhz": [to_mhz(result.energies[b].mean())
                            for b in range(n_bands)],
        "grid": {"n_k": grid.n_k, "n_t": grid.n_t},
    }
    if labels is not None:
        summary["labels"] = labels
        summary["double_occupancy"] = doublon
        summary["band_gaps_mhz"] = [to_mhz(g) for g in result.band_gaps]
    if cfg["output"]["heatmaps"] and name == "bands_fig1e":
        emit_heatmap(result.curvature[0],
                     out_dir / "curvature_band0.svg",
                     title="lowest band Berry curvature",
                     row_labels=[f"{k:.2f}" for k in result.k_values],
                     col_labels=[f"{t:.3g}" for t in result.t_values])
    _write_json(out_dir / "bands_summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def run_scenario(config, out_dir, base_seed: int | None = None) -> dict:
    """Run a non-sweep scenario into ``out_dir``; returns the manifest."""
    cfg = resolve_config(config)
    name = cfg["scenario"]
    if name in SWEEP_SCENARIOS:
        raise ConfigError(f"{name} is a sweep; use run_sweep")
    if base_seed is not None:
        cfg["drive"]["disorder_seed"] = int(base_seed)
    out_dir = Path(out_dir)
    manifest = ManifestWriter(out_dir, cfg)
    try:
        if name in BANDS_SCENARIOS:
            _run_bands(cfg, out_dir)
        elif name == "edge_slow":
            first = cfg["lattice"]["first_index"]
            last = first + cfg["lattice"]["n_sites"] - 1
            left = _run_dynamics(cfg, out_dir, subdir="left",
                                 init_override={"type": "fock",
                                                "occupations": {str(first): 2}})
            right = _run_dynamics(cfg, out_dir, subdir="right",
                                  init_override={"type": "fock",
                                                 "occupations": {str(last): 2}})
            _write_json(out_dir / "summary.json",
                        {"scenario": name, "left": left, "right": right})
        else:
            _run_dynamics(cfg, out_dir)
    except Exception as err:
        manifest.finalize(status="failed",
                          error={"type": type(err).__name__,
                                 "message": str(err)})
        raise
    return manifest.finalize()


def _set_by_path(cfg: dict, dotted: str, value) -> None:
    node = cfg
    keys = dotted.split(".")
    for key in keys[:-1]:
        node = node[key]
    node[keys[-1]] = value


def _sweep_points(cfg: dict) -> list:
    axes = cfg["sweep"]["axes"]
    replicated = cfg["scenario"] == "sweep_disorder"
    n_seeds = cfg["sweep"]["seeds"] if replicated else 1
    base_seed = cfg["sweep"]["base_seed"]
    points = []
    index = 0
    grids = [(axis["parameter"], axis["values"]) for axis in axes]

    def expand(level, assignment):
        nonlocal index
        if level == len(grids):
            for rep in range(n_seeds):
                seed = base_seed ^ index
                points.append({"point_index": index, "values": dict(assignment),
                               "seed": seed, "replicate": rep})
                index += 1
            return
        parameter, values = grids[level]
        for value in values:
            assignment[parameter] = value
            expand(level + 1, assignment)
        del assignment[parameter]

    expand(0, {})
    return points


def _point_config(cfg: dict, point: dict) -> dict:
    local = copy.deepcopy(cfg)
    for parameter, value in point["values"].items():
        _set_by_path(local, parameter, value)
    if cfg["scenario"] == "sweep_disorder":
        local["drive"]["disorder_seed"] = point["seed"]
    return local


def _run_sweep_point(args) -> dict:
    """One sweep point; module-level so worker processes can import it."""
    cfg, point, point_dir = args
    local = _point_config(cfg, point)
    name = cfg["scenario"]
    evo = local["evolution"]
    fpc = evo["frames_per_cycle"]
    spec = _lattice_from(local)
    drive = _drive_from(local)
    basis = build_fock_basis(spec, local["n_particles"])
    builder = time_dependent_hamiltonian(spec, basis, drive)
    psi0 = _initial_state(local, spec, basis, builder)
    row = {"point_index": point["point_index"], "seed": point["seed"],
           **{p.split(".")[-1]: v for p, v in point["values"].items()}}

    if name == "sweep_period":
        unitary = evolve_unitary_cycles(builder, psi0, drive.period,
                                        evo["n_cycles"],
                                        frames_per_cycle=fpc)
        row["dx_unitary"] = float(
            center_of_mass(basis, unitary.states[-1])
            - center_of_mass(basis, unitary.states[0]))
        sector = SectorBasis(spec, local["n_particles"])
        noise = NoiseModel(t1=local["noise"]["t1_us"],
                           t_phi=local["noise"]["t_phi_us"])
        embedded = sector.embed(local["n_particles"], psi0)
        rho0 = np.outer(embedded, embedded.conj())
        lind = evolve_lindblad_cycles(spec, drive, rho0, evo["n_cycles"],
                                      sector_basis=sector, noise=noise,
                                      frames_per_cycle=fpc)
        row["dx_noisy"] = float(center_of_mass(sector, lind.rhos[-1])
                                - center_of_mass(sector, rho0))
        return row

    sample_cycles = (2, 4, 6, 8) if evo["n_cycles"] >= 8 \
        else tuple(range(1, evo["n_cycles"] + 1))
    if local["noise"]["enabled"]:
        sector = SectorBasis(spec, local["n_particles"])
        noise = NoiseModel(t1=local["noise"]["t1_us"],
                           t_phi=local["noise"]["t_phi_us"])
        embedded = sector.embed(local["n_particles"], psi0)
        rho0 = np.outer(embedded, embedded.conj())
        lind = evolve_lindblad_cycles(spec, drive, rho0, evo["n_cycles"],
                                      sector_basis=sector, noise=noise,
                                      frames_per_cycle=fpc)
        for c in sample_cycles:
            row[f"loschmidt_{c}t"] = return_probability(
                embedded, lind.rhos[c * fpc])
        final = lind.rhos[-1]
        obs_basis = sector
        com0 = center_of_mass(sector, rho0)
        final_dist = occupation_distribution(sector, final)
    else:
        unit = evolve_unitary_cycles(builder, psi0, drive.period,
                                     evo["n_cycles"], frames_per_cycle=fpc)
        for c in sample_cycles:
            row[f"loschmidt_{c}t"] = return_probability(
                psi0, unit.states[c * fpc])
        final = unit.states[-1]
        obs_basis = basis
        com0 = center_of_mass(basis, unit.states[0])
        final_dist = occupation_distribution(basis, final)
        if name == "sweep_disorder" and point["replicate"] == 0 \
                and local["output"]["heatmaps"]:
            frames = len(unit.times)
            level_pop = np.empty((spec.n_sites, frames))
            for i in range(frames):
                dist = occupation_distribution(basis, unit.states[i])
                level_pop[:, i] = dist @ np.arange(spec.local_dim)
            pdir = Path(point_dir)
            pdir.mkdir(parents=True, exist_ok=True)
            emit_heatmap(level_pop, pdir / "population.svg",
                         title=f"W={point['values'].get('drive.disorder_w')}"
                               f" seed={point['seed']}",
                         row_labels=list(spec.site_indices),
                         col_labels=[f"{t:.3g}" for t in unit.times],
                         vmin=0.0)
    com_final = center_of_mass(obs_basis, final)
    row["dx_final"] = float(com_final - com0)
    occs = final_dist @ np.arange(spec.local_dim)
    total = occs.sum()
    positions = 0.5 * spec.lattice_constant * spec.site_indices
    row["transported_fraction"] = float(
        occs[positions > com0 + 2.0].sum() / total) if total > 0 else 0.0
    return row


def run_sweep(config, out_dir, workers: int = 1,
              base_seed: int | None = None) -> dict:
    """Run a sweep scenario; aggregated CSV plus per-point artifacts."""
    cfg = resolve_config(config)
    name = cfg["scenario"]
    if name not in SWEEP_SCENARIOS:
        raise ConfigError(f"{name} is not a sweep; use run_scenario")
    if base_seed is not None:
        cfg["sweep"]["base_seed"] = int(base_seed)
    out_dir = Path(out_dir)
    manifest = ManifestWriter(out_dir, cfg,
                              extra={"workers": int(workers)})
    points = _sweep_points(cfg)
    tasks = [(cfg, point, str(out_dir / "points" / f"p{point['point_index']:04d}"))
             for point in points]
    rows = []
    failures = 0
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(_sweep_point_safe, tasks))
        else:
            outcomes = [_sweep_point_safe(task) for task in tasks]
        for point, outcome in zip(points, outcomes):
            if "error" in outcome:
                failures += 1
                rows.append({"point_index": point["point_index"],
                             "seed": point["seed"],
                             **{p.split(".")[-1]: v
                                for p, v in point["values"].items()},
                             "status": "failed", "error": outcome["error"]})
            else:
                rows.append({**outcome, "status": "ok", "error": ""})
        header: list = []
        for row in rows:
            for key in row:
                if key not in header:
                    header.append(key)
        _write_csv(out_dir / "sweep.csv", header,
                   [[row.get(key, "") for key in header] for row in rows])
        _write_json(out_dir / "sweep_summary.json", {
            "scenario": name, "points": len(rows), "failed": failures})
    except Exception as err:
        manifest.finalize(status="failed",
                          error={"type": type(err).__name__,
                                 "message": str(err)})
        raise
    status = "complete" if failures == 0 else "complete_with_failures"
    return manifest.finalize(status=status)


def _sweep_point_safe(args) -> dict:
    try:
        return _run_sweep_point(args)
    except Exception as err:  # recorded per point; the sweep continues
        return {"error": f"{type(err).__name__}: {err}"}
