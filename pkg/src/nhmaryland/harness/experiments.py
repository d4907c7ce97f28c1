"""Figure-level experiments: data producers plus their file writers."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, TypeVar

import numpy as np

from .. import analytic, spectral, topology
from ..model import ModelParams, RationalApproximant
from .config import ExperimentConfig, Kind, worker_count
from .io import Manifest, write_json, write_table

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int) -> list[R]:
    """Map preserving input order; LAPACK and numpy release the GIL, so threads suffice."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def segment_distance(E, V: float, half_width: float = 2.0) -> np.ndarray:
    """Distance to the segment {Im E = V, |Re E| <= half_width}."""
    E = np.asarray(E, dtype=complex)
    return np.hypot(np.maximum(np.abs(E.real) - half_width, 0.0), E.imag - V)


# --------------------------------------------------------------------------
# spectra

@dataclass
class SpectrumPanel:
    epsilon: float
    phase: analytic.PhaseLabel
    energies: np.ndarray
    ipr: np.ndarray
    classified: np.ndarray
    ambiguous: np.ndarray
    tau: float
    loops: analytic.LoopSet
    loop_distance: np.ndarray
    segment_distance: np.ndarray
    edge: float | None

    def summary(self) -> dict:
        loc = self.ipr > self.tau
        L = self.energies.size
        out = {
            "epsilon": self.epsilon,
            "phase": self.phase.value,
            "L": L,
            "tau": self.tau,
            "localized": int(loc.sum()),
            "extended": int((~loc).sum()),
            "ambiguous": int(self.ambiguous.sum()),
            "ipr_min_times_L": float(self.ipr.min() * L),
            "ipr_max_times_L": float(self.ipr.max() * L),
            "loop_count": self.loops.loop_count,
            "max_localized_loop_distance": float(self.loop_distance[loc].max()) if loc.any() else None,
            "max_extended_segment_distance":
                float(self.segment_distance[~loc].max()) if (~loc).any() else None,
            "max_extended_abs_re": float(np.abs(self.energies[~loc].real).max()) if (~loc).any() else None,
            "mobility_edge_E0": self.edge,
        }
        return out


def spectrum_panel(params: ModelParams, approx: RationalApproximant,
                   loop_resolution: int = 8192) -> SpectrumPanel:
    H = spectral.build_real_space_hamiltonian(params, approx, params.theta)
    dec = spectral.eigendecompose(H)
    diag = dec.diagnostics()
    loops = analytic.point_spectrum_loops(params.epsilon, params.V, loop_resolution)
    edge = None
    try:
        edge = analytic.mobility_edge_omega0(params.epsilon, params.V)[1]
    except analytic.OutOfPhase:
        pass
    return SpectrumPanel(
        params.epsilon, analytic.classify_phase(params.epsilon, params.V), dec.eigenvalues,
        diag.ipr, diag.classified, diag.ambiguous, diag.tau, loops,
        analytic.loop_distance(dec.eigenvalues, loops),
        segment_distance(dec.eigenvalues, params.V), edge)


def _eps_tag(eps: float) -> str:
    return f"{eps:.4f}".replace(".", "p")


def run_spectrum_experiment(cfg: ExperimentConfig) -> list[Path]:
    man = Manifest(cfg)
    out = Path(cfg.out)
    approx = cfg.approximant
    summaries = []
    with man.stage("diagonalise"):
        panels = ordered_map(lambda e: spectrum_panel(cfg.params(e), approx), cfg.epsilons,
                             worker_count(cfg))
    with man.stage("write"):
        for p in panels:
            tag = _eps_tag(p.epsilon)
            rows = [(i, float(E.real), float(E.imag), float(q), str(c))
                    for i, (E, q, c) in enumerate(zip(p.energies, p.ipr, p.classified))]
            man.add(write_table(out / f"spectrum_eps{tag}",
                                ["index", "re_energy", "im_energy", "ipr", "classification"],
                                rows, cfg.fmt, {"epsilon": p.epsilon, "L": approx.q}))
            loop_rows = [(k, float(w), float(E.real), float(E.imag))
                         for k, arc in enumerate(p.loops.arcs)
                         for w, E in zip(arc.omega, arc.energy)]
            man.add(write_table(out / f"loops_eps{tag}", ["arc", "omega", "re_energy", "im_energy"],
                                loop_rows, cfg.fmt))
            summaries.append(p.summary())
        man.add(write_json(out / "spectrum_summary.json",
                           {"V": cfg.V, "theta": cfg.theta, "approximant": str(approx),
                            "panels": summaries}))
    if cfg.plot:
        from .plots import plot_spectra
        with man.stage("plot"):
            man.add(plot_spectra(panels, out / "spectrum.svg"))
    return [man.write()] + [out / f for f in man.files]


# --------------------------------------------------------------------------
# winding sweep

@dataclass
class WindingRow:
    epsilon: float
    w1: int
    w2: int
    phase: analytic.PhaseLabel
    analytic_phase: analytic.PhaseLabel
    base2: complex


def winding_sweep(V: float, epsilons: list[float], approx: RationalApproximant,
                  theta_steps: int = 256, workers: int = 1, theta: float = 0.0) -> list[WindingRow]:
    def one(eps):
        d = topology.mobility_edge_diagnosis(ModelParams(V, eps, theta), approx, theta_steps)
        return WindingRow(eps, d.w1, d.w2, d.phase, analytic.classify_phase(eps, V), d.base2)

    return ordered_map(one, epsilons, workers)


def step_brackets(rows: list[WindingRow], attr: str, threshold: float) -> bool:
    """True if the 1 -> 0 step of ``attr`` sits between the grid points around ``threshold``."""
    eps = np.array([r.epsilon for r in rows])
    vals = np.array([getattr(r, attr) for r in rows])
    change = np.flatnonzero(np.diff(vals) != 0)
    if change.size != 1:
        return False
    i = int(change[0])
    return bool(eps[i] <= threshold <= eps[i + 1])


def run_winding_sweep(cfg: ExperimentConfig) -> list[Path]:
    man = Manifest(cfg)
    out = Path(cfg.out)
    eps1, eps2 = analytic.critical_epsilons(cfg.V)
    with man.stage("winding"):
        rows = winding_sweep(cfg.V, sorted(cfg.epsilons), cfg.approximant, cfg.theta_steps,
                             worker_count(cfg), cfg.theta)
    with man.stage("write"):
        man.add(write_table(out / "winding", ["epsilon", "w1", "w2", "phase"],
                            [(r.epsilon, r.w1, r.w2, r.phase.value) for r in rows], cfg.fmt))
        man.add(write_json(out / "winding_annotations.json", {
            "epsilon1": eps1, "epsilon2": eps2, "approximant": str(cfg.approximant),
            "w1_step_brackets_epsilon1": step_brackets(rows, "w1", eps1),
            "w2_step_brackets_epsilon2": step_brackets(rows, "w2", eps2),
            "base_energies": [[r.epsilon, r.base2] for r in rows],
            "agrees_with_analytic": [r.phase == r.analytic_phase for r in rows],
        }))
    if cfg.plot:
        from .plots import plot_winding
        man.add(plot_winding(rows, eps1, eps2, out / "winding.svg"))
    return [man.write()] + [out / f for f in man.files]


# --------------------------------------------------------------------------
# phase diagram

def run_phase_diagram(cfg: ExperimentConfig) -> list[Path]:
    man = Manifest(cfg)
    out = Path(cfg.out)
    Vs = cfg.V_values or [cfg.V]
    rows = []
    with man.stage("classify"):
        for V in Vs:
            for eps in sorted(cfg.epsilons):
                if V <= 0 or eps <= 0:
                    continue
                label = analytic.classify_phase(eps, V)
                loops = analytic.point_spectrum_loops(eps, V)
                bound = analytic.extended_cos_bound(eps, V)
                rows.append((V, eps, label.value, loops.loop_count, 2.0 * bound))
    with man.stage("write"):
        man.add(write_table(out / "phase_diagram", ["V", "epsilon", "phase", "loop_count", "E0"],
                            rows, cfg.fmt))
        man.add(write_json(out / "thresholds.json", {
            "thresholds": [{"V": V, "epsilon1": analytic.critical_epsilons(V)[0],
                            "epsilon2": analytic.critical_epsilons(V)[1]} for V in Vs if V > 0]}))
    return [man.write()] + [out / f for f in man.files]


# --------------------------------------------------------------------------
# Lyapunov exponents

ACCEPTANCE_ENERGIES = [1 + 1j, 1j, -1.2 + 1j, 1.8 + 1j,
                       0j, 3 + 0.5j, -1.5 + 0.3j, 0.5 + 2j, -2.5 + 1.5j, 0.8 - 0.6j]


def lyapunov_table(V: float, energies, epsilons, steps: int, phase_samples: int,
                   workers: int = 1, theta: float = 0.0):
    items = [(complex(E), float(e)) for e in epsilons for E in energies]

    def one(item):
        E, eps = item
        p = ModelParams(V, eps, theta)
        tm = spectral.transfer_matrix_lyapunov(E, p, steps, phase_samples)
        return (E, eps, analytic.lyapunov_exponent(E, V),
                analytic.lyapunov_exponent_at(E, V, eps), tm)

    return ordered_map(one, items, workers)


def run_lyapunov_experiment(cfg: ExperimentConfig) -> list[Path]:
    man = Manifest(cfg)
    out = Path(cfg.out)
    energies = cfg.energies or ACCEPTANCE_ENERGIES
    with man.stage("transfer_matrices"):
        table = lyapunov_table(cfg.V, energies, cfg.epsilons, cfg.steps, cfg.phase_samples,
                               worker_count(cfg), cfg.theta)
    with man.stage("write"):
        man.add(write_table(out / "lyapunov",
                            ["re_energy", "im_energy", "epsilon", "closed_form",
                             "epsilon_dependent", "transfer_matrix"],
                            [(E.real, E.imag, e, a, b, t) for E, e, a, b, t in table], cfg.fmt))
    return [man.write()] + [out / f for f in man.files]


# --------------------------------------------------------------------------
# spectral rotations

@dataclass
class RotationResult:
    flow: topology.SpectralFlow
    base_energy: complex
    delta_phi: np.ndarray
    loop_distance: float

    @property
    def total_turns(self) -> float:
        return float(self.delta_phi.sum() / (2 * math.pi))


def rotation_experiment(params: ModelParams, approx: RationalApproximant, theta_steps: int = 64,
                        base_energy: complex | None = None) -> RotationResult:
    flow = topology.spectral_flow_trace(params, approx, theta_steps)
    base = 1j * params.V if base_energy is None else complex(base_energy)
    dist = float("nan")
    if params.epsilon > 0:
        loops = analytic.point_spectrum_loops(params.epsilon, params.V, 8192)
        if loops.loop_count:
            dist = float(analytic.loop_distance(flow.eigenvalues.ravel(), loops).max())
    return RotationResult(flow, base, flow.swept_angles(base), dist)


def run_rotation_experiment(cfg: ExperimentConfig) -> list[Path]:
    man = Manifest(cfg)
    out = Path(cfg.out)
    approx = cfg.approximant
    results = []
    with man.stage("flow"):
        for eps in cfg.epsilons:
            results.append(rotation_experiment(cfg.params(eps), approx, cfg.theta_steps,
                                               cfg.base_energy))
    with man.stage("write"):
        for eps, res in zip(cfg.epsilons, results):
            tag = _eps_tag(eps)
            fl = res.flow
            traj = [(float(th), l, float(E.real), float(E.imag))
                    for th, row in zip(fl.thetas, fl.eigenvalues) for l, E in enumerate(row)]
            man.add(write_table(out / f"trajectories_eps{tag}",
                                ["theta", "trajectory", "re_energy", "im_energy"], traj, cfg.fmt))
            man.add(write_table(out / f"permutation_eps{tag}", ["trajectory", "end_index"],
                                [(l, int(j)) for l, j in enumerate(fl.end_permutation)], cfg.fmt))
            man.add(write_table(out / f"delta_phi_eps{tag}", ["trajectory", "delta_phi"],
                                [(l, float(d)) for l, d in enumerate(res.delta_phi)], cfg.fmt))
            man.add(write_json(out / f"rotation_summary_eps{tag}.json", {
                "epsilon": eps, "base_energy": res.base_energy,
                "sum_delta_phi": float(res.delta_phi.sum()),
                "winding": res.total_turns,
                "cycle_lengths": fl.cycle_lengths(),
                "single_cycle": fl.is_single_cycle(),
                "max_loop_distance": res.loop_distance,
                "theta_points": int(fl.thetas.size),
            }))
    if cfg.plot:
        from .plots import plot_rotations
        man.add(plot_rotations(results[0], out / "rotations.svg"))
    return [man.write()] + [out / f for f in man.files]


RUNNERS = {
    Kind.SPECTRUM: run_spectrum_experiment,
    Kind.WINDING_SWEEP: run_winding_sweep,
    Kind.PHASE_DIAGRAM: run_phase_diagram,
    Kind.LYAPUNOV: run_lyapunov_experiment,
    Kind.ROTATIONS: run_rotation_experiment,
}
