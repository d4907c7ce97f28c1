"""Acceptance criteria and module invariants as named, measurable checks."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import analytic, spectral, topology
from ..model import (GOLDEN_ALPHA, ModelParams, RationalApproximant, approximant_for_size,
                     fibonacci_approximants, potential_value)
from .config import DEFAULT_TOLERANCES
from .experiments import (ACCEPTANCE_ENERGIES, lyapunov_table, rotation_experiment,
                          segment_distance, spectrum_panel, step_brackets, winding_sweep)


@dataclass
class Measurement:
    name: str
    measured: float
    tolerance: float
    relation: str = "<"          # measured < tolerance, or ">" / "==" / "<="

    @property
    def passed(self) -> bool:
        m, t = self.measured, self.tolerance
        if m is None or (isinstance(m, float) and math.isnan(m)):
            return False
        if self.relation == "<":
            return m < t
        if self.relation == "<=":
            return m <= t
        if self.relation == ">":
            return m > t
        if self.relation == ">=":
            return m >= t
        return m == t


@dataclass
class CheckResult:
    name: str
    description: str
    criterion: int | None
    measurements: list[Measurement]
    seconds: float
    runtime_limit: float | None
    detail: str = ""
    error: str | None = None

    @property
    def passed(self) -> bool:
        if self.error is not None:
            return False
        if self.runtime_limit is not None and self.seconds >= self.runtime_limit:
            return False
        return all(m.passed for m in self.measurements)

    def to_dict(self) -> dict:
        return {
            "name": self.name, "criterion": self.criterion, "description": self.description,
            "passed": self.passed, "seconds": self.seconds, "runtime_limit": self.runtime_limit,
            "detail": self.detail, "error": self.error,
            "measurements": [{"name": m.name, "measured": m.measured, "tolerance": m.tolerance,
                              "relation": m.relation, "passed": m.passed}
                             for m in self.measurements],
        }


@dataclass
class Check:
    name: str
    description: str
    fn: Callable[[dict], tuple[list[Measurement], str]]
    criterion: int | None = None
    runtime_limit: float | None = None
    tags: tuple[str, ...] = field(default=())

    def run(self, tolerances: dict | None = None) -> CheckResult:
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(tolerances or {})
        t0 = time.perf_counter()
        try:
            measurements, detail = self.fn(tol)
            error = None
        except Exception as exc:  # failures become report entries
            measurements, detail, error = [], "", f"{type(exc).__name__}: {exc}"
        return CheckResult(self.name, self.description, self.criterion, measurements,
                           time.perf_counter() - t0, self.runtime_limit, detail, error)


REGISTRY: dict[str, Check] = {}


def check(name: str, description: str, criterion: int | None = None,
          runtime_limit: float | None = None):
    def deco(fn):
        REGISTRY[name] = Check(name, description, fn, criterion, runtime_limit)
        return fn
    return deco


V1 = 1.0


# --------------------------------------------------------------------------
# acceptance criteria

@check("c01_thresholds", "critical strengths at V = 1", 1, 1e-3)
def _c1(tol):
    eps1, eps2 = analytic.critical_epsilons(V1)
    t0 = time.perf_counter()
    for _ in range(100):
        analytic.critical_epsilons(V1)
    per_call = (time.perf_counter() - t0) / 100
    return [Measurement("abs(eps1 - 0.4407)", abs(eps1 - 0.4407), tol["threshold"]),
            Measurement("abs(eps2 - 0.5306)", abs(eps2 - 0.5306), tol["threshold"]),
            Measurement("seconds per call", per_call, 1e-3)], f"eps1={eps1:.10f} eps2={eps2:.10f}"


@check("c02_spectrum_panels", "ring spectra and IPR at L = 610 for eps = 0.1, 0.46, 0.6", 2, 120.0)
def _c2(tol):
    approx = approximant_for_size(610)
    out = []
    a = spectrum_panel(ModelParams(V1, 0.1), approx)
    out.append(Measurement("(a) max distance to loop C", float(a.loop_distance.max()), tol["loop_distance"]))
    out.append(Measurement("(a) min IPR * L (> 5)", float(a.ipr.min() * a.energies.size), 5.0, ">"))

    c = spectrum_panel(ModelParams(V1, 0.46), approx)
    L = c.energies.size
    loc = c.ipr > c.tau
    frac_loc = loc.mean()
    ratio = float(np.median(c.ipr[loc]) / np.median(c.ipr[~loc])) if loc.any() and (~loc).any() else 0.0
    out.append(Measurement("(c) smaller IPR population fraction", float(min(frac_loc, 1 - frac_loc)), 0.1, ">="))
    out.append(Measurement("(c) median IPR ratio localized/extended", ratio, 10.0, ">="))
    E0 = analytic.mobility_edge_omega0(0.46, V1)[1]
    ext_dist = segment_distance(c.energies[~loc], V1, E0 + tol["edge_margin"])
    out.append(Measurement("(c) extended: max distance to {Im E = 1, |Re E| < E0 + 0.1}",
                           float(ext_dist.max()), tol["segment_distance"]))
    out.append(Measurement("(c) localized: max distance to loops C1/C2",
                           float(c.loop_distance[loc].max()), tol["loop_distance"]))

    e = spectrum_panel(ModelParams(V1, 0.6), approx)
    out.append(Measurement("(e) max IPR * L (< 10)", float(e.ipr.max() * L), 10.0))
    out.append(Measurement("(e) max distance to segment", float(e.segment_distance.max()),
                           tol["segment_distance"]))
    detail = (f"eps=0.46: {int(loc.sum())} localized / {int((~loc).sum())} extended, E0={E0:.4f}, "
              f"max |Re E| extended={np.abs(c.energies[~loc].real).max():.4f}")
    return out, detail


def _criterion3_grid():
    return [0.05 + i * 0.75 / 29 for i in range(30)]


@check("c03_winding_sweep", "(w1, w2) over 30 eps values at L = 377", 3, 300.0)
def _c3(tol):
    rows = winding_sweep(V1, _criterion3_grid(), approximant_for_size(377), 256, workers=2)
    eps1, eps2 = analytic.critical_epsilons(V1)
    expected = {analytic.PhaseLabel.LOCALIZED: (1, 1), analytic.PhaseLabel.MOBILITY_EDGE: (0, 1),
                analytic.PhaseLabel.DELOCALIZED: (0, 0)}
    wrong = [r.epsilon for r in rows
             if r.analytic_phase in expected and (r.w1, r.w2) != expected[r.analytic_phase]]
    detail = " ".join(f"{r.epsilon:.3f}:({r.w1},{r.w2})" for r in rows)
    return [Measurement("grid points with wrong (w1, w2)", len(wrong), 0, "=="),
            Measurement("w1 step brackets eps1", int(step_brackets(rows, "w1", eps1)), 1, "=="),
            Measurement("w2 step brackets eps2", int(step_brackets(rows, "w2", eps2)), 1, "==")], detail


@check("c04_lyapunov_closed_form", "transfer matrices vs the eps-independent closed form", 4, 60.0)
def _c4(tol):
    table = lyapunov_table(V1, ACCEPTANCE_ENERGIES, [0.1, 0.3, 0.6], 100_000, 8, workers=2)
    errs = [abs(tm - cf) for _, _, cf, _, tm in table]
    bad = [f"E={E:.3g} eps={e}: tm={tm:.4f} closed={cf:.4f}"
           for (E, e, cf, _, tm), d in zip(table, errs) if d >= tol["lyapunov"]]
    return ([Measurement("max |transfer - closed form|", float(max(errs)), tol["lyapunov"])],
            f"{len(bad)} of {len(errs)} pairs off: " + "; ".join(bad))


def _valid_samples(eps, count):
    loops = analytic.point_spectrum_loops(eps, V1, 4096)
    pts = loops.points()
    idx = np.linspace(0, pts.size - 1, count).round().astype(int)
    return pts[idx], loops


def off_spectrum_energies(eps: float, count: int, seed: int = 7, margin: float = 0.1):
    rng = np.random.default_rng(seed)
    loops = analytic.point_spectrum_loops(eps, V1, 4096)
    out = []
    while len(out) < count:
        E = complex(rng.uniform(-4, 4), rng.uniform(-1, 4))
        if loops.loop_count and analytic.loop_distance(E, loops)[0] < margin:
            continue
        if segment_distance(E, V1)[()] < 0.05:
            continue
        out.append(E)
    return out


@check("c05_solvability", "solvability residual on and off the point spectrum", 5, 10.0)
def _c5(tol):
    on, off = [], []
    for eps in (0.1, 0.46):
        pts, _ = _valid_samples(eps, 50)
        on += [abs(analytic.solvability_residual(E, eps, V1, 2048)) for E in pts]
        off += [abs(analytic.solvability_residual(E, eps, V1, 2048))
                for E in off_spectrum_energies(eps, 20)]
    return [Measurement("max |residual| on 100 curve points", float(max(on)), tol["solvability"]),
            Measurement("min |residual| at 40 off-spectrum energies", float(min(off)),
                        tol["off_spectrum"], ">")], ""


EXTENDED_OMEGAS = (0.3, 0.9, math.pi / 2, 2.0, 2.8)


@check("c06_extended_states", "delta-comb amplitudes and physical-space residual at eps = 0.6", 6, 10.0)
def _c6(tol):
    p = ModelParams(V1, 0.6)
    rate_err, resid = [], []
    for w in EXTENDED_OMEGAS:
        sol = analytic.extended_state_amplitudes(w, p, 1e-14)
        rate_err.append(abs(sol.decay_rate - sol.predicted_rate))
        wf = analytic.extended_state_wavefunction(sol, p, (-50, 50))
        r = analytic.chain_residual(p, wf.n, wf.psi, sol.energy)
        resid.append(float(np.abs(r).max() / np.abs(wf.psi).max()))
    return [Measurement("max |slope - (2eps - |Im phi|)|", float(max(rate_err)), tol["decay_rate"]),
            Measurement("max relative residual of psi_n", float(max(resid)), tol["wavefunction"])], ""


@check("c07_representations", "real-space vs Fourier-space eigenvalue multisets", 7, 60.0)
def _c7(tol):
    worst, raw_worst = 0.0, 0.0
    rows = []
    for q in (89, 233):
        a = approximant_for_size(q)
        for eps in (0.1, 0.46, 0.6):
            for th in (0.0, 0.3, math.pi / 2):
                p = ModelParams(V1, eps)
                zr = spectral.refined_spectrum(p, a, th, "real")
                zf = spectral.refined_spectrum(p, a, th, "fourier")
                d = spectral.multiset_distance(zr, zf)
                worst = max(worst, d)
                rows.append(f"L={q} eps={eps} theta={th:.3f}: {d:.1e}")
    return [Measurement("max multiset distance", worst, tol["multiset"])], "; ".join(rows)


@check("c08_determinant", "O(L) ring determinant vs dense LU", 8, 5.0)
def _c8(tol):
    import scipy.linalg

    rng = np.random.default_rng(2024)
    worst = 0.0
    for L, approx in ((8, RationalApproximant(3, 8)), (13, approximant_for_size(13)),
                      (21, approximant_for_size(21))):
        for _ in range(50):
            p = ModelParams(rng.uniform(0.2, 3.0), rng.uniform(0.02, 1.5), rng.uniform(0, math.pi))
            th = rng.uniform(0, math.pi)
            E = complex(rng.normal(), rng.normal())
            H = spectral.build_real_space_hamiltonian(p, approx, th).data
            lu, piv = scipy.linalg.lu_factor(H - E * np.eye(L))
            sign = (-1) ** np.count_nonzero(piv != np.arange(L))
            dense = sign * np.prod(np.diag(lu))
            fast = topology.periodic_tridiagonal_determinant(p, approx, th, E)
            worst = max(worst, abs(fast - dense) / abs(dense))
    return [Measurement("max relative deviation", worst, tol["determinant"])], ""


@check("c09_spectral_flow", "flux-threaded eigenvalue flow at eps = 0.2, L = 233", 9, 120.0)
def _c9(tol):
    res = rotation_experiment(ModelParams(V1, 0.2), approximant_for_size(233), 64, 1j * V1)
    cycles = res.flow.cycle_lengths()
    return [Measurement("max distance to loop C", res.loop_distance, tol["flow_loop"]),
            Measurement("number of cycles in end permutation", len(cycles), 1, "=="),
            Measurement("|sum delta phi - 2 pi|", abs(float(res.delta_phi.sum()) - 2 * math.pi),
                        tol["flow_sum"])], f"cycle lengths {cycles[:5]}"


@check("c10_large_circle", "eps = 0.01 loop vs circle of radius V/(2 eps)", 10, 1.0)
def _c10(tol):
    eps = 0.01
    omega = np.linspace(0.0, math.pi, 4096, endpoint=False)
    E = analytic.spectral_curve(omega, eps, V1)
    R = V1 / (2 * eps)
    dev = np.abs(np.abs(E - 1j * R) / R - 1.0)
    return [Measurement("max relative deviation from circle", float(dev.max()), tol["circle"])], ""


# --------------------------------------------------------------------------
# module invariants

@check("inv_potential_imag", "Im V_n >= 0 over a full period for several approximants")
def _inv_pot(tol):
    worst = 0.0
    for a in fibonacci_approximants(12)[3:]:
        for eps in (0.01, 0.1, 1.0):
            vals = potential_value(ModelParams(1.0, eps, 0.37), a.value, np.arange(a.q))
            worst = min(worst, float(vals.imag.min()))
    return [Measurement("min Im V_n", worst, 0.0, ">=")], ""


@check("inv_potential_periodic", "period q in n and pi in theta")
def _inv_per(tol):
    a = approximant_for_size(89)
    n = np.arange(-50, 50)
    p = ModelParams(1.3, 0.2, 0.4)
    v = potential_value(p, a.value, n)
    d1 = np.abs(potential_value(p, a.value, n + a.q) - v) / np.abs(v)
    d2 = np.abs(potential_value(ModelParams(1.3, 0.2, 0.4 + math.pi), a.value, n) - v) / np.abs(v)
    return [Measurement("period q", float(d1.max()), 1e-12), Measurement("period pi", float(d2.max()), 1e-12)], ""


@check("inv_fibonacci_bound", "|p/q - alpha| < 1/q^2")
def _inv_fib(tol):
    worst = max(abs(a.value - GOLDEN_ALPHA) * a.q ** 2 for a in fibonacci_approximants(25))
    return [Measurement("max q^2 |p/q - alpha|", worst, 1.0)], ""


@check("inv_curve_identity", "sampled curve satisfies the pre-root relation")
def _inv_curve(tol):
    worst = max(float(analytic.sample_curve(e, V1, 2048).self_test.max()) for e in (0.1, 0.3, 0.46, 0.6))
    return [Measurement("max identity residual", worst, 1e-10)], ""


@check("inv_loop_symmetry", "E(pi - omega) = -conj E(omega) at eps = 0.1")
def _inv_sym(tol):
    omega = np.linspace(0.01, math.pi - 0.01, 999)
    E1 = analytic.spectral_curve(omega, 0.1, V1)
    E2 = analytic.spectral_curve(math.pi - omega, 0.1, V1)
    return [Measurement("max asymmetry", float(np.abs(E2 + E1.conj()).max()), 1e-10)], ""


@check("inv_subloops_enclose", "each mobility-edge arc encloses exactly one of +-2 + iV")
def _inv_enclose(tol):
    counts = []
    for eps in (0.45, 0.46, 0.5, 0.52):
        loops = analytic.point_spectrum_loops(eps, V1)
        for poly in loops.polygons():
            counts.append(sum(analytic.point_in_polygon(E, poly) for E in (2 + 1j, -2 + 1j)))
    return [Measurement("arcs not enclosing exactly one point", sum(c != 1 for c in counts), 0, "==")], ""


@check("inv_solvability_branch", "quadrature residual equals Im(phi_- - phi_+) - 2 eps")
def _inv_solv(tol):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(30):
        E = complex(rng.uniform(-3, 3), rng.uniform(-2, 4))
        eps = rng.uniform(0.05, 0.7)
        if segment_distance(E, V1)[()] < 0.05:
            continue
        angles, _ = analytic.branch_condition(E, eps, V1, on_curve=False)
        q = analytic.solvability_residual(E, eps, V1, 2048)
        worst = max(worst, abs(q - (angles.gap - 2 * eps)))
    return [Measurement("max deviation", worst, 1e-8)], ""


@check("inv_extended_fit", "log|U_l| is linear in l with R^2 > 0.999")
def _inv_fit(tol):
    p = ModelParams(V1, 0.6)
    r2 = min(analytic.extended_state_amplitudes(w, p).fit_r2 for w in EXTENDED_OMEGAS)
    return [Measurement("min R^2", r2, 0.999, ">")], ""


@check("inv_delocalized_window", "extended window is the whole segment for eps > eps2")
def _inv_window(tol):
    b = [analytic.extended_cos_bound(e, V1) for e in (0.6, 0.9)]
    return [Measurement("min cos bound", min(b), 1.0, "==")], ""


@check("inv_lyapunov_finite_eps", "transfer matrices vs max(|Im phi_-|, |Im phi_+| - 2 eps)")
def _inv_lyap(tol):
    table = lyapunov_table(V1, ACCEPTANCE_ENERGIES, [0.1, 0.3, 0.6], 100_000, 8, workers=2)
    errs = [abs(tm - dep) for _, _, _, dep, tm in table]
    return [Measurement("max deviation", float(max(errs)), tol["lyapunov"])], ""


@check("inv_ipr_scaling", "extended-state IPR scales as 1/L (377 vs 610, eps = 0.6)")
def _inv_ipr(tol):
    med = {}
    for q in (377, 610):
        d = spectral.eigendecompose(spectral.build_real_space_hamiltonian(ModelParams(V1, 0.6),
                                                                          approximant_for_size(q)))
        med[q] = float(np.median(d.diagnostics().ipr))
    ratio = med[377] / med[610] / (610 / 377)
    return [Measurement("|ratio / (610/377) - 1|", abs(ratio - 1), 0.25)], ""


@check("inv_theta_independence", "Hausdorff distance of spectra at theta = 0 and 0.7, L = 610")
def _inv_theta(tol):
    from scipy.spatial import cKDTree

    a = approximant_for_size(610)
    worst, notes = 0.0, []
    for eps in (0.1, 0.46, 0.6):
        w0, w1 = (spectral.eigendecompose(spectral.build_real_space_hamiltonian(ModelParams(V1, eps, th), a, th),
                                          vectors=False).eigenvalues for th in (0.0, 0.7))
        h = spectral.hausdorff_distance(w0, w1)
        d = cKDTree(np.column_stack([w1.real, w1.imag])).query(np.column_stack([w0.real, w0.imag]))[0]
        i = int(np.argmax(d))
        spacing = float(np.sort(np.abs(w0 - w0[i]))[1])
        notes.append(f"eps={eps}: {h:.3g} at E={w0[i]:.3f} (level spacing there {spacing:.3g})")
        worst = max(worst, h)
    return [Measurement("max Hausdorff distance", worst, 1e-2)], "; ".join(notes)


@check("inv_eigen_contracts", "residuals < 1e-8 and Im E >= -1e-8 at L = 233")
def _inv_eig(tol):
    res, im = 0.0, 0.0
    for eps in (0.1, 0.46, 0.6):
        d = spectral.eigendecompose(spectral.build_real_space_hamiltonian(ModelParams(V1, eps),
                                                                          approximant_for_size(233)))
        res = max(res, float(d.residuals.max()))
        im = min(im, float(d.eigenvalues.imag.min()))
    return [Measurement("max residual", res, 1e-8), Measurement("min Im E", im, -1e-8, ">=")], ""


@check("inv_unilateral", "unilateral Fourier eigenstate at eps = 0.6, L = 233")
def _inv_uni(tol):
    s = spectral.unilateral_fourier_state(116, ModelParams(V1, 0.6), approximant_for_size(233))
    return [Measurement("residual", s.residual, 1e-6)], ""


@check("inv_localized_profile", "Fourier profile u(x) at eps = 0.2, omega = pi/2")
def _inv_prof(tol):
    prof = analytic.localized_fourier_profile(math.pi / 2, ModelParams(V1, 0.2), 128)
    return [Measurement("|Im Omega_0|", abs(prof.Omega0.imag), 1e-10),
            Measurement("functional residual", prof.functional_residual, 1e-6)], ""


@check("inv_flow_static", "delocalized flow is flux independent (eps = 0.6, L = 233)")
def _inv_static(tol):
    flow = topology.spectral_flow_trace(ModelParams(V1, 0.6), approximant_for_size(233), 32)
    drift = max(spectral.multiset_distance(row, flow.eigenvalues[0]) for row in flow.eigenvalues)
    return [Measurement("max eigenvalue drift", drift, 1e-6)], ""


@check("inv_winding_methods", "determinant and spectral-flow windings agree (L = 89)")
def _inv_methods(tol):
    a = approximant_for_size(89)
    mismatches = 0
    for eps, E in ((0.1, 1j), (0.3, 0.5 + 1.5j), (0.46, 1j), (0.46, 2.0002 + 1j), (0.6, 1j), (0.3, 100)):
        p = ModelParams(V1, eps)
        w_det = topology.winding_number(E, p, a, 64).winding
        w_flow = topology.winding_number(E, p, a, 64, topology.Method.SPECTRAL_FLOW).winding
        mismatches += w_det != w_flow
    return [Measurement("mismatches", mismatches, 0, "==")], ""


@check("inv_winding_refinement", "doubling theta_steps leaves the winding unchanged")
def _inv_refine(tol):
    a = approximant_for_size(233)
    changes = 0
    for eps, E in ((0.1, 1j), (0.46, 2.0002 + 1j), (0.46, 1j), (0.6, 1j)):
        p = ModelParams(V1, eps)
        changes += (topology.winding_number(E, p, a, 64).winding
                    != topology.winding_number(E, p, a, 128).winding)
    return [Measurement("changes", changes, 0, "==")], ""


@check("inv_winding_enclosure", "winding equals analytic loop enclosure at 20 bases per phase")
def _inv_encl(tol):
    a = approximant_for_size(233)
    rng = np.random.default_rng(5)
    mismatches = 0
    for eps in (0.1, 0.46, 0.6):
        p = ModelParams(V1, eps)
        loops = analytic.point_spectrum_loops(eps, V1, 4096)
        done = 0
        while done < 20:
            E = complex(rng.uniform(-3, 3), rng.uniform(0, 3.5))
            if loops.loop_count and analytic.loop_distance(E, loops)[0] < 0.05:
                continue
            if segment_distance(E, V1)[()] < 0.05:
                continue
            expected = analytic.enclosure_count(E, loops)
            mismatches += topology.winding_number(E, p, a, 64).winding != expected
            done += 1
    return [Measurement("mismatches", mismatches, 0, "==")], ""


def select(names: list[str] | None = None) -> list[Check]:
    if not names:
        return list(REGISTRY.values())
    chosen = [c for c in REGISTRY.values() if any(n in c.name for n in names)]
    return chosen


def acceptance_checks() -> list[Check]:
    return [c for c in REGISTRY.values() if c.criterion is not None]
