"""Invariant suite shared by the ``validate`` command and the test-suite.

Each check returns a :class:`Check`; a report passes iff every check passes.
``quick`` uses coarse grids and a few presets, ``full`` sweeps every preset.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import expm

from . import atomic
from .atomic import (CoupledModeCoefficients, assemble_drift, build_model,
                     coupled_mode_matrix, steady_state)
from .params import FrequencyGrid, PhysicalParams, params_from_dict
from .presets import PRESETS, preset
from .propagation import commutator_sum_rule, oracle_integrate, scattering_matrix
from .observables import full_window_area, run_point


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


def _params(name: str) -> PhysicalParams:
    return params_from_dict(preset(name))[0]


def random_stable_m(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random 2x2 coupling matrices of O(1) size, conditioned so |E22| is not tiny."""
    out = []
    while len(out) < n:
        m = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) * 1.5
        if abs(expm(m)[1, 1]) > 1e-3:
            out.append(m)
    return np.array(out)


def check_drift(p: PhysicalParams, label: str) -> list[Check]:
    d = assemble_drift(p)
    trace_row = d.drift[0] + d.drift[1] + d.drift[2]
    eig = d.eigenvalues().real.max()
    ss = steady_state(d)
    tr = abs(ss.populations.sum() - 1)
    dm = build_model(p).diffusion.correlation_matrix()
    psd = np.linalg.eigvalsh(0.5 * (dm + dm.conj().T)).min()
    return [
        Check(f"{label}: trace row of drift is zero", np.abs(trace_row).max() < 1e-12,
              float(np.abs(trace_row).max()), 1e-12),
        Check(f"{label}: drift eigenvalues have Re <= 1e-9", eig <= 1e-9, float(eig), 1e-9),
        Check(f"{label}: steady-state trace is 1", tr < 1e-12, float(tr), 1e-12),
        Check(f"{label}: diffusion matrix is PSD", psd >= -1e-10, float(psd), -1e-10),
    ]


def check_limits() -> list[Check]:
    out = []
    # gamma21 > 0 keeps the (decoupled) ground coherence off its pole at
    # omega = 0; optical dephasing off so the optical linewidth stays Gamma/2
    two = PhysicalParams(od=10, omega_c=0.0, omega_d=0.0, delta_c=0.0, delta_d=10.0, gamma21=1e-3,
                         optical_dephasing=False)
    cm = coupled_mode_matrix(two, np.array([0.0]))
    t = abs(np.exp(cm.m22[0])) ** -2
    err = abs(t / math.exp(-two.od) - 1)
    out.append(Check("two-level transmission e^-OD", err < 1e-6, float(err), 1e-6))
    eit = PhysicalParams(od=10, omega_c=1.0, omega_d=0.0, delta_c=0.0, delta_d=10.0)
    sm = scattering_matrix(coupled_mode_matrix(eit, np.array([0.0])))
    err = abs(abs(sm.d[0]) ** 2 - 1)
    out.append(Check("EIT transmission 1 at two-photon resonance", err < 1e-6, float(err), 1e-6))
    cm = coupled_mode_matrix(eit, np.linspace(-5, 5, 41))
    off = float(np.abs(cm.m12).max() + np.abs(cm.m21).max())
    out.append(Check("no drive => no parametric coupling", off < 1e-14, off, 1e-14))
    return out


def check_oracle(n_random: int, presets: list[str], n_omega: int, seed: int = 7) -> list[Check]:
    rng = np.random.default_rng(seed)
    ms = random_stable_m(rng, n_random)
    a = scattering_matrix_from(ms)
    b = oracle_integrate(ms, steps=10000).as_array()
    err = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300)))
    out = [Check(f"oracle vs expm on {n_random} random matrices", err < 1e-8, err, 1e-8)]
    worst = 0.0
    for name in presets:
        p = _params(name)
        cm = coupled_mode_matrix(p, np.linspace(-5, 5, n_omega))
        a = scattering_matrix(cm).as_array()
        b = oracle_integrate(cm, steps=10000).as_array()
        worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300))))
    out.append(Check(f"oracle vs expm on {len(presets)} presets x {n_omega} omegas", worst < 1e-8,
                     worst, 1e-8))
    return out


def scattering_matrix_from(ms: np.ndarray) -> np.ndarray:
    cm = CoupledModeCoefficients(np.zeros(len(ms)), ms, np.zeros((len(ms), 2, 9), dtype=complex))
    return scattering_matrix(cm).as_array()


def check_commutators(presets: list[str], grid: FrequencyGrid) -> list[Check]:
    worst = 0.0
    where = ""
    for name in presets:
        model = build_model(_params(name))
        cm = coupled_mode_matrix(model, grid.omega_values)
        s, a = commutator_sum_rule(cm, model.diffusion.d_matrix)
        e = float(max(np.abs(s - 1).max(), np.abs(a - 1).max()))
        if e > worst:
            worst, where = e, name
    return [Check(f"commutator sum rule on {len(presets)} presets", worst < 1e-3, worst, 1e-3,
                  f"worst preset {where}")]


def check_observables(grid: FrequencyGrid) -> list[Check]:
    base = _params("fig2a")
    sp, wp = run_point(base, grid)
    two_path = abs(full_window_area(sp) / sp.pairing_ratio - 1)
    g2min = float(wp.g2.min())
    out = [
        Check("two-path pairing ratio", two_path < 1e-6, float(two_path), 1e-6),
        Check("g2 >= 1", g2min >= 1 - 1e-12, g2min, 1.0),
        Check("0 <= r_p <= 1", 0 <= wp.r_p <= 1, wp.r_p, 1.0),
    ]
    # blue detuning shortens the delay when delta_k_L > 0; red does not
    t0 = wp.tau_delay_s
    tb = run_point(base.with_(delta_c=1.0), grid)[1].tau_delay_s
    tr = run_point(base.with_(delta_c=-1.0), grid)[1].tau_delay_s
    ok = tb < t0 and tr >= 0.95 * t0
    out.append(Check("blue/red delay asymmetry direction", ok, tb / t0,
                     1.0, f"tau(+1)={tb:.4g}s tau(0)={t0:.4g}s tau(-1)={tr:.4g}s"))
    # mirror: (+dc, +dkL) <-> (-dc, -dkL)
    tm = run_point(base.with_(delta_c=-1.0, delta_k_L=-base.delta_k_L), grid)[1].tau_delay_s
    rel = abs(tb - tm) / tb
    out.append(Check("phase-mismatch mirror symmetry at |dc| = 1", rel < 0.01, float(rel), 0.01))
    return out


def run_validate(level: str = "quick") -> dict:
    """Run the invariant suite; returns a JSON-ready report."""
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    t0 = time.perf_counter()
    quick = level == "quick"
    names = ["fig2a", "fig4a"] if quick else sorted(PRESETS)
    checks: list[Check] = []
    for name in names:
        checks += check_drift(_params(name), name)
    checks += check_limits()
    checks += check_oracle(10 if quick else 100, names, 5 if quick else 20)
    checks += check_commutators(names, FrequencyGrid(48, 512 if quick else 4096))
    checks += check_observables(FrequencyGrid(48, 4096 if quick else 16384))
    return {
        "level": level,
        "passed": all(c.passed for c in checks),
        "delta_k_sign": atomic.DELTA_K_SIGN,
        "elapsed_s": round(time.perf_counter() - t0, 3),
        "checks": [asdict(c) | {"passed": bool(c.passed)} for c in checks],
    }
