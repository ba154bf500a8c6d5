"""Spectra, rates, cross-correlation and wavepacket figures of merit.

Conventions: omega and rates in Gamma-units on input, SI (seconds, counts/s)
on every field whose name ends in ``_s`` or ``_per_s``.  The coincidence rate
uses the collection window DeltaT = 1/R_s, so its background equals R_as and
its excess area equals the pairing ratio r_p.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .atomic import ADJOINT, AtomicModel, build_model, coupled_mode_matrix
from .params import FrequencyGrid, PhysicalParams, UnitSystem
from .propagation import ScatteringMatrix, greens_kernels, scattering_matrix

EDGE_TOLERANCE = 1e-6
DEFAULT_TAU_MAX_S = 2e-6
DEFAULT_TAU_STEP_S = 1e-9
CHUNK = 2048


class GridError(ValueError):
    """The frequency grid cannot support the requested computation."""


@dataclass(frozen=True)
class Spectra:
    """Per-omega spectral densities (photons per unit bandwidth) and rates.

    ``kernel`` is the biphoton amplitude B*D + sum P* D Q whose Fourier
    transform gives the correlated part of g2.
    """

    omega: np.ndarray
    r_tilde_s: np.ndarray
    r_tilde_as: np.ndarray
    fwm_s: np.ndarray
    fwm_as: np.ndarray
    noise_s: np.ndarray
    noise_as: np.ndarray
    kernel: np.ndarray
    r_s: float
    r_as: float
    units: UnitSystem = field(default_factory=UnitSystem)
    edge_ratio: float = 0.0

    @property
    def r_s_per_s(self) -> float:
        return self.units.rate_to_per_s(self.r_s)

    @property
    def r_as_per_s(self) -> float:
        return self.units.rate_to_per_s(self.r_as)

    @property
    def fwm_part(self) -> tuple[np.ndarray, np.ndarray]:
        return self.fwm_s, self.fwm_as

    @property
    def noise_part(self) -> tuple[np.ndarray, np.ndarray]:
        return self.noise_s, self.noise_as

    @property
    def pairing_ratio(self) -> float:
        """Frequency-domain r_p: int |kernel|^2 dw/2pi over R_s (Parseval path)."""
        return integrate_omega(self.omega, np.abs(self.kernel) ** 2) / self.r_s if self.r_s > 0 else 0.0


def integrate_omega(omega: np.ndarray, values: np.ndarray) -> float:
    """Trapezoidal int dw/2pi on a uniform grid."""
    return float(np.trapezoid(values, omega).real / (2 * math.pi))


def _normalize_model(p):
    return p if isinstance(p, AtomicModel) else build_model(p)


def spectral_kernels(model: AtomicModel, omega: np.ndarray, nodes: int = 64):
    """Return (ScatteringMatrix, noise_s, noise_as, kernel) on omega.

    Evaluated in chunks so the (n_omega, n_nodes, 9) kernel arrays stay small.
    """
    d = model.diffusion.d_matrix
    d_norm = d[ADJOINT, :]   # <F_mu^dagger F_nu>
    d_anti = d[:, ADJOINT]   # <F_mu F_nu^dagger>
    parts = []
    for start in range(0, len(omega), CHUNK):
        w = omega[start:start + CHUNK]
        cm = coupled_mode_matrix(model, w)
        sm = scattering_matrix(cm)
        gk = greens_kernels(cm, nodes, sm)
        wz = gk.node_weights
        pc = gk.p.conj()
        noise_s = np.einsum("k,nkm,mv,nkv->n", wz, pc, d_norm, gk.p, optimize=True).real
        noise_as = np.einsum("k,nkm,mv,nkv->n", wz, gk.q, d_anti, gk.q.conj(), optimize=True).real
        cross = np.einsum("k,nkm,mv,nkv->n", wz, pc, d_norm, gk.q, optimize=True)
        parts.append((sm.as_array(), noise_s, noise_as, cross))
    abcd = np.concatenate([x[0] for x in parts])
    sm = ScatteringMatrix(omega, *abcd.T)
    noise_s = np.concatenate([x[1] for x in parts])
    noise_as = np.concatenate([x[2] for x in parts])
    cross = np.concatenate([x[3] for x in parts])
    kernel = np.conj(sm.b) * sm.d + cross
    return sm, noise_s, noise_as, kernel


def spectra(p: PhysicalParams | AtomicModel, grid: FrequencyGrid = FrequencyGrid(),
            units: UnitSystem = UnitSystem(), nodes: int = 64, check_edges: bool = True) -> Spectra:
    """Stokes and anti-Stokes spectra split into stimulated-FWM and noise parts.

    Raises :class:`GridError` when the spectra have not decayed to
    ``EDGE_TOLERANCE`` of their peak at the grid edges (pass
    ``check_edges=False`` to only record the ratio).
    """
    model = _normalize_model(p)
    omega = grid.omega_values
    sm, noise_s, noise_as, kernel = spectral_kernels(model, omega, nodes)
    fwm_s = np.abs(sm.b) ** 2
    fwm_as = np.abs(sm.c) ** 2
    tot_s = fwm_s + noise_s
    tot_as = fwm_as + noise_as
    peak = max(tot_s.max(), tot_as.max(), 0.0)
    edge = max(tot_s[0], tot_s[-1], tot_as[0], tot_as[-1])
    edge_ratio = edge / peak if peak > 0 else 0.0
    if check_edges and edge_ratio > EDGE_TOLERANCE:
        raise GridError(
            f"spectrum at the grid edge is {edge_ratio:.2e} of its peak "
            f"(> {EDGE_TOLERANCE:g}); widen half_width beyond {grid.half_width:g}")
    return Spectra(omega, tot_s, tot_as, fwm_s, fwm_as, noise_s, noise_as, kernel,
                   integrate_omega(omega, tot_s), integrate_omega(omega, tot_as), units, edge_ratio)


def default_tau_grid(units: UnitSystem = UnitSystem(), tau_max_s: float = DEFAULT_TAU_MAX_S,
                     step_s: float = DEFAULT_TAU_STEP_S) -> np.ndarray:
    """Delay grid in seconds, 0 .. tau_max inclusive."""
    n = int(round(tau_max_s / step_s))
    return np.arange(n + 1) * step_s


def biphoton_amplitude(sp: Spectra, tau: np.ndarray) -> np.ndarray:
    """psi(tau) = int dw/2pi e^{-i w tau} kernel(w), tau in 1/Gamma units."""
    w = sp.omega
    dw = w[1] - w[0]
    trap = np.full(len(w), dw)
    trap[0] = trap[-1] = dw / 2
    weighted = sp.kernel * trap / (2 * math.pi)
    out = np.empty(len(tau), dtype=complex)
    step = max(1, 4_000_000 // len(w))
    for s in range(0, len(tau), step):
        out[s:s + step] = np.exp(-1j * np.outer(tau[s:s + step], w)) @ weighted
    return out


def cross_correlation(sp: Spectra, tau_s: np.ndarray) -> np.ndarray:
    """Normalized g2_{s-as}(tau) on a delay grid given in seconds."""
    tau = sp.units.from_seconds(np.asarray(tau_s, dtype=float))
    dw = sp.omega[1] - sp.omega[0]
    alias = 2 * math.pi / dw
    if tau.size and np.max(np.abs(tau)) > 0.5 * alias:
        need = int(math.ceil(2 * np.max(np.abs(tau)) * 2 * (sp.omega[-1] + dw / 2) / (2 * math.pi)))
        need += need % 2
        raise GridError(
            f"frequency spacing {dw:.3g} Gamma aliases beyond tau = {0.5 * alias:.3g}/Gamma; "
            f"need count >= {need} for the same half_width")
    if sp.r_s <= 0 or sp.r_as <= 0:
        return np.ones_like(tau)
    psi = biphoton_amplitude(sp, tau)
    return 1.0 + np.abs(psi) ** 2 / (sp.r_s * sp.r_as)


def coincidence_rate(g2: np.ndarray, sp: Spectra) -> np.ndarray:
    """R_C(tau) = R_s R_as g2 DeltaT with DeltaT = 1/R_s, in counts/s."""
    return sp.r_as_per_s * np.asarray(g2)


def correlated_area(tau_s: np.ndarray, r_c: np.ndarray, background: float) -> float:
    return float(np.trapezoid(np.asarray(r_c) - background, tau_s))


def delay_time(tau_s: np.ndarray, r_c: np.ndarray, r_p: float | None = None,
               background: float | None = None) -> float:
    """Smallest tau with r_p^{-1} int_0^tau [R_C - R_C(inf)] = 1 - 1/e.

    ``background`` defaults to the last sample; ``r_p`` to the total excess
    area on the grid.  Returns NaN when the area is not positive.
    """
    tau_s = np.asarray(tau_s, dtype=float)
    r_c = np.asarray(r_c, dtype=float)
    bg = r_c[-1] if background is None else background
    excess = r_c - bg
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (excess[1:] + excess[:-1]) * np.diff(tau_s))])
    area = cum[-1] if r_p is None else r_p
    if not area > 0:
        return float("nan")
    target = (1 - math.exp(-1)) * area
    idx = np.nonzero(cum >= target)[0]
    if idx.size == 0:
        return float("nan")
    i = idx[0]
    if i == 0:
        return float(tau_s[0])
    frac = (target - cum[i - 1]) / (cum[i] - cum[i - 1])
    return float(tau_s[i - 1] + frac * (tau_s[i] - tau_s[i - 1]))


def bin_average(tau_s: np.ndarray, values: np.ndarray, bin_s: float) -> tuple[np.ndarray, np.ndarray]:
    """Average a sampled curve over consecutive bins [k*bin, (k+1)*bin).

    Uses the cumulative trapezoid integral, so bins need not align with
    samples.  Returns (bin_starts, averages); a trailing partial bin is
    dropped.
    """
    tau_s = np.asarray(tau_s, dtype=float)
    values = np.asarray(values, dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(tau_s))])
    n = int(math.floor((tau_s[-1] - tau_s[0]) / bin_s + 1e-9))
    edges = tau_s[0] + np.arange(n + 1) * bin_s
    c = np.interp(edges, tau_s, cum)
    return edges[:-1], np.diff(c) / bin_s


def signal_to_background(tau_s: np.ndarray, r_c: np.ndarray, bin_s: float,
                         background: float | None = None) -> float:
    """Peak of the binned excess coincidence rate over the background."""
    r_c = np.asarray(r_c, dtype=float)
    bg = r_c[-1] if background is None else background
    if not bg > 0:
        raise ValueError("background must be > 0")
    # bin the excess, not R_C, so a flat curve gives exactly zero
    _, avg = bin_average(tau_s, r_c - bg, bin_s)
    return float(max(avg.max(), 0.0) / bg)


def oscillation_period(tau_s: np.ndarray, r_c: np.ndarray, background: float,
                       prominence: float = 1e-3) -> float:
    """Spacing of the first two maxima of the excess coincidence rate.

    Maxima count only when their prominence exceeds ``prominence`` times the
    highest excess, which ignores sub-percent ripple.  NaN if fewer than two.
    """
    excess = np.asarray(r_c, dtype=float) - background
    peak = excess.max()
    if not peak > 0:
        return float("nan")
    idx, _ = find_peaks(excess, prominence=prominence * peak)
    if idx.size < 2:
        return float("nan")
    return float(tau_s[idx[1]] - tau_s[idx[0]])


def full_window_area(sp: Spectra) -> float:
    """Correlated area over the whole periodic delay window, via FFT.

    Samples psi at tau_k = 2 pi k / (n dw) with a plain Riemann sum in
    omega, so discrete Parseval makes it equal to :attr:`Spectra.pairing_ratio`
    up to the trapezoid end corrections; an independent check of that path.
    """
    if sp.r_s <= 0:
        return 0.0
    n = len(sp.omega)
    dw = sp.omega[1] - sp.omega[0]
    # psi(tau_k) = dw/2pi sum_j K_j e^{-i w_j tau_k}; the common phase from
    # the grid offset drops out of |psi|^2
    psi = np.fft.fft(sp.kernel) * dw / (2 * math.pi)
    dtau = 2 * math.pi / (n * dw)
    return float(np.sum(np.abs(psi) ** 2) * dtau / sp.r_s)


@dataclass(frozen=True)
class Wavepacket:
    tau_s: np.ndarray
    g2: np.ndarray
    r_c: np.ndarray
    background: float
    r_p: float
    r_p_frequency: float
    tau_delay_s: float
    r_b: float
    sbr: float
    r_s: float
    r_as: float

    def summary(self) -> dict:
        return {
            "r_s": self.r_s,
            "r_as": self.r_as,
            "r_b": self.r_b,
            "r_p": self.r_p,
            "tau_delay_s": self.tau_delay_s,
            "sbr": self.sbr,
        }


def wavepacket(sp: Spectra, tau_s: np.ndarray | None = None, bin_s: float = 6.4e-9) -> Wavepacket:
    """Assemble g2, R_C and the summary figures of merit for one spectrum.

    R_B is identified with R_as.
    """
    if tau_s is None:
        tau_s = default_tau_grid(sp.units)
    g2 = cross_correlation(sp, tau_s)
    r_c = coincidence_rate(g2, sp)
    bg = sp.r_as_per_s
    r_p = correlated_area(tau_s, r_c, bg) if bg > 0 else 0.0
    tau_delay = delay_time(tau_s, r_c, r_p, bg) if r_p > 0 else float("nan")
    sbr = signal_to_background(tau_s, r_c, bin_s, bg) if bg > 0 else 0.0
    return Wavepacket(np.asarray(tau_s), g2, r_c, bg, r_p, sp.pairing_ratio, tau_delay,
                      bg, sbr, sp.r_s_per_s, sp.r_as_per_s)


def run_point(p: PhysicalParams, grid: FrequencyGrid = FrequencyGrid(), units: UnitSystem = UnitSystem(),
              tau_s: np.ndarray | None = None, bin_s: float = 6.4e-9,
              check_edges: bool = True) -> tuple[Spectra, Wavepacket]:
    """Spectra and wavepacket for one parameter set."""
    sp = spectra(p, grid, units, check_edges=check_edges)
    return sp, wavepacket(sp, tau_s, bin_s)
