"""Heisenberg-Langevin response of the effective three-level atom.

Level |1> and |2> are the ground states, |3> the (shared) excited state.  The
driving field couples |1>-|3>, the coupling field |2>-|3>; the Stokes mode
couples |2>-|3> (through sigma_23) and the anti-Stokes mode |1>-|3> (through
sigma_31).

Frame: sigma_31 rotates with the driving field and sigma_32 with the coupling
field, so the classical Hamiltonian is time independent::

    H = -delta_d |3><3| - (delta_d - delta_c) |2><2|
        - omega_d/2 (s31 + s13) - omega_c/2 (s32 + s23)

In this frame the Stokes component a_s(omega) and the conjugate anti-Stokes
component a_as^dagger(-omega) both drive the atomic fluctuations at the frame
frequency ``nu = omega + (delta_d - delta_c)``; omega = 0 is the two-photon
(Raman / EIT) resonance of both modes.

Operators are stacked in the fixed order of :data:`BASIS`; every index map in
the package derives from it.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .params import PhysicalParams

BASIS = ((1, 1), (2, 2), (3, 3), (1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2))
INDEX = {jk: n for n, jk in enumerate(BASIS)}
LABELS = tuple(f"s{j}{k}" for j, k in BASIS)
# index of the adjoint operator: (sigma_jk)^dagger = sigma_kj
ADJOINT = np.array([INDEX[(k, j)] for j, k in BASIS])
# sigma_33 is eliminated through the trace, leaving an 8-dimensional system
REDUCED = np.array([n for n, jk in enumerate(BASIS) if jk != (3, 3)])
I33 = INDEX[(3, 3)]
I23 = INDEX[(2, 3)]
I31 = INDEX[(3, 1)]

PERTURBATIVE_LIMIT = 0.05
# sign of the phase-mismatch term folded into m22 (+i delta_k); the
# validation suite's asymmetry check must fail if this is flipped
DELTA_K_SIGN = 1


class SingularSystemError(ArithmeticError):
    """No unique steady state, or a resolvent pole sampled exactly."""


def _ket_bra(j: int, k: int) -> np.ndarray:
    m = np.zeros((3, 3), dtype=complex)
    m[j - 1, k - 1] = 1.0
    return m


_OPS = [_ket_bra(j, k) for j, k in BASIS]


def _as_vector(op: np.ndarray) -> np.ndarray:
    """Expand a 3x3 operator on the sigma basis (coefficient of |a><b| is op[a,b])."""
    return np.array([op[j - 1, k - 1] for j, k in BASIS])


def _hamiltonian(p: PhysicalParams) -> np.ndarray:
    h = np.zeros((3, 3), dtype=complex)
    h[2, 2] = -p.delta_d
    h[1, 1] = -(p.delta_d - p.delta_c)
    h[2, 0] = h[0, 2] = -p.omega_d / 2
    h[2, 1] = h[1, 2] = -p.omega_c / 2
    return h


def _collapse_ops(p: PhysicalParams) -> list[np.ndarray]:
    b1 = p.branching_to_1
    return [np.sqrt(b1) * _ket_bra(1, 3), np.sqrt(1 - b1) * _ket_bra(2, 3)]


@dataclass(frozen=True)
class DriftSystem:
    """Linear Heisenberg drift d<sigma>/dt = drift @ <sigma> on :data:`BASIS`.

    The field sources depend on the zeroth-order state and live on
    :class:`AtomicModel`.
    """

    params: PhysicalParams
    drift: np.ndarray
    frame_note: str = "sigma_31 ~ driving field, sigma_32 ~ coupling field"

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.drift)

    def reduced(self) -> tuple[np.ndarray, np.ndarray]:
        """Drift and constant term after substituting s33 = 1 - s11 - s22."""
        g = self.drift
        sub = g[np.ix_(REDUCED, REDUCED)].copy()
        i11, i22 = INDEX[(1, 1)], INDEX[(2, 2)]
        r11, r22 = np.searchsorted(REDUCED, [i11, i22])
        sub[:, r11] -= g[REDUCED, I33]
        sub[:, r22] -= g[REDUCED, I33]
        return sub, g[REDUCED, I33].copy()


def assemble_drift(p: PhysicalParams) -> DriftSystem:
    """Build the 9x9 Heisenberg-picture drift for the sigma operators.

    The adjoint Lindblad generator i[H, s] + sum_c (c^+ s c - {c^+ c, s}/2)
    is expanded on the basis column by column.  Ground-state decoherence acts
    only on s12/s21; with ``optical_dephasing`` the optical coherences get an
    extra gamma21/2.
    """
    h = _hamiltonian(p)
    cs = _collapse_ops(p)
    g = np.zeros((9, 9), dtype=complex)
    for n, s in enumerate(_OPS):
        out = 1j * (h @ s - s @ h)
        for c in cs:
            cd = c.conj().T
            out += cd @ s @ c - 0.5 * (cd @ c @ s + s @ cd @ c)
        g[n] = _as_vector(out)
    for jk in ((1, 2), (2, 1)):
        g[INDEX[jk], INDEX[jk]] -= p.gamma21
    if p.optical_dephasing:
        for jk in ((1, 3), (3, 1), (2, 3), (3, 2)):
            g[INDEX[jk], INDEX[jk]] -= p.gamma21 / 2
    return DriftSystem(p, g)


@dataclass(frozen=True)
class SteadyState:
    sigma0: np.ndarray

    def __getitem__(self, jk: tuple[int, int]) -> complex:
        return self.sigma0[INDEX[jk]]

    @property
    def populations(self) -> np.ndarray:
        return self.sigma0[[INDEX[(1, 1)], INDEX[(2, 2)], INDEX[(3, 3)]]].real

    def product(self, mu: int, nu: int) -> complex:
        """<sigma_mu sigma_nu> reduced with s_ab s_cd = delta_bc s_ad."""
        a, b = BASIS[mu]
        c, d = BASIS[nu]
        return self.sigma0[INDEX[(a, d)]] if b == c else 0.0


def _bloch_sigma(d: DriftSystem) -> np.ndarray:
    sub, const = d.reduced()
    try:
        cond = np.linalg.cond(sub)
    except np.linalg.LinAlgError:
        cond = np.inf
    if np.isfinite(cond) and cond < 1e12:
        x = np.linalg.solve(sub, -const)
        sigma = np.zeros(9, dtype=complex)
        sigma[REDUCED] = x
        sigma[I33] = 1.0 - x[np.searchsorted(REDUCED, INDEX[(1, 1)])] \
            - x[np.searchsorted(REDUCED, INDEX[(2, 2)])]
    else:
        # degenerate case (e.g. both fields off): fall back to the prepared
        # state |1> when it is stationary
        sigma = np.zeros(9, dtype=complex)
        sigma[INDEX[(1, 1)]] = 1.0
        if np.abs(d.drift @ sigma).max() > 1e-12:
            raise SingularSystemError("drift has no unique steady state for these parameters")
    return sigma


def steady_state(d: DriftSystem) -> SteadyState:
    """Classical Bloch steady state of the drift with unit trace."""
    sigma = _bloch_sigma(d)
    # populations are real and coherence pairs conjugate
    for n in range(9):
        if ADJOINT[n] == n:
            sigma[n] = sigma[n].real
    sigma /= sigma[[INDEX[(1, 1)], INDEX[(2, 2)], I33]].real.sum()
    ss = SteadyState(sigma)
    if ss.populations[2] > PERTURBATIVE_LIMIT:
        warnings.warn(
            f"excited population {ss.populations[2]:.3g} exceeds {PERTURBATIVE_LIMIT}; "
            "the perturbative pair-generation model is unreliable here",
            RuntimeWarning, stacklevel=2)
    return ss


def field_sources(ss: SteadyState) -> tuple[np.ndarray, np.ndarray]:
    """Fluctuation source vectors per unit (g a_s) and (g a_as^dagger).

    The mode couplings -g a_s s32 and -g a_as^dagger s13 enter d(s_jk)/dt as
    -i g a [s32, s_jk] and -i g a_as^dagger [s13, s_jk]; commutators are
    evaluated in the zeroth-order steady state.
    """
    src_s = np.zeros(9, dtype=complex)
    src_as = np.zeros(9, dtype=complex)
    for n, (j, k) in enumerate(BASIS):
        # [s32, s_jk] = d_2j s_3k - d_k3 s_j2
        v = (ss[(3, k)] if j == 2 else 0.0) - (ss[(j, 2)] if k == 3 else 0.0)
        src_s[n] = -1j * v
        # [s13, s_jk] = d_3j s_1k - d_k1 s_j3
        v = (ss[(1, k)] if j == 3 else 0.0) - (ss[(j, 3)] if k == 1 else 0.0)
        src_as[n] = -1j * v
    return src_s, src_as


@dataclass(frozen=True)
class AtomicModel:
    """Everything the propagation layer needs, built once per parameter set."""

    params: PhysicalParams
    drift: DriftSystem
    steady: SteadyState
    source_s: np.ndarray
    source_as: np.ndarray
    diffusion: "DiffusionMatrix"


def build_model(p: PhysicalParams) -> AtomicModel:
    d = assemble_drift(p)
    ss = steady_state(d)
    src_s, src_as = field_sources(ss)
    return AtomicModel(p, d, ss, src_s, src_as, _diffusion_from(d, ss))


@dataclass(frozen=True)
class CoupledModeCoefficients:
    """Coupled-mode matrix M(omega) and Langevin weights on a set of omegas.

    ``m`` has shape (n, 2, 2) and acts on [a_s(z, w); a_as^dagger(z, -w)]
    with z in units of L, so exp(m) is the full-medium transfer matrix.  The
    phase mismatch +i*delta_k_L sits in m[:, 1, 1].  ``weights`` has shape
    (n, 2, 9): row 0 feeds the Stokes equation, row 1 the anti-Stokes one;
    column order is :data:`BASIS`, with the eliminated s33 force set to zero.
    Weights carry the sqrt(OD/4) factor, so noise integrals need no prefactor.
    """

    omega: np.ndarray
    m: np.ndarray
    weights: np.ndarray

    @property
    def m11(self):
        return self.m[:, 0, 0]

    @property
    def m12(self):
        return self.m[:, 0, 1]

    @property
    def m21(self):
        return self.m[:, 1, 0]

    @property
    def m22(self):
        return self.m[:, 1, 1]

    @property
    def noise_weights_s(self):
        return self.weights[:, 0, :]

    @property
    def noise_weights_as(self):
        return self.weights[:, 1, :]

    def __len__(self):
        return len(self.omega)

    def take(self, sl) -> "CoupledModeCoefficients":
        return CoupledModeCoefficients(self.omega[sl], self.m[sl], self.weights[sl])


def coupled_mode_matrix(model: AtomicModel | PhysicalParams, omega) -> CoupledModeCoefficients:
    """Solve (-i nu - drift) dsigma = sources for every omega.

    Each omega is an independent linear solve; an exact pole raises
    :class:`SingularSystemError` naming the offending omega.
    """
    if isinstance(model, PhysicalParams):
        model = build_model(model)
    p = model.params
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    sub, _ = model.drift.reduced()
    nu = omega + p.raman_offset
    n8 = len(REDUCED)
    lhs = -1j * nu[:, None, None] * np.eye(n8) - sub[None]
    rows = np.searchsorted(REDUCED, [I23, I31])
    try:
        # resolvent rows for s23 and s31 only: solve the transposed system
        sel = np.zeros((n8, 2), dtype=complex)
        sel[rows[0], 0] = 1.0
        sel[rows[1], 1] = 1.0
        lhs_t = np.transpose(lhs, (0, 2, 1))
        res_rows = np.linalg.solve(lhs_t, np.broadcast_to(sel, (len(omega), n8, 2)))
        res_rows = np.transpose(res_rows, (0, 2, 1))  # (n, 2, 8)
    except np.linalg.LinAlgError:
        bad = [w for w, a in zip(omega, lhs) if np.linalg.matrix_rank(a) < n8]
        raise SingularSystemError(f"resolvent singular at omega = {bad[:5]}") from None
    if not np.all(np.isfinite(res_rows)):
        bad = omega[~np.all(np.isfinite(res_rows), axis=(1, 2))]
        raise SingularSystemError(f"resolvent singular at omega = {bad[:5].tolist()}")

    src = np.stack([model.source_s[REDUCED], model.source_as[REDUCED]], axis=1)  # (8, 2)
    scale = p.od / 4
    m = 1j * scale * (res_rows @ src)
    m[:, 1, 1] += 1j * DELTA_K_SIGN * p.delta_k_L
    weights = np.zeros((len(omega), 2, 9), dtype=complex)
    weights[:, :, REDUCED] = 1j * np.sqrt(scale) * res_rows
    return CoupledModeCoefficients(omega, m, weights)


def write_coefficients_csv(cm: CoupledModeCoefficients, path) -> None:
    """Debug dump of M(omega): omega then re/im of m11, m12, m21, m22."""
    cols = [cm.omega]
    names = ["omega"]
    for name in ("m11", "m12", "m21", "m22"):
        v = getattr(cm, name)
        cols += [v.real, v.imag]
        names += [f"re_{name}", f"im_{name}"]
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names),
               comments="", fmt="%.17g")


@dataclass(frozen=True)
class DiffusionMatrix:
    """Langevin force correlations <F_mu(t) F_nu(t')> = d_matrix[mu, nu] delta(t - t')."""

    d_matrix: np.ndarray

    def normal(self) -> np.ndarray:
        """D_{mu^dagger, nu}: the ordering entering the Stokes spectrum."""
        return self.d_matrix[ADJOINT, :]

    def antinormal(self) -> np.ndarray:
        """D_{mu, nu^dagger}: the ordering entering the anti-Stokes spectrum."""
        return self.d_matrix[:, ADJOINT]

    def correlation_matrix(self) -> np.ndarray:
        """Hermitian PSD form <F_mu^dagger F_nu>; must have nonnegative spectrum."""
        return self.normal()


def _diffusion_from(d: DriftSystem, ss: SteadyState) -> DiffusionMatrix:
    g = d.drift
    n = len(BASIS)
    prod = np.array([[ss.product(a, b) for b in range(n)] for a in range(n)])
    dsig = g @ ss.sigma0
    # d<s_mu s_nu>/dt through s_ab s_cd = delta_bc s_ad
    first = np.zeros((n, n), dtype=complex)
    for mu, (a, b) in enumerate(BASIS):
        for nu, (c, e) in enumerate(BASIS):
            if b == c:
                first[mu, nu] = dsig[INDEX[(a, e)]]
    dm = first - g @ prod - prod @ g.T
    return DiffusionMatrix(dm)


def diffusion_matrix(p: PhysicalParams | AtomicModel) -> DiffusionMatrix:
    """Generalized Einstein relation in the zeroth-order steady state.

    D_mu,nu = d<s_mu s_nu>/dt - <A_mu s_nu> - <s_mu A_nu>, with A the drift.
    """
    if isinstance(p, AtomicModel):
        return p.diffusion
    d = assemble_drift(p)
    return _diffusion_from(d, steady_state(d))
