"""Backward-wave boundary-value solution of the coupled-mode equations.

State vector x(z) = [a_s(z, w); a_as^dagger(z, -w)], z in units of L,
dx/dz = M(w) x + noise.  The Stokes field enters at z = 0 and leaves at z = 1;
the anti-Stokes field enters at z = 1 and leaves at z = 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .atomic import CoupledModeCoefficients

THRESHOLD = 1e-14
_CHUNK = 2048


class OscillationThresholdError(ArithmeticError):
    """|E22| vanished: the backward-wave parametric oscillator threshold."""


@dataclass(frozen=True)
class ScatteringMatrix:
    """Input-output coefficients, each of shape (n,).

    a_s(L, w)        = a b_in + b a_as^dagger(L, -w)
    a_as^dagger(0,-w) = c b_in + d a_as^dagger(L, -w)
    """

    omega: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack([self.a, self.b, self.c, self.d], axis=-1)


def _check_threshold(e22, omega):
    bad = np.abs(e22) < THRESHOLD
    if np.any(bad):
        raise OscillationThresholdError(
            f"|E22| < {THRESHOLD:g} at omega = {np.asarray(omega)[bad][:5].tolist()}")


def _rearrange(e: np.ndarray, omega) -> ScatteringMatrix:
    e11, e12, e21, e22 = e[..., 0, 0], e[..., 0, 1], e[..., 1, 0], e[..., 1, 1]
    _check_threshold(e22, omega)
    return ScatteringMatrix(
        np.asarray(omega), e11 - e12 * e21 / e22, e12 / e22, -e21 / e22, 1.0 / e22)


def transfer_matrix(m: np.ndarray) -> np.ndarray:
    """exp(M) for a stack of 2x2 matrices (Pade scaling and squaring)."""
    return scipy.linalg.expm(m)


def scattering_matrix(cm: CoupledModeCoefficients) -> ScatteringMatrix:
    return _rearrange(transfer_matrix(cm.m), cm.omega)


def expm_2x2(m: np.ndarray, t: np.ndarray) -> np.ndarray:
    """exp(M t) by Cayley-Hamilton, broadcasting M (..., 2, 2) against t (k,).

    Returns shape (..., k, 2, 2).  With a = tr(M)/2 and s^2 = det(a - M),
    exp(M t) = e^{a t} [cosh(s t) + t sinh(s t)/(s t) (M - a)]; both factors
    are even in s so the square-root branch is irrelevant.
    """
    a = 0.5 * (m[..., 0, 0] + m[..., 1, 1])
    s = np.sqrt(0.25 * (m[..., 0, 0] - m[..., 1, 1]) ** 2 + m[..., 0, 1] * m[..., 1, 0])
    st = s[..., None] * t
    ch = np.cosh(st)
    small = np.abs(st) < 1e-4
    with np.errstate(invalid="ignore", divide="ignore"):
        shc = np.where(small, 1 + st**2 / 6 + st**4 / 120, np.sinh(st) / np.where(small, 1, st))
    pref = np.exp(a[..., None] * t)
    shifted = m - a[..., None, None] * np.eye(2)
    out = ch[..., None, None] * np.eye(2) + (t * shc)[..., None, None] * shifted[..., None, :, :]
    return pref[..., None, None] * out


def gauss_legendre(n: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


@dataclass(frozen=True)
class GreensKernels:
    """P and Q kernels, shape (n_omega, n_nodes, 9), plus quadrature weights.

    A unit force F_mu injected at z' contributes p[:, k, mu] to a_s(L, w) and
    q[:, k, mu] to a_as^dagger(0, -w).  The sqrt(OD/4) coupling prefactor is
    already included (through the noise weights).
    """

    omega: np.ndarray
    nodes: np.ndarray
    node_weights: np.ndarray
    p: np.ndarray
    q: np.ndarray


def greens_kernels(cm: CoupledModeCoefficients, nodes=64, sm: ScatteringMatrix | None = None) -> GreensKernels:
    """Propagate unit Langevin impulses from each node to both output ports.

    For an impulse f at z', x(1) = E x(0) + exp(M (1 - z')) f.  Imposing
    a_s(0) = 0 and a_as^dagger(1) = 0 gives the anti-Stokes output
    q = -g2/E22 and the Stokes output g1 + E12 q with g = exp(M(1-z')) f.
    """
    if np.isscalar(nodes):
        z, wz = gauss_legendre(int(nodes))
    else:
        z, wz = nodes
    if sm is None:
        e = transfer_matrix(cm.m)
        _check_threshold(e[:, 1, 1], cm.omega)
        e12 = e[:, 0, 1]
        inv_e22 = 1.0 / e[:, 1, 1]
    else:
        e12 = sm.b / sm.d
        inv_e22 = sm.d
    prop = expm_2x2(cm.m, 1.0 - z)  # (n, k, 2, 2)
    g = prop @ cm.weights[:, None, :, :]  # (n, k, 2, 9)
    q = -g[:, :, 1, :] * inv_e22[:, None, None]
    p = g[:, :, 0, :] + e12[:, None, None] * q
    return GreensKernels(cm.omega, z, wz, p, q)


def oracle_integrate(m, omega=None, steps: int = 10000) -> ScatteringMatrix:
    """Independent shooting solution with fixed-step classical RK4.

    Integrates the two fundamental solutions of dx/dz = M x over [0, 1] to
    build E, then applies the same port rearrangement.  ``m`` is one 2x2
    matrix, a stack of them, or :class:`CoupledModeCoefficients`.
    """
    if isinstance(m, CoupledModeCoefficients):
        omega = m.omega if omega is None else omega
        m = m.m
    m = np.asarray(m, dtype=complex)
    if m.ndim == 2:
        m = m[None]
    if omega is None:
        omega = np.full(m.shape[0], np.nan)
    h = 1.0 / steps
    x = np.broadcast_to(np.eye(2, dtype=complex), m.shape).copy()
    for _ in range(steps):
        k1 = m @ x
        k2 = m @ (x + 0.5 * h * k1)
        k3 = m @ (x + 0.5 * h * k2)
        k4 = m @ (x + h * k3)
        x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return _rearrange(x, np.atleast_1d(omega))


def write_scattering_csv(sm: ScatteringMatrix, path) -> None:
    """Debug dump: omega, |A|^2, |B|^2, |C|^2, |D|^2 and the phase of each."""
    cols = [sm.omega] + [np.abs(v) ** 2 for v in (sm.a, sm.b, sm.c, sm.d)] \
        + [np.angle(v) for v in (sm.a, sm.b, sm.c, sm.d)]
    header = "omega,abs2_A,abs2_B,abs2_C,abs2_D,arg_A,arg_B,arg_C,arg_D"
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=header, comments="", fmt="%.17g")


def commutator_sum_rule(cm: CoupledModeCoefficients, d_matrix: np.ndarray, nodes=64,
                        sm: ScatteringMatrix | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Output commutators [a, a^dagger] per omega for both ports; each should be 1.

    Stokes: |A|^2 - |B|^2 + int p <[F, F^dagger]> p^*.
    Anti-Stokes (a conjugate field): |D|^2 - |C|^2 - int q <[F, F^dagger]> q^*.
    ``d_matrix[mu, nu]`` is the Einstein diffusion <F_mu F_nu>.
    """
    from .atomic import ADJOINT

    if sm is None:
        sm = scattering_matrix(cm)
    comm = d_matrix[:, ADJOINT] - d_matrix[ADJOINT, :].T
    ns = np.empty(len(cm), dtype=float)
    nas = np.empty(len(cm), dtype=float)
    # chunked so the (n, nodes, 9) kernels stay small on long grids
    for s in range(0, len(cm), _CHUNK):
        sl = slice(s, s + _CHUNK)
        part = ScatteringMatrix(sm.omega[sl], sm.a[sl], sm.b[sl], sm.c[sl], sm.d[sl])
        gk = greens_kernels(cm.take(sl), nodes, part)
        wz = gk.node_weights
        ns[sl] = np.einsum("k,nkm,mv,nkv->n", wz, gk.p, comm, gk.p.conj(), optimize=True).real
        nas[sl] = np.einsum("k,nkm,mv,nkv->n", wz, gk.q, comm, gk.q.conj(), optimize=True).real
    stokes = np.abs(sm.a) ** 2 - np.abs(sm.b) ** 2 + ns
    anti = np.abs(sm.d) ** 2 - np.abs(sm.c) ** 2 - nas
    return stokes, anti
