"""Memoized model runs and independent oracles shared by the test modules."""
from __future__ import annotations

import functools
import math

import numpy as np
from scipy.linalg import null_space

from biphoton import FrequencyGrid, run_point
from biphoton.atomic import BASIS
from biphoton.params import PhysicalParams, params_from_dict
from biphoton.presets import preset

DEFAULT_GRID = FrequencyGrid()
# same span, 8x coarser: still resolves the 2 us delay window
COARSE_GRID = FrequencyGrid(48.0, 4096)
PI = math.pi


def preset_params(name: str, **changes) -> PhysicalParams:
    p = params_from_dict(preset(name))[0]
    return p.with_(**changes) if changes else p


@functools.lru_cache(maxsize=None)
def _point(name: str, grid: FrequencyGrid, changes: tuple):
    return run_point(preset_params(name, **dict(changes)), grid)


def point(name: str, grid: FrequencyGrid = COARSE_GRID, **changes):
    """(Spectra, Wavepacket) for a preset with optional field overrides, memoized."""
    return _point(name, grid, tuple(sorted((k, float(v)) for k, v in changes.items())))


def wp(name: str, grid: FrequencyGrid = COARSE_GRID, **changes):
    return point(name, grid, **changes)[1]


# --- Schroedinger-picture Lindblad oracle -----------------------------------
# Built from scratch with Kronecker products; shares nothing with the
# package's Heisenberg-picture assembly.  Ground-state dephasing at rate
# gamma21 on sigma_12 plus gamma21/2 on every optical coherence is exactly
# the pair of collapse operators sqrt(gamma21)|1><1| and sqrt(gamma21)|2><2|.

def ket_bra(j: int, k: int) -> np.ndarray:
    m = np.zeros((3, 3), dtype=complex)
    m[j - 1, k - 1] = 1.0
    return m


def lindblad_oracle(p: PhysicalParams):
    """Return (H, collapse operators, Liouvillian acting on column-stacked rho)."""
    h = -p.delta_d * ket_bra(3, 3) - (p.delta_d - p.delta_c) * ket_bra(2, 2)
    h = h - 0.5 * p.omega_d * (ket_bra(3, 1) + ket_bra(1, 3))
    h = h - 0.5 * p.omega_c * (ket_bra(3, 2) + ket_bra(2, 3))
    cs = [math.sqrt(p.branching_to_1) * ket_bra(1, 3),
          math.sqrt(1 - p.branching_to_1) * ket_bra(2, 3)]
    if p.optical_dephasing:
        cs += [math.sqrt(p.gamma21) * ket_bra(1, 1), math.sqrt(p.gamma21) * ket_bra(2, 2)]
    eye = np.eye(3)
    liou = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for c in cs:
        cc = c.conj().T @ c
        liou += np.kron(c.conj(), c) - 0.5 * np.kron(eye, cc) - 0.5 * np.kron(cc.T, eye)
    return h, cs, liou


def oracle_rho(p: PhysicalParams) -> np.ndarray:
    _, _, liou = lindblad_oracle(p)
    ns = null_space(liou)
    assert ns.shape[1] == 1, "oracle: steady state not unique"
    rho = ns[:, 0].reshape(3, 3, order="F")
    return rho / np.trace(rho)


def expectations(rho: np.ndarray) -> np.ndarray:
    """<sigma_jk> = Tr(rho |j><k|) = rho[k, j], in package basis order."""
    return np.array([rho[k - 1, j - 1] for j, k in BASIS])


def oracle_diffusion(p: PhysicalParams) -> np.ndarray:
    """D_mu,nu = sum_c <[c^dagger, s_mu][s_nu, c]>, the Lindblad Einstein relation."""
    _, cs, _ = lindblad_oracle(p)
    rho = oracle_rho(p)
    ops = [ket_bra(j, k) for j, k in BASIS]
    out = np.zeros((9, 9), dtype=complex)
    for c in cs:
        cd = c.conj().T
        left = [cd @ a - a @ cd for a in ops]
        right = [b @ c - c @ b for b in ops]
        for mu in range(9):
            for nu in range(9):
                out[mu, nu] += np.trace(rho @ left[mu] @ right[nu])
    return out
