"""Atomic inversion, reduced atomic density matrix and entropy squeezing.

The reduced 2x2 atomic density matrix follows from tracing the joint
state over the field. The off-diagonal element pairs equal total photon
number: rho_eg = sum_n c_{n+k,e} conj(c_{n+k,g}), i.e. the excited
amplitude at Fock level n+k against the ground amplitude whose field
level is also n+k. Pairing c_{n,e} with c_{n+k,g} instead would be
off-diagonal in the field trace and is wrong.

Information entropies of the three Pauli components use the natural
logarithm, so the squeezing factors E_alpha = exp(H_alpha) -
2/sqrt(exp(H_z)) compare against bounds in nats; squeezing in
sigma_alpha means E_alpha < 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    AmplitudeState,
    CoefficientTable,
    ModelParams,
    _sin_over_omega,
)
from .errors import NumericalConsistencyError
from .field_states import PhotonDistribution
from .nonlinearity import Nonlinearity

PROB_SLACK = 1e-9

LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class ReducedAtomDensity:
    rho_ee: float
    rho_gg: float
    rho_eg: complex

    @property
    def rho_ge(self) -> complex:
        return np.conj(self.rho_eg)


@dataclass(frozen=True)
class ObservableRecord:
    time: float
    W: float
    rho: ReducedAtomDensity
    H_x: float
    H_y: float
    H_z: float
    dH_x: float
    dH_y: float
    dH_z: float
    E_x: float
    E_y: float
    norm: float


def atomic_inversion(state: AmplitudeState) -> float:
    """W = sum_n (|c_{n,e}|^2 - |c_{n+k,g}|^2)."""
    return float(
        np.sum(np.abs(state.excited) ** 2) - np.sum(np.abs(state.ground) ** 2)
    )


def atomic_inversion_closed(
    params: ModelParams, f: Nonlinearity, dist: PhotonDistribution, t: float
) -> float:
    """Inversion from the populations directly, bypassing amplitudes.

    W(t) = sum_n rho_nn(0) [cos(2 Omega_n t) + (R_n - mu)^2 sin^2(Omega_n t)
    / (2 Omega_n^2)]; the degenerate Omega_n -> 0 doublet enters through
    the stable sin(Omega t)/Omega limit.
    """
    co = CoefficientTable(params, f, dist.n_cut)
    s = _sin_over_omega(co.Omega, float(t))
    bracket = np.cos(2.0 * co.Omega * t) + 0.5 * (co.Rn - params.mu) ** 2 * s * s
    return float(np.dot(dist.probabilities, bracket))


def _density_arrays(excited: np.ndarray, ground: np.ndarray, k: int):
    """rho_ee, rho_gg, rho_eg for (T, N+1) amplitude arrays."""
    rho_ee = np.sum(np.abs(excited) ** 2, axis=-1)
    rho_gg = np.sum(np.abs(ground) ** 2, axis=-1)
    # excited amplitude at level n+k against ground amplitude at level n+k
    rho_eg = np.sum(excited[..., k:] * np.conj(ground[..., : excited.shape[-1] - k]), axis=-1)
    return rho_ee, rho_gg, rho_eg


def reduced_density(state: AmplitudeState) -> ReducedAtomDensity:
    """Partial trace of the pure joint state over the field."""
    rho_ee, rho_gg, rho_eg = _density_arrays(state.excited, state.ground, state.k)
    return ReducedAtomDensity(float(rho_ee), float(rho_gg), complex(rho_eg))


def _clamped(p, what: str):
    p = np.asarray(p, dtype=float)
    if np.any(p < -PROB_SLACK) or np.any(p > 1.0 + PROB_SLACK):
        bad = p[(p < -PROB_SLACK) | (p > 1.0 + PROB_SLACK)]
        raise NumericalConsistencyError(
            f"{what} outside [0,1] beyond roundoff slack {PROB_SLACK}: {bad[:4]!r}"
        )
    return np.clip(p, 0.0, 1.0)


def _h2(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Two-outcome Shannon entropy with the 0 ln 0 = 0 convention."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log(p), 0.0) + np.where(
            q > 0.0, q * np.log(q), 0.0
        )
    return -terms


def _entropy_arrays(rho_ee, rho_gg, rho_eg):
    re_ge = np.real(np.conj(rho_eg))
    im_ge = np.imag(np.conj(rho_eg))
    px = _clamped(0.5 + re_ge, "P(sigma_x)")
    py = _clamped(0.5 + im_ge, "P(sigma_y)")
    pe = _clamped(rho_ee, "rho_ee")
    pg = _clamped(rho_gg, "rho_gg")
    H_x = _h2(px, 1.0 - px)
    H_y = _h2(py, 1.0 - py)
    H_z = _h2(pe, pg)
    return H_x, H_y, H_z


def pauli_entropies(rho: ReducedAtomDensity):
    """(H_x, H_y, H_z) from the measurement outcome probabilities."""
    H_x, H_y, H_z = _entropy_arrays(rho.rho_ee, rho.rho_gg, rho.rho_eg)
    return float(H_x), float(H_y), float(H_z)


def entropy_squeezing(rho: ReducedAtomDensity):
    """(E_x, E_y); component sigma_alpha is squeezed iff E_alpha < 0."""
    H_x, H_y, H_z = pauli_entropies(rho)
    bound = 2.0 / np.sqrt(np.exp(H_z))
    return float(np.exp(H_x) - bound), float(np.exp(H_y) - bound)


def records_from_series(
    times: np.ndarray,
    excited: np.ndarray,
    ground: np.ndarray,
    k: int,
    coherence_phase: float = 0.0,
) -> list[ObservableRecord]:
    """Full observable records for a block of amplitude series.

    ``coherence_phase`` reattaches the free-evolution phase to rho_eg as
    exp(-i * coherence_phase * t); the default 0 keeps the interaction
    picture in which the closed form is written.
    """
    rho_ee, rho_gg, rho_eg = _density_arrays(excited, ground, k)
    if coherence_phase != 0.0:
        rho_eg = rho_eg * np.exp(-1j * coherence_phase * times)
    H_x, H_y, H_z = _entropy_arrays(rho_ee, rho_gg, rho_eg)
    dH_x, dH_y, dH_z = np.exp(H_x), np.exp(H_y), np.exp(H_z)
    bound = 2.0 / np.sqrt(dH_z)
    E_x = dH_x - bound
    E_y = dH_y - bound
    W = rho_ee - rho_gg
    norms = rho_ee + rho_gg
    records = []
    for i, t in enumerate(times):
        records.append(
            ObservableRecord(
                time=float(t),
                W=float(W[i]),
                rho=ReducedAtomDensity(float(rho_ee[i]), float(rho_gg[i]), complex(rho_eg[i])),
                H_x=float(H_x[i]),
                H_y=float(H_y[i]),
                H_z=float(H_z[i]),
                dH_x=float(dH_x[i]),
                dH_y=float(dH_y[i]),
                dH_z=float(dH_z[i]),
                E_x=float(E_x[i]),
                E_y=float(E_y[i]),
                norm=float(norms[i]),
            )
        )
    return records


def observable_record(state: AmplitudeState, coherence_phase: float = 0.0) -> ObservableRecord:
    """Record for a single state; see :func:`records_from_series`."""
    return records_from_series(
        np.array([state.time]),
        state.excited[None, :],
        state.ground[None, :],
        state.k,
        coherence_phase,
    )[0]
