"""Initial photon-number distributions on a truncated Fock basis.

Coherent, squeezed-vacuum and thermal fields are all parameterized by the
mean photon number nbar (|alpha|^2 = nbar, sinh^2 r = nbar, and the
Bose-Einstein occupation respectively); only the diagonal populations
rho_nn(0) enter the dynamics because the atom starts excited. Weights are
evaluated in log space: (2n)!/(2^n n!)^2 at n ~ 50 and Poisson terms at
n ~ 100 overflow naive evaluation long before the truncation bound.

Truncation policy: smallest N whose cumulative mass reaches 1 - tail_eps,
padded by +k (keeps the c_{n+k,g} companion index in range) plus a fixed
safety margin of 10 levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InvalidParameterError

COHERENT = "coherent"
SQUEEZED = "squeezed"
THERMAL = "thermal"
KINDS = (COHERENT, SQUEEZED, THERMAL)

DEFAULT_TAIL_EPS = 1e-12
_PAD_LEVELS = 10


@dataclass(frozen=True, eq=False)
class PhotonDistribution:
    """rho_nn(0) for n = 0..N_cut, together with the mass actually captured."""

    kind: str
    nbar: float
    probabilities: np.ndarray
    captured_mass: float
    tail_eps: float

    @property
    def n_cut(self) -> int:
        return len(self.probabilities) - 1

    def mean(self) -> float:
        n = np.arange(len(self.probabilities))
        return float(np.dot(n, self.probabilities))


def _log_weights(kind: str, n: np.ndarray, nbar: float) -> np.ndarray:
    """ln rho_nn(0) on the integer levels ``n``; -inf marks exact zeros."""
    out = np.full(n.shape, -np.inf)
    if nbar == 0.0:
        out[n == 0] = 0.0  # vacuum for every kind
        return out
    if kind == COHERENT:
        # Poisson e^{-nbar} nbar^n / n!
        return -nbar + n * math.log(nbar) - gammaln(n + 1.0)
    if kind == THERMAL:
        return n * math.log(nbar / (1.0 + nbar)) - math.log(1.0 + nbar)
    if kind == SQUEEZED:
        even = n % 2 == 0
        m = n[even] // 2
        out[even] = (
            m * math.log(nbar)
            + gammaln(2 * m + 1.0)
            - 2 * m * math.log(2.0)
            - 2 * gammaln(m + 1.0)
            - (m + 0.5) * math.log(1.0 + nbar)
        )
        return out
    raise InvalidParameterError(f"unknown field kind {kind!r}")


def _check_args(nbar: float, tail_eps: float) -> None:
    if not (nbar >= 0.0) or not math.isfinite(nbar):
        raise InvalidParameterError(f"mean photon number must be >= 0, got {nbar!r}")
    if not (0.0 < tail_eps < 1.0):
        raise InvalidParameterError(f"tail_eps must lie in (0, 1), got {tail_eps!r}")


def choose_truncation(kind: str, nbar: float, tail_eps: float, k: int) -> int:
    """Smallest N with cumulative mass >= 1 - tail_eps, padded by k + 10."""
    _check_args(nbar, tail_eps)
    if kind not in KINDS:
        raise InvalidParameterError(f"unknown field kind {kind!r}")
    if k < 1:
        raise InvalidParameterError(f"photon transition number must be >= 1, got {k}")
    target = 1.0 - tail_eps
    total = 0.0
    start = 0
    block = 64
    while True:
        n = np.arange(start, start + block)
        w = np.exp(_log_weights(kind, n, nbar))
        cum = total + np.cumsum(w)
        hit = np.nonzero(cum >= target)[0]
        if hit.size:
            return start + int(hit[0]) + k + _PAD_LEVELS
        total = cum[-1]
        if float(np.sum(w)) == 0.0:
            # Accumulation stalled below the target: tolerance unreachable
            # in double precision.
            raise InvalidParameterError(
                f"tail_eps={tail_eps!r} unreachable for {kind} nbar={nbar!r}"
            )
        start += block


def _build(kind: str, nbar: float, tail_eps: float, k: int) -> PhotonDistribution:
    n_cut = choose_truncation(kind, nbar, tail_eps, k)
    n = np.arange(n_cut + 1)
    if kind == THERMAL and nbar > 0.0:
        # Recursive product keeps the geometric ratio exact level to level.
        probs = np.empty(n_cut + 1)
        probs[0] = 1.0 / (1.0 + nbar)
        ratio = nbar / (1.0 + nbar)
        for i in range(n_cut):
            probs[i + 1] = probs[i] * ratio
    else:
        probs = np.exp(_log_weights(kind, n, nbar))
    probs.setflags(write=False)
    return PhotonDistribution(
        kind=kind,
        nbar=float(nbar),
        probabilities=probs,
        captured_mass=float(np.sum(probs)),
        tail_eps=float(tail_eps),
    )


def coherent_distribution(
    nbar: float, tail_eps: float = DEFAULT_TAIL_EPS, k: int = 1
) -> PhotonDistribution:
    """Poisson populations e^{-nbar} nbar^n / n!."""
    _check_args(nbar, tail_eps)
    return _build(COHERENT, nbar, tail_eps, k)


def squeezed_distribution(
    nbar: float, tail_eps: float = DEFAULT_TAIL_EPS, k: int = 1
) -> PhotonDistribution:
    """Squeezed-vacuum populations, nonzero on even levels only.

    rho_{2n,2n} = nbar^n (2n)! / ((2^n n!)^2 (1+nbar)^(n+1/2)), which is the
    tanh^{2n}(r) (2n)! / ((2^n n!)^2 cosh r) form with sinh^2 r = nbar.
    """
    _check_args(nbar, tail_eps)
    return _build(SQUEEZED, nbar, tail_eps, k)


def thermal_distribution(
    nbar: float, tail_eps: float = DEFAULT_TAIL_EPS, k: int = 1
) -> PhotonDistribution:
    """Bose-Einstein populations nbar^n / (1+nbar)^(n+1)."""
    _check_args(nbar, tail_eps)
    return _build(THERMAL, nbar, tail_eps, k)


def thermal_nbar_from_temperature(
    frequency: float, temperature: float, hbar_over_kB: float = 1.0
) -> float:
    """Mean occupation 1 / (exp(hbar nu / kB T) - 1)."""
    if not (frequency > 0.0):
        raise InvalidParameterError(f"frequency must be > 0, got {frequency!r}")
    if not (temperature > 0.0):
        raise InvalidParameterError(f"temperature must be > 0, got {temperature!r}")
    if not (hbar_over_kB > 0.0):
        raise InvalidParameterError(f"hbar_over_kB must be > 0, got {hbar_over_kB!r}")
    x = hbar_over_kB * frequency / temperature
    if x > 700.0:  # exp overflows; occupation is zero to double precision
        return 0.0
    return 1.0 / math.expm1(x)


def build_distribution(
    kind: str, nbar: float, tail_eps: float = DEFAULT_TAIL_EPS, k: int = 1
) -> PhotonDistribution:
    """Dispatch on the field kind names used in scenario configs."""
    if kind == COHERENT:
        return coherent_distribution(nbar, tail_eps, k)
    if kind == SQUEEZED:
        return squeezed_distribution(nbar, tail_eps, k)
    if kind == THERMAL:
        return thermal_distribution(nbar, tail_eps, k)
    raise InvalidParameterError(f"unknown field kind {kind!r}")
