"""Discrete Caldeira-Leggett model construction.

A battery oscillator (mass m0, frequency omega0) couples linearly through
position to a bath of N oscillators.  Bath frequencies are drawn from the
Lorentzian quantile map

    omega_k = a0 * tan((pi / 2) * k / (N + 1)),   k = 1..N,

whose level density 1 / (1 + (omega / a0)^2) mirrors the Lorentz-Drude
cutoff of the spectral density, so a finite sample covers the whole
frequency axis with weight where the bath actually couples.  Couplings
g_k follow from the spectral density J(omega) = 2 m0 gamma omega /
(1 + (omega / omega_d)^2) through the spacings Delta_k, and the last
spacing can be rescaled once so that the discrete renormalization
frequency sum hits its continuum value 2 gamma omega_d exactly.

The interaction carries a position-squared counter-term
(m0 omega_r^2 / 2) Q_0^2 that cancels the coupling-induced frequency
shift of the battery; a protocol factor lambda in [0, 1] scales the
coupling linearly and the counter-term quadratically.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .gqm import Array

log = logging.getLogger("gbattery")

#: Sanity band for the tail-matching rescale of the last spacing.
RESCALE_BAND = (0.1, 10.0)


@dataclass(frozen=True)
class ModelSpec:
    """All Caldeira-Leggett parameters for one model instance.

    `masses` optionally lists the N bath masses; the default is unit mass
    for every oscillator.  `tail_match` toggles the Delta_N adjustment
    that pins the discrete renormalization frequency to 2 gamma omega_d.
    """

    m0: float = 1.0
    omega0: float = 2.0
    n_bath: int = 150
    a0: float = 1.03
    gamma: float = 1.0
    omega_d: float = 4.0
    beta: float = 10.0
    tail_match: bool = True
    masses: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        for name in ("m0", "omega0", "a0", "omega_d", "beta"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"ModelSpec.{name} must be positive, got {value}")
        if self.gamma < 0.0:
            raise ValueError(f"ModelSpec.gamma must be nonnegative, got {self.gamma}")
        if self.n_bath < 1:
            raise ValueError(f"ModelSpec.n_bath must be >= 1, got {self.n_bath}")
        if self.masses is not None:
            if len(self.masses) != self.n_bath:
                raise ValueError(
                    f"ModelSpec.masses has {len(self.masses)} entries for {self.n_bath} oscillators"
                )
            if any(not m > 0.0 for m in self.masses):
                raise ValueError("ModelSpec.masses must all be positive")

    @property
    def n_modes(self) -> int:
        return self.n_bath + 1

    def bath_masses(self) -> Array:
        if self.masses is None:
            return np.ones(self.n_bath)
        return np.asarray(self.masses, dtype=float)


@dataclass(frozen=True)
class BathSample:
    """Frequencies, spacings, and couplings of one discretized bath.

    `omega_r_sq` is recomputed from the stored couplings, so the defining
    sum rule holds to machine precision by construction.  `delta_rescale`
    records the tail-matching factor applied to the last spacing inside
    the last coupling (1.0 when tail matching is off).
    """

    omegas: Array
    deltas: Array
    couplings: Array
    omega_r_sq: float
    delta_rescale: float = 1.0

    def __post_init__(self) -> None:
        if np.any(np.diff(self.omegas) <= 0.0) or self.omegas[0] <= 0.0:
            raise ValueError("bath frequencies must be positive and strictly increasing")
        if np.any(self.couplings < 0.0):
            raise ValueError("couplings must be nonnegative")

    @property
    def recurrence_estimate(self) -> float:
        """Revival timescale 2 pi / Delta_1 of the finite bath."""
        return 2.0 * math.pi / float(self.deltas[0])


@dataclass(frozen=True)
class Protocol:
    """Polynomial switch-off lambda(t) = (1 - t/t_d)^exponent on [0, t_d]."""

    t_d: float
    exponent: int = 11

    def __post_init__(self) -> None:
        if self.t_d < 0.0:
            raise ValueError(f"Protocol.t_d must be >= 0, got {self.t_d}")
        if self.exponent < 1:
            raise ValueError(f"Protocol.exponent must be a positive integer, got {self.exponent}")


def sample_frequencies(spec: ModelSpec) -> tuple[Array, Array]:
    """Bath frequencies omega_k = a0 tan((pi/2) k/(N+1)) and spacings.

    Spacings are Delta_1 = omega_1 and Delta_k = omega_k - omega_(k-1).
    """
    k = np.arange(1, spec.n_bath + 1, dtype=float)
    omegas = spec.a0 * np.tan(0.5 * np.pi * k / (spec.n_bath + 1))
    deltas = np.empty_like(omegas)
    deltas[0] = omegas[0]
    deltas[1:] = np.diff(omegas)
    return omegas, deltas


def spectral_density(omega: float | Array, spec: ModelSpec) -> float | Array:
    """Ohmic spectral density with Lorentz-Drude cutoff."""
    omega = np.asarray(omega, dtype=float)
    out = 2.0 * spec.m0 * spec.gamma * omega / (1.0 + (omega / spec.omega_d) ** 2)
    return out if out.ndim else float(out)


def sample_couplings(spec: ModelSpec, omegas: Array, deltas: Array) -> tuple[Array, float, float]:
    """Couplings g_k from the spectral density, with optional tail matching.

    Returns (couplings, omega_r_sq, delta_rescale).  With tail matching
    on, the last spacing is rescaled by a single factor inside g_N so the
    renormalization-frequency sum

        omega_r_sq = sum_k g_k^2 / (m0 m_k omega_k^2)

    equals the continuum value 2 gamma omega_d to 1e-10 relative.  A
    rescale factor outside [0.1, 10] signals a pathological sample and is
    reported through a warning (the sample is still produced).
    """
    masses = spec.bath_masses()
    weights = 4.0 * spec.gamma * deltas / (np.pi * (1.0 + (omegas / spec.omega_d) ** 2))
    rescale = 1.0
    deltas_eff = deltas
    if spec.tail_match and spec.gamma > 0.0:
        target = 2.0 * spec.gamma * spec.omega_d
        rescale = 1.0 + (target - float(weights.sum())) / float(weights[-1])
        if rescale <= 0.0:
            raise ValueError(
                f"tail matching would need a nonpositive last spacing (factor {rescale:.3g})"
            )
        if not RESCALE_BAND[0] <= rescale <= RESCALE_BAND[1]:
            log.warning(
                "tail-match rescale factor %.4g outside sanity band %s: pathological sample",
                rescale,
                RESCALE_BAND,
            )
        deltas_eff = deltas.copy()
        deltas_eff[-1] *= rescale
    couplings = np.sqrt(
        4.0 * spec.gamma * spec.m0 * masses * omegas**2 * deltas_eff
        / (np.pi * (1.0 + (omegas / spec.omega_d) ** 2))
    )
    omega_r_sq = float(np.sum(couplings**2 / (spec.m0 * masses * omegas**2)))
    return couplings, omega_r_sq, rescale


def build_bath(spec: ModelSpec) -> BathSample:
    """Sample frequencies and couplings for the spec's bath."""
    omegas, deltas = sample_frequencies(spec)
    couplings, omega_r_sq, rescale = sample_couplings(spec, omegas, deltas)
    return BathSample(
        omegas=omegas,
        deltas=deltas,
        couplings=couplings,
        omega_r_sq=omega_r_sq,
        delta_rescale=rescale,
    )


def stiffness_matrix(spec: ModelSpec, bath: BathSample, lambda_value: float) -> Array:
    """Position-block stiffness K(lambda): r^T H r has potential Q^T K Q / 2."""
    n = spec.n_modes
    k_mat = np.zeros((n, n))
    k_mat[0, 0] = spec.m0 * (spec.omega0**2 + lambda_value**2 * bath.omega_r_sq)
    masses = spec.bath_masses()
    k_mat[np.arange(1, n), np.arange(1, n)] = masses * bath.omegas**2
    k_mat[0, 1:] = k_mat[1:, 0] = -lambda_value * bath.couplings
    return k_mat


def build_hamiltonian(spec: ModelSpec, bath: BathSample, lambda_value: float = 1.0) -> Array:
    """Hamiltonian matrix of battery plus bath at protocol value lambda.

    2(N+1) x 2(N+1) in the (Q_0, P_0, Q_1, P_1, ...) ordering; entries
    carry the overall 1/2 so the quadratic form r^T H r is the energy.
    At lambda = 0 the matrix is the decoupled direct sum.
    """
    if not 0.0 <= lambda_value <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lambda_value}")
    n = spec.n_modes
    h_mat = np.zeros((2 * n, 2 * n))
    k_mat = stiffness_matrix(spec, bath, lambda_value)
    h_mat[0::2, 0::2] = 0.5 * k_mat
    inv_masses = np.concatenate(([1.0 / spec.m0], 1.0 / spec.bath_masses()))
    h_mat[1::2, 1::2] = 0.5 * np.diag(inv_masses)
    return h_mat


def interaction_matrix(spec: ModelSpec, bath: BathSample, lambda_value: float = 1.0) -> Array:
    """Coupling plus counter-term block of the Hamiltonian matrix.

    Satisfies build_hamiltonian(lam) = build_hamiltonian(0) + interaction_matrix(lam)
    entrywise.
    """
    if not 0.0 <= lambda_value <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lambda_value}")
    n = spec.n_modes
    v_mat = np.zeros((2 * n, 2 * n))
    v_mat[0, 0] = 0.5 * spec.m0 * bath.omega_r_sq * lambda_value**2
    v_mat[0, 2::2] = v_mat[2::2, 0] = -0.5 * lambda_value * bath.couplings
    return v_mat


def battery_hamiltonian(spec: ModelSpec) -> Array:
    """Bare 2x2 battery Hamiltonian matrix diag(m0 w0^2, 1/m0) / 2."""
    return 0.5 * np.array([[spec.m0 * spec.omega0**2, 0.0], [0.0, 1.0 / spec.m0]])


def protocol_value(protocol: Protocol, t: float) -> float:
    """Switch-off factor lambda(t) = (1 - t/t_d)^p.

    The quench t_d = 0 never gets integrated over; by convention it
    returns the post-quench value 0 for any t >= 0.
    """
    if protocol.t_d == 0.0:
        if t < 0.0:
            raise ValueError(f"t = {t} outside [0, t_d]")
        return 0.0
    if not 0.0 <= t <= protocol.t_d:
        raise ValueError(f"t = {t} outside [0, {protocol.t_d}]")
    return (1.0 - t / protocol.t_d) ** protocol.exponent
