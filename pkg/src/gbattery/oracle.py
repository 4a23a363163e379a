"""Continuum-limit oracle for the stationary battery moments.

Independent of the finite-bath machinery, the stationary second moments
of a damped oscillator with Lorentz-Drude memory kernel are quadratures
over the bath spectrum:

    <Q0^2> = (1 / (pi m0)) * int_0^inf dw  w  Re[gt(w)] coth(beta w / 2) / |alpha(w)|^2
    <P0^2> = (m0 / pi)     * int_0^inf dw  w^3 Re[gt(w)] coth(beta w / 2) / |alpha(w)|^2

with gt(w) = 2 gamma / (1 - i w / omega_d) and alpha(w) = omega0^2 - w^2
- i w gt(w); the cross moment vanishes.  These values are the moments of
the mean-force Gibbs state and validate the finite-N covariance matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from .gqm import Array, coth, symplectic_eigenvalues
from .model import ModelSpec


@dataclass(frozen=True)
class OracleConfig:
    """Quadrature controls; the cutoff is omega_max_factor * omega_d."""

    omega_max_factor: float = 50.0
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.omega_max_factor <= 1.0:
            raise ValueError("omega_max_factor must exceed 1 (cutoff above omega_d)")
        if not (self.abs_tol > 0.0 and self.rel_tol > 0.0):
            raise ValueError("quadrature tolerances must be positive")


@dataclass(frozen=True)
class MeanForceCM:
    """Stationary moments and their packaged 2x2 covariance matrix."""

    q2: float
    p2: float
    q2_error: float
    p2_error: float

    @property
    def cm(self) -> Array:
        """CM diag(2 <Q0^2>, 2 <P0^2>) in anticommutator convention."""
        return np.diag([2.0 * self.q2, 2.0 * self.p2])


def gamma_tilde(omega: float | Array, spec: ModelSpec) -> complex | np.ndarray:
    """Fourier transform of the memory kernel, 2 gamma / (1 - i w / omega_d)."""
    omega = np.asarray(omega, dtype=float)
    out = 2.0 * spec.gamma / (1.0 - 1j * omega / spec.omega_d)
    return out if out.ndim else complex(out)


def _response_denominator(omega: float, spec: ModelSpec) -> float:
    """|alpha(w)|^2 with alpha = omega0^2 - w^2 - i w gamma_tilde(w)."""
    gt = gamma_tilde(omega, spec)
    real_part = spec.omega0**2 - omega**2 + omega * gt.imag
    imag_part = omega * gt.real
    return real_part * real_part + imag_part * imag_part


def _find_resonance(spec: ModelSpec) -> float:
    """Frequency minimizing |alpha|^2; the quadrature splits there."""
    upper = 2.0 * spec.omega0 + spec.omega_d
    result = minimize_scalar(
        lambda w: _response_denominator(w, spec),
        bounds=(1e-6, upper),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(result.x)


def stationary_moments(spec: ModelSpec, cfg: OracleConfig | None = None) -> MeanForceCM:
    """Adaptive quadrature of the stationary <Q0^2> and <P0^2>.

    The w -> 0 limit of the Q0^2 integrand is finite (the coth pole
    cancels the spectral factor) and is evaluated analytically; the
    integration range is split at the response-function minimum; the
    truncated tails fall off as w^-5 and w^-3 and are added analytically,
    with the P0^2 tail dominating the truncation error budget.

    Raises quadrature non-convergence as a ValueError carrying the
    estimated errors.
    """
    cfg = cfg or OracleConfig()
    if spec.gamma <= 0.0:
        raise ValueError("stationary moments need gamma > 0 (a coupled bath)")
    m0, beta, omega_d, gamma = spec.m0, spec.beta, spec.omega_d, spec.gamma
    omega_max = cfg.omega_max_factor * omega_d
    zero_limit_q = 4.0 * gamma / (beta * spec.omega0**4)

    def integrand_q(w: float) -> float:
        if w == 0.0:
            return zero_limit_q
        gt_re = 2.0 * gamma / (1.0 + (w / omega_d) ** 2)
        return w * gt_re * coth(beta * w / 2.0) / _response_denominator(w, spec)

    def integrand_p(w: float) -> float:
        if w == 0.0:
            return 0.0
        gt_re = 2.0 * gamma / (1.0 + (w / omega_d) ** 2)
        return w**3 * gt_re * coth(beta * w / 2.0) / _response_denominator(w, spec)

    split = _find_resonance(spec)
    points = sorted(p for p in {split, spec.omega0, omega_d} if 0.0 < p < omega_max)

    val_q, err_q = quad(
        integrand_q, 0.0, omega_max, points=points, limit=500,
        epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
    )
    val_p, err_p = quad(
        integrand_p, 0.0, omega_max, points=points, limit=500,
        epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
    )

    # analytic tails: integrands decay as 2 g wd^2 / w^5 and 2 g wd^2 / w^3
    tail_q = gamma * omega_d**2 / (2.0 * omega_max**4)
    tail_p = gamma * omega_d**2 / omega_max**2
    # subleading tail terms are suppressed by ~(w0^2 + wd^2)/w^2
    tail_slack = (spec.omega0**2 + omega_d**2 + 2.0 * gamma * omega_d) / omega_max**2

    q2 = (val_q + tail_q) / (math.pi * m0)
    p2 = (val_p + tail_p) * m0 / math.pi
    q2_error = (err_q + tail_q * tail_slack) / (math.pi * m0)
    p2_error = (err_p + tail_p * tail_slack) * m0 / math.pi

    if not (np.isfinite(q2) and np.isfinite(p2)) or q2 <= 0.0 or p2 <= 0.0:
        raise ValueError(f"quadrature failed: q2={q2}, p2={p2}")
    if err_q > 1e-3 * abs(val_q) or err_p > 1e-3 * abs(val_p):
        raise ValueError(
            f"quadrature did not converge: errors ({err_q:.2e}, {err_p:.2e}) "
            f"for values ({val_q:.6e}, {val_p:.6e})"
        )
    return MeanForceCM(q2=q2, p2=p2, q2_error=q2_error, p2_error=p2_error)


def mean_force_cm(spec: ModelSpec, cfg: OracleConfig | None = None) -> MeanForceCM:
    """Stationary moments packaged as a physical 2x2 CM.

    Checks the bona fide condition (symplectic eigenvalue >= 1) before
    returning.
    """
    moments = stationary_moments(spec, cfg)
    nu = float(symplectic_eigenvalues(moments.cm)[0])
    if nu < 1.0 - 1e-9:
        raise ValueError(f"mean-force CM is unphysical: symplectic eigenvalue {nu:.12f}")
    return moments
