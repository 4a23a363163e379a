"""Gaussian ergotropy extraction for a single-mode battery.

For one mode, the unitarily extractable energy of a state with CM
sigma_S under a Hamiltonian matrix h_S reduces to

    ergotropy = (1/2) tr(sigma_S h_S) - s * h,

with s and h the lone symplectic eigenvalues of sigma_S and h_S.  The
extracting symplectic transform S_W is assembled from the two Williamson
transforms and maps sigma_S onto the passive CM s * diag(1/(m0 w0),
m0 w0), which is diagonal in the battery's normal coordinates.  A
one-parameter family of extractors follows by composing S_W with the
phase-space rotation generated by the battery number operator; the
rotation matrix commutes with h_S only in the normalized quadrature
basis, so its physical-basis form is conjugated by the mass-frequency
scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gqm
from .gqm import Array


@dataclass(frozen=True)
class ExtractionResult:
    """Ergotropy, extracting transform, and passive state of one battery mode."""

    ergotropy: float
    transform: Array
    passive_cm: Array
    s: float
    h: float


def _single_mode_check(m: Array, name: str) -> Array:
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise ValueError(f"{name} must be 2x2, got {m.shape}")
    return m


def ergotropy(sigma_s: Array, h_s: Array) -> float:
    """Extractable energy (1/2) tr(sigma h) - s h, clamped at zero."""
    sigma_s = _single_mode_check(sigma_s, "sigma_s")
    h_s = _single_mode_check(h_s, "h_s")
    s_val = float(gqm.symplectic_eigenvalues(sigma_s)[0])
    if s_val < 1.0 - gqm.BONA_FIDE_TOL:
        raise ValueError(f"unphysical battery CM: symplectic eigenvalue {s_val:.12f} < 1")
    h_val = float(gqm.symplectic_eigenvalues(h_s)[0])
    value = gqm.mean_energy(h_s, sigma_s) - s_val * h_val
    if value < -1e-10:
        raise ValueError(f"ergotropy evaluated to {value:.3e} < 0")
    return max(value, 0.0)


def extraction_transform(sigma_s: Array, h_s: Array) -> Array:
    """Symplectic transform taking sigma_s to its passive CM.

    S_W = -Omega_1 S_H S_sigma^T Omega_1 with S_H, S_sigma the Williamson
    transforms of h_s and sigma_s.  Acting by congruence it returns the
    battery CM in Williamson alignment with h_s, the passive state.
    """
    sigma_s = _single_mode_check(sigma_s, "sigma_s")
    h_s = _single_mode_check(h_s, "h_s")
    omega1 = gqm.symplectic_form(1)
    s_h = gqm.williamson_decompose(h_s).transform
    s_sigma = gqm.williamson_decompose(sigma_s).transform
    return -omega1 @ s_h @ s_sigma.T @ omega1


def extract(sigma_s: Array, h_s: Array) -> ExtractionResult:
    """Full extraction: ergotropy, transform, passive CM, and eigenvalues."""
    transform = extraction_transform(sigma_s, h_s)
    passive = transform @ np.asarray(sigma_s, dtype=float) @ transform.T
    passive = 0.5 * (passive + passive.T)
    s_val = float(gqm.symplectic_eigenvalues(sigma_s)[0])
    h_val = float(gqm.symplectic_eigenvalues(h_s)[0])
    value = gqm.mean_energy(h_s, np.asarray(sigma_s, dtype=float)) - s_val * h_val
    return ExtractionResult(
        ergotropy=max(value, 0.0),
        transform=transform,
        passive_cm=passive,
        s=s_val,
        h=h_val,
    )


def theta_rotation(theta: float) -> Array:
    """Half-angle rotation [[cos t/2, -sin t/2], [sin t/2, cos t/2]].

    Note the half angle: theta = 2 pi is a rotation by pi, not the
    identity.
    """
    half = 0.5 * theta
    return np.array([[np.cos(half), -np.sin(half)], [np.sin(half), np.cos(half)]])


def theta_transform(theta: float, m0: float, omega0: float) -> Array:
    """Physical-basis number-operator rotation of the battery mode.

    The rotation family commutes with the battery Hamiltonian in the
    normalized quadrature basis where the passive CM is proportional to
    the identity; conjugating by the scaling diag(sqrt(m0 w0),
    1/sqrt(m0 w0)) carries it to the physical basis, where it leaves the
    passive CM (and so the extracted ergotropy) unchanged while rotating
    battery-bath correlations.
    """
    scale = np.sqrt(m0 * omega0)
    to_norm = np.diag([scale, 1.0 / scale])
    from_norm = np.diag([1.0 / scale, scale])
    return from_norm @ theta_rotation(theta) @ to_norm


def apply_local_battery(s_full: Array, s_local: Array) -> Array:
    """Apply a 2x2 symplectic to the battery (mode 0) of a larger CM.

    The transform is embedded as a direct sum with the identity on all
    other modes, so every bath row and column outside the battery block
    is unchanged entrywise.
    """
    s_full = np.asarray(s_full, dtype=float)
    s_local = _single_mode_check(s_local, "s_local")
    if s_full.shape[0] < 2 or s_full.shape[0] % 2 != 0:
        raise ValueError(f"full CM has invalid shape {s_full.shape}")
    out = s_full.copy()
    out[:2, :] = s_local @ s_full[:2, :]
    out[:, :2] = out[:, :2] @ s_local.T
    return 0.5 * (out + out.T)
