"""Gaussian-state algebra on covariance matrices.

A zero-mean Gaussian state of M bosonic modes is represented by its
covariance matrix (CM) of anticommutator second moments,

    sigma[i, j] = <{r_i, r_j}>,   r = (Q_1, P_1, ..., Q_M, P_M),

so a physical CM satisfies sigma + i*Omega >= 0, equivalently all
symplectic eigenvalues nu_l >= 1.  Quadratic Hamiltonians are represented
by real symmetric positive-semidefinite matrices H with H_op = r^T H r
(the factor 1/2 lives inside H), and every unitary in this package is a
symplectic matrix S with S Omega S^T = Omega acting by congruence on the
CM.  We keep hbar = k_B = 1 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import schur

Array = NDArray[np.float64]

#: Tolerance for |S Omega S^T - Omega| on symplectic transforms.
SYMPLECTIC_TOL = 1e-8
#: A CM is accepted as physical when all symplectic eigenvalues >= 1 - BONA_FIDE_TOL.
BONA_FIDE_TOL = 1e-9


class SymplecticError(ValueError):
    """A matrix failed a symplecticity or physicality check."""


def symplectic_form(n_modes: int) -> Array:
    """Block-diagonal symplectic form, 2x2 blocks [[0, 1], [-1, 0]].

    Mode ordering is (Q_1, P_1, ..., Q_M, P_M).
    """
    if n_modes < 1:
        raise ValueError(f"n_modes must be >= 1, got {n_modes}")
    omega = np.zeros((2 * n_modes, 2 * n_modes))
    for i in range(n_modes):
        omega[2 * i, 2 * i + 1] = 1.0
        omega[2 * i + 1, 2 * i] = -1.0
    return omega


def coth(x: Array | float) -> Array | float:
    """Stable coth for x > 0; exact 1.0 in the large-argument limit."""
    x = np.asarray(x, dtype=float)
    out = 1.0 + 2.0 / np.expm1(2.0 * np.minimum(x, 350.0))
    return out if out.ndim else float(out)


def log_2sinh(x: Array | float) -> Array | float:
    """log(2 sinh x) for x > 0 without overflow: x + log1p(-exp(-2x))."""
    x = np.asarray(x, dtype=float)
    out = x + np.log1p(-np.exp(-2.0 * x))
    return out if out.ndim else float(out)


def _require_square_even(m: Array, name: str) -> int:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    if m.shape[0] % 2 != 0:
        raise ValueError(f"{name} must have even dimension, got {m.shape[0]}")
    return m.shape[0] // 2


def _require_symmetric(m: Array, name: str, rtol: float = 1e-10) -> None:
    scale = max(float(np.abs(m).max()), 1e-300)
    defect = float(np.abs(m - m.T).max())
    if defect > rtol * scale:
        raise ValueError(f"{name} is not symmetric: max |m - m^T| = {defect:.3e}")


def symplecticity_defect(s: Array) -> float:
    """max |S Omega S^T - Omega| for a candidate symplectic matrix."""
    n = _require_square_even(s, "transform")
    omega = symplectic_form(n)
    return float(np.abs(s @ omega @ s.T - omega).max())


def require_symplectic(s: Array, tol: float = SYMPLECTIC_TOL) -> Array:
    """Validate S Omega S^T = Omega to within tol and return s."""
    defect = symplecticity_defect(s)
    if not defect <= tol:
        raise SymplecticError(f"symplecticity defect {defect:.3e} exceeds tolerance {tol:.1e}")
    return s


def symplectic_eigenvalues(m: Array) -> Array:
    """The M positive eigenvalues of i*Omega*m, sorted ascending.

    Parameters
    ----------
    m:
        Symmetric positive-semidefinite 2M x 2M matrix (a CM or a
        Hamiltonian matrix).

    Evaluated through the Hermitian similarity m^(1/2) (i Omega) m^(1/2),
    which has the same spectrum as i*Omega*m but keeps the eigenproblem
    numerically well behaved.
    """
    m = np.asarray(m, dtype=float)
    n = _require_square_even(m, "matrix")
    _require_symmetric(m, "matrix")
    evals, vecs = np.linalg.eigh(m)
    if evals[0] < -1e-12 * max(evals[-1], 1.0):
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {evals[0]:.3e})")
    root = (vecs * np.sqrt(np.clip(evals, 0.0, None))) @ vecs.T
    herm = 1j * (root @ symplectic_form(n) @ root)
    spectrum = np.linalg.eigvalsh(herm)
    positive = np.sort(spectrum[spectrum > 0.0])
    if len(positive) > n:
        positive = positive[-n:]
    elif len(positive) < n:
        # strictly semidefinite input: pad the vanished pairs with zeros
        positive = np.concatenate([np.zeros(n - len(positive)), positive])
    return positive


@dataclass(frozen=True)
class WilliamsonResult:
    """Williamson normal form m = S (diag of nu_j I_2) S^T with S symplectic.

    `symplectic_eigenvalues` are sorted ascending and match the j-th 2x2
    block of the diagonal factor.
    """

    transform: Array
    symplectic_eigenvalues: Array

    @property
    def diagonal_form(self) -> Array:
        return np.repeat(self.symplectic_eigenvalues, 2)


def williamson_decompose(m: Array, tol: float = SYMPLECTIC_TOL) -> WilliamsonResult:
    """Decompose a symmetric positive-definite matrix as m = S W S^T.

    W is the direct sum of nu_j * I_2 with nu_j the symplectic eigenvalues
    of m (ascending) and S symplectic.  The routine takes a Cholesky factor
    m = L L^T, brings the antisymmetric matrix L^T Omega L to its real
    Schur form Q T Q^T, normalizes the 2x2 Schur blocks to b_j * Omega_1
    with b_j > 0 ascending, and assembles S = L Q D^(-1/2) with
    D = diag of b_j I_2.

    Raises
    ------
    ValueError
        If m is not symmetric positive-definite.
    SymplecticError
        If the assembled transform fails the symplecticity check.
    """
    m = np.asarray(m, dtype=float)
    n = _require_square_even(m, "matrix")
    _require_symmetric(m, "matrix")
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise ValueError("matrix must be positive-definite for a Williamson decomposition") from exc

    omega = symplectic_form(n)
    anti = chol.T @ omega @ chol
    anti = 0.5 * (anti - anti.T)
    t_mat, q_mat = schur(anti, output="real")

    off = np.array([t_mat[2 * j, 2 * j + 1] for j in range(n)])
    diag_leak = max(
        float(np.abs(np.diag(t_mat)).max()),
        max(float(abs(t_mat[2 * j + 1, 2 * j] + off[j])) for j in range(n)),
    )
    if diag_leak > 1e-8 * max(float(np.abs(off).max()), 1.0):
        raise SymplecticError(f"Schur form of the antisymmetric factor is not block-canonical "
                              f"(leak {diag_leak:.3e})")

    q_mat = q_mat.copy()
    for j in range(n):
        if off[j] < 0.0:
            q_mat[:, [2 * j, 2 * j + 1]] = q_mat[:, [2 * j + 1, 2 * j]]
            off[j] = -off[j]

    order = np.argsort(off)
    col_order = np.empty(2 * n, dtype=int)
    col_order[0::2] = 2 * order
    col_order[1::2] = 2 * order + 1
    q_mat = q_mat[:, col_order]
    nus = off[order]

    transform = (chol @ q_mat) / np.sqrt(np.repeat(nus, 2))
    require_symplectic(transform, tol)
    recon = transform * np.repeat(nus, 2) @ transform.T
    scale = max(float(np.abs(m).max()), 1e-300)
    resid = float(np.abs(recon - m).max()) / scale
    if resid > 1e-8:
        raise SymplecticError(f"Williamson reconstruction residual {resid:.3e} exceeds 1e-8")
    return WilliamsonResult(transform=transform, symplectic_eigenvalues=nus)


def thermal_cm(h: Array, beta: float) -> Array:
    """CM of the Gibbs state exp(-beta H_op)/Z for a quadratic Hamiltonian.

    The Williamson transform S_h of h (h = S_h W_h S_h^T, normal-mode
    frequencies w_j = 2 h_j) carries the thermal Williamson form back to
    the physical basis through the inverse congruence:

        sigma_th = S_h^(-T) (diag of nu_j I_2) S_h^(-1),
        nu_j = coth(beta w_j / 2).

    For a single oscillator with mass m0 and frequency w0 this yields
    diag(nu / (m0 w0), nu m0 w0), which fixes the orientation convention.

    Raises
    ------
    ValueError
        If beta <= 0, h is not positive-definite, or a normal mode
        frequency vanishes (the thermal CM would diverge).
    """
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    will = williamson_decompose(np.asarray(h, dtype=float))
    freqs = 2.0 * will.symplectic_eigenvalues
    if freqs[0] <= 0.0 or not np.isfinite(1.0 / freqs[0]):
        raise ValueError("zero-frequency normal mode: thermal CM is unbuildable")
    nus = coth(beta * freqs / 2.0)
    inv = np.linalg.inv(will.transform)
    sigma = inv.T * np.repeat(nus, 2) @ inv
    return 0.5 * (sigma + sigma.T)


def mean_energy(h: Array, s: Array) -> float:
    """Mean energy (1/2) tr(h s) of a zero-mean Gaussian state."""
    h = np.asarray(h, dtype=float)
    s = np.asarray(s, dtype=float)
    if h.shape != s.shape:
        raise ValueError(f"dimension mismatch: h {h.shape} vs s {s.shape}")
    return 0.5 * float(np.sum(h * s))


def sub_block(s: Array, modes: list[int] | tuple[int, ...]) -> Array:
    """Principal sub-block of a CM for the given mode indices.

    Partial trace of a Gaussian state: the reduced state keeps the rows
    and columns of the selected modes in their original order.
    """
    s = np.asarray(s, dtype=float)
    n = _require_square_even(s, "cm")
    modes = list(modes)
    if any(mode < 0 or mode >= n for mode in modes):
        raise IndexError(f"mode indices {modes} out of range for {n} modes")
    idx = np.array([2 * mode + off for mode in modes for off in (0, 1)], dtype=int)
    return s[np.ix_(idx, idx)]


def entropy_from_symplectic(nus: Array) -> float:
    """Von Neumann entropy from the symplectic eigenvalues of a CM.

    Terms with nu inside [1, 1 + 1e-12] are evaluated as 0: the limit of
    the entropy function at nu -> 1 exists and is 0 (removable
    singularity of (nu-1)/2 * ln((nu-1)/2)).
    """
    nus = np.asarray(nus, dtype=float)
    if np.any(nus < 1.0 - BONA_FIDE_TOL):
        raise ValueError(f"unphysical symplectic eigenvalue {nus.min():.12f} < 1")
    x = np.clip(nus, 1.0, None)
    up = (x + 1.0) / 2.0
    dn = (x - 1.0) / 2.0
    terms = up * np.log(up) - np.where(dn > 5e-13, dn * np.log(np.where(dn > 5e-13, dn, 1.0)), 0.0)
    return float(np.sum(terms))


def von_neumann_entropy(s: Array) -> float:
    """Von Neumann entropy of the Gaussian state with CM s."""
    return entropy_from_symplectic(symplectic_eigenvalues(s))


def mutual_information(s: Array, part_a: list[int], part_b: list[int]) -> float:
    """Quantum mutual information S(A) + S(B) - S(AB) across a bipartition.

    `part_a` and `part_b` must be disjoint mode-index sets covering all
    modes of the CM.
    """
    n = _require_square_even(np.asarray(s), "cm")
    set_a, set_b = set(part_a), set(part_b)
    if set_a & set_b:
        raise ValueError("partition blocks overlap")
    if set_a | set_b != set(range(n)):
        raise ValueError("partition must cover all modes")
    total = (
        von_neumann_entropy(sub_block(s, sorted(set_a)))
        + von_neumann_entropy(sub_block(s, sorted(set_b)))
        - von_neumann_entropy(s)
    )
    if total < -BONA_FIDE_TOL:
        raise ValueError(f"mutual information {total:.3e} is negative beyond tolerance")
    return max(total, 0.0)


def relative_entropy_to_thermal(s: Array, h: Array, beta: float) -> float:
    """Relative entropy D(rho_s || tau) of a Gaussian state to a Gibbs state.

    With w_j the normal-mode frequencies of h and Z the Gibbs partition
    function, D = beta * mean_energy(h, s) + ln Z - S(s) where
    ln Z = -sum_j log(2 sinh(beta w_j / 2)).  Values within 1e-7 of zero
    from below are clamped to 0.
    """
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    freqs = 2.0 * symplectic_eigenvalues(np.asarray(h, dtype=float))
    if freqs[0] <= 0.0:
        raise ValueError("zero-frequency normal mode in the reference Hamiltonian")
    value = (
        beta * mean_energy(h, s)
        - float(np.sum(log_2sinh(beta * freqs / 2.0)))
        - von_neumann_entropy(s)
    )
    if value < -1e-7:
        raise ValueError(f"relative entropy evaluated to {value:.3e} < 0")
    return max(value, 0.0)


def is_bona_fide(s: Array, tol: float = BONA_FIDE_TOL) -> bool:
    """True when all symplectic eigenvalues of s are >= 1 - tol."""
    try:
        nus = symplectic_eigenvalues(s)
    except ValueError:
        return False
    return bool(np.all(nus >= 1.0 - tol))
