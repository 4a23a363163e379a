"""Symplectic propagators for quadratic dynamics.

Two regimes are covered.  Time-independent Hamiltonian matrices get the
exact one-shot exponential S(t) = exp(2 Omega H t); the generic entry
point uses a scaling-and-squaring matrix exponential, while mechanical
Hamiltonians (diagonal kinetic block plus a position-block stiffness)
additionally get a normal-mode flow object that evaluates the same
exponential in closed form at many times, builds thermal states, and
takes exact time averages of evolved covariance matrices over a window.

The disconnection protocol is a time-ordered product of exact
exponentials of the instantaneous Hamiltonian sampled at the left
endpoint of each step.  Each factor is evaluated through truncated
cosine/sinc series in the step generator whose remainder is bounded at
run time and kept below machine precision, so every factor is the exact
step exponential to roundoff; the only discretization error is the
first-order product formula itself, which the optional step-halving
refinement controls through the disconnect-work functional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import gqm
from .gqm import Array, SymplecticError
from .model import BathSample, ModelSpec, Protocol, build_hamiltonian, protocol_value, stiffness_matrix


@dataclass(frozen=True)
class StepperConfig:
    """Stepping controls for the disconnection propagator.

    An explicit `dt` is honored as given; the default `None` selects
    min(1e-3, t_d / 1e4) so both the fastest normal modes and the steep
    protocol tail stay resolved for short protocols.  With `refine` on,
    the step is halved until the induced disconnect work changes by less
    than `work_tol` relative, up to `max_halvings` halvings.
    """

    dt: float | None = None
    refine: bool = False
    sympl_tol: float = 1e-8
    work_tol: float = 1e-4
    max_halvings: int = 12

    def __post_init__(self) -> None:
        if self.dt is not None and not self.dt > 0.0:
            raise ValueError(f"StepperConfig.dt must be positive, got {self.dt}")
        if not (self.sympl_tol > 0.0 and self.work_tol > 0.0):
            raise ValueError("StepperConfig tolerances must be positive")

    def effective_dt(self, t_d: float) -> float:
        if self.dt is not None:
            return self.dt
        return min(1e-3, t_d / 1e4)


def propagator_const(h: Array, t: float, sympl_tol: float = gqm.SYMPLECTIC_TOL) -> Array:
    """Exact propagator exp(2 Omega H t) for a time-independent H.

    Uses a scaling-and-squaring matrix exponential on the (non-normal)
    generator 2 Omega H and validates the symplecticity of the result.
    """
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    h = np.asarray(h, dtype=float)
    n = h.shape[0] // 2
    if t == 0.0:
        return np.eye(2 * n)
    gen = 2.0 * t * (gqm.symplectic_form(n) @ h)
    s_mat = expm(gen)
    gqm.require_symplectic(s_mat, sympl_tol)
    return s_mat


def evolve(s: Array, transform: Array) -> Array:
    """Congruence S sigma S^T, re-symmetrized to kill roundoff."""
    s = np.asarray(s, dtype=float)
    transform = np.asarray(transform, dtype=float)
    if s.shape != transform.shape:
        raise ValueError(f"dimension mismatch: cm {s.shape} vs transform {transform.shape}")
    out = transform @ s @ transform.T
    return 0.5 * (out + out.T)


def evolve_with_free_bath(
    s: Array,
    h_active: Array,
    active_modes: list[int],
    h_free: Array,
    free_modes: list[int],
    t: float,
) -> Array:
    """Evolve under a direct sum of two independent generators.

    `h_active` acts on `active_modes`, `h_free` on `free_modes`; the two
    mode sets must be disjoint and cover the state.  Each factor gets its
    own exact constant propagator, embedded as a direct sum.
    """
    n = s.shape[0] // 2
    if set(active_modes) & set(free_modes):
        raise ValueError("active and free mode sets overlap")
    if set(active_modes) | set(free_modes) != set(range(n)):
        raise ValueError("mode sets must cover the full state")
    full = np.eye(2 * n)
    for h_part, modes in ((h_active, active_modes), (h_free, free_modes)):
        idx = np.array([2 * m + off for m in modes for off in (0, 1)], dtype=int)
        full[np.ix_(idx, idx)] = propagator_const(np.asarray(h_part, dtype=float), t)
    return evolve(s, full)


def _block_to_interleaved_perm(n: int) -> Array:
    """Index map: block position j -> interleaved index of Q_j, n+j -> P_j."""
    perm = np.empty(2 * n, dtype=int)
    perm[:n] = 2 * np.arange(n)
    perm[n:] = 2 * np.arange(n) + 1
    return perm


_SERIES_MAX_ORDER = 12


def _taylor_step(p_mat: Array, dt: float) -> tuple[Array, Array, Array]:
    """Blocks (cos, dt*sinc, stiffness*dt*sinc) of the exact step exponential.

    `p_mat` is dt^2 times the mass-weighted stiffness.  The three matrix
    functions share truncated alternating series in p_mat whose remainder
    bound norm^(J+1)/(2J+2)! is driven below 1e-16 before truncation; the
    returned blocks are therefore the exact exponential to roundoff.
    """
    norm = float(np.linalg.norm(p_mat, 1))
    order = None
    for j in range(2, _SERIES_MAX_ORDER + 1):
        # remainder bound of the slowest-converging series (the sine one)
        if norm ** (j + 1) / math.factorial(2 * j + 1) < 1e-18:
            order = j
            break
    if order is None:
        raise ValueError(
            f"step generator norm {norm:.3g} too large for the series evaluation; reduce dt"
        )
    eye = np.eye(p_mat.shape[0])
    cos_blk = eye.copy()
    sinc_blk = eye.copy()
    ksinc_blk = p_mat.copy()
    power = p_mat
    sign = 1.0
    for j in range(1, order + 1):
        sign = -sign
        cos_blk = cos_blk + sign * power / math.factorial(2 * j)
        sinc_blk = sinc_blk + sign * power / math.factorial(2 * j + 1)
        if j < order:
            power = power @ p_mat
            ksinc_blk = ksinc_blk + sign * power / math.factorial(2 * j + 1)
    return cos_blk, dt * sinc_blk, ksinc_blk / dt


def propagator_protocol(
    spec: ModelSpec,
    bath: BathSample,
    protocol: Protocol,
    cfg: StepperConfig | None = None,
) -> Array:
    """Time-ordered disconnection propagator over [0, t_d].

    Product of exact step exponentials with the protocol sampled at the
    left endpoint of each step, applied in increasing time.  The quench
    t_d = 0 changes the Hamiltonian, not the state, and returns the
    identity.  With cfg.refine on, the step is halved until the
    disconnect work agrees to cfg.work_tol relative.
    """
    cfg = cfg or StepperConfig()
    n = spec.n_modes
    if protocol.t_d == 0.0:
        return np.eye(2 * n)

    steps = max(int(math.ceil(protocol.t_d / cfg.effective_dt(protocol.t_d))), 1)

    if not cfg.refine:
        s_mat = _protocol_product(spec, bath, protocol, steps)
        _check_protocol_symplecticity(s_mat, cfg)
        return s_mat

    flow = NormalModeFlow.from_model(spec, bath, lambda_value=1.0)
    sigma_th = flow.thermal_cm(spec.beta)
    h_full = build_hamiltonian(spec, bath, 1.0)
    h_decoupled = build_hamiltonian(spec, bath, 0.0)
    e_th = gqm.mean_energy(h_full, sigma_th)

    def work_of(s_mat: Array) -> float:
        return gqm.mean_energy(h_decoupled, evolve(sigma_th, s_mat)) - e_th

    s_mat = _protocol_product(spec, bath, protocol, steps)
    w_prev = work_of(s_mat)
    for _ in range(cfg.max_halvings):
        steps *= 2
        s_next = _protocol_product(spec, bath, protocol, steps)
        w_next = work_of(s_next)
        s_mat = s_next
        if abs(w_next - w_prev) <= cfg.work_tol * max(abs(w_next), 1e-30):
            _check_protocol_symplecticity(s_mat, cfg)
            return s_mat
        w_prev = w_next
    raise RuntimeError(
        f"disconnect work did not converge to {cfg.work_tol:g} after {cfg.max_halvings} halvings"
    )


def _check_protocol_symplecticity(s_mat: Array, cfg: StepperConfig) -> None:
    defect = gqm.symplecticity_defect(s_mat)
    if not defect <= cfg.sympl_tol:
        raise SymplecticError(
            f"protocol propagator symplecticity defect {defect:.3e} exceeds {cfg.sympl_tol:.1e}"
        )


def _protocol_product(spec: ModelSpec, bath: BathSample, protocol: Protocol, steps: int) -> Array:
    """Accumulate the stepped product in mass-weighted (x, y) coordinates."""
    n = spec.n_modes
    dt = protocol.t_d / steps
    masses = np.concatenate(([spec.m0], spec.bath_masses()))
    root_m = np.sqrt(masses)

    # mass-weighted stiffness pieces; only row/column 0 depends on lambda
    diag_base = np.concatenate(([spec.omega0**2], bath.omegas**2))
    coupling_row = bath.couplings / (root_m[0] * root_m[1:])

    acc = np.eye(2 * n)
    p_base = np.diag(dt * dt * diag_base)
    for i in range(steps):
        lam = protocol_value(protocol, i * dt)
        p_mat = p_base.copy()
        p_mat[0, 0] += dt * dt * lam * lam * bath.omega_r_sq
        p_mat[0, 1:] = p_mat[1:, 0] = -dt * dt * lam * coupling_row
        cos_blk, sinc_blk, ksinc_blk = _taylor_step(p_mat, dt)
        step = np.block([[cos_blk, sinc_blk], [-ksinc_blk, cos_blk]])
        acc = step @ acc

    # undo the mass weighting and interleave:  Q = x / sqrt(m), P = sqrt(m) y
    scale = np.concatenate((1.0 / root_m, root_m))
    acc = (acc * (1.0 / scale)[None, :]) * scale[:, None]
    perm = _block_to_interleaved_perm(n)
    out = np.empty_like(acc)
    out[np.ix_(perm, perm)] = acc
    return out


class NormalModeFlow:
    """Closed-form flow of a mechanical quadratic Hamiltonian.

    The Hamiltonian must have block structure H = diag(K, M^-1) / 2 in
    (all Q, all P) ordering.  One symmetric eigendecomposition of the
    mass-weighted stiffness yields the normal-mode frequencies, after
    which propagators at arbitrary times, the thermal covariance matrix,
    battery-block time series, and exact window or infinite-time averages
    of evolved states all come in closed form.

    All public inputs and outputs use the interleaved (Q_0, P_0, ...)
    ordering; mode 0 is the battery.
    """

    def __init__(self, k_mat: Array, masses: Array):
        masses = np.asarray(masses, dtype=float)
        n = len(masses)
        if k_mat.shape != (n, n):
            raise ValueError(f"stiffness shape {k_mat.shape} does not match {n} masses")
        self.n_modes = n
        self.masses = masses
        root_m = np.sqrt(masses)
        weighted = k_mat / root_m[:, None] / root_m[None, :]
        evals, vecs = np.linalg.eigh(0.5 * (weighted + weighted.T))
        if evals[0] <= 0.0:
            raise ValueError(f"stiffness is not positive-definite (min eigenvalue {evals[0]:.3e})")
        self.frequencies = np.sqrt(evals)
        self.modes = vecs
        self._root_m = root_m
        self._perm = _block_to_interleaved_perm(n)

    @classmethod
    def from_model(cls, spec: ModelSpec, bath: BathSample, lambda_value: float = 1.0) -> "NormalModeFlow":
        masses = np.concatenate(([spec.m0], spec.bath_masses()))
        return cls(stiffness_matrix(spec, bath, lambda_value), masses)

    # -- coordinate plumbing -------------------------------------------------

    def _interleaved_to_scaled(self, s: Array) -> Array:
        """CM from interleaved physical to mass-weighted (x, y) block coords."""
        blk = s[np.ix_(self._perm, self._perm)]
        scale = np.concatenate((self._root_m, 1.0 / self._root_m))
        return blk * scale[:, None] * scale[None, :]

    def to_normal(self, s: Array) -> Array:
        """CM in normal-mode coordinates (xi, eta)."""
        n = self.n_modes
        xy = self._interleaved_to_scaled(s)
        v_t = self.modes.T
        out = np.empty_like(xy)
        out[:n, :n] = v_t @ xy[:n, :n] @ self.modes
        out[:n, n:] = v_t @ xy[:n, n:] @ self.modes
        out[n:, :n] = v_t @ xy[n:, :n] @ self.modes
        out[n:, n:] = v_t @ xy[n:, n:] @ self.modes
        return out

    def propagator(self, t: float) -> Array:
        """Exact exp(2 Omega H t) in the interleaved ordering."""
        n = self.n_modes
        w = self.frequencies
        cos_d = np.cos(w * t)
        sinc_d = np.sin(w * t) / w
        v = self.modes
        blocks = np.empty((2 * n, 2 * n))
        blocks[:n, :n] = (v * cos_d) @ v.T
        blocks[:n, n:] = (v * sinc_d) @ v.T
        blocks[n:, :n] = -(v * (w * np.sin(w * t))) @ v.T
        blocks[n:, n:] = blocks[:n, :n]
        scale = np.concatenate((1.0 / self._root_m, self._root_m))
        blocks = blocks * scale[:, None] / scale[None, :]
        out = np.empty_like(blocks)
        out[np.ix_(self._perm, self._perm)] = blocks
        return out

    def thermal_cm(self, beta: float) -> Array:
        """Thermal CM of this Hamiltonian at inverse temperature beta."""
        if beta <= 0.0:
            raise ValueError(f"beta must be positive, got {beta}")
        n = self.n_modes
        nus = gqm.coth(beta * self.frequencies / 2.0)
        uq = self.modes / np.sqrt(self.frequencies) / self._root_m[:, None]
        up = self.modes * np.sqrt(self.frequencies) * self._root_m[:, None]
        out = np.zeros((2 * n, 2 * n))
        qq = (uq * nus) @ uq.T
        pp = (up * nus) @ up.T
        out[np.ix_(self._perm[:n], self._perm[:n])] = 0.5 * (qq + qq.T)
        out[np.ix_(self._perm[n:], self._perm[n:])] = 0.5 * (pp + pp.T)
        return out

    def mode_weights(self, beta: float) -> tuple[Array, Array]:
        """(normal-mode frequencies, thermal symplectic eigenvalues)."""
        return self.frequencies, gqm.coth(beta * self.frequencies / 2.0)

    # -- evolved observables -------------------------------------------------

    def battery_blocks(self, s: Array, times: Array) -> Array:
        """Battery 2x2 CM blocks along the evolution, shape (len(times), 2, 2)."""
        n = self.n_modes
        nm = self.to_normal(s)
        w = self.frequencies
        v0 = self.modes[0]
        times = np.asarray(times, dtype=float)
        cos_t = np.cos(np.outer(times, w))
        sin_t = np.sin(np.outer(times, w))
        # Q0(t) = (a xi + b eta) / sqrt(m0),  P0(t) = sqrt(m0) (c xi + d eta)
        a = cos_t * v0
        b = sin_t / w * v0
        c = -(w * sin_t) * v0
        d = cos_t * v0
        m0 = self.masses[0]
        qq = self._quad(nm, a, b, a, b) / m0
        pp = self._quad(nm, c, d, c, d) * m0
        qp = self._quad(nm, a, b, c, d)
        out = np.empty((len(times), 2, 2))
        out[:, 0, 0] = qq
        out[:, 1, 1] = pp
        out[:, 0, 1] = out[:, 1, 0] = qp
        return out

    @staticmethod
    def _quad(nm: Array, a1: Array, b1: Array, a2: Array, b2: Array) -> Array:
        n = nm.shape[0] // 2
        axx = nm[:n, :n]
        axy = nm[:n, n:]
        ayy = nm[n:, n:]
        return (
            np.einsum("ti,ij,tj->t", a1, axx, a2)
            + np.einsum("ti,ij,tj->t", a1, axy, b2)
            + np.einsum("ti,ij,tj->t", b1, axy.T, a2)
            + np.einsum("ti,ij,tj->t", b1, ayy, b2)
        )

    def window_average(self, s: Array, t_start: float, t_end: float) -> "AveragedState":
        """Exact time average of the evolved CM over [t_start, t_end].

        The average of every cosine and sine of the mode-pair beat
        frequencies has closed form, so this is the exact window integral
        of the evolving covariance matrix, free of sampling alias.
        """
        if not t_end > t_start:
            raise ValueError("window must have positive length")
        return self._averaged(s, t_start, t_end)

    def dephased_average(self, s: Array) -> "AveragedState":
        """Infinite-time average of the evolved CM (diagonal ensemble)."""
        return self._averaged(s, None, None)

    def _averaged(self, s: Array, t_start: float | None, t_end: float | None) -> "AveragedState":
        n = self.n_modes
        nm = self.to_normal(s)
        w = self.frequencies
        wj = w[:, None]
        wk = w[None, :]

        if t_start is None:
            eye = np.eye(n)
            cc = ss = 0.5 * eye
            cs = sc = np.zeros((n, n))
        else:
            span = t_end - t_start

            def mean_cos(delta: Array) -> Array:
                small = np.abs(delta) < 1e-13
                safe = np.where(small, 1.0, delta)
                return np.where(small, 1.0, (np.sin(safe * t_end) - np.sin(safe * t_start)) / (safe * span))

            def mean_sin(delta: Array) -> Array:
                small = np.abs(delta) < 1e-13
                safe = np.where(small, 1.0, delta)
                return np.where(small, 0.0, (np.cos(safe * t_start) - np.cos(safe * t_end)) / (safe * span))

            dm = wj - wk
            dp = wj + wk
            cc = 0.5 * (mean_cos(dm) + mean_cos(dp))
            ss = 0.5 * (mean_cos(dm) - mean_cos(dp))
            cs = 0.5 * (mean_sin(dp) - mean_sin(dm))
            sc = 0.5 * (mean_sin(dp) + mean_sin(dm))

        axx = nm[:n, :n]
        axy = nm[:n, n:]
        ayx = nm[n:, :n]
        ayy = nm[n:, n:]
        # xi_j(t) = c_j xi_j + (s_j / w_j) eta_j ; eta_j(t) = -w_j s_j xi_j + c_j eta_j
        avg_xx = cc * axx + (cs / wk) * axy + (sc / wj) * ayx + (ss / (wj * wk)) * ayy
        avg_pp = (wj * wk * ss) * axx - (wj * sc) * axy - (wk * cs) * ayx + cc * ayy
        avg_xp = (-wk * cs) * axx + cc * axy - ((wk / wj) * ss) * ayx + (sc / wj) * ayy
        return AveragedState(self, avg_xx, avg_xp, avg_pp)


class AveragedState:
    """Window- or infinite-time-averaged second moments in normal coordinates."""

    def __init__(self, flow: NormalModeFlow, avg_xx: Array, avg_xp: Array, avg_pp: Array):
        self._flow = flow
        self._xx = avg_xx
        self._xp = avg_xp
        self._pp = avg_pp

    def battery_block(self) -> Array:
        v0 = self._flow.modes[0]
        m0 = self._flow.masses[0]
        qq = float(v0 @ self._xx @ v0) / m0
        pp = float(v0 @ self._pp @ v0) * m0
        qp = float(v0 @ self._xp @ v0)
        return np.array([[qq, qp], [qp, pp]])

    def position_variances(self) -> Array:
        """Diagonal <{Q_i, Q_i}> entries for all modes."""
        v = self._flow.modes
        return np.einsum("ij,jk,ik->i", v, self._xx, v) / self._flow.masses

    def momentum_variances(self) -> Array:
        v = self._flow.modes
        return np.einsum("ij,jk,ik->i", v, self._pp, v) * self._flow.masses

    def battery_position_row(self) -> Array:
        """<{Q_0, Q_i}> for all modes i (battery-bath position covariances)."""
        v = self._flow.modes
        row = (v[0] @ self._xx) @ v.T
        return row / np.sqrt(self._flow.masses[0] * self._flow.masses)
