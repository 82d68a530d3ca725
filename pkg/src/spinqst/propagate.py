"""Fixed-step propagation in the zero/one-excitation sector.

Schroedinger dynamics and the uniform-dephasing master equation

    drho/dt = i[rho, H(t)] + gamma * sum_l (s_l rho s_l - rho)

are integrated with a classical 4th-order fixed-step scheme on a uniform
grid.  Every run enforces two gates:

* spectral step gate: h * max_t ||H(t)|| <= 0.05 (sampled bound), and
* a grid-halving acceptance check: repeating the run at h/2 must move the
  final amplitudes by less than 1e-8.

The Hamiltonians used here are linear in a small set of time-dependent
coefficients, which ``LinearHamiltonian`` exploits: coefficient arrays are
sampled once on the half-step grid and the stage matrices are assembled in
vectorized chunks.  Batched variants propagate many sweep points at once
(shared grid, per-point coupling scale factors); arithmetic per point is
identical to the single-point path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ResolutionError

__all__ = [
    "LinearHamiltonian",
    "StateTrajectory",
    "evolve_state",
    "evolve_states_batch",
    "evolve_columns",
    "evolve_density",
    "evolve_density_multi",
    "transfer_fidelity",
    "averaged_fidelity",
    "spectral_bound",
    "phase_aligned_distance",
    "STEP_GATE",
    "HALVING_TOL",
]

STEP_GATE = 0.05
HALVING_TOL = 1e-8
NORM_TOL = 1e-8
_CHUNK = 2048
_GATE_SAMPLES = 65


class LinearHamiltonian:
    """H(t) = sum_m coeffs(t)[m] * mats[m] with vectorized coefficient sampling.

    ``mats`` is a sequence of (d, d) Hermitian arrays; ``coeffs`` maps an array
    of times (nt,) to an (nt, m) coefficient array.  Instances are callable as
    plain time -> matrix generators.
    """

    def __init__(self, mats, coeffs: Callable[[np.ndarray], np.ndarray]):
        self.mats = np.asarray(mats, dtype=complex)
        if self.mats.ndim != 3 or self.mats.shape[1] != self.mats.shape[2]:
            raise ValueError("mats must have shape (m, d, d)")
        self.coeffs = coeffs

    @property
    def dim(self) -> int:
        return self.mats.shape[1]

    def coefficient_array(self, times: np.ndarray) -> np.ndarray:
        c = np.asarray(self.coeffs(np.asarray(times, dtype=float)), dtype=float)
        if c.shape != (len(times), self.mats.shape[0]):
            raise ValueError(
                f"coeffs returned shape {c.shape}, expected ({len(times)}, "
                f"{self.mats.shape[0]})")
        return c

    def __call__(self, t: float) -> np.ndarray:
        c = self.coefficient_array(np.array([float(t)]))[0]
        return np.tensordot(c, self.mats, axes=(0, 0))

    @staticmethod
    def constant(H: np.ndarray) -> "LinearHamiltonian":
        H = np.asarray(H, dtype=complex)
        return LinearHamiltonian(
            H[None, :, :], lambda ts: np.ones((len(ts), 1)))


@dataclass
class StateTrajectory:
    """Stored propagation output (possibly decimated) plus fidelity series."""

    times: np.ndarray
    states: np.ndarray                      # (n_stored, d) or (n_stored, d, d)
    is_density: bool
    initial_state: np.ndarray
    sender_index: int = 1
    receiver_index: int | None = None       # defaults to the last basis entry
    f_series: np.ndarray | None = None
    F_series: np.ndarray | None = None
    propagator: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _as_linear(generator) -> LinearHamiltonian:
    if isinstance(generator, LinearHamiltonian):
        return generator

    def coeffs(ts):
        return np.ones((len(ts), 1))

    class _Wrapped(LinearHamiltonian):
        def __init__(self, gen):
            probe = np.asarray(gen(0.0), dtype=complex)
            super().__init__(probe[None], coeffs)
            self._gen = gen
            self._d = probe.shape[0]

        def stage_matrices(self, times):
            out = np.empty((len(times), self._d, self._d), dtype=complex)
            for i, t in enumerate(times):
                out[i] = self._gen(float(t))
            return out

        def __call__(self, t):
            return np.asarray(self._gen(float(t)), dtype=complex)

    return _Wrapped(generator)


def _stage_matrices(lin: LinearHamiltonian, times: np.ndarray) -> np.ndarray:
    if hasattr(lin, "stage_matrices"):
        return lin.stage_matrices(times)
    c = lin.coefficient_array(times)
    return np.tensordot(c, lin.mats, axes=(1, 0))


def spectral_bound(generator, grid: np.ndarray) -> float:
    """Sampled upper bound on max_t ||H(t)||_2 over the grid span."""
    lin = _as_linear(generator)
    ts = np.linspace(grid[0], grid[-1], min(_GATE_SAMPLES, len(grid)))
    Hs = _stage_matrices(lin, ts)
    bound = 0.0
    for H in Hs:
        w = np.linalg.eigvalsh(0.5 * (H + H.conj().T))
        bound = max(bound, float(np.max(np.abs(w))))
    return bound


def _check_grid(grid: np.ndarray) -> tuple[float, int]:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError("grid must contain at least two times")
    h = grid[1] - grid[0]
    if h <= 0 or not np.allclose(np.diff(grid), h, rtol=1e-9, atol=1e-12):
        raise ValueError("grid must be uniformly spaced and increasing")
    return float(h), len(grid) - 1


def _enforce_gate(generator, grid: np.ndarray, h: float, n: int) -> float:
    bound = spectral_bound(generator, grid)
    if h * bound > STEP_GATE * (1.0 + 1e-12):
        required = int(np.ceil(bound * (grid[-1] - grid[0]) / STEP_GATE))
        raise ResolutionError(
            f"step gate violated: h*bound = {h * bound:.3g} > {STEP_GATE}; "
            f"at least {required} steps are required on this interval",
            required_steps=required)
    return bound


def _rk4_run(lin: LinearHamiltonian, y0: np.ndarray, grid: np.ndarray,
             store_every: int | None):
    """Core fixed-step loop.  ``y0`` is (d,) for a state or (d, d) for a
    propagator/density-free run; returns (stored_indices, stored, final)."""
    h, n = _check_grid(grid)
    half = h / 2.0
    y = np.array(y0, dtype=complex)
    stored = None
    stored_idx = None
    if store_every is not None:
        idx = list(range(0, n + 1, store_every))
        if idx[-1] != n:
            idx.append(n)
        stored_idx = np.array(idx)
        stored = np.empty((len(idx),) + y.shape, dtype=complex)
        stored[0] = y
        next_slot = 1
    k = 0
    while k < n:
        m = min(_CHUNK, n - k)
        # clip: accumulated rounding may push the last stage a few ulp past T
        t_half = np.clip(grid[k] + half * np.arange(2 * m + 1),
                         grid[0], grid[-1])
        Hc = _stage_matrices(lin, t_half)
        for j in range(m):
            H0 = Hc[2 * j]
            H1 = Hc[2 * j + 1]
            H2 = Hc[2 * j + 2]
            k1 = -1j * (H0 @ y)
            k2 = -1j * (H1 @ (y + half * k1))
            k3 = -1j * (H1 @ (y + half * k2))
            k4 = -1j * (H2 @ (y + h * k3))
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            step = k + j + 1
            if stored is not None and next_slot < len(stored_idx) \
                    and step == stored_idx[next_slot]:
                stored[next_slot] = y
                next_slot += 1
        k += m
    return stored_idx, stored, y


def _halved_grid(grid: np.ndarray) -> np.ndarray:
    return np.linspace(grid[0], grid[-1], 2 * (len(grid) - 1) + 1)


def evolve_state(generator, psi0: np.ndarray, grid: np.ndarray,
                 track_propagator: bool = False, store_every: int = 1,
                 convergence_check: bool = True,
                 halving_tol: float = HALVING_TOL) -> StateTrajectory:
    """Propagate a pure state on a uniform grid.

    ``generator`` is a time -> Hermitian-matrix callable (a
    ``LinearHamiltonian`` enables the fast vectorized path).  The step gate
    h*||H|| <= 0.05 is enforced, the final norm drift must stay below 1e-8,
    and (unless disabled) the run is repeated at half the step to confirm the
    final amplitudes are converged to ``halving_tol``.
    """
    lin = _as_linear(generator)
    grid = np.asarray(grid, dtype=float)
    h, n = _check_grid(grid)
    _enforce_gate(lin, grid, h, n)
    psi0 = np.asarray(psi0, dtype=complex)

    if track_propagator:
        eye = np.eye(lin.dim, dtype=complex)
        stored_idx, stored_U, U = _rk4_run(lin, eye, grid, store_every)
        states = np.einsum("sij,j->si", stored_U, psi0)
        final = U @ psi0
        uerr = float(np.max(np.abs(U.conj().T @ U - eye)))
        if uerr > NORM_TOL:
            raise ResolutionError(
                f"propagator unitarity drift {uerr:.2e} exceeds {NORM_TOL:.0e}")
        propagator = U
    else:
        stored_idx, states, final = _rk4_run(lin, psi0, grid, store_every)
        propagator = None

    drift = abs(float(np.linalg.norm(final)) - float(np.linalg.norm(psi0)))
    if drift > NORM_TOL:
        raise ResolutionError(
            f"norm drift {drift:.2e} exceeds {NORM_TOL:.0e}; refine the grid")

    halving_diff = None
    if convergence_check:
        y0 = np.eye(lin.dim, dtype=complex) if track_propagator else psi0
        _, _, fine = _rk4_run(lin, y0, _halved_grid(grid), None)
        ref = fine @ psi0 if track_propagator else fine
        halving_diff = float(np.max(np.abs(ref - final)))
        if halving_diff > halving_tol:
            raise ResolutionError(
                f"grid-halving changed final amplitudes by {halving_diff:.2e} "
                f"(> {halving_tol:.0e}); use more steps", required_steps=2 * n)

    return StateTrajectory(
        times=grid[stored_idx], states=states, is_density=False,
        initial_state=psi0.copy(), propagator=propagator,
        meta={"steps": n, "h": h, "halving_diff": halving_diff},
    )


def _batch_rhs(P, Kflat, W, d, nm):
    X = P @ Kflat
    out = W[:, 0:1] * X[:, 0:d]
    for m in range(1, nm):
        out += W[:, m:m + 1] * X[:, m * d:(m + 1) * d]
    return out


def _rk4_batch_final(lin: LinearHamiltonian, psi0s: np.ndarray,
                     grid: np.ndarray, scales: np.ndarray) -> np.ndarray:
    h, n = _check_grid(grid)
    half = h / 2.0
    nm, d, _ = lin.mats.shape
    Kflat = np.concatenate([-1j * lin.mats[m].T for m in range(nm)], axis=1)
    P = np.array(psi0s, dtype=complex)
    B = P.shape[0]
    k = 0
    while k < n:
        m_steps = min(_CHUNK, n - k)
        t_half = np.clip(grid[k] + half * np.arange(2 * m_steps + 1),
                         grid[0], grid[-1])
        C = lin.coefficient_array(t_half)            # (nh, nm)
        W = C[:, None, :] * scales[None, :, :]       # (nh, B, nm)
        for j in range(m_steps):
            w0, w1, w2 = W[2 * j], W[2 * j + 1], W[2 * j + 2]
            k1 = _batch_rhs(P, Kflat, w0, d, nm)
            k2 = _batch_rhs(P + half * k1, Kflat, w1, d, nm)
            k3 = _batch_rhs(P + half * k2, Kflat, w1, d, nm)
            k4 = _batch_rhs(P + h * k3, Kflat, w2, d, nm)
            P = P + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        k += m_steps
    return P


def evolve_states_batch(generator: LinearHamiltonian, psi0s: np.ndarray,
                        grid: np.ndarray, scales: np.ndarray | None = None,
                        convergence_check: bool = True,
                        halving_tol: float = HALVING_TOL) -> np.ndarray:
    """Propagate a batch of states sharing the grid; returns final states.

    ``scales`` (batch, n_mats) multiplies the generator coefficients per batch
    member (static perturbations of the coupling terms).  Per-member
    arithmetic matches ``evolve_state``; gates are enforced on the worst
    member (scale factors <= 2 are folded into the spectral bound).
    """
    psi0s = np.atleast_2d(np.asarray(psi0s, dtype=complex))
    B = psi0s.shape[0]
    nm = generator.mats.shape[0]
    if scales is None:
        scales = np.ones((B, nm))
    scales = np.asarray(scales, dtype=float)
    grid = np.asarray(grid, dtype=float)
    h, n = _check_grid(grid)
    bound = spectral_bound(generator, grid) * max(1.0, float(np.max(np.abs(scales))))
    if h * bound > STEP_GATE * (1.0 + 1e-12):
        required = int(np.ceil(bound * (grid[-1] - grid[0]) / STEP_GATE))
        raise ResolutionError(
            f"step gate violated for batch: h*bound = {h * bound:.3g} > {STEP_GATE}",
            required_steps=required)

    final = _rk4_batch_final(generator, psi0s, grid, scales)
    drift = float(np.max(np.abs(np.linalg.norm(final, axis=1)
                                - np.linalg.norm(psi0s, axis=1))))
    if drift > NORM_TOL:
        raise ResolutionError(f"batch norm drift {drift:.2e} exceeds {NORM_TOL:.0e}")
    if convergence_check:
        fine = _rk4_batch_final(generator, psi0s, _halved_grid(grid), scales)
        diff = float(np.max(np.abs(fine - final)))
        if diff > halving_tol:
            raise ResolutionError(
                f"grid-halving changed batch final amplitudes by {diff:.2e}",
                required_steps=2 * n)
    return final


def evolve_columns(generator, columns: np.ndarray, grid: np.ndarray,
                   convergence_check: bool = True,
                   halving_tol: float = HALVING_TOL) -> np.ndarray:
    """Propagate a (d, k) block of orthonormal columns; returns U(T) @ columns.

    Cheaper than tracking the full propagator when only a few image vectors
    are needed.  Enforces the step gate, per-column norm drift and the
    grid-halving check.
    """
    lin = _as_linear(generator)
    grid = np.asarray(grid, dtype=float)
    h, n = _check_grid(grid)
    _enforce_gate(lin, grid, h, n)
    cols = np.asarray(columns, dtype=complex)
    _, _, final = _rk4_run(lin, cols, grid, None)
    drift = float(np.max(np.abs(np.linalg.norm(final, axis=0)
                                - np.linalg.norm(cols, axis=0))))
    if drift > NORM_TOL:
        raise ResolutionError(
            f"column norm drift {drift:.2e} exceeds {NORM_TOL:.0e}")
    if convergence_check:
        _, _, fine = _rk4_run(lin, cols, _halved_grid(grid), None)
        diff = float(np.max(np.abs(fine - final)))
        if diff > halving_tol:
            raise ResolutionError(
                f"grid-halving changed evolved columns by {diff:.2e}",
                required_steps=2 * n)
    return final


def _lindblad_decay_matrix(dim: int, sign_table: np.ndarray | None) -> np.ndarray:
    """Element-wise coherence decay rates (for unit gamma): S - n_sites with
    S_mn = sum_l s_l(m) s_l(n).  Diagonal entries vanish."""
    if sign_table is None:
        # default: sector basis [ |0>, |1>, ..., |N> ] with N = dim - 1 sites
        n_sites = dim - 1
        signs = -np.ones((n_sites, dim))
        for l in range(1, n_sites + 1):
            signs[l - 1, l] = 1.0
    else:
        signs = np.asarray(sign_table, dtype=float)
        if signs.shape[1] != dim:
            raise ValueError(
                f"sign table has {signs.shape[1]} columns, expected {dim}")
        n_sites = signs.shape[0]
    S = signs.T @ signs
    return S - float(n_sites)


def _rk4_density_final(lin: LinearHamiltonian, rho0s: np.ndarray,
                       grid: np.ndarray, G: np.ndarray,
                       store_every: int | None):
    """RK4 for d(rho)/dt = i[rho, H] + G*rho (elementwise damping term).

    ``rho0s`` is (B, d, d); G is (B, d, d) elementwise rates."""
    h, n = _check_grid(grid)
    half = h / 2.0
    R = np.array(rho0s, dtype=complex)
    stored = None
    stored_idx = None
    if store_every is not None:
        idx = list(range(0, n + 1, store_every))
        if idx[-1] != n:
            idx.append(n)
        stored_idx = np.array(idx)
        stored = np.empty((len(idx),) + R.shape, dtype=complex)
        stored[0] = R
        next_slot = 1

    def rhs(Rm, H):
        HR = H @ Rm
        return 1j * (HR.conj().transpose(0, 2, 1) - HR) + G * Rm

    k = 0
    while k < n:
        m_steps = min(_CHUNK, n - k)
        t_half = np.clip(grid[k] + half * np.arange(2 * m_steps + 1),
                         grid[0], grid[-1])
        Hc = _stage_matrices(lin, t_half)
        for j in range(m_steps):
            H0, H1, H2 = Hc[2 * j], Hc[2 * j + 1], Hc[2 * j + 2]
            k1 = rhs(R, H0)
            k2 = rhs(R + half * k1, H1)
            k3 = rhs(R + half * k2, H1)
            k4 = rhs(R + h * k3, H2)
            R = R + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            step = k + j + 1
            if stored is not None and next_slot < len(stored_idx) \
                    and step == stored_idx[next_slot]:
                stored[next_slot] = R
                next_slot += 1
        k += m_steps
    return stored_idx, stored, R


def evolve_density(generator, rho0: np.ndarray, gamma: float, grid: np.ndarray,
                   sign_table: np.ndarray | None = None, store_every: int = 1,
                   convergence_check: bool = True,
                   halving_tol: float = HALVING_TOL) -> StateTrajectory:
    """Integrate the dephasing master equation for one density matrix.

    The jump operators are the diagonal sigma_z of each site restricted to
    the propagation basis; by default the (N+1)-dim sector convention is used
    (N = dim - 1 sites).  ``sign_table`` overrides the diagonal signs, e.g.
    for full 2^N-space oracles.  gamma >= 0 is the uniform rate.
    """
    if gamma < 0:
        raise ValueError(f"dephasing rate gamma must be >= 0, got {gamma}")
    lin = _as_linear(generator)
    grid = np.asarray(grid, dtype=float)
    h, n = _check_grid(grid)
    _enforce_gate(lin, grid, h, n)
    rho0 = np.asarray(rho0, dtype=complex)
    d = rho0.shape[0]
    G = gamma * _lindblad_decay_matrix(d, sign_table)

    stored_idx, stored, final = _rk4_density_final(
        lin, rho0[None], grid, G[None], store_every)
    states = stored[:, 0]
    final = final[0]

    tr_drift = abs(float(np.trace(final).real) - float(np.trace(rho0).real))
    if tr_drift > NORM_TOL:
        raise ResolutionError(f"trace drift {tr_drift:.2e} exceeds {NORM_TOL:.0e}")
    herm = float(np.max(np.abs(final - final.conj().T)))
    if herm > 1e-9:
        raise ResolutionError(f"hermiticity drift {herm:.2e} exceeds 1e-9")

    halving_diff = None
    if convergence_check:
        _, _, fine = _rk4_density_final(lin, rho0[None], _halved_grid(grid),
                                        G[None], None)
        halving_diff = float(np.max(np.abs(fine[0] - final)))
        if halving_diff > halving_tol:
            raise ResolutionError(
                f"grid-halving changed the final density matrix by "
                f"{halving_diff:.2e}", required_steps=2 * n)

    return StateTrajectory(
        times=grid[stored_idx], states=states, is_density=True,
        initial_state=rho0.copy(),
        meta={"steps": n, "h": h, "gamma": gamma, "halving_diff": halving_diff},
    )


def evolve_density_multi(generator, rho0: np.ndarray, gammas: np.ndarray,
                         grid: np.ndarray, sign_table: np.ndarray | None = None,
                         convergence_check: bool = True,
                         halving_tol: float = HALVING_TOL) -> np.ndarray:
    """Batched variant of ``evolve_density`` over a vector of rates.

    All members share the Hamiltonian and initial state; returns the final
    density matrices, shape (len(gammas), d, d).
    """
    gammas = np.asarray(gammas, dtype=float)
    if np.any(gammas < 0):
        raise ValueError("all dephasing rates must be >= 0")
    lin = _as_linear(generator)
    grid = np.asarray(grid, dtype=float)
    h, n = _check_grid(grid)
    _enforce_gate(lin, grid, h, n)
    rho0 = np.asarray(rho0, dtype=complex)
    d = rho0.shape[0]
    Gunit = _lindblad_decay_matrix(d, sign_table)
    G = gammas[:, None, None] * Gunit[None]
    R0 = np.broadcast_to(rho0, (len(gammas), d, d)).copy()

    _, _, final = _rk4_density_final(lin, R0, grid, G, None)
    tr = np.trace(final, axis1=1, axis2=2).real
    if float(np.max(np.abs(tr - np.trace(rho0).real))) > NORM_TOL:
        raise ResolutionError("trace drift exceeds gate in batched density run")
    if convergence_check:
        _, _, fine = _rk4_density_final(lin, R0, _halved_grid(grid), G, None)
        diff = float(np.max(np.abs(fine - final)))
        if diff > halving_tol:
            raise ResolutionError(
                f"grid-halving changed batched density output by {diff:.2e}",
                required_steps=2 * n)
    return final


def averaged_fidelity(abs_f):
    """Input-averaged transfer fidelity 1/2 + |f|/3 + |f|^2/6.

    Evaluated as 1/2 + |f|(2 + |f|)/6, which is exact at |f| = 0, 1/2, 1.
    """
    a = np.abs(abs_f)
    return 0.5 + a * (2.0 + a) / 6.0


def transfer_fidelity(traj: StateTrajectory, N: int):
    """Transfer amplitude and averaged fidelity along a trajectory.

    The trajectory must start from the sender basis state (pure |1>-like, or
    its projector for a density run).  Pure case: f(t) is the receiver
    amplitude; density case: |f(t)| = sqrt(receiver population).  The series
    are attached to the trajectory and returned.
    """
    recv = traj.receiver_index if traj.receiver_index is not None else traj.dim - 1
    send = traj.sender_index
    init = traj.initial_state
    if traj.is_density:
        ok = abs(init[send, send] - 1.0) < 1e-12 \
            and abs(np.trace(init) - 1.0) < 1e-12
    else:
        ok = abs(abs(init[send]) - 1.0) < 1e-12
    if not ok:
        raise ValueError(
            "trajectory did not start from the sender basis state; "
            "transfer fidelity is defined for psi(0) = |1> or rho(0) = |1><1|")

    if traj.is_density:
        pops = np.clip(traj.states[:, recv, recv].real, 0.0, None)
        f = np.sqrt(pops).astype(complex)
    else:
        f = traj.states[:, recv].copy()
    absf = np.abs(f)
    if np.any(absf > 1.0 + 1e-9):
        raise ValueError(f"|f| exceeded 1 by {np.max(absf) - 1.0:.2e}")
    F = averaged_fidelity(absf)
    traj.f_series = f
    traj.F_series = F
    return f, F


def phase_aligned_distance(a: np.ndarray, b: np.ndarray) -> float:
    """min over global phase alpha of ||a - e^{i alpha} b|| (Frobenius for
    matrices), the gauge-invariant distance between states or propagators."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    overlap = np.vdot(b, a)
    na2 = float(np.vdot(a, a).real)
    nb2 = float(np.vdot(b, b).real)
    val = na2 + nb2 - 2.0 * abs(overlap)
    return float(np.sqrt(max(val, 0.0)))
