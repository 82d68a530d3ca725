import math

import numpy as np
import pytest
import scipy.linalg

from spinqst.errors import ResolutionError
from spinqst.model import (
    ChainModel,
    dephasing_sign_table,
    full_dephasing_sign_table,
    full_spin_hamiltonian,
    single_excitation_hamiltonian,
    single_excitation_indices,
)
from spinqst.propagate import (
    LinearHamiltonian,
    averaged_fidelity,
    evolve_columns,
    evolve_density,
    evolve_density_multi,
    evolve_state,
    evolve_states_batch,
    phase_aligned_distance,
    spectral_bound,
    transfer_fidelity,
)


def grid_n(n, T=1.0):
    return np.linspace(0.0, T, n + 1)


def lindblad_superoperator(H, gamma, signs):
    """Brute-force (d^2, d^2) generator of the dephasing master equation,
    acting on row-major-flattened density matrices:
    rho*H -> (I kron H^T), H*rho -> (H kron I), D*rho*D -> (D kron D)."""
    d = H.shape[0]
    eye = np.eye(d)
    L = 1j * (np.kron(eye, H.T) - np.kron(H, eye))
    n_sites = signs.shape[0]
    for l in range(n_sites):
        D = np.diag(signs[l])
        L += gamma * np.kron(D, D)
    L -= gamma * n_sites * np.kron(eye, eye)
    return L


class TestEvolveState:
    def test_constant_diagonal_phases(self):
        D = np.diag([0.3, -0.7, 1.1])
        gen = LinearHamiltonian.constant(D)
        for k in range(3):
            psi0 = np.zeros(3, complex)
            psi0[k] = 1.0
            traj = evolve_state(gen, psi0, grid_n(2000))
            expected = np.exp(-1j * D[k, k] * 1.0)
            assert abs(traj.final_state[k] - expected) < 1e-10
            assert abs(abs(traj.final_state[k]) - 1.0) < 1e-12

    def test_zero_generator_constant_trajectory(self):
        gen = LinearHamiltonian.constant(np.zeros((2, 2)))
        psi0 = np.array([0.6, 0.8], complex)
        traj = evolve_state(gen, psi0, grid_n(1000), store_every=100)
        assert np.max(np.abs(traj.states - psi0)) == 0.0

    def test_step_gate_violation_names_required_steps(self):
        gen = LinearHamiltonian.constant(np.diag([100.0, -100.0]))
        with pytest.raises(ResolutionError) as exc:
            evolve_state(gen, np.array([1.0, 0.0], complex), grid_n(10))
        assert exc.value.required_steps == 2000

    def test_accuracy_gates_catch_marginal_grid(self):
        # right at the spectral gate the accumulated error is ~1e-5; the
        # norm-drift or grid-halving gate must flag it
        omega = 120.0
        gen = LinearHamiltonian.constant(np.diag([omega, -omega]))
        psi0 = np.array([1.0, 0.0], complex)
        with pytest.raises(ResolutionError, match="drift|halving"):
            evolve_state(gen, psi0, grid_n(2400))
        # an 8x finer grid passes every gate
        evolve_state(gen, psi0, grid_n(19200))

    def test_matches_closed_form_two_level(self):
        H = np.array([[0.4, 1.3], [1.3, -0.4]], complex)
        gen = LinearHamiltonian.constant(H)
        psi0 = np.array([1.0, 0.0], complex)
        traj = evolve_state(gen, psi0, grid_n(4000))
        expected = scipy.linalg.expm(-1j * H) @ psi0
        assert np.max(np.abs(traj.final_state - expected)) < 1e-10

    def test_track_propagator_unitary_and_consistent(self):
        mats = np.stack([np.array([[0.0, 1.0], [1.0, 0.0]]),
                         np.array([[1.0, 0.0], [0.0, -1.0]])]).astype(complex)
        gen = LinearHamiltonian(
            mats, lambda ts: np.stack([np.sin(np.pi * ts) ** 2,
                                       0.5 * np.cos(np.pi * ts)], axis=1))
        psi0 = np.array([1.0, 0.0], complex)
        tracked = evolve_state(gen, psi0, grid_n(4000), track_propagator=True)
        U = tracked.propagator
        assert np.max(np.abs(U.conj().T @ U - np.eye(2))) < 1e-8
        direct = evolve_state(gen, psi0, grid_n(4000))
        assert np.max(np.abs(tracked.final_state - direct.final_state)) < 1e-9

    def test_store_every_includes_endpoints(self):
        gen = LinearHamiltonian.constant(np.zeros((2, 2)))
        traj = evolve_state(gen, np.array([1, 0], complex), grid_n(1000),
                            store_every=300)
        assert traj.times[0] == 0.0
        assert traj.times[-1] == 1.0
        assert len(traj.times) == 5  # 0, 300, 600, 900, 1000

    def test_generic_callable_generator(self):
        H = np.array([[0.0, 0.6], [0.6, 0.0]], complex)
        traj = evolve_state(lambda t: H * math.sin(math.pi * t),
                            np.array([1, 0], complex), grid_n(2000))
        area = 0.6 * 2.0 / math.pi
        expected = np.array([math.cos(area), -1j * math.sin(area)])
        assert np.max(np.abs(traj.final_state - expected)) < 1e-8


class TestLinearHamiltonian:
    def test_call_assembles_matrix(self):
        mats = np.stack([np.eye(2), np.array([[0, 1], [1, 0]])]).astype(complex)
        gen = LinearHamiltonian(
            mats, lambda ts: np.stack([ts, 2.0 * ts], axis=1))
        H = gen(0.5)
        assert np.allclose(H, 0.5 * np.eye(2) + 1.0 * np.array([[0, 1], [1, 0]]))

    def test_spectral_bound_covers_peak(self):
        mats = np.stack([np.diag([1.0, -1.0])]).astype(complex)
        gen = LinearHamiltonian(
            mats, lambda ts: (np.sin(np.pi * ts) ** 2)[:, None] * 10.0)
        assert spectral_bound(gen, grid_n(100)) >= 9.9


class TestBatchedEvolution:
    def test_batch_matches_single(self, rng):
        d = 3
        A = rng.normal(size=(d, d)); A = A + A.T
        B = rng.normal(size=(d, d)); B = B + B.T
        mats = np.stack([A, B]).astype(complex)
        gen = LinearHamiltonian(
            mats, lambda ts: np.stack([np.sin(np.pi * ts) ** 2,
                                       np.cos(0.5 * np.pi * ts)], axis=1))
        psi0 = np.zeros(d, complex)
        psi0[0] = 1.0
        scales = np.array([[1.0, 1.0], [1.05, 0.95], [0.9, 1.1]])
        finals = evolve_states_batch(gen, np.tile(psi0, (3, 1)), grid_n(3000),
                                     scales=scales)
        for b in range(3):
            gen_b = LinearHamiltonian(
                mats, lambda ts, s=scales[b]: np.stack(
                    [s[0] * np.sin(np.pi * ts) ** 2,
                     s[1] * np.cos(0.5 * np.pi * ts)], axis=1))
            single = evolve_state(gen_b, psi0, grid_n(3000))
            assert np.max(np.abs(finals[b] - single.final_state)) < 1e-12

    def test_evolve_columns_matches_propagator(self):
        H = np.array([[0.2, 0.9, 0.0], [0.9, -0.1, 0.4], [0.0, 0.4, 0.3]],
                     complex)
        gen = LinearHamiltonian.constant(H)
        cols = np.eye(3, dtype=complex)[:, :2]
        K = evolve_columns(gen, cols, grid_n(2000))
        U = scipy.linalg.expm(-1j * H)
        assert np.max(np.abs(K - U[:, :2])) < 1e-10


class TestEvolveDensity:
    def test_rejects_negative_rate(self):
        gen = LinearHamiltonian.constant(np.zeros((3, 3)))
        rho0 = np.diag([1.0, 0.0, 0.0]).astype(complex)
        with pytest.raises(ValueError):
            evolve_density(gen, rho0, -0.1, grid_n(1000))

    def test_diagonal_state_is_stationary_without_hamiltonian(self):
        d = 5  # N = 4 sector
        gen = LinearHamiltonian.constant(np.zeros((d, d)))
        rho0 = np.diag([0.1, 0.5, 0.2, 0.1, 0.1]).astype(complex)
        traj = evolve_density(gen, rho0, 0.8, grid_n(1000))
        assert np.max(np.abs(traj.final_state - rho0)) < 1e-12

    def test_single_excitation_coherence_rate(self):
        # sites m != n (both excited states): sum of sign products is N-4,
        # so the decay rate is gamma*(N - (N-4)) = 4*gamma
        N, gamma, T = 6, 0.7, 1.0
        d = N + 1
        gen = LinearHamiltonian.constant(np.zeros((d, d)))
        rho0 = np.zeros((d, d), complex)
        rho0[2, 2] = rho0[5, 5] = 0.5
        rho0[2, 5] = rho0[5, 2] = 0.5
        traj = evolve_density(gen, rho0, gamma, grid_n(2000))
        expected = 0.5 * math.exp(-4.0 * gamma * T)
        assert abs(traj.final_state[2, 5].real - expected) < 1e-9

    def test_vacuum_coherence_rate(self):
        # vacuum vs excited state: sum of sign products is N-2 -> rate 2*gamma
        N, gamma, T = 6, 0.7, 1.0
        d = N + 1
        gen = LinearHamiltonian.constant(np.zeros((d, d)))
        rho0 = np.zeros((d, d), complex)
        rho0[0, 0] = rho0[3, 3] = 0.5
        rho0[0, 3] = rho0[3, 0] = 0.5
        traj = evolve_density(gen, rho0, gamma, grid_n(2000))
        expected = 0.5 * math.exp(-2.0 * gamma * T)
        assert abs(traj.final_state[0, 3].real - expected) < 1e-9

    def test_matches_brute_force_superoperator(self):
        # constant Hamiltonian plus dephasing vs dense matrix exponential
        N = 4
        model = ChainModel(N=N, J_B=2.0)
        sub = single_excitation_hamiltonian(model, 0.4, 0.7)
        H = sub.total.astype(complex)
        gamma = 0.35
        d = N + 1
        gen = LinearHamiltonian.constant(H)
        rho0 = np.zeros((d, d), complex)
        rho0[1, 1] = 1.0
        traj = evolve_density(gen, rho0, gamma, grid_n(4000))
        L = lindblad_superoperator(H, gamma, dephasing_sign_table(N))
        rho_ref = (scipy.linalg.expm(L) @ rho0.reshape(-1)).reshape(d, d)
        assert np.max(np.abs(traj.final_state - rho_ref)) < 1e-8

    def test_zero_rate_matches_pure_state(self):
        H = np.array([[0.3, 1.1, 0.0], [1.1, -0.2, 0.7], [0.0, 0.7, 0.1]],
                     complex)
        gen = LinearHamiltonian.constant(H)
        psi0 = np.array([0.0, 1.0, 0.0], complex)
        traj_p = evolve_state(gen, psi0, grid_n(2000))
        rho0 = np.outer(psi0, psi0.conj())
        traj_d = evolve_density(gen, rho0, 0.0, grid_n(2000))
        proj = np.outer(traj_p.final_state, traj_p.final_state.conj())
        assert np.max(np.abs(traj_d.final_state - proj)) < 1e-7

    def test_density_trace_and_hermiticity(self):
        d = 5
        H = np.diag(np.arange(d, dtype=float)).astype(complex)
        gen = LinearHamiltonian.constant(H)
        rho0 = np.full((d, d), 1.0 / d, dtype=complex)
        traj = evolve_density(gen, rho0, 0.4, grid_n(2000))
        rho = traj.final_state
        assert abs(np.trace(rho).real - 1.0) < 1e-8
        assert np.max(np.abs(rho - rho.conj().T)) < 1e-9
        assert np.min(np.linalg.eigvalsh(rho)) > -1e-9

    def test_multi_matches_scalar(self):
        d = 4
        H = np.array([[0.0, 0.5, 0, 0], [0.5, 0.1, 0.5, 0],
                      [0, 0.5, -0.1, 0.5], [0, 0, 0.5, 0.0]], complex)
        gen = LinearHamiltonian.constant(H)
        rho0 = np.zeros((d, d), complex)
        rho0[1, 1] = 1.0
        gammas = np.array([0.0, 0.2, 0.6])
        finals = evolve_density_multi(gen, rho0, gammas, grid_n(2000))
        for g, rho in zip(gammas, finals):
            ref = evolve_density(gen, rho0, float(g), grid_n(2000))
            assert np.max(np.abs(rho - ref.final_state)) < 1e-12


class TestSectorVersusFullLindblad:
    def test_subspace_agrees_with_full_space(self, rng):
        # sigma_z jump operators preserve excitation number, so sector and
        # 2^N propagation agree on sector initial data
        N = 4
        JBT = 30.0
        model = ChainModel(N=N, J_B=JBT)
        gamma = 0.1  # gamma*T = 0.1

        def coeffs(ts):
            out = np.empty((len(ts), 3))
            out[:, 0] = 0.8 * np.sin(np.pi * ts) ** 2
            out[:, 1] = 0.6 * np.sin(np.pi * ts) ** 2 * np.cos(np.pi * ts / 2)
            out[:, 2] = 1.0
            return out

        sub0 = single_excitation_hamiltonian(model, 0.0, 0.0)
        subS = single_excitation_hamiltonian(model, 1.0, 0.0).H0
        subR = single_excitation_hamiltonian(model, 0.0, 1.0).H0
        gen_sub = LinearHamiltonian(
            np.stack([subS, subR, sub0.HB]).astype(complex), coeffs)

        F0 = full_spin_hamiltonian(model, 0.0, 0.0).toarray()
        FS = full_spin_hamiltonian(model, 1.0, 0.0).toarray() - F0
        FR = full_spin_hamiltonian(model, 0.0, 1.0).toarray() - F0
        gen_full = LinearHamiltonian(np.stack([FS, FR, F0]).astype(complex),
                                     coeffs)

        d = N + 1
        rho0 = np.zeros((d, d), complex)
        rho0[1, 1] = 1.0
        traj_sub = evolve_density(gen_sub, rho0, gamma, grid_n(20000))

        idx = single_excitation_indices(N)
        rho0_full = np.zeros((2 ** N, 2 ** N), complex)
        rho0_full[idx[1], idx[1]] = 1.0
        traj_full = evolve_density(gen_full, rho0_full, gamma, grid_n(20000),
                                   sign_table=full_dephasing_sign_table(N))
        restr = traj_full.final_state[np.ix_(idx, idx)]
        assert np.max(np.abs(restr - traj_sub.final_state)) < 1e-6


class TestTransferFidelity:
    def test_metric_identities(self):
        assert averaged_fidelity(1.0) == 1.0
        assert averaged_fidelity(0.0) == 0.5
        assert abs(averaged_fidelity(0.5) - 17.0 / 24.0) < 1e-15

    def test_monotone_and_shared_argmax(self):
        absf = np.abs(np.sin(np.linspace(0.0, 2.5 * np.pi, 301)))
        F = averaged_fidelity(absf)
        assert np.argmax(F) == np.argmax(absf)
        order = np.argsort(absf)
        assert np.all(np.diff(F[order]) >= 0.0)

    def test_pure_series_and_attachment(self):
        gen = LinearHamiltonian.constant(np.zeros((4, 4)))
        psi0 = np.zeros(4, complex)
        psi0[1] = 1.0
        traj = evolve_state(gen, psi0, grid_n(1000), store_every=500)
        f, F = transfer_fidelity(traj, 3)
        assert np.all(f == 0.0)
        assert np.all(F == 0.5)
        assert traj.f_series is not None and traj.F_series is not None

    def test_density_series(self):
        d = 4
        gen = LinearHamiltonian.constant(np.zeros((d, d)))
        rho0 = np.zeros((d, d), complex)
        rho0[1, 1] = 1.0
        traj = evolve_density(gen, rho0, 0.3, grid_n(1000))
        f, F = transfer_fidelity(traj, 3)
        assert f[-1] == 0.0 and F[-1] == 0.5

    def test_wrong_initial_state_rejected(self):
        gen = LinearHamiltonian.constant(np.zeros((4, 4)))
        psi0 = np.array([1.0, 0.0, 0.0, 0.0], complex)  # vacuum, not sender
        traj = evolve_state(gen, psi0, grid_n(1000))
        with pytest.raises(ValueError):
            transfer_fidelity(traj, 3)


class TestPhaseAlignedDistance:
    def test_global_phase_invisible(self, rng):
        v = rng.normal(size=5) + 1j * rng.normal(size=5)
        v /= np.linalg.norm(v)
        assert phase_aligned_distance(v, np.exp(0.456j) * v) < 1e-12

    def test_orthogonal_states(self):
        a = np.array([1.0, 0.0], complex)
        b = np.array([0.0, 1.0], complex)
        assert phase_aligned_distance(a, b) == pytest.approx(math.sqrt(2.0))
