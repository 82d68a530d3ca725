import math

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sparse

from spinqst.model import (
    ChainModel,
    bus_mirror_matrix,
    bus_spectrum,
    dephasing_sign_table,
    full_dephasing_sign_table,
    full_spin_hamiltonian,
    matrix_to_csv,
    restrict_to_sector,
    rotated_hamiltonian,
    single_excitation_hamiltonian,
    single_excitation_indices,
    sn_transform,
    zeno_effective_hamiltonian,
    zeno_frame,
    zeno_isometry,
)


def three_site_matrix(J_S, J_R):
    return np.array([
        [J_R + J_S, 0.0, 0.0, 0.0],
        [0.0, J_R - J_S, 2 * J_S, 0.0],
        [0.0, 2 * J_S, -J_R - J_S, 2 * J_R],
        [0.0, 0.0, 2 * J_R, J_S - J_R],
    ])


class TestChainModel:
    def test_rejects_short_chain(self):
        with pytest.raises(ValueError):
            ChainModel(N=2)

    def test_rejects_nonpositive_bus(self):
        with pytest.raises(ValueError):
            ChainModel(N=5, J_B=0.0)


class TestSingleExcitation:
    def test_three_site_layout(self):
        sub = single_excitation_hamiltonian(ChainModel(N=3), 0.3, 0.8)
        assert np.allclose(sub.H0, three_site_matrix(0.3, 0.8), atol=1e-15)
        assert np.all(sub.HB == 0.0)

    def test_zero_couplings_zero_boundary(self):
        sub = single_excitation_hamiltonian(ChainModel(N=7), 0.0, 0.0)
        assert np.all(sub.H0 == 0.0)

    def test_band_layout_entries(self):
        N, J_S, J_R, J_B = 8, 0.4, 0.9, 2.0
        sub = single_excitation_hamiltonian(ChainModel(N=N, J_B=J_B), J_S, J_R)
        H0, HB = sub.H0, sub.HB
        assert H0[0, 0] == J_R + J_S
        assert H0[1, 1] == H0[2, 2] == J_R - J_S
        assert H0[1, 2] == 2 * J_S
        assert H0[4, 4] == J_R + J_S
        assert H0[N - 1, N - 1] == H0[N, N] == J_S - J_R
        assert H0[N - 1, N] == 2 * J_R
        assert HB[0, 0] == HB[1, 1] == HB[N, N] == (N - 3) * J_B
        assert HB[2, 2] == HB[N - 1, N - 1] == (N - 5) * J_B
        assert HB[4, 4] == (N - 7) * J_B
        assert HB[3, 4] == 2 * J_B
        assert HB[1, 2] == 0.0

    @pytest.mark.parametrize("N", range(3, 11))
    def test_hermitian(self, N, rng):
        J_S, J_R = rng.uniform(-1, 1, size=2)
        sub = single_excitation_hamiltonian(ChainModel(N=N), J_S, J_R)
        assert np.max(np.abs(sub.H0 - sub.H0.T)) < 1e-12
        assert np.max(np.abs(sub.HB - sub.HB.T)) < 1e-12

    def test_bus_commutes_with_zeno_projector(self):
        for N in range(4, 10):
            model = ChainModel(N=N, J_B=1.7)
            sub = single_excitation_hamiltonian(model, 0.2, 0.5)
            P1 = zeno_frame(model, 0.2, 0.5).P1
            comm = sub.HB @ P1 - P1 @ sub.HB
            assert np.max(np.abs(comm)) < 1e-12


class TestBusSpectrum:
    def test_mirror_matrix_eigenvalues(self):
        for N in range(4, 13):
            M = bus_mirror_matrix(N)
            num = np.sort(np.linalg.eigvalsh(M))
            p = np.arange(1, N - 1)
            ref = np.sort(2.0 * np.cos((p - 1) * np.pi / (N - 2)))
            assert np.max(np.abs(num - ref)) < 1e-10

    def test_top_eigenvalue_matches_boundary_block(self):
        for N in range(4, 13):
            eps, _ = bus_spectrum(ChainModel(N=N, J_B=3.0))
            assert eps[0] == (N - 3) * 3.0

    def test_eigenvalues_nondegenerate(self):
        for N in range(4, 13):
            eps, _ = bus_spectrum(ChainModel(N=N))
            assert np.min(np.diff(np.sort(eps)[::-1] * -1)) > 1e-12
            assert len(np.unique(np.round(eps, 12))) == N - 2

    def test_phi3_is_bus_eigenvector(self):
        model = ChainModel(N=5, J_B=2.5)
        _, phi3 = bus_spectrum(model)
        sub = single_excitation_hamiltonian(model, 0.1, 0.9)
        resid = sub.HB @ phi3 - (5 - 3) * 2.5 * phi3
        assert np.max(np.abs(resid)) < 1e-12

    def test_requires_interior_bus(self):
        with pytest.raises(ValueError):
            bus_spectrum(ChainModel(N=3))

    def test_closed_form_matches_bus_block_spectrum(self):
        for N in range(4, 10):
            model = ChainModel(N=N, J_B=1.3)
            sub = single_excitation_hamiltonian(model, 0.0, 0.0)
            block = sub.HB[2:N, 2:N]
            num = np.sort(np.linalg.eigvalsh(block))
            eps, _ = bus_spectrum(model)
            assert np.max(np.abs(num - np.sort(eps))) < 1e-10


class TestZenoEffective:
    def test_three_site_equality(self):
        H = zeno_effective_hamiltonian(ChainModel(N=3), 0.37, 0.81)
        assert np.max(np.abs(H - three_site_matrix(0.37, 0.81))) < 1e-14

    def test_offdiagonal_entries(self):
        N, J_S, J_R = 6, 0.25, 0.65
        H = zeno_effective_hamiltonian(ChainModel(N=N), J_S, J_R)
        assert H[1, 2] == pytest.approx(2 * J_S / math.sqrt(N - 2), abs=1e-15)
        assert H[2, 3] == pytest.approx(2 * J_R / math.sqrt(N - 2), abs=1e-15)

    def test_projector_sandwich_reproduces_matrix(self):
        N, J_S, J_R = 6, 0.3, 0.7
        model = ChainModel(N=N, J_B=2.0)
        sub = single_excitation_hamiltonian(model, J_S, J_R)
        W = zeno_isometry(model)
        sandwich = W.T @ sub.H0 @ W
        assert np.max(np.abs(sandwich - zeno_effective_hamiltonian(model, J_S, J_R))) < 1e-12


class TestRotatedFrame:
    def test_sn_unitary(self):
        for N in range(3, 10):
            SN = sn_transform(N)
            assert np.max(np.abs(SN @ SN.T - np.eye(4))) < 1e-12

    def test_block_diagonal(self, rng):
        for _ in range(5):
            J_S, J_R = rng.uniform(-1, 1, size=2)
            He = rotated_hamiltonian(ChainModel(N=5), J_S, J_R)
            assert np.max(np.abs(He[:2, 2:])) < 1e-12
            assert np.max(np.abs(He[2:, :2])) < 1e-12

    def test_equal_couplings_kill_sigma_x(self):
        He = rotated_hamiltonian(ChainModel(N=7), 0.42, 0.42)
        assert abs(He[2, 3]) < 1e-14

    def test_control_readbacks(self, rng):
        # lower block = g_z*sigma_z + g_x*sigma_x plus the common shift
        for N in (3, 5, 8):
            J_S, J_R = rng.uniform(-1, 1, size=2)
            He = rotated_hamiltonian(ChainModel(N=N), J_S, J_R)
            g_x = math.sqrt(N / (N - 2)) * (J_R - J_S)
            g_z = (J_R + J_S) / (N - 2)
            assert He[2, 3] == pytest.approx(g_x, abs=1e-12)
            assert 0.5 * (He[2, 2] - He[3, 3]) == pytest.approx(g_z, abs=1e-12)

    @pytest.mark.parametrize("N", range(3, 10))
    def test_pauli_like_decomposition(self, N, rng):
        # He == upper-scalar block + g_x sigma'_x + g_z sigma'_z - shift
        J_S, J_R = rng.uniform(-1, 1, size=2)
        model = ChainModel(N=N)
        He = rotated_hamiltonian(model, J_S, J_R)
        g_x = math.sqrt(N / (N - 2)) * (J_R - J_S)
        g_z = (J_R + J_S) / (N - 2)
        shift = (J_R + J_S) / (N - 2)
        sx = np.zeros((4, 4)); sx[2, 3] = sx[3, 2] = 1.0
        sz = np.zeros((4, 4)); sz[2, 2] = 1.0; sz[3, 3] = -1.0
        upper = np.zeros((4, 4))
        upper[0, 0] = upper[1, 1] = (N - 1) * (J_R + J_S) / (N - 2)
        rebuilt = upper + g_x * sx + g_z * sz - shift * np.eye(4)
        assert np.max(np.abs(He - rebuilt)) < 1e-12

    def test_pauli_like_algebra(self):
        # embedded lower-block Paulis satisfy [s_i, s_j] = 2i eps_ijk s_k
        zero = np.zeros((2, 2), dtype=complex)
        pauli = {
            "x": np.array([[0, 1], [1, 0]], dtype=complex),
            "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        emb = {key: np.block([[zero, zero], [zero, p]]) for key, p in pauli.items()}
        comm = emb["x"] @ emb["y"] - emb["y"] @ emb["x"]
        assert np.max(np.abs(comm - 2j * emb["z"])) < 1e-15

    def test_zeno_frame_invariants(self):
        model = ChainModel(N=6, J_B=1.0)
        frame = zeno_frame(model, 0.3, 0.5)
        assert np.linalg.norm(frame.phi3) == pytest.approx(1.0, abs=1e-12)
        P1 = frame.P1
        assert np.max(np.abs(P1 @ P1 - P1)) < 1e-12
        assert np.max(np.abs(P1 - P1.T)) < 1e-12
        assert np.linalg.matrix_rank(P1) == 4
        assert np.max(np.abs(frame.He - frame.SN @ frame.Heff @ frame.SN.T)) < 1e-12

    @pytest.mark.parametrize("N", range(4, 10))
    def test_zeno_subspace_from_bus_eigenvectors(self, N):
        # the four eigenvectors of HB at (N-3)*J_B span exactly the frame
        model = ChainModel(N=N, J_B=1.9)
        sub = single_excitation_hamiltonian(model, 0.01, 0.007)
        w, v = np.linalg.eigh(sub.HB)
        target = (N - 3) * model.J_B
        sel = np.argsort(np.abs(w - target))[:4]
        assert np.max(np.abs(w[sel] - target)) < 1e-10
        W = zeno_isometry(model)
        angles = scipy.linalg.subspace_angles(v[:, sel], W)
        assert np.max(angles) < 1e-10


class TestFullSpinOracle:
    def test_excitation_number_conserved(self):
        N = 5
        H = full_spin_hamiltonian(ChainModel(N=N, J_B=1.0), 0.3, 0.8)
        states = np.arange(1 << N)
        weights = np.array([bin(s).count("1") for s in states], dtype=float)
        Sz = sparse.diags(2 * weights - N)
        comm = (H @ Sz - Sz @ H)
        assert abs(comm).max() < 1e-12

    def test_boundary_hop_matrix_element(self):
        N, J_S = 4, 0.63
        H = full_spin_hamiltonian(ChainModel(N=N, J_B=1.0), J_S, 0.21)
        idx = single_excitation_indices(N)
        assert H[idx[1], idx[2]] == pytest.approx(2 * J_S, abs=1e-14)

    def test_vacuum_expectation(self):
        N, J_S, J_R, J_B = 6, 0.3, 0.5, 1.25
        H = full_spin_hamiltonian(ChainModel(N=N, J_B=J_B), J_S, J_R)
        assert H[0, 0] == pytest.approx(J_S + J_R + (N - 3) * J_B, abs=1e-13)

    def test_hermitian(self):
        H = full_spin_hamiltonian(ChainModel(N=6), 0.3, -0.4)
        assert abs(H - H.getH()).max() < 1e-13

    def test_size_limit(self):
        with pytest.raises(ValueError):
            full_spin_hamiltonian(ChainModel(N=13), 0.1, 0.1)

    def test_largest_oracle_builds_deterministically(self):
        model = ChainModel(N=12, J_B=1.0)
        H1 = full_spin_hamiltonian(model, 0.3, 0.7)
        assert H1.shape == (4096, 4096)
        assert abs(H1 - H1.getH()).max() < 1e-13
        H2 = full_spin_hamiltonian(model, 0.3, 0.7)
        assert abs(H1 - H2).max() == 0.0

    @pytest.mark.parametrize("N", range(3, 8))
    def test_sector_restriction_matches_subspace(self, N, rng):
        model = ChainModel(N=N, J_B=1.0)
        for _ in range(5):
            J_S, J_R = rng.uniform(-1, 1, size=2)
            sub = single_excitation_hamiltonian(model, J_S, J_R)
            R = restrict_to_sector(full_spin_hamiltonian(model, J_S, J_R), N)
            D = R - sub.total
            shift = np.mean(np.diag(D)).real
            assert np.max(np.abs(D - shift * np.eye(N + 1))) < 1e-10
            assert abs(shift) < 1e-10  # sector matrices are the exact restriction


class TestDephasingTables:
    def test_sector_signs(self):
        signs = dephasing_sign_table(5)
        assert signs.shape == (5, 6)
        assert np.all(signs[:, 0] == -1.0)  # vacuum: every spin down
        for l in range(1, 6):
            col = signs[:, l]
            assert col[l - 1] == 1.0
            assert np.sum(col) == 2 - 5

    def test_full_space_signs_restrict_to_sector(self):
        N = 4
        full = full_dephasing_sign_table(N)
        idx = single_excitation_indices(N)
        assert np.array_equal(full[:, idx], dephasing_sign_table(N))


class TestMatrixCsv:
    def test_round_trip(self, tmp_path):
        M = np.array([[1.0 + 2.0j, 0.5], [-0.25j, 3.0]])
        path = tmp_path / "m.csv"
        matrix_to_csv(M, path)
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
        rebuilt = data[:, 0::2] + 1j * data[:, 1::2]
        assert np.allclose(rebuilt, M, atol=1e-15)
