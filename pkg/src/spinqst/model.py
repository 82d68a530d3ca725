"""Hamiltonian builders for the boundary-controlled spin-1/2 chain.

A sender spin (site 1) and a receiver spin (site N) couple with strengths
J_S, J_R to a uniformly coupled bus (sites 2..N-1, strength J_B).  Exchange
interactions conserve the number of up spins, so the dynamics of one
excitation lives in the (N+1)-dimensional space ordered

    [ |0>, |1>, |2>, ..., |N> ]

(vacuum first, then the single up-spin at each site).  This module builds:

* the (N+1)x(N+1) matrices H0 (boundary terms) and HB (bus terms),
* the bus spectrum and the uniform bulk mode phi3,
* the projected 4x4 Hamiltonian on span{|0>, |1>, |phi3>, |N>} obtained in
  the strong-bus limit (the constant (N-3)*J_B shift is dropped),
* the basis rotation S_N that block-diagonalises it into a two-level
  transfer problem plus two spectator directions,
* a full 2^N-dimensional oracle built from explicit Pauli factors.

Spin convention: |0> = down with sigma_z|down> = -|down>, |1> = up.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

__all__ = [
    "ChainModel",
    "SubspaceHamiltonian",
    "ZenoFrame",
    "single_excitation_hamiltonian",
    "bus_mirror_matrix",
    "bus_spectrum",
    "zeno_effective_hamiltonian",
    "sn_transform",
    "rotated_hamiltonian",
    "zeno_frame",
    "full_spin_hamiltonian",
    "single_excitation_indices",
    "restrict_to_sector",
    "dephasing_sign_table",
    "full_dephasing_sign_table",
    "zeno_isometry",
    "matrix_to_csv",
]

MAX_ORACLE_SITES = 12

# Single-site Paulis in the basis order [|down>, |up>]
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, 1.0j], [-1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)


@dataclass(frozen=True)
class ChainModel:
    """Chain length and bus coupling; fixes the (N+1)-dim basis ordering."""

    N: int
    J_B: float = 1.0

    def __post_init__(self):
        if self.N < 3:
            raise ValueError(f"chain length N must be >= 3, got {self.N}")
        if self.J_B <= 0:
            raise ValueError(f"bus coupling J_B must be positive, got {self.J_B}")

    @property
    def dim(self) -> int:
        return self.N + 1


@dataclass
class SubspaceHamiltonian:
    """Boundary part H0 and bus part HB in the zero/one-excitation sector."""

    H0: np.ndarray
    HB: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.H0 + self.HB


@dataclass
class ZenoFrame:
    """Strong-bus projection data: bulk mode, projector, 4x4 Hamiltonians."""

    phi3: np.ndarray
    P1: np.ndarray
    Heff: np.ndarray
    SN: np.ndarray
    He: np.ndarray


def single_excitation_hamiltonian(model: ChainModel, J_S: float,
                                  J_R: float) -> SubspaceHamiltonian:
    """Build H0 and HB in the (N+1)-dim sector.

    For N = 3 there is no bus bond; the boundary matrix alone generates the
    dynamics and HB is identically zero.
    """
    N = model.N
    d = model.dim
    H0 = np.zeros((d, d))
    HB = np.zeros((d, d))
    if N == 3:
        H0[0, 0] = J_R + J_S
        H0[1, 1] = H0[2, 2] = J_R - J_S
        H0[1, 2] = H0[2, 1] = 2.0 * J_S
        H0[2, 2] = -J_R - J_S
        H0[3, 3] = J_S - J_R
        H0[2, 3] = H0[3, 2] = 2.0 * J_R
        return SubspaceHamiltonian(H0=H0, HB=HB)

    H0[0, 0] = J_R + J_S
    H0[1, 1] = H0[2, 2] = J_R - J_S
    H0[1, 2] = H0[2, 1] = 2.0 * J_S
    for k in range(3, N - 1):
        H0[k, k] = J_R + J_S
    H0[N - 1, N - 1] = H0[N, N] = J_S - J_R
    H0[N - 1, N] = H0[N, N - 1] = 2.0 * J_R

    J_B = model.J_B
    HB[0, 0] = HB[1, 1] = HB[N, N] = (N - 3) * J_B
    HB[2, 2] = HB[N - 1, N - 1] = (N - 5) * J_B
    for k in range(3, N - 1):
        HB[k, k] = (N - 7) * J_B
    for k in range(2, N - 1):
        HB[k, k + 1] = HB[k + 1, k] = 2.0 * J_B
    return SubspaceHamiltonian(H0=H0, HB=HB)


def bus_mirror_matrix(N: int) -> np.ndarray:
    """The (N-2)x(N-2) mirror-symmetric tridiagonal matrix of the bus block.

    Ones on the sub/super diagonals and in the two corner diagonal entries;
    its eigenvalues are 2*cos((p-1)*pi/(N-2)), p = 1..N-2, all distinct.
    """
    if N < 4:
        raise ValueError(f"bus block requires N >= 4, got {N}")
    m = N - 2
    M = np.zeros((m, m))
    for k in range(m - 1):
        M[k, k + 1] = M[k + 1, k] = 1.0
    M[0, 0] = M[m - 1, m - 1] = 1.0
    return M


def bus_spectrum(model: ChainModel):
    """Closed-form bus eigenvalues and the uniform bulk mode phi3.

    Returns (eps, phi3): eps[p-1] = 4*J_B*cos((p-1)*pi/(N-2)) + (N-7)*J_B for
    p = 1..N-2, and phi3 the normalized uniform superposition of the bulk
    single-excitation states, an HB eigenvector with eigenvalue (N-3)*J_B.
    """
    N = model.N
    if N < 4:
        raise ValueError(f"bus spectrum requires N >= 4, got {N}")
    p = np.arange(1, N - 1)
    eps = 4.0 * model.J_B * np.cos((p - 1) * np.pi / (N - 2)) + (N - 7) * model.J_B
    phi3 = np.zeros(model.dim)
    phi3[2:N] = 1.0 / math.sqrt(N - 2)
    return eps, phi3


def zeno_effective_hamiltonian(model: ChainModel, J_S: float,
                               J_R: float) -> np.ndarray:
    """Projected 4x4 Hamiltonian on {|0>, |1>, |phi3>, |N>}.

    The constant (N-3)*J_B identity contribution is dropped (global phase).
    The same expression reproduces the exact N = 3 sector matrix.
    """
    N = model.N
    r = math.sqrt(N - 2)
    H = np.zeros((4, 4))
    H[0, 0] = J_R + J_S
    H[1, 1] = J_R - J_S
    H[1, 2] = H[2, 1] = 2.0 * J_S / r
    H[2, 2] = (N - 4) * (J_R + J_S) / (N - 2)
    H[2, 3] = H[3, 2] = 2.0 * J_R / r
    H[3, 3] = J_S - J_R
    return H


def sn_transform(N: int) -> np.ndarray:
    """Unitary reshuffle of {|0>, |1>, |phi3>, |N>} that splits the transfer
    pair from the two spectator directions."""
    if N < 3:
        raise ValueError(f"chain length N must be >= 3, got {N}")
    rN = math.sqrt(N)
    r2 = math.sqrt(2.0)
    rNm2 = math.sqrt(N - 2)
    r2N = math.sqrt(2.0 * N)
    return np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0 / rN, rNm2 / rN, 1.0 / rN],
        [0.0, 1.0 / r2, 0.0, -1.0 / r2],
        [0.0, rNm2 / r2N, -2.0 / r2N, rNm2 / r2N],
    ])


def rotated_hamiltonian(model: ChainModel, J_S: float, J_R: float) -> np.ndarray:
    """S_N . Heff . S_N^dag: block-diagonal with a scalar upper block and a
    two-level g_z*sigma_z + g_x*sigma_x lower block (common shift included)."""
    SN = sn_transform(model.N)
    Heff = zeno_effective_hamiltonian(model, J_S, J_R)
    return SN @ Heff @ SN.T


def zeno_isometry(model: ChainModel) -> np.ndarray:
    """(N+1) x 4 isometry whose columns are |0>, |1>, |phi3>, |N>."""
    N = model.N
    W = np.zeros((model.dim, 4))
    W[0, 0] = 1.0
    W[1, 1] = 1.0
    W[2:N, 2] = 1.0 / math.sqrt(N - 2)
    W[N, 3] = 1.0
    return W


def zeno_frame(model: ChainModel, J_S: float, J_R: float) -> ZenoFrame:
    """Bundle phi3, the rank-4 projector, Heff, S_N and the rotated matrix."""
    W = zeno_isometry(model)
    phi3 = W[:, 2].copy()
    P1 = W @ W.T
    Heff = zeno_effective_hamiltonian(model, J_S, J_R)
    SN = sn_transform(model.N)
    return ZenoFrame(phi3=phi3, P1=P1, Heff=Heff, SN=SN, He=SN @ Heff @ SN.T)


def _site_operator(op: np.ndarray, site: int, N: int) -> sparse.csr_matrix:
    """Embed a single-site operator at ``site`` (1-based, site 1 leftmost)."""
    out = sparse.identity(1, dtype=complex, format="csr")
    eye = sparse.identity(2, dtype=complex, format="csr")
    op_s = sparse.csr_matrix(op)
    for j in range(1, N + 1):
        out = sparse.kron(out, op_s if j == site else eye, format="csr")
    return out


def _exchange_bond(j: int, k: int, N: int) -> sparse.csr_matrix:
    return sum(
        _site_operator(p, j, N) @ _site_operator(p, k, N)
        for p in (SIGMA_X, SIGMA_Y, SIGMA_Z)
    )


def full_spin_hamiltonian(model: ChainModel, J_S: float,
                          J_R: float) -> sparse.csr_matrix:
    """Exact 2^N x 2^N exchange Hamiltonian (sparse), 3 <= N <= 12.

    Basis index bit convention: site m maps to bit 2^(N-m), so |n> (one up
    spin at site n) has index 2^(N-n) and the vacuum has index 0.
    """
    N = model.N
    if N > MAX_ORACLE_SITES:
        raise ValueError(
            f"full-spin oracle limited to N <= {MAX_ORACLE_SITES}, got {N}")
    H = J_S * _exchange_bond(1, 2, N) + J_R * _exchange_bond(N - 1, N, N)
    for j in range(2, N - 1):
        H = H + model.J_B * _exchange_bond(j, j + 1, N)
    H.eliminate_zeros()
    return H.tocsr()


def single_excitation_indices(N: int) -> np.ndarray:
    """Full-space indices of [ |0>, |1>, ..., |N> ]."""
    return np.array([0] + [1 << (N - n) for n in range(1, N + 1)])


def restrict_to_sector(H_full, N: int) -> np.ndarray:
    """Dense restriction of a full-space operator to the zero/one-excitation
    sector, ordered [ |0>, |1>, ..., |N> ]."""
    idx = single_excitation_indices(N)
    if sparse.issparse(H_full):
        return H_full.tocsr()[idx][:, idx].toarray()
    return np.asarray(H_full)[np.ix_(idx, idx)]


def dephasing_sign_table(N: int) -> np.ndarray:
    """(N, N+1) diagonal signs of each site's sigma_z in the sector basis.

    Row l-1 holds the diagonal of sigma_l^z restricted to
    [ |0>, |1>, ..., |N> ]: -1 everywhere except +1 at column l.
    """
    signs = -np.ones((N, N + 1))
    for l in range(1, N + 1):
        signs[l - 1, l] = 1.0
    return signs


def full_dephasing_sign_table(N: int) -> np.ndarray:
    """(N, 2^N) diagonal signs of each site's sigma_z in the full spin basis."""
    states = np.arange(1 << N)
    signs = np.empty((N, 1 << N))
    for l in range(1, N + 1):
        bit = (states >> (N - l)) & 1
        signs[l - 1] = 2.0 * bit - 1.0
    return signs


def matrix_to_csv(M, path_or_buf) -> None:
    """Dense row-major CSV dump with separate re/im columns per entry."""
    A = M.toarray() if sparse.issparse(M) else np.asarray(M)
    A = np.atleast_2d(A).astype(complex)
    header = []
    for j in range(A.shape[1]):
        header += [f"col{j}_re", f"col{j}_im"]

    def _write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in A:
            flat = []
            for v in row:
                flat += [f"{v.real:.17g}", f"{v.imag:.17g}"]
            writer.writerow(flat)

    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        with open(path_or_buf, "w", newline="") as fh:
            _write(fh)
    else:
        _write(path_or_buf)
