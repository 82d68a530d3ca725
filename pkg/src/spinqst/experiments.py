"""End-to-end transfer runs, robustness sweeps and figure datasets.

Ties the pulse design, Hamiltonian builders and propagators together:
calibrate the pulse for the configured chain, synthesize the couplings,
propagate from the sender state, and evaluate the averaged transfer
fidelity.  Sweeps perturb one ingredient at a time (bus strength, static
coupling offsets, dephasing rate) and every figure dataset is written as
CSV next to a manifest recording the fully resolved configuration.

Unit convention: T = 1; all rates are expressed in units of 1/T
(J_B enters as the dimensionless product J_B*T).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import model as mdl
from . import propagate as prop
from .errors import CalibrationError, ConfigError
from .pulse_design import (
    DEFAULT_MU_BRACKET,
    DEFAULT_SAMPLES,
    DesignedPulse,
    design_pulse,
    schedule_profiles,
    schedule_to_csv,
    verify_boundary_conditions,
)

__all__ = [
    "PulseConfig",
    "NoiseConfig",
    "ExperimentConfig",
    "SweepGrids",
    "resolve_config",
    "config_to_dict",
    "config_from_dict",
    "designed_pulse_for",
    "run_transfer",
    "sweep_bus_coupling",
    "sweep_disorder",
    "sweep_dephasing",
    "zeno_gap_report",
    "write_figures",
    "trajectory_to_csv",
    "MANIFEST_SCHEMA_VERSION",
    "STEP_FLOOR",
]

MANIFEST_SCHEMA_VERSION = 1
MODEL_KINDS = ("effective", "subspace", "full_spin")

# Minimum step count for production runs.  The 0.05 spectral gate alone is a
# hard ceiling on h but leaves ~1e-6-level integrator error for the slow
# 4-level dynamics; this floor keeps the grid-halving check comfortably
# below its 1e-8 acceptance bar across the default configurations.
STEP_FLOOR = 40000


@dataclass(frozen=True)
class PulseConfig:
    """Pulse ansatz settings; ``mu = None`` requests calibration."""

    N_beta: int = 3
    f_winding: int = -2
    samples: int = DEFAULT_SAMPLES
    mu: float | None = None

    def __post_init__(self):
        if self.N_beta < 1 or self.N_beta % 2 == 0:
            raise ConfigError(f"N_beta must be odd and >= 1, got {self.N_beta}")
        if self.samples < 1000:
            raise ConfigError(f"samples must be >= 1000, got {self.samples}")


@dataclass(frozen=True)
class NoiseConfig:
    """Uniform dephasing rate (in units of J_M) and static coupling offsets."""

    gamma_over_JM: float = 0.0
    delta_JS_rel: float = 0.0
    delta_JR_rel: float = 0.0

    def __post_init__(self):
        if self.gamma_over_JM < 0:
            raise ConfigError(
                f"gamma_over_JM must be >= 0, got {self.gamma_over_JM}")
        for name in ("delta_JS_rel", "delta_JR_rel"):
            v = getattr(self, name)
            if abs(v) > 0.5:
                raise ConfigError(f"|{name}| must be <= 0.5, got {v}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved run configuration (times in T, rates in 1/T)."""

    N: int = 5
    J_B_times_T: float = 1000.0
    pulse: PulseConfig = field(default_factory=PulseConfig)
    model_kind: str = "subspace"
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    decimation: int = 100

    def __post_init__(self):
        if self.N < 3:
            raise ConfigError(f"N must be >= 3, got {self.N}")
        if self.J_B_times_T <= 0:
            raise ConfigError(
                f"J_B_times_T must be positive, got {self.J_B_times_T}")
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(
                f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        if self.model_kind == "full_spin" and self.N > mdl.MAX_ORACLE_SITES:
            raise ConfigError(
                f"full_spin model requires N <= {mdl.MAX_ORACLE_SITES}")
        if self.decimation < 1:
            raise ConfigError(f"decimation must be >= 1, got {self.decimation}")


@dataclass(frozen=True)
class SweepGrids:
    """Default figure-reproduction grids."""

    bus_J_B_times_T: tuple = (50.0, 100.0, 200.0, 400.0, 700.0, 1000.0, 2000.0, 4000.0)
    bus_chain_lengths: tuple = (4, 5, 7)
    fig2_chain_lengths: tuple = (4, 5, 6, 7, 8, 9)
    disorder_span: float = 0.05
    disorder_points: int = 21
    dephasing_max_over_JM: float = 0.01
    dephasing_points: int = 11
    zeno_J_B_times_T: tuple = (100.0, 300.0, 1000.0, 3000.0)


def _dataclass_from_dict(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be an object, got {type(data).__name__}")
    fields = {f.name: f for f in cls.__dataclass_fields__.values()}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(
            f"unknown key(s) {sorted(unknown)} under {path or 'config root'}")
    kwargs = {}
    for name, value in data.items():
        sub = f"{path}.{name}" if path else name
        if name == "pulse":
            kwargs[name] = _dataclass_from_dict(PulseConfig, value, sub)
        elif name == "noise":
            kwargs[name] = _dataclass_from_dict(NoiseConfig, value, sub)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration under {path or 'root'}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    """Strict parse of a configuration document (unknown keys rejected)."""
    return _dataclass_from_dict(ExperimentConfig, data, "")


def config_to_dict(config: ExperimentConfig) -> dict:
    return asdict(config)


def resolve_config(data: dict | ExperimentConfig) -> dict:
    """Expand a (partial) configuration into its canonical resolved dict.

    Idempotent: resolving an already-resolved document returns it unchanged.
    """
    if isinstance(data, ExperimentConfig):
        return config_to_dict(data)
    return config_to_dict(config_from_dict(data))


@lru_cache(maxsize=64)
def _design_cached(N: int, N_beta: int, f_winding: int, samples: int,
                   mu: float | None) -> DesignedPulse:
    return design_pulse(N, N_beta=N_beta, f_winding=f_winding, T=1.0,
                        samples=samples, mu=mu, mu_bracket=DEFAULT_MU_BRACKET)


def designed_pulse_for(config: ExperimentConfig) -> DesignedPulse:
    """Calibrated (or pinned-mu) pulse for the configured chain length."""
    p = config.pulse
    return _design_cached(config.N, p.N_beta, p.f_winding, p.samples, p.mu)


def _coupling_coeffs(pulse: DesignedPulse, n_extra_cols: int = 1):
    """(J_S(t), J_R(t)[, 1...]) evaluated at arbitrary times.

    Closed-form profiles plus a cubic spline of the integrated twist angle;
    exact on the design grid and smooth between nodes, so propagation grids
    of any resolution see one consistent generator.
    """
    params = pulse.params
    N = pulse.N
    theta_spline = CubicSpline(pulse.table.t, pulse.table.theta)
    half = 0.5 * (N - 2)
    cross = math.sqrt(N - 2) / (2.0 * math.sqrt(N))

    def coeffs(ts: np.ndarray) -> np.ndarray:
        beta, beta_dot, dxd = schedule_profiles(params, ts)
        th = theta_spline(ts)
        c2t = np.cos(2.0 * th)
        s2t = np.sin(2.0 * th)
        cb = np.cos(beta)
        g_x = dxd * cb * c2t - 0.5 * beta_dot * s2t
        g_z = -dxd * cb * s2t - 0.5 * beta_dot * c2t
        J_R = half * g_z + cross * g_x
        J_S = half * g_z - cross * g_x
        out = np.empty((len(ts), 2 + n_extra_cols))
        out[:, 0] = J_S
        out[:, 1] = J_R
        out[:, 2:] = 1.0
        return out

    return coeffs


def _linear_decomposition(build):
    """Split H(J_S, J_R) = J_S*X_S + J_R*X_R + H_const via three evaluations."""
    H00 = build(0.0, 0.0)
    X_S = build(1.0, 0.0) - H00
    X_R = build(0.0, 1.0) - H00
    return X_S, X_R, H00


def _generator_for(config: ExperimentConfig, pulse: DesignedPulse):
    """LinearHamiltonian + bookkeeping (indices, shift, embedding) per model."""
    N = config.N
    J_B = config.J_B_times_T  # T = 1
    chain = mdl.ChainModel(N=N, J_B=J_B)
    meta: dict = {"model_kind": config.model_kind, "N": N, "J_B_times_T": J_B}

    if config.model_kind == "effective":
        X_S, X_R, H00 = _linear_decomposition(
            lambda js, jr: mdl.zeno_effective_hamiltonian(chain, js, jr))
        assert np.max(np.abs(H00)) == 0.0
        mats = np.stack([X_S, X_R]).astype(complex)
        gen = prop.LinearHamiltonian(mats, _coupling_coeffs(pulse, n_extra_cols=0))
        meta.update(sender=1, receiver=3, shift=0.0,
                    embedding=mdl.zeno_isometry(chain))
        return gen, meta

    if config.model_kind == "subspace":
        sub = mdl.single_excitation_hamiltonian(chain, 0.0, 0.0)
        X = mdl.single_excitation_hamiltonian(chain, 1.0, 0.0).H0
        Y = mdl.single_excitation_hamiltonian(chain, 0.0, 1.0).H0
        shift = (N - 3) * J_B
        Hc = sub.HB - shift * np.eye(chain.dim)
        mats = np.stack([X, Y, Hc]).astype(complex)
        gen = prop.LinearHamiltonian(mats, _coupling_coeffs(pulse))
        meta.update(sender=1, receiver=N, shift=shift)
        return gen, meta

    # full_spin oracle
    H00 = mdl.full_spin_hamiltonian(chain, 0.0, 0.0).toarray()
    X = mdl.full_spin_hamiltonian(chain, 1.0, 0.0).toarray() - H00
    Y = mdl.full_spin_hamiltonian(chain, 0.0, 1.0).toarray() - H00
    shift = (N - 3) * J_B
    Hc = H00 - shift * np.eye(2 ** N)
    mats = np.stack([X, Y, Hc]).astype(complex)
    gen = prop.LinearHamiltonian(mats, _coupling_coeffs(pulse))
    idx = mdl.single_excitation_indices(N)
    meta.update(sender=int(idx[1]), receiver=int(idx[N]), shift=shift,
                sector_indices=idx,
                dephasing_signs=mdl.full_dephasing_sign_table(N))
    return gen, meta


def _choose_steps(gen, config: ExperimentConfig, scale_margin: float = 1.0) -> int:
    """Uniform step count: spectral gate with a universal 5% safety margin,
    a floor for integrator accuracy, and rounding to coarse buckets so that
    unperturbed sweep points land on exactly the same grid as run_transfer
    (static offsets up to 5% share the margin and hence the bucket)."""
    span = np.linspace(0.0, 1.0, 129)
    bound = prop.spectral_bound(gen, span) * max(scale_margin, 1.05)
    n = int(np.ceil(bound / prop.STEP_GATE))
    n = max(n, STEP_FLOOR)
    n = int(np.ceil(n / 20000)) * 20000
    dec = config.decimation
    return int(np.ceil(n / dec)) * dec


def _site_populations(states: np.ndarray, is_density: bool, meta: dict,
                      N: int) -> np.ndarray:
    """(n_stored, N+1) populations ordered [vacuum, site 1..N]."""
    kind = meta.get("model_kind", "subspace")
    if kind == "effective":
        W = meta["embedding"]
        if is_density:
            return np.clip(np.einsum("im,sml,il->si", W, states, W).real, 0.0, None)
        return np.abs(states @ W.T) ** 2
    if kind == "full_spin":
        idx = meta["sector_indices"]
        if is_density:
            return np.clip(states[:, idx, idx].real, 0.0, None)
        return np.abs(states[:, idx]) ** 2
    if is_density:
        return np.clip(np.einsum("sii->si", states).real, 0.0, None)
    return np.abs(states) ** 2


def run_transfer(config: ExperimentConfig,
                 allow_uncalibrated: bool = False) -> prop.StateTrajectory:
    """Full pipeline: calibrate, synthesize couplings, propagate from the
    sender state, attach fidelity series and per-site populations."""
    pulse = designed_pulse_for(config)
    report = verify_boundary_conditions(pulse.params, config.N)
    if not report.all_pass and not allow_uncalibrated:
        raise CalibrationError(
            "boundary conditions not satisfied for the configured pulse:\n"
            + str(report))

    gen, meta = _generator_for(config, pulse)
    noise = config.noise
    scaleS = 1.0 + noise.delta_JS_rel
    scaleR = 1.0 + noise.delta_JR_rel
    if scaleS != 1.0 or scaleR != 1.0:
        base_coeffs = gen.coeffs
        nm = gen.mats.shape[0]
        factors = np.ones(nm)
        factors[0] = scaleS
        factors[1] = scaleR

        def scaled(ts, _base=base_coeffs, _f=factors):
            return _base(ts) * _f

        gen = prop.LinearHamiltonian(gen.mats, scaled)

    n = _choose_steps(gen, config, scale_margin=max(scaleS, scaleR, 1.0))
    grid = np.linspace(0.0, 1.0, n + 1)
    d = gen.dim
    sender = meta["sender"]

    gamma = noise.gamma_over_JM * pulse.J_M
    if gamma > 0:
        rho0 = np.zeros((d, d), dtype=complex)
        rho0[sender, sender] = 1.0
        signs = meta.get("dephasing_signs")
        traj = prop.evolve_density(gen, rho0, gamma, grid,
                                   sign_table=signs,
                                   store_every=config.decimation)
    else:
        psi0 = np.zeros(d, dtype=complex)
        psi0[sender] = 1.0
        traj = prop.evolve_state(gen, psi0, grid,
                                 store_every=config.decimation)

    traj.sender_index = sender
    traj.receiver_index = meta["receiver"]
    traj.meta.update(meta)
    traj.meta.update(
        config=resolve_config(config), J_M=pulse.J_M, mu=pulse.params.mu,
        gamma=gamma,
    )
    prop.transfer_fidelity(traj, config.N)
    traj.meta["site_populations"] = _site_populations(
        traj.states, traj.is_density, meta, config.N)
    return traj


def final_fidelity(traj: prop.StateTrajectory) -> float:
    return float(traj.F_series[-1])


def sweep_bus_coupling(config: ExperimentConfig, J_BT_values) -> list[dict]:
    """One subspace-model transfer per bus strength; reports infidelities."""
    values = list(J_BT_values)
    if not values or any(v <= 0 for v in values):
        raise ConfigError("J_B*T sweep values must be a nonempty positive list")
    pulse = designed_pulse_for(config)
    rows = []
    for v in values:
        cfg = replace(config, J_B_times_T=float(v), model_kind="subspace")
        traj = run_transfer(cfg)
        F = final_fidelity(traj)
        rows.append({
            "N": config.N,
            "J_B_times_T": float(v),
            "J_B_over_J_M": float(v) / pulse.J_M,
            "F_T": F,
            "infidelity": 1.0 - F,
        })
    return rows


def sweep_disorder(config: ExperimentConfig, deltaS_values,
                   deltaR_values) -> np.ndarray:
    """F(T) over a grid of static multiplicative coupling offsets.

    Returns an array of shape (len(deltaS), len(deltaR)); entry [i, j] is the
    final fidelity with J_S -> (1 + deltaS[i]) J_S, J_R -> (1 + deltaR[j]) J_R.
    All grid points are propagated in one batch on a common grid.
    """
    dS = np.asarray(list(deltaS_values), dtype=float)
    dR = np.asarray(list(deltaR_values), dtype=float)
    if np.any(np.abs(dS) > 0.5) or np.any(np.abs(dR) > 0.5):
        raise ConfigError("|delta| must be <= 0.5")
    cfg = replace(config, model_kind="subspace",
                  noise=replace(config.noise, delta_JS_rel=0.0, delta_JR_rel=0.0))
    pulse = designed_pulse_for(cfg)
    gen, meta = _generator_for(cfg, pulse)
    worst = 1.0 + max(float(np.max(np.abs(dS))), float(np.max(np.abs(dR))))
    n = _choose_steps(gen, cfg, scale_margin=worst)
    grid = np.linspace(0.0, 1.0, n + 1)
    d = gen.dim
    B = len(dS) * len(dR)
    psi0s = np.zeros((B, d), dtype=complex)
    psi0s[:, meta["sender"]] = 1.0
    scales = np.ones((B, gen.mats.shape[0]))
    k = 0
    for s in dS:
        for r in dR:
            scales[k, 0] = 1.0 + s
            scales[k, 1] = 1.0 + r
            k += 1
    finals = prop.evolve_states_batch(gen, psi0s, grid, scales=scales)
    absf = np.abs(finals[:, meta["receiver"]])
    F = prop.averaged_fidelity(absf)
    return F.reshape(len(dS), len(dR))


def sweep_dephasing(config: ExperimentConfig, gamma_over_JM_values) -> list[dict]:
    """Density-matrix transfers over a vector of dephasing rates."""
    ratios = np.asarray(list(gamma_over_JM_values), dtype=float)
    if np.any(ratios < 0):
        raise ConfigError("gamma/J_M values must be >= 0")
    cfg = replace(config, model_kind="subspace",
                  noise=replace(config.noise, gamma_over_JM=0.0))
    pulse = designed_pulse_for(cfg)
    gen, meta = _generator_for(cfg, pulse)
    n = _choose_steps(gen, cfg)
    grid = np.linspace(0.0, 1.0, n + 1)
    d = gen.dim
    rho0 = np.zeros((d, d), dtype=complex)
    rho0[meta["sender"], meta["sender"]] = 1.0
    gammas = ratios * pulse.J_M
    finals = prop.evolve_density_multi(gen, rho0, gammas, grid)
    rows = []
    for ratio, gamma, rho in zip(ratios, gammas, finals):
        absf = math.sqrt(max(float(rho[meta["receiver"], meta["receiver"]].real), 0.0))
        rows.append({
            "gamma_over_J_M": float(ratio),
            "gamma_T": float(gamma),
            "F_T": float(prop.averaged_fidelity(absf)),
        })
    return rows


def zeno_gap_report(config: ExperimentConfig, J_BT_values) -> list[dict]:
    """Distance between exact-sector and projected 4-level propagation.

    For each bus strength: propagate the (N+1)-dim model and the 4-level
    model with the same calibrated pulses, compress the exact propagator to
    the strong-bus frame, and report phase-aligned propagator and final-state
    distances.  Only the four strong-bus-frame columns of the exact
    propagator are evolved; their compression W^T U W is all the comparison
    needs, and those columns stay numerically orthonormal far better than the
    full matrix at the same step count.
    """
    pulse = designed_pulse_for(config)
    chain = mdl.ChainModel(N=config.N, J_B=1.0)
    W = mdl.zeno_isometry(chain)

    cfg_eff = replace(config, model_kind="effective")
    gen_e, meta_e = _generator_for(cfg_eff, pulse)
    n_e = _choose_steps(gen_e, cfg_eff)
    grid_e = np.linspace(0.0, 1.0, n_e + 1)
    e_sender = np.zeros(4, dtype=complex)
    e_sender[meta_e["sender"]] = 1.0
    traj_e = prop.evolve_state(gen_e, e_sender, grid_e, track_propagator=True,
                               store_every=n_e)
    U_eff = traj_e.propagator
    psi_eff = U_eff @ e_sender

    rows = []
    for v in J_BT_values:
        cfg_s = replace(config, J_B_times_T=float(v), model_kind="subspace")
        gen_s, _ = _generator_for(cfg_s, pulse)
        n_s = _choose_steps(gen_s, cfg_s)
        grid_s = np.linspace(0.0, 1.0, n_s + 1)
        K = prop.evolve_columns(gen_s, W.astype(complex), grid_s)
        U4 = W.T @ K
        psi4 = U4 @ e_sender
        rows.append({
            "J_B_times_T": float(v),
            "propagator_distance": prop.phase_aligned_distance(U4, U_eff),
            "state_distance": prop.phase_aligned_distance(psi4, psi_eff),
        })
    return rows


def trajectory_to_csv(traj: prop.StateTrajectory, N: int, path_or_buf) -> None:
    """Trajectory CSV: t_over_T,re_f,im_f,abs_f,F,pop_site_1..N,pop_vacuum."""
    if traj.f_series is None:
        prop.transfer_fidelity(traj, N)
    pops = traj.meta.get("site_populations")
    if pops is None:
        pops = _site_populations(traj.states, traj.is_density, traj.meta, N)
    header = (["t_over_T", "re_f", "im_f", "abs_f", "F"]
              + [f"pop_site_{n}" for n in range(1, N + 1)] + ["pop_vacuum"])

    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, t in enumerate(traj.times):
            f = traj.f_series[i]
            row = [t, f.real, f.imag, abs(f), traj.F_series[i]]
            row += list(pops[i, 1:N + 1])
            row.append(pops[i, 0])
            w.writerow([f"{v:.17g}" for v in row])

    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        with open(path_or_buf, "w", newline="") as fh:
            _write(fh)
    else:
        _write(path_or_buf)


def _write_rows_csv(rows: list[dict], columns: list[str], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([f"{row[c]:.17g}" if isinstance(row[c], float)
                        else str(row[c]) for c in columns])


def write_figures(config: ExperimentConfig, output_dir,
                  grids: SweepGrids | None = None) -> dict:
    """Produce every figure dataset plus manifest.json; returns the manifest."""
    grids = grids or SweepGrids()
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "datasets": {},
    }

    def record(name: str, cfg: ExperimentConfig, extra: dict | None = None):
        entry = {"config": resolve_config(cfg)}
        if extra:
            entry.update(extra)
        manifest["datasets"][name] = entry

    # transfer fidelity curves, one trajectory per chain length
    for N in grids.fig2_chain_lengths:
        cfg = replace(config, N=N, model_kind="subspace")
        traj = run_transfer(cfg)
        name = f"fig2_N{N}.csv"
        trajectory_to_csv(traj, N, out / name)
        record(name, cfg, {"J_M": traj.meta["J_M"], "mu": traj.meta["mu"]})

    # infidelity vs bus strength
    rows = []
    for N in grids.bus_chain_lengths:
        cfg = replace(config, N=N)
        rows += sweep_bus_coupling(cfg, grids.bus_J_B_times_T)
    _write_rows_csv(rows, ["N", "J_B_times_T", "J_B_over_J_M", "F_T", "infidelity"],
                    out / "fig3.csv")
    record("fig3.csv", config,
           {"J_B_times_T_values": list(grids.bus_J_B_times_T),
            "chain_lengths": list(grids.bus_chain_lengths)})

    # calibrated coupling schedules for the configured chain
    pulse = designed_pulse_for(config)
    schedule_to_csv(pulse, out / "fig4.csv")
    record("fig4.csv", config, {"J_M": pulse.J_M, "mu": pulse.params.mu})

    # static disorder robustness
    span, pts = grids.disorder_span, grids.disorder_points
    deltas = np.linspace(-span, span, pts)
    F = sweep_disorder(config, deltas, deltas)
    rows = [{"delta_JS_rel": float(dS), "delta_JR_rel": float(dR),
             "F_T": float(F[i, j])}
            for i, dS in enumerate(deltas) for j, dR in enumerate(deltas)]
    _write_rows_csv(rows, ["delta_JS_rel", "delta_JR_rel", "F_T"], out / "fig5.csv")
    record("fig5.csv", config, {"delta_values": [float(v) for v in deltas]})

    # dephasing robustness
    ratios = np.linspace(0.0, grids.dephasing_max_over_JM, grids.dephasing_points)
    rows = sweep_dephasing(config, ratios)
    _write_rows_csv(rows, ["gamma_over_J_M", "gamma_T", "F_T"], out / "fig6.csv")
    record("fig6.csv", config,
           {"gamma_over_J_M_values": [float(v) for v in ratios],
            "J_M": pulse.J_M})

    # strong-bus validity diagnostic
    rows = zeno_gap_report(config, grids.zeno_J_B_times_T)
    _write_rows_csv(rows, ["J_B_times_T", "propagator_distance", "state_distance"],
                    out / "zeno_gap.csv")
    record("zeno_gap.csv", config,
           {"J_B_times_T_values": list(grids.zeno_J_B_times_T)})

    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
