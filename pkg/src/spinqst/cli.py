"""Command-line entry point.

Commands
--------
design    write the calibrated coupling-schedule CSV for one chain length
evolve    run one transfer and write the trajectory CSV
sweep     run one of the named sweeps (bus | disorder | dephasing)
figures   produce every figure dataset plus manifest.json
validate  boundary-condition residuals and construction cross-checks

Configuration is a strict JSON document mirroring the run configuration
(unknown keys are rejected); ``-o KEY=VALUE`` overrides individual entries,
with dots for nested keys (e.g. ``-o noise.gamma_over_JM=0.005``).  All
rates are in units of 1/T and times in units of T.

Exit status: 0 success, 2 configuration error, 3 numerical-resolution or
calibration failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as exp
from .errors import CalibrationError, ConfigError, ResolutionError
from . import model as mdl
from .propagate import phase_aligned_distance
from .pulse_design import schedule_to_csv, verify_boundary_conditions

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parse_override_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _apply_overrides(doc: dict, overrides: list[str]) -> dict:
    out = json.loads(json.dumps(doc))  # deep copy
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form KEY=VALUE")
        key, raw = item.split("=", 1)
        value = _parse_override_value(raw)
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} crosses a scalar")
        node[parts[-1]] = value
    return out


def _load_config(args) -> exp.ExperimentConfig:
    doc: dict = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"malformed JSON in {args.config} at line {exc.lineno}, "
                f"column {exc.colno}: {exc.msg}") from exc
    doc = _apply_overrides(doc, args.override or [])
    doc.pop("sweeps", None)
    return exp.config_from_dict(doc)


def _load_sweep_grids(args) -> exp.SweepGrids:
    if not args.config:
        return exp.SweepGrids()
    doc = json.loads(Path(args.config).read_text())
    sweeps_doc = doc.get("sweeps", {})
    if not isinstance(sweeps_doc, dict):
        raise ConfigError("'sweeps' must be an object")
    known = set(exp.SweepGrids.__dataclass_fields__)
    unknown = set(sweeps_doc) - known
    if unknown:
        raise ConfigError(f"unknown sweep key(s) {sorted(unknown)}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v
              for k, v in sweeps_doc.items()}
    return exp.SweepGrids(**kwargs)


def _outdir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, datasets: dict) -> None:
    manifest = {"schema_version": exp.MANIFEST_SCHEMA_VERSION, "datasets": datasets}
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_design(args) -> int:
    config = _load_config(args)
    out = _outdir(args)
    pulse = exp.designed_pulse_for(config)
    path = out / "schedule.csv"
    schedule_to_csv(pulse, path)
    _write_manifest(out, {"schedule.csv": {"config": exp.resolve_config(config),
                                           "J_M": pulse.J_M,
                                           "mu": pulse.params.mu}})
    print(f"wrote {path}  (mu = {pulse.params.mu:.9g}, J_M = {pulse.J_M:.6g}/T)")
    return EXIT_OK


def cmd_evolve(args) -> int:
    config = _load_config(args)
    out = _outdir(args)
    traj = exp.run_transfer(config)
    path = out / "trajectory.csv"
    exp.trajectory_to_csv(traj, config.N, path)
    _write_manifest(out, {"trajectory.csv": {"config": exp.resolve_config(config),
                                             "J_M": traj.meta["J_M"],
                                             "mu": traj.meta["mu"]}})
    F = float(traj.F_series[-1])
    print(f"wrote {path}  (F(T) = {F:.6f}, 1-F = {1.0 - F:.3e})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load_config(args)
    grids = _load_sweep_grids(args)
    out = _outdir(args)
    if args.which == "bus":
        rows = exp.sweep_bus_coupling(config, grids.bus_J_B_times_T)
        path = out / "sweep_bus.csv"
        exp._write_rows_csv(
            rows, ["N", "J_B_times_T", "J_B_over_J_M", "F_T", "infidelity"], path)
        extra = {"J_B_times_T_values": list(grids.bus_J_B_times_T)}
    elif args.which == "disorder":
        deltas = np.linspace(-grids.disorder_span, grids.disorder_span,
                             grids.disorder_points)
        F = exp.sweep_disorder(config, deltas, deltas)
        rows = [{"delta_JS_rel": float(a), "delta_JR_rel": float(b),
                 "F_T": float(F[i, j])}
                for i, a in enumerate(deltas) for j, b in enumerate(deltas)]
        path = out / "sweep_disorder.csv"
        exp._write_rows_csv(rows, ["delta_JS_rel", "delta_JR_rel", "F_T"], path)
        extra = {"delta_values": [float(v) for v in deltas]}
    else:
        ratios = np.linspace(0.0, grids.dephasing_max_over_JM,
                             grids.dephasing_points)
        rows = exp.sweep_dephasing(config, ratios)
        path = out / "sweep_dephasing.csv"
        exp._write_rows_csv(rows, ["gamma_over_J_M", "gamma_T", "F_T"], path)
        extra = {"gamma_over_J_M_values": [float(v) for v in ratios]}
    entry = {"config": exp.resolve_config(config)}
    entry.update(extra)
    _write_manifest(out, {path.name: entry})
    print(f"wrote {path}")
    return EXIT_OK


def cmd_figures(args) -> int:
    config = _load_config(args)
    grids = _load_sweep_grids(args)
    out = _outdir(args)
    exp.write_figures(config, out, grids)
    names = sorted(p.name for p in out.glob("*.csv")) + ["manifest.json"]
    print(f"wrote {len(names)} files to {out}: " + ", ".join(names))
    return EXIT_OK


def cmd_validate(args) -> int:
    config = _load_config(args)
    pulse = exp.designed_pulse_for(config)
    report = verify_boundary_conditions(pulse.params, config.N)
    print(f"pulse calibration for N={config.N}: mu = {pulse.params.mu:.9g}, "
          f"J_M = {pulse.J_M:.6g}/T")
    print(report)

    checks: list[tuple[str, float, float]] = []  # (name, value, bound)
    chain = mdl.ChainModel(N=config.N, J_B=config.J_B_times_T)

    if config.N >= 4:
        eps_closed, phi3 = mdl.bus_spectrum(chain)
        M = mdl.bus_mirror_matrix(config.N)
        eps_num = np.sort(np.linalg.eigvalsh(M))
        p = np.arange(1, config.N - 1)
        eps_ref = np.sort(2.0 * np.cos((p - 1) * np.pi / (config.N - 2)))
        checks.append(("bus spectrum closed form",
                       float(np.max(np.abs(eps_num - eps_ref))), 1e-10))
        sub = mdl.single_excitation_hamiltonian(chain, 0.3, 0.7)
        resid = sub.HB @ phi3 - (config.N - 3) * config.J_B_times_T * phi3
        checks.append(("phi3 bus eigenvector", float(np.max(np.abs(resid))), 1e-9))

    if config.N <= mdl.MAX_ORACLE_SITES - 2:
        rng = np.random.default_rng(7)
        worst = 0.0
        shift_mag = 0.0
        for _ in range(5):
            js, jr = rng.uniform(-1.0, 1.0, size=2)
            sub = mdl.single_excitation_hamiltonian(chain, js, jr)
            full = mdl.full_spin_hamiltonian(chain, js, jr)
            R = mdl.restrict_to_sector(full, config.N)
            D = R - sub.total
            shift = float(np.mean(np.diag(D)).real)
            shift_mag = max(shift_mag, abs(shift))
            worst = max(worst, float(np.max(np.abs(D - shift * np.eye(chain.dim)))))
        checks.append(("sector restriction vs oracle", worst, 1e-10))
        print(f"measured constant diagonal shift vs oracle: {shift_mag:.3e}")

    SN = mdl.sn_transform(config.N)
    checks.append(("S_N unitarity",
                   float(np.max(np.abs(SN @ SN.T - np.eye(4)))), 1e-12))
    He = mdl.rotated_hamiltonian(chain, 0.4, 0.9)
    checks.append(("rotated block off-diagonals",
                   float(np.max(np.abs(He[:2, 2:]))), 1e-12))

    from .pulse_design import analytic_propagator
    U = analytic_propagator(pulse.params, config.N, pulse.params.T)
    checks.append(("analytic propagator unitarity",
                   float(np.max(np.abs(U.conj().T @ U - np.eye(4)))), 1e-10))

    print(f"{'check':<34s} {'value':>12s} {'bound':>9s}  pass")
    ok_all = report.all_pass
    for name, value, bound in checks:
        ok = value < bound
        ok_all = ok_all and ok
        print(f"{name:<34s} {value:>12.3e} {bound:>9.0e}  {'yes' if ok else 'NO'}")
    if not ok_all:
        print("validation FAILED")
        return EXIT_NUMERICAL
    print("all validation checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinqst",
        description="Boundary-controlled spin-chain state transfer toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH",
                       help="JSON configuration document")
        p.add_argument("-o", "--override", action="append", metavar="KEY=VALUE",
                       help="override a configuration entry (repeatable; "
                            "dots for nested keys)")
        p.add_argument("--output-dir", default="output", metavar="PATH")
        p.add_argument("--threads", type=int, default=0, metavar="INT",
                       help="worker threads for sweeps (0 = auto)")

    for name, fn in [("design", cmd_design), ("evolve", cmd_evolve),
                     ("figures", cmd_figures), ("validate", cmd_validate)]:
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("sweep")
    p.add_argument("which", choices=["bus", "disorder", "dephasing"])
    common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CalibrationError, ResolutionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
