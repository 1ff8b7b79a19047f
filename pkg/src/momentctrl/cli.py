"""Command line interface for ensemble control design.

Three subcommands:

  analyze    rank sweep of truncated controllability matrices from a config
  design     run a design algorithm from a config, write control + report
  reproduce  run a bundled benchmark (oscillator, pattern, scalar)

Exit codes: 0 success, 2 malformed config or arguments, 3 numerical
failure (design or validation), 4 sampling-free certification requested
for a system whose moment operator is not symmetric.
"""

from __future__ import annotations

import argparse
import csv
import sys
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                      # Python < 3.11
    import tomli as tomllib

from . import ensemble as ens_mod
from .controllability import denseness_sweep
from .legendre import analyze
from .ensemble import (Profile, Segment, SimulationError, l2_distance,
                       l2_norm, preset_profiles, segment_quadrature,
                       simulate_ensemble)
from .moments import (REFERENCE_ORDER, PolynomialEnsemble,
                      build_moment_system, simulate_truncated)
from .synthesis import (DesignError, SymmetryError, algorithm_a_priori,
                        algorithm_sampling_free, reference_design)

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_SYMMETRY = 4


class ConfigError(Exception):
    """Malformed or incomplete configuration."""


# ---------------------------------------------------------------- config

def _load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}")


def _matrix_stack(raw, rows: int, cols: int, name: str) -> np.ndarray:
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"[system] {name} must be a list of matrices")
    if arr.ndim != 3 or arr.shape[1:] != (rows, cols):
        raise ConfigError(
            f"[system] {name} must be a list of {rows}x{cols} matrices, "
            f"got shape {arr.shape}")
    return arr


def _build_ensemble(cfg: dict) -> PolynomialEnsemble:
    try:
        sys_tab = cfg["system"]
        n = int(sys_tab["n"])
        m = int(sys_tab["m"])
        basis = sys_tab.get("basis", "monomial")
        A_raw = sys_tab["A"]
        B_raw = sys_tab["B"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"incomplete [system] table: {exc}")
    if n <= 0 or m <= 0:
        raise ConfigError("[system] n and m must be positive")
    A = _matrix_stack(A_raw, n, n, "A")
    B = _matrix_stack(B_raw, n, m, "B")
    if basis == "monomial":
        return PolynomialEnsemble.from_monomial(A, B)
    if basis == "legendre":
        return PolynomialEnsemble(A, B)
    raise ConfigError("[system] basis must be 'monomial' or 'legendre'")


def _build_profile(spec, n: int, which: str) -> Profile:
    if isinstance(spec, str):
        try:
            prof = preset_profiles(spec)
        except ValueError as exc:
            raise ConfigError(str(exc))
    elif isinstance(spec, dict):
        try:
            segments = []
            for seg in spec["segments"]:
                lo, hi = (float(v) for v in seg["interval"])
                parts = tuple(
                    (str(p[0]),) + tuple(float(v) for v in p[1:])
                    for p in seg["components"])
                segments.append(Segment(lo, hi, parts))
            prof = Profile(tuple(segments))
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"bad [profiles] {which} table: {exc}")
    else:
        raise ConfigError(
            f"[profiles] {which} must be a preset name or a segment table")
    if prof.n != n:
        raise ConfigError(
            f"[profiles] {which} has {prof.n} components, system has n={n}")
    return prof


def _profiles(cfg: dict, n: int) -> tuple[Profile, Profile]:
    try:
        tab = cfg["profiles"]
        init_spec = tab["initial"]
        targ_spec = tab["target"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"incomplete [profiles] table: {exc}")
    return (_build_profile(init_spec, n, "initial"),
            _build_profile(targ_spec, n, "target"))


def _design_settings(cfg: dict) -> dict:
    tab = cfg.get("design", {})
    try:
        out = {
            "T": float(tab["T"]),
            "epsilon": (float(tab["epsilon"])
                        if "epsilon" in tab else None),
            "N_start": int(tab.get("N_start", 2)),
            "N_max": int(tab.get("N_max", 12)),
            "algorithm": str(tab.get("algorithm", "a-priori")),
            "designer": str(tab.get("designer", "gramian")),
            "n_segments": int(tab.get("n_segments", 1000)),
            "rcond": (float(tab["rcond"]) if "rcond" in tab else None),
            "design_order": (int(tab["design_order"])
                             if "design_order" in tab else None),
            "sim_steps": int(tab.get("sim_steps", 2000)),
            "sim_atol": float(tab.get("sim_atol", 1e-8)),
            "grid": int(tab.get("grid", ens_mod.DEFAULT_VALIDATION_GRID)),
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad [design] table: {exc}")
    if out["T"] <= 0:
        raise ConfigError("[design] T must be positive")
    if out["algorithm"] not in ("a-priori", "sampling-free"):
        raise ConfigError(
            "[design] algorithm must be 'a-priori' or 'sampling-free'")
    if out["N_start"] > out["N_max"]:
        raise ConfigError("[design] N_start must not exceed N_max")
    return out


def _bound_settings(cfg: dict) -> dict:
    tab = cfg.get("bound", {})
    chi = tab.get("chi", "optimize")
    if chi != "optimize":
        try:
            chi = float(chi)
        except (TypeError, ValueError):
            raise ConfigError("[bound] chi must be a number or 'optimize'")
        if chi <= 1.0:
            raise ConfigError("[bound] chi must exceed 1")
    try:
        return {
            "chi": chi,
            "refined": bool(tab.get("refined", True)),
            "reference_order": int(tab.get("reference_order",
                                           REFERENCE_ORDER)),
            "tail_pad": int(tab.get("tail_pad", 20)),
        }
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [bound] table: {exc}")


def _out_dir(cfg: dict, override: str | None) -> Path:
    if override is not None:
        path = Path(override)
    else:
        path = Path(cfg.get("output", {}).get("directory", "."))
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------- output

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    print(f"wrote {path}")


def _write_control_csv(path: Path, control) -> None:
    header = ["t"] + [f"u_{j + 1}" for j in range(control.m)]
    rows = [[t, *u] for t, u in zip(control.grid, control.values)]
    _write_csv(path, header, rows)


def _write_iterations_csv(path: Path, records, error_label: str) -> None:
    _write_csv(path, ["order", error_label, "design_cond"],
               [[r.order, r.error, r.gramian_cond] for r in records])


# ------------------------------------------------------------- commands

def cmd_analyze(args) -> int:
    cfg = _load_toml(args.config)
    ens = _build_ensemble(cfg)
    orders = cfg.get("analyze", {}).get("orders")
    if orders is None:
        design = _design_settings(cfg) if "design" in cfg else None
        if design is not None:
            orders = list(range(design["N_start"], design["N_max"] + 1))
    if orders is None or len(orders) == 0:
        raise ConfigError(
            "no truncation orders: set [analyze] orders or a [design] range")
    orders = [int(N) for N in orders]
    if min(orders) < 1:
        raise ConfigError("truncation orders must be >= 1")
    report = denseness_sweep(ens, orders)
    out = _out_dir(cfg, args.out)
    rows = [[N, N * ens.n, rank, rank == N * ens.n]
            for N, rank in zip(report["orders"], report["ranks"])]
    _write_csv(out / "controllability.csv",
               ["order", "dimension", "rank", "full_rank"], rows)
    verdict = ("full rank at every tested order"
               if report["all_full_rank"] else "rank deficiency detected")
    print(verdict)
    print(f"note: {report['note']}")
    return EXIT_OK


def _one_shot_design(ens, initial, target, design) -> tuple:
    """Design once on a fixed high order and validate by simulation."""
    control, info = reference_design(
        ens, initial, target, design["T"],
        reference_order=design["design_order"],
        n_segments=design["n_segments"],
        rcond=1e-10 if design["rcond"] is None else design["rcond"])
    beta = np.linspace(-1.0, 1.0, design["grid"])
    snap = simulate_ensemble(ens, initial, control, beta=beta,
                             steps=design["sim_steps"],
                             atol=design["sim_atol"])
    error = l2_distance(snap, target)
    return control, error, info


def cmd_design(args) -> int:
    cfg = _load_toml(args.config)
    ens = _build_ensemble(cfg)
    initial, target = _profiles(cfg, ens.n)
    design = _design_settings(cfg)
    if args.algorithm is not None:
        design["algorithm"] = args.algorithm
    out = _out_dir(cfg, args.out)
    summary = [f"algorithm: {design['algorithm']}"]
    if design["design_order"] is not None and design["algorithm"] == "a-priori":
        control, error, info = _one_shot_design(ens, initial, target, design)
        summary += [f"design order: {design['design_order']}",
                    f"moment residual: {_fmt(info['residual'])}",
                    f"ensemble error: {_fmt(error)}",
                    f"control energy: {_fmt(control.energy())}"]
        _write_csv(out / "iterations.csv",
                   ["order", "ensemble_error", "design_cond"],
                   [[design["design_order"], error, info["cond"]]])
    elif design["algorithm"] == "a-priori":
        report = algorithm_a_priori(
            ens, initial, target, design["T"], epsilon=design["epsilon"],
            N_start=design["N_start"], N_max=design["N_max"],
            designer=design["designer"], n_segments=design["n_segments"],
            rcond=design["rcond"],
            beta=np.linspace(-1.0, 1.0, design["grid"]),
            sim_steps=design["sim_steps"], sim_atol=design["sim_atol"])
        _write_iterations_csv(out / "iterations.csv", report.records,
                              "ensemble_error")
        if report.control is None:
            print(f"design failed: {report.note}", file=sys.stderr)
            return EXIT_NUMERICAL
        control = report.control
        summary += [f"chosen order: {report.order}",
                    f"ensemble error: {_fmt(report.error)}",
                    f"converged: {report.converged}"]
        if report.note:
            summary.append(f"note: {report.note}")
    else:
        bound = _bound_settings(cfg)
        report = algorithm_sampling_free(
            ens, initial, target, design["T"], epsilon=design["epsilon"],
            N_start=design["N_start"], N_max=design["N_max"],
            chi=bound["chi"], reference_order=bound["reference_order"],
            tail_pad=bound["tail_pad"], n_segments=design["n_segments"],
            rcond=1e-13 if design["rcond"] is None else design["rcond"],
            refined=bound["refined"])
        _write_iterations_csv(out / "iterations.csv", report.records,
                              "error_bound")
        if report.control is None:
            print(f"design failed: {report.note}", file=sys.stderr)
            return EXIT_NUMERICAL
        control = report.control
        summary += [f"chosen order: {report.order}",
                    f"certified error bound: {_fmt(report.error)}",
                    f"chi: {_fmt(report.extras['chi'])}",
                    f"rho: {_fmt(report.extras['rho'])}",
                    f"converged: {report.converged}"]
        if report.note:
            summary.append(f"note: {report.note}")
    _write_control_csv(out / "control.csv", control)
    text = "\n".join(summary)
    (out / "summary.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


# ------------------------------------------------------------ reproduce

def _preset_config(name: str) -> dict:
    ref = resources.files("momentctrl") / "presets" / f"{name}.toml"
    with ref.open("rb") as fh:
        return tomllib.load(fh)


def _reproduce_oscillator(out: Path) -> int:
    cfg = _preset_config("oscillator")
    ens = _build_ensemble(cfg)
    initial, target = _profiles(cfg, ens.n)
    design = _design_settings(cfg)
    horizons = (1.0, 3.5)
    sweeps = []
    for T in horizons:
        report = algorithm_a_priori(
            ens, initial, target, T, N_start=design["N_start"],
            N_max=design["N_max"], designer=design["designer"])
        sweeps.append(report)
        print(f"T = {T}: best error {report.error:.6e} "
              f"at order {report.order}")
    rows = []
    for recs in zip(*(rep.records for rep in sweeps)):
        row = [recs[0].order]
        for rec in recs:
            row.append(rec.error)
        row.append(recs[0].gramian_cond)
        rows.append(row)
    header = ["order"] + [f"error_T{_fmt_horizon(T)}" for T in horizons]
    header.append("gramian_cond_T1")
    _write_csv(out / "oscillator_error_vs_order.csv", header, rows)
    return EXIT_OK


def _fmt_horizon(T: float) -> str:
    return str(T).replace(".", "p").removesuffix("p0")


def _reproduce_pattern(out: Path) -> int:
    cfg = _preset_config("pattern")
    ens = _build_ensemble(cfg)
    initial, target = _profiles(cfg, ens.n)
    design = _design_settings(cfg)
    control, info = reference_design(
        ens, initial, target, design["T"],
        reference_order=design["design_order"], rcond=design["rcond"])
    nodes, wts = segment_quadrature(target)
    snap = simulate_ensemble(ens, initial, control, beta=nodes,
                             steps=design["sim_steps"],
                             atol=design["sim_atol"], weights=wts)
    error = l2_distance(snap, target)
    norm = l2_norm(target)
    beta = np.linspace(-1.0, 1.0, design["grid"])
    snap_grid = simulate_ensemble(ens, initial, control, beta=beta,
                                  steps=design["sim_steps"],
                                  atol=design["sim_atol"])
    targ_states = target(beta)
    rows = [[b, *xs, *ts]
            for b, xs, ts in zip(beta, snap_grid.states, targ_states)]
    _write_csv(out / "pattern_final_profile.csv",
               ["beta", "x_1", "x_2", "target_1", "target_2"], rows)
    summary = "\n".join([
        f"design order: {design['design_order']}",
        f"moment residual: {_fmt(info['residual'])}",
        f"ensemble error: {_fmt(error)}",
        f"target norm: {_fmt(norm)}",
        f"relative error: {_fmt(error / norm)}",
        f"max |u|: {_fmt(np.max(np.abs(control.values)))}",
    ])
    (out / "pattern_summary.txt").write_text(summary + "\n")
    print(summary)
    return EXIT_OK


def _reproduce_scalar(out: Path) -> int:
    cfg = _preset_config("scalar")
    ens = _build_ensemble(cfg)
    initial, target = _profiles(cfg, ens.n)
    design = _design_settings(cfg)
    bound = _bound_settings(cfg)
    report = algorithm_sampling_free(
        ens, initial, target, design["T"], N_start=design["N_start"],
        N_max=design["N_max"], chi=bound["chi"],
        reference_order=bound["reference_order"], tail_pad=bound["tail_pad"],
        refined=bound["refined"])
    ref_order = report.extras["reference_order"]
    sys_ref = build_moment_system(ens, ref_order)
    m0_ref = analyze(initial, ref_order, edges=initial.edges)
    mF_ref = analyze(target, ref_order, edges=target.edges)
    rows = []
    for rec in report.records:
        control = report.extras["controls"].get(rec.order)
        if control is None:
            continue
        _, traj = simulate_truncated(sys_ref, m0_ref, control)
        moment_err = float(np.linalg.norm(traj[-1] - mF_ref))
        snap = simulate_ensemble(ens, initial, control)
        ens_err = l2_distance(snap, target)
        rows.append([rec.order, moment_err, ens_err, rec.error])
    _write_csv(out / "scalar_error_and_bound.csv",
               ["order", "reference_moment_error", "ensemble_error",
                "error_bound"], rows)
    summary = "\n".join([
        f"chi: {_fmt(report.extras['chi'])}",
        f"rho: {_fmt(report.extras['rho'])}",
        f"best bound: {_fmt(report.error)} at order {report.order}",
    ])
    (out / "scalar_summary.txt").write_text(summary + "\n")
    print(summary)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    drivers = {"oscillator": _reproduce_oscillator,
               "pattern": _reproduce_pattern,
               "scalar": _reproduce_scalar}
    out = Path(args.out if args.out is not None else f"out-{args.name}")
    out.mkdir(parents=True, exist_ok=True)
    return drivers[args.name](out)


# ----------------------------------------------------------------- main

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momentctrl",
        description="moment-space design of broadcast controls "
                    "for linear ensembles")
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze",
                          help="controllability rank sweep from a config")
    p_an.add_argument("--config", required=True, help="TOML config file")
    p_an.add_argument("--out", help="output directory")
    p_an.add_argument("--seed", type=int, help="seed for the numpy RNG")
    p_an.set_defaults(func=cmd_analyze)

    p_de = sub.add_parser("design",
                          help="design a control from a config")
    p_de.add_argument("--config", required=True, help="TOML config file")
    p_de.add_argument("--algorithm",
                      choices=["a-priori", "sampling-free"],
                      help="override the algorithm named in the config")
    p_de.add_argument("--out", help="output directory")
    p_de.add_argument("--seed", type=int, help="seed for the numpy RNG")
    p_de.set_defaults(func=cmd_design)

    p_re = sub.add_parser("reproduce",
                          help="run a bundled benchmark")
    p_re.add_argument("name", choices=["oscillator", "pattern", "scalar"])
    p_re.add_argument("--out", help="output directory")
    p_re.add_argument("--seed", type=int, help="seed for the numpy RNG")
    p_re.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is not None:
        np.random.seed(args.seed)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SymmetryError as exc:
        print(f"symmetry error: {exc}", file=sys.stderr)
        return EXIT_SYMMETRY
    except (DesignError, SimulationError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
