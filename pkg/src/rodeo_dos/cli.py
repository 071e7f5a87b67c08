"""``rodeo-dos`` command line: exact | scan | refine | thermo | validate.

Exit codes: 0 success, 1 validation failure, 2 config error, 3 I/O error.
Failures print one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, env_seed, load_config, with_overrides
from .hamiltonian import build_tfim, exact_spectrum
from .rodeo import EnergyGrid, NosEstimate, nos_scan, read_scan_csv, validate_oracle_chain
from .thermo import (
    NosTable,
    comparison_csv,
    default_betas,
    relative_difference,
    specific_heat,
    thermo_curve_csv,
)

log = logging.getLogger("rodeo_dos")

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _workers(config: RunConfig) -> int:
    return config.workers or os.cpu_count() or 1


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _manifest(config: RunConfig, command: str, started: float, **extra) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config": config.to_dict(),
        "seed": config.rodeo.seed,
        "wall_clock_seconds": round(time.time() - started, 3),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        **extra,
    }


def _write_manifest(config: RunConfig, name: str, manifest: dict) -> None:
    _write(config.output / name, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def run_exact(config: RunConfig) -> dict:
    h = build_tfim(config.model)
    spectrum = exact_spectrum(h)
    _write(config.output / "levels.csv", spectrum.levels_csv())
    _write(config.output / "hamiltonian.json", h.to_json() + "\n")
    return {"levels": [[e, m] for e, m in spectrum.levels]}


def _scan(config: RunConfig, grid: EnergyGrid, rodeo=None) -> NosEstimate:
    h = build_tfim(config.model)
    params = rodeo or config.rodeo
    log.info("scanning %d gridpoints x %d inputs, %d rounds", len(grid), h.dim, params.rounds)
    return nos_scan(h, grid, params, config.trotter, workers=_workers(config),
                    keep_per_input=config.per_input)


def _write_scan(config: RunConfig, est: NosEstimate, stem: str) -> dict:
    _write(config.output / f"{stem}.csv", est.to_csv())
    if config.per_input:
        _write(config.output / f"{stem}_per_input.csv", est.per_input_csv())
    return {
        "cap_hits": est.cap_hits,
        "gridpoints": len(est.grid),
        "outputs": [f"{stem}.csv"] + ([f"{stem}_per_input.csv"] if config.per_input else []),
    }


def run_scan(config: RunConfig) -> dict:
    return _write_scan(config, _scan(config, config.grid), "scan")


def refine_config(config: RunConfig) -> RunConfig:
    """The scan config with the refinement window and Gaussian width swapped in."""
    rf = config.refine
    return with_overrides(config, **{
        "grid.start": rf.start, "grid.end": rf.end, "grid.step": rf.step, "rodeo.dev": rf.dev,
    })


def run_refine(config: RunConfig) -> dict:
    sub = refine_config(config)
    out = _write_scan(sub, _scan(sub, sub.grid), "refine")
    out["grid"] = {"start": sub.grid.start, "end": sub.grid.end, "step": sub.grid.step}
    out["dev"] = sub.rodeo.dev
    return out


def thermo_comparison(config: RunConfig, energies, omega):
    """c_B of the scan table vs exact levels on the configured beta grid."""
    th = config.thermo
    betas = default_betas(th.t_min, th.t_max, th.points)
    m = config.model.spins
    table = NosTable.from_scan(energies, omega, clamp=th.clamp)
    exact = NosTable.from_levels(exact_spectrum(build_tfim(config.model)).levels)
    cb_rodeo = specific_heat(table, betas, m)
    cb_exact = specific_heat(exact, betas, m)
    temps = 1.0 / betas
    window = (temps >= th.compare_t_min - 1e-12) & (temps <= th.compare_t_max + 1e-12)
    rel = relative_difference(cb_rodeo, cb_exact)
    return betas, table, exact, cb_rodeo, cb_exact, float(np.nanmax(rel[window]))


def run_thermo(config: RunConfig, scan_path: Path | None = None) -> dict:
    th = config.thermo
    info: dict = {}
    if scan_path is not None:
        energies, omega, _ = read_scan_csv(Path(scan_path).read_text(encoding="utf-8"))
        info["scan_source"] = str(scan_path)
    else:
        est = _scan(config, config.grid)
        info.update(_write_scan(config, est, "scan"))
        energies, omega = est.energies, est.omega
    betas, table, exact, cb_r, cb_e, worst = thermo_comparison(config, energies, omega)
    info["max_rel_diff"] = worst
    info["rounds_used"] = config.rodeo.rounds
    if scan_path is None and worst >= th.tolerance and th.escalate_rounds > config.rodeo.rounds:
        log.info("max relative difference %.3g >= %.3g; escalating to %d rounds",
                 worst, th.tolerance, th.escalate_rounds)
        config = with_overrides(config, **{"rodeo.rounds": th.escalate_rounds})
        est = _scan(config, config.grid)
        info["escalation"] = {
            "reason": f"max relative difference {worst:.6g} >= tolerance {th.tolerance}",
            "from_rounds": info["rounds_used"],
            "to_rounds": th.escalate_rounds,
        }
        info.update(_write_scan(config, est, "scan_escalated"))
        betas, table, exact, cb_r, cb_e, worst = thermo_comparison(config, est.energies, est.omega)
        info["max_rel_diff"] = worst
        info["rounds_used"] = th.escalate_rounds
    info["comparison_passed"] = worst < th.tolerance
    m = config.model.spins
    _write(config.output / "thermo_rodeo.csv", thermo_curve_csv(table, betas, m, th.imag))
    _write(config.output / "thermo_exact.csv", thermo_curve_csv(exact, betas, m, th.imag))
    _write(config.output / "comparison.csv", comparison_csv(betas, cb_r, cb_e))
    return info


def run_validate(config: RunConfig) -> dict:
    h = build_tfim(config.model)
    report = validate_oracle_chain(h, config.rodeo, cells=config.validate_cells,
                                   mc_samples=config.validate_mc_samples)
    needed = int(np.ceil(0.94 * len(report.cells)))
    out = report.to_dict()
    out["mc_required"] = needed
    out["passed"] = report.circuit_ok and report.mc_within_band >= needed
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rodeo-dos", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("exact", "scan", "refine", "thermo", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML config or JSON run manifest")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out")
        p.add_argument("--e0", type=float)
        p.add_argument("--ef", type=float)
        p.add_argument("--eps", type=float)
        p.add_argument("--dev", type=float)
        p.add_argument("--rounds", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "thermo":
            p.add_argument("--scan", help="existing scan CSV; omitted means run a scan first")
    return parser


def _apply_flags(config: RunConfig, args) -> RunConfig:
    if args.command == "refine":
        grid_keys = ("refine.start", "refine.end", "refine.step", "refine.dev")
    else:
        grid_keys = ("grid.start", "grid.end", "grid.step", "rodeo.dev")
    overrides = dict(zip(grid_keys, (args.e0, args.ef, args.eps, args.dev)))
    # flag > RODEO_SEED > config file
    overrides.update({
        "rodeo.seed": args.seed if args.seed is not None else env_seed(),
        "rodeo.rounds": args.rounds,
        "workers": args.workers,
        "output.dir": args.out,
    })
    return with_overrides(config, **overrides)


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    started = time.time()
    try:
        config = _apply_flags(load_config(args.config), args)
        if args.command == "exact":
            extra = run_exact(config)
        elif args.command == "scan":
            extra = run_scan(config)
        elif args.command == "refine":
            extra = run_refine(config)
        elif args.command == "thermo":
            extra = run_thermo(config, Path(args.scan) if args.scan else None)
        else:
            extra = run_validate(config)
        _write_manifest(config, f"manifest_{args.command}.json",
                        _manifest(config, args.command, started, **extra))
        if args.command == "validate":
            print(json.dumps({k: extra[k] for k in
                              ("passed", "max_circuit_deviation", "mc_within_band", "total")}))
            if not extra["passed"]:
                return _fail(EXIT_VALIDATION, "validation", "oracle chain violated")
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except (OSError, UnicodeDecodeError) as exc:
        return _fail(EXIT_IO, "io", str(exc))
    except ValueError as exc:
        return _fail(EXIT_VALIDATION, "validation", str(exc))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
