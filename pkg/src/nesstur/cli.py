"""Command-line surface.

Every command computes first and writes last, so a failed run leaves no
partial files.  Outputs are CSV (17 significant digits, header row) or
JSON; reruns with the same configuration and seed produce byte-identical
CSV bodies.

Configuration is resolved in three layers: built-in defaults (or a figure
preset), then a flat ``key = value`` config file, then command-line flags.
"""

from __future__ import annotations

import argparse
import functools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import dynamics, entangle, tur, workstats
from .model import SystemParams, liouvillian_gap, ness_analytic, ness_density_matrix
from .errors import ConvergenceError, IntegrationError

PARAM_KEYS = ("omega", "g", "beta_c", "beta_h", "nu_c", "nu_h")
SWEEPABLE = ("g", "beta_c", "beta_h", "nu_c", "nu_h")
QUENCHES = ("swap", "maxwork", "violation", "haar", "file")

DEFAULTS = {
    "omega": 1.0,
    "g": 0.5,
    "beta_c": 3.0,
    "beta_h": 1.0,
    "nu_c": 0.004,
    "nu_h": 0.004,
    "quench": "swap",
    "seed": 1234,
    "sweep": None,
    "out": ".",
    "format": "csv",
    "jobs": None,
    "n": 100000,
    "t_end": None,
    "samples": 600,
    "unitary_file": None,
    "dephase": True,
}

# Captioned parameter presets, keyed by figure id.
_BASE = {"omega": 1.0, "beta_c": 3.0, "beta_h": 1.0, "nu_c": 0.004, "nu_h": 0.004}
FIGURE_PRESETS = {
    "2a": {**_BASE, "g": 0.75, "quench": "swap"},
    "2b": {**_BASE, "g": 0.75, "quench": "maxwork"},
    "3": {**_BASE, "g": 0.75, "quench": "swap"},
    "4a": {**_BASE, "quench": "swap", "sweep": "g:0.1:0.9:9"},
    "4b": {**_BASE, "quench": "maxwork", "sweep": "g:0.1:0.9:9"},
    "4v": {**_BASE, "nu_c": 0.002, "nu_h": 0.008, "quench": "violation", "sweep": "g:0.1:0.9:17"},
    "5": {**_BASE, "g": 0.5, "nu_c": 0.012, "n": 100000},
    "6": {**_BASE, "sweep": "g:0.05:0.95:19"},
    "7": {**_BASE, "sweep": "g:0.05:0.95:19"},
    "8": {**_BASE, "quench": "swap", "sweep": "g:0.5:0.95:10"},
}
FIGURE_COMMANDS = {
    "2a": "relax", "2b": "relax", "3": "relax",
    "4a": "tur", "4b": "tur", "4v": "tur",
    "5": "haar-scan", "6": "ness", "7": "vwindow", "8": "sep-project",
}


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    quench: str
    seed: int
    sweep: tuple[str, float, float, int] | None
    out: Path
    format: str
    jobs: int
    n: int
    t_end: float | None
    samples: int
    unitary_file: str | None
    dephase: bool


def parse_config_file(path: str) -> dict:
    """Flat ``key = value`` file; '#' starts a comment."""
    values: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in DEFAULTS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = val.strip()
    return values


def _parse_sweep(text: str) -> tuple[str, float, float, int]:
    parts = text.split(":")
    if len(parts) != 4:
        raise ValueError(f"sweep must be var:start:stop:points, got {text!r}")
    var, start, stop, points = parts[0], float(parts[1]), float(parts[2]), int(parts[3])
    if var not in SWEEPABLE:
        raise ValueError(f"sweep variable must be one of {SWEEPABLE}, got {var!r}")
    if points < 1:
        raise ValueError("sweep needs at least one point")
    return var, start, stop, points


_COERCERS = {
    "omega": float, "g": float, "beta_c": float, "beta_h": float,
    "nu_c": float, "nu_h": float, "seed": int, "jobs": int, "n": int,
    "t_end": float, "samples": int, "quench": str, "sweep": str,
    "out": str, "format": str, "unitary_file": str,
    "dephase": lambda v: str(v).lower() not in ("0", "false", "no"),
}


def resolve_config(args: argparse.Namespace, preset: dict | None = None) -> RunConfig:
    """Merge defaults, preset, config file and flags into a validated RunConfig."""
    merged = dict(DEFAULTS)
    if preset:
        merged.update(preset)
    if getattr(args, "config", None):
        for key, raw in parse_config_file(args.config).items():
            merged[key] = _COERCERS[key](raw)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    if merged["quench"] not in QUENCHES:
        raise ValueError(f"quench must be one of {QUENCHES}, got {merged['quench']!r}")
    if merged["format"] not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {merged['format']!r}")
    if merged["jobs"] is None:
        merged["jobs"] = int(os.environ.get("NESSTUR_JOBS", "1"))
    sweep = _parse_sweep(merged["sweep"]) if merged["sweep"] else None
    params = SystemParams(**{k: float(merged[k]) for k in PARAM_KEYS})
    cfg = RunConfig(
        params=params,
        quench=merged["quench"],
        seed=int(merged["seed"]),
        sweep=sweep,
        out=Path(merged["out"]),
        format=merged["format"],
        jobs=max(1, int(merged["jobs"])),
        n=int(merged["n"]),
        t_end=merged["t_end"],
        samples=int(merged["samples"]),
        unitary_file=merged["unitary_file"],
        dephase=bool(merged["dephase"]),
    )
    sweep_points(cfg)  # fail fast: every sweep point must be a valid configuration
    return cfg


def sweep_points(cfg: RunConfig) -> list[SystemParams]:
    """Parameter sets of the run (a single one without a sweep)."""
    if cfg.sweep is None:
        return [cfg.params]
    var, start, stop, points = cfg.sweep
    return [replace(cfg.params, **{var: float(v)}) for v in np.linspace(start, stop, points)]


def quench_unitary(cfg: RunConfig, p: SystemParams) -> np.ndarray:
    if cfg.quench == "swap":
        return workstats.unitary_swap_entangled(p)
    if cfg.quench == "maxwork":
        return workstats.unitary_max_work(p)
    if cfg.quench == "violation":
        return workstats.unitary_violation()
    if cfg.quench == "haar":
        return workstats.haar_random_unitary(cfg.seed)
    if cfg.unitary_file is None:
        raise ValueError("quench 'file' requires --unitary-file pointing to a .npy matrix")
    u = np.load(cfg.unitary_file)
    return workstats.check_unitary(u)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "na"
    if isinstance(value, (float, np.floating)):
        return f"{value:.17g}"
    return str(value)


def _rows_to_csv(columns: list[str], rows: list[dict]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _rows_to_json(columns: list[str], rows: list[dict]) -> str:
    return json.dumps([{c: row[c] for c in columns} for row in rows], indent=2) + "\n"


def _render(cfg: RunConfig, columns: list[str], rows: list[dict]) -> str:
    if cfg.format == "json":
        return _rows_to_json(columns, rows)
    return _rows_to_csv(columns, rows)


def _param_cols(p: SystemParams) -> dict:
    return {k: getattr(p, k) for k in PARAM_KEYS}


def _pmap(fn, items, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# row builders (top level so process pools can pickle them)

def _ness_row(p: SystemParams) -> dict:
    c = ness_analytic(p)
    report = entangle.entanglement_report(p)
    return {
        **_param_cols(p),
        "rho0": c.rho0,
        "rho_minus": c.rho_minus,
        "rho_plus": c.rho_plus,
        "rho_2omega": c.rho_2omega,
        "purity": report.purity,
        "concurrence": report.concurrence,
        "mutual_information": report.mutual_information,
        "entangled": report.criterion_populations,
    }


def _vwindow_row(p: SystemParams) -> dict:
    report = entangle.entanglement_report(p)
    vb = report.v_bounds
    return {
        **_param_cols(p),
        "w": vb.w if vb else None,
        "v": vb.v if vb else None,
        "v_lower": vb.lower if vb else None,
        "v_upper": vb.upper if vb else None,
        "purity": report.purity,
        "entangled": report.criterion_populations,
    }


def _tur_row(p: SystemParams, quench: str, seed: int, unitary_file: str | None) -> dict:
    cfg_like = RunConfig(
        params=p, quench=quench, seed=seed, sweep=None, out=Path("."),
        format="csv", jobs=1, n=0, t_end=None, samples=0,
        unitary_file=unitary_file, dephase=True,
    )
    u = quench_unitary(cfg_like, p)
    report = tur.evaluate_tur(p, u)
    certificate = tur.swap_tur_certificate(p) if quench == "swap" else None
    return {
        **_param_cols(p),
        "lhs": report.lhs,
        "sigma_rel": report.sigma_rel,
        "sigma_cost": report.sigma_cost,
        **{k: report.bounds[k] for k in tur.BOUND_KEYS},
        **{f"violated_{k}": report.violated[k] for k in tur.BOUND_KEYS},
        "certificate": certificate,
    }


def _sep_row(p: SystemParams, quench: str, seed: int, unitary_file: str | None, dephase: bool) -> dict:
    cfg_like = RunConfig(
        params=p, quench=quench, seed=seed, sweep=None, out=Path("."),
        format="csv", jobs=1, n=0, t_end=None, samples=0,
        unitary_file=unitary_file, dephase=dephase,
    )
    u = quench_unitary(cfg_like, p)
    cmp = entangle.separable_work_comparison(p, u, dephase=dephase)
    return {
        **_param_cols(p),
        "distance": cmp.projection.distance,
        "relaxation_tight": cmp.projection.relaxation_tight,
        "mean_sq_ness": cmp.moments_input.mean ** 2,
        "mean_sq_sep": cmp.moments_projected.mean ** 2,
        "var_ness": cmp.moments_input.variance,
        "var_sep": cmp.moments_projected.variance,
        "rel_err_sq_ness": cmp.moments_input.rel_err_sq,
        "rel_err_sq_sep": cmp.moments_projected.rel_err_sq,
        "ratio_rel_err_sq": cmp.ratio_rel_err_sq,
    }


NESS_COLUMNS = list(PARAM_KEYS) + [
    "rho0", "rho_minus", "rho_plus", "rho_2omega",
    "purity", "concurrence", "mutual_information", "entangled",
]
VWINDOW_COLUMNS = list(PARAM_KEYS) + ["w", "v", "v_lower", "v_upper", "purity", "entangled"]
TUR_COLUMNS = list(PARAM_KEYS) + [
    "lhs", "sigma_rel", "sigma_cost",
    *tur.BOUND_KEYS, *[f"violated_{k}" for k in tur.BOUND_KEYS], "certificate",
]
SEP_COLUMNS = list(PARAM_KEYS) + [
    "distance", "relaxation_tight", "mean_sq_ness", "mean_sq_sep",
    "var_ness", "var_sep", "rel_err_sq_ness", "rel_err_sq_sep", "ratio_rel_err_sq",
]


# ---------------------------------------------------------------------------
# commands: each returns a list of (filename, text) written at the end

def cmd_ness(cfg: RunConfig, stem: str = "ness") -> list[tuple[str, str]]:
    rows = _pmap(_ness_row, sweep_points(cfg), cfg.jobs)
    return [(f"{stem}.{cfg.format}", _render(cfg, NESS_COLUMNS, rows))]


def cmd_vwindow(cfg: RunConfig, stem: str = "vwindow") -> list[tuple[str, str]]:
    rows = _pmap(_vwindow_row, sweep_points(cfg), cfg.jobs)
    return [(f"{stem}.{cfg.format}", _render(cfg, VWINDOW_COLUMNS, rows))]


def cmd_relax(cfg: RunConfig, stem: str = "trajectory") -> list[tuple[str, str]]:
    if cfg.sweep is not None:
        raise ValueError("relax runs a single parameter point; remove --sweep")
    p = cfg.params
    u = quench_unitary(cfg, p)
    rho0 = u @ ness_density_matrix(p) @ u.conj().T
    rho0 = (rho0 + rho0.conj().T) / 2
    t_end = cfg.t_end if cfg.t_end is not None else 8.0 / liouvillian_gap(p)
    traj = dynamics.evolve(p, rho0, t_end, sampling=cfg.samples)
    if cfg.format == "json":
        cols = traj.columns()
        rows = [
            {k: float(cols[k][i]) for k in dynamics.TRAJECTORY_COLUMNS}
            for i in range(len(traj.points))
        ]
        return [(f"{stem}.json", _rows_to_json(list(dynamics.TRAJECTORY_COLUMNS), rows))]
    import io

    buf = io.StringIO()
    traj.to_csv(buf)
    return [(f"{stem}.csv", buf.getvalue())]


def cmd_workdist(cfg: RunConfig, stem: str = "workdist") -> list[tuple[str, str]]:
    if cfg.sweep is not None:
        raise ValueError("workdist runs a single parameter point; remove --sweep")
    p = cfg.params
    dist = workstats.tpm_distribution_ness(p, quench_unitary(cfg, p))
    if cfg.format == "json":
        rows = [{"w": float(w), "prob": float(pr)} for w, pr in dist.atoms]
        return [(f"{stem}.json", _rows_to_json(["w", "prob"], rows))]
    import io

    buf = io.StringIO()
    dist.to_csv(buf)
    return [(f"{stem}.csv", buf.getvalue())]


def cmd_tur(cfg: RunConfig, stem: str = "tur") -> list[tuple[str, str]]:
    worker = functools.partial(
        _tur_row, quench=cfg.quench, seed=cfg.seed, unitary_file=cfg.unitary_file
    )
    rows = _pmap(worker, sweep_points(cfg), cfg.jobs)
    return [(f"{stem}.{cfg.format}", _render(cfg, TUR_COLUMNS, rows))]


def cmd_haar_scan(cfg: RunConfig, stem: str = "scan") -> list[tuple[str, str]]:
    if cfg.sweep is not None:
        raise ValueError("haar-scan runs a single parameter point; remove --sweep")
    result = tur.haar_violation_scan(cfg.params, cfg.n, cfg.seed)
    outputs = []
    if cfg.format == "json":
        rows = [
            {"lhs": float(a), "rhs": float(b), "gap": float(c)}
            for a, b, c in zip(result.lhs, result.rhs, result.gap)
        ]
        outputs.append((f"{stem}.json", _rows_to_json(["lhs", "rhs", "gap"], rows)))
    else:
        import io

        buf = io.StringIO()
        result.to_csv(buf)
        outputs.append((f"{stem}.csv", buf.getvalue()))
    outputs.append((f"{stem}_summary.json", result.summary_json() + "\n"))
    return outputs


def cmd_sep_project(cfg: RunConfig, stem: str = "sep_project") -> list[tuple[str, str]]:
    worker = functools.partial(
        _sep_row, quench=cfg.quench, seed=cfg.seed,
        unitary_file=cfg.unitary_file, dephase=cfg.dephase,
    )
    rows = _pmap(worker, sweep_points(cfg), cfg.jobs)
    return [(f"{stem}.{cfg.format}", _render(cfg, SEP_COLUMNS, rows))]


def cmd_figure(cfg: RunConfig, figure_id: str) -> list[tuple[str, str]]:
    command = FIGURE_COMMANDS[figure_id]
    stem = f"fig{figure_id}"
    if command == "relax":
        return cmd_relax(cfg, stem)
    if command == "tur":
        return cmd_tur(cfg, stem)
    if command == "haar-scan":
        return cmd_haar_scan(cfg, stem)
    if command == "ness":
        return cmd_ness(cfg, stem)
    if command == "vwindow":
        return cmd_vwindow(cfg, stem)
    return cmd_sep_project(cfg, stem)


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    for key in PARAM_KEYS:
        common.add_argument(f"--{key.replace('_', '-')}", dest=key, type=float)
    common.add_argument("--quench", choices=QUENCHES)
    common.add_argument("--seed", type=int)
    common.add_argument("--sweep", help="var:start:stop:points, e.g. g:0.1:0.9:9")
    common.add_argument("--out", help="output directory (default .)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--jobs", type=int, help="parallel workers (default $NESSTUR_JOBS or 1)")
    common.add_argument("--n", type=int, help="number of scan draws")
    common.add_argument("--t-end", dest="t_end", type=float, help="relaxation horizon")
    common.add_argument("--samples", type=int, help="trajectory sample count")
    common.add_argument("--unitary-file", dest="unitary_file", help=".npy quench matrix")
    common.add_argument("--no-dephase", dest="dephase", action="store_const", const=False,
                        help="skip energy dephasing of the projected state")

    parser = argparse.ArgumentParser(
        prog="nesstur",
        description="Boundary-driven two-qubit cycles: steady states, work "
        "statistics, uncertainty bounds, entanglement projections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ness", parents=[common], help="steady-state populations and correlations")
    sub.add_parser("relax", parents=[common], help="relaxation trajectory after a quench")
    sub.add_parser("workdist", parents=[common], help="two-point-measurement work distribution")
    sub.add_parser("tur", parents=[common], help="uncertainty bounds for a quench")
    sub.add_parser("haar-scan", parents=[common], help="random-unitary violation scan")
    sub.add_parser("sep-project", parents=[common], help="closest-separable-state comparison")
    fig = sub.add_parser("figure", parents=[common], help="run a captioned-figure preset")
    fig.add_argument("figure_id", choices=sorted(FIGURE_PRESETS))
    return parser


_RUNNERS = {
    "ness": cmd_ness,
    "relax": cmd_relax,
    "workdist": cmd_workdist,
    "tur": cmd_tur,
    "haar-scan": cmd_haar_scan,
    "sep-project": cmd_sep_project,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "figure":
            preset = FIGURE_PRESETS[args.figure_id]
            cfg = resolve_config(args, preset)
            outputs = cmd_figure(cfg, args.figure_id)
        else:
            cfg = resolve_config(args)
            outputs = _RUNNERS[args.command](cfg)
        cfg.out.mkdir(parents=True, exist_ok=True)
        for name, text in outputs:
            (cfg.out / name).write_text(text)
    except (ValueError, OSError, ConvergenceError, IntegrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for name, _ in outputs:
        print(cfg.out / name)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
