"""Command-line entry point: scattering sweeps, eigenvalue search, transformations, evolution and verification.

Every subcommand writes its files into ``--out-dir``, prints a short human
summary on stdout and, on failure, a JSON error object on stderr.
Exit status: 0 on success, 1 on a library failure or a failed verification, 2 on bad usage.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    DEFAULT_TOLERANCES,
    CLLError,
    EigenSearchError,
    IntegrationBlowUp,
    ParseError,
    SpatialGrid,
    Tolerances,
    ValidationError,
    fmt,
    load_potential,
    save_field,
    write_csv,
)
from .darboux import addition_seed, apply_dt, inverse_seed, removal_seed, vacuum_seed
from .evolution import run_evolution, soliton_solution, soliton_velocity
from .jost import DEFAULT_SUBSTEPS, solve_jost
from .scattering import find_eigenvalues, scattering_curve

DEFAULT_CONTOUR = "real:0.1:3:64"
DEFAULT_BOX = "0.1:3:0.1:3"
TOLERANCE_NAMES = tuple(f.name for f in dataclasses.fields(Tolerances))


@dataclass(frozen=True)
class RunConfig:
    """Settings shared by all subcommands, merged from defaults, a config file and flags."""

    L: float = 30.0
    n: int = 1024
    tolerances: Tolerances = DEFAULT_TOLERANCES
    contour: str = DEFAULT_CONTOUR
    box: str = DEFAULT_BOX
    out_dir: Path = field(default_factory=lambda: Path("."))
    threads: int = 1
    substeps: int = DEFAULT_SUBSTEPS
    explicit_grid: bool = False

    def __post_init__(self):
        if not self.L > 0:
            raise ValidationError(f"grid half-width must be positive, got {self.L}")
        if self.n < 4 or self.n % 2:
            raise ValidationError(f"grid point count must be even and at least 4, got {self.n}")
        for name in TOLERANCE_NAMES:
            if not getattr(self.tolerances, name) > 0:
                raise ValidationError(f"tolerance {name} must be positive")
        if self.threads < 1 or self.substeps < 1:
            raise ValidationError("threads and substeps must be at least 1")

    @property
    def grid(self) -> SpatialGrid:
        return SpatialGrid(self.L, self.n)

    @classmethod
    def build(cls, file_values: dict, flag_values: dict) -> "RunConfig":
        merged = {**file_values, **flag_values}
        tol = {k: float(merged.pop(k)) for k in TOLERANCE_NAMES if k in merged}
        explicit = "L" in merged or "n" in merged
        kwargs = {"tolerances": Tolerances(**tol), "explicit_grid": explicit}
        for key, conv in (("L", float), ("n", int), ("contour", str), ("box", str),
                          ("out_dir", Path), ("threads", int), ("substeps", int)):
            if key in merged:
                kwargs[key] = conv(merged.pop(key))
        if merged:
            raise ValidationError(f"unknown configuration keys: {sorted(merged)}")
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {"L": self.L, "n": self.n, "tolerances": dataclasses.asdict(self.tolerances),
                "contour": self.contour, "box": self.box, "out_dir": str(self.out_dir),
                "threads": self.threads, "substeps": self.substeps}


CONFIG_ALIASES = {"grid_L": "L", "grid_n": "n"}


def read_config(path) -> dict:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}", path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed config {path}: {exc}", path=str(path)) from exc
    if not isinstance(obj, dict):
        raise ParseError(f"config {path} must be a JSON object", path=str(path))
    return {CONFIG_ALIASES.get(k, k): v for k, v in obj.items()}


def parse_complex(text) -> complex:
    """Accept 0.8+0.6i, 0.8+0.6j, a bare number or a [re, im] pair."""
    if isinstance(text, (list, tuple)):
        if len(text) != 2:
            raise ValidationError(f"complex pair must have two entries, got {text}")
        return complex(float(text[0]), float(text[1]))
    if isinstance(text, (int, float)):
        return complex(text)
    try:
        return complex(str(text).strip().replace("i", "j").replace(" ", ""))
    except ValueError as exc:
        raise ValidationError(f"cannot parse complex number {text!r}") from exc


def parse_complex_list(text: str) -> np.ndarray:
    return np.array([parse_complex(t) for t in text.split(",") if t.strip()], dtype=complex)


def complex_pair(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def write_json(path: Path, obj) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise CLLError(f"cannot write {path}: {exc}", path=str(path)) from exc


def load_input(cfg: RunConfig, path):
    pot = load_potential(path, cfg.tolerances.decay_tol)
    if cfg.explicit_grid and (pot.grid.half_width != cfg.L or pot.grid.n_points != cfg.n):
        raise ValidationError(
            f"grid flags (L={cfg.L}, n={cfg.n}) disagree with {path} "
            f"(L={pot.grid.half_width}, n={pot.grid.n_points})")
    return pot


def write_jost_csv(path: Path, pot, lam, side: str, cfg: RunConfig) -> None:
    jp = solve_jost(pot, lam, side, cfg.substeps, cfg.tolerances)
    c1, c2 = jp.column_1, jp.column_2
    header = ["x", "psi11_re", "psi11_im", "psi21_re", "psi21_im", "psi12_re", "psi12_im", "psi22_re", "psi22_im"]
    cols = [pot.grid.x]
    for comp in (c1.component_1, c1.component_2, c2.component_1, c2.component_2):
        cols += [comp.real, comp.imag]
    write_csv(path, header, cols)


def cmd_scatter(cfg: RunConfig, args) -> dict:
    pot = load_input(cfg, args.potential)
    curve = scattering_curve(pot, args.contour or cfg.contour, cfg.substeps, cfg.threads, cfg.tolerances)
    header, cols = curve.csv_columns()
    files = [cfg.out_dir / "scattering.csv"]
    write_csv(files[0], header, cols)
    summary = {"points": int(curve.lam.size), "max_detS_residual": float(np.max(curve.detS_residual))}
    if args.box:
        recs = find_eigenvalues(pot, args.box, cfg.tolerances, cfg.substeps)
        summary["Z_N"] = len(recs)
        summary["eigenvalues"] = [r.to_dict() for r in recs]
    if args.jost:
        for i, lam in enumerate(parse_complex_list(args.jost)):
            for side in ("minus", "plus"):
                path = cfg.out_dir / f"jost_{side}_{i}.csv"
                write_jost_csv(path, pot, lam, side, cfg)
                files.append(path)
    summary["files"] = [str(p) for p in files]
    write_json(cfg.out_dir / "scatter_summary.json", summary)
    lines = [f"scattered {summary['points']} points, max |det S - 1| = {summary['max_detS_residual']:.3e}"]
    if "Z_N" in summary:
        lines.append(f"{summary['Z_N']} eigenvalue(s) in box")
    return {"summary": summary, "lines": lines}


def cmd_eigen(cfg: RunConfig, args) -> dict:
    pot = load_input(cfg, args.potential)
    recs = find_eigenvalues(pot, args.box or cfg.box, cfg.tolerances, cfg.substeps)
    out = [r.to_dict() for r in recs]
    write_json(cfg.out_dir / "eigenvalues.json", out)
    lines = [f"{len(recs)} eigenvalue(s)"] + [f"  lambda = {r.lam.value:.12g}, gamma = {r.gamma:.6g}" for r in recs]
    return {"summary": {"count": len(recs), "eigenvalues": out}, "lines": lines}


def read_seed_spec(text: str) -> dict:
    path = Path(text)
    try:
        raw = path.read_text() if path.is_file() else text
        spec = json.loads(raw)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"malformed seed spec: {exc}") from exc
    if not isinstance(spec, dict) or spec.get("mode") not in ("remove", "add"):
        raise ParseError('seed spec must be an object with mode "remove" or "add"')
    unknown = set(spec) - {"lambda1", "mode", "alpha1", "c1", "c2"}
    if unknown:
        raise ParseError(f"unknown seed spec keys: {sorted(unknown)}")
    return spec


def eigen_list(pot, box, cfg):
    return [r.lam.value for r in find_eigenvalues(pot, box, cfg.tolerances, cfg.substeps)]


def cmd_dt(cfg: RunConfig, args) -> dict:
    pot = load_input(cfg, args.potential)
    spec = read_seed_spec(args.seed)
    box = args.box or cfg.box
    before = eigen_list(pot, box, cfg)
    if spec["mode"] == "remove":
        if not before:
            raise EigenSearchError("no eigenvalue in box", box=box)
        if "lambda1" in spec:
            target = parse_complex(spec["lambda1"])
            lam1 = min(before, key=lambda z: abs(z - target))
        else:
            lam1 = before[0]
        seed = removal_seed(pot, lam1, "minus", cfg.tolerances, cfg.substeps)
    else:
        if "lambda1" not in spec:
            raise ValidationError("mode add needs lambda1")
        lam1 = parse_complex(spec["lambda1"])
        if not np.any(pot.q) and "alpha1" not in spec:
            seed = vacuum_seed(pot.grid, lam1, parse_complex(spec.get("c1", 1.0)), parse_complex(spec.get("c2", 1.0)))
        else:
            seed = addition_seed(pot, lam1, parse_complex(spec.get("alpha1", 1.0)), cfg.substeps)
    new = apply_dt(pot, seed, cfg.tolerances)
    out_path = cfg.out_dir / (args.output or "transformed.json")
    save_field(new, out_path)
    after = eigen_list(new, box, cfg)
    report = {"mode": spec["mode"], "lambda1": complex_pair(lam1),
              "eigenvalues_before": [complex_pair(z) for z in before],
              "eigenvalues_after": [complex_pair(z) for z in after],
              "output": str(out_path)}
    if args.round_trip:
        back = apply_dt(new, inverse_seed(seed), cfg.tolerances)
        report["round_trip_residual"] = float(np.max(np.abs(back.q - pot.q)))
    write_json(cfg.out_dir / "dt_report.json", report)
    lines = [f"{spec['mode']} at lambda1 = {lam1:.12g}: {len(before)} -> {len(after)} eigenvalue(s)"]
    if "round_trip_residual" in report:
        lines.append(f"round-trip residual {report['round_trip_residual']:.3e}")
    return {"summary": report, "lines": lines}


def cmd_soliton(cfg: RunConfig, args) -> dict:
    lam1 = parse_complex(args.lambda1)
    pot = soliton_solution(lam1, parse_complex(args.c1), parse_complex(args.c2), args.t, cfg.grid, cfg.tolerances)
    out_path = cfg.out_dir / (args.output or "soliton.json")
    save_field(pot, out_path)
    summary = {"lambda1": complex_pair(lam1), "t": args.t, "velocity": soliton_velocity(lam1),
               "sup_norm": pot.sup_norm(), "mass": pot.mass(), "output": str(out_path)}
    write_json(cfg.out_dir / "soliton_summary.json", summary)
    return {"summary": summary, "lines": [f"soliton at lambda1 = {lam1:.12g} written to {out_path}",
                                          f"velocity {summary['velocity']:.12g}"]}


def cmd_evolve(cfg: RunConfig, args) -> dict:
    pot = load_input(cfg, args.potential)
    probes = parse_complex_list(args.probe_lambdas) if args.probe_lambdas else ()
    tracked = eigen_list(pot, args.box, cfg) if args.box else ()
    traj = run_evolution(pot, args.T, args.dt, args.snap_every, probes, tracked,
                         substeps=cfg.substeps, tol=cfg.tolerances)
    width = max(5, len(str(len(traj.snapshots))))
    files = []
    for i, snap in enumerate(traj.snapshots):
        path = cfg.out_dir / f"snapshot_{i:0{width}d}.json"
        save_field(snap, path)
        files.append(str(path))
    header, cols = traj.csv_columns()
    write_csv(cfg.out_dir / "diagnostics.csv", header, cols)
    summary = {"dt": traj.dt, "snapshots": len(files), "final_time": float(traj.times[-1]),
               "mass_drift": traj.mass_drift, "blew_up_at_step": traj.blew_up_at,
               "tracked_eigenvalues": [[complex_pair(z) for z in e] for e in traj.eigenvalues[-1:]]}
    write_json(cfg.out_dir / "evolve_summary.json", summary)
    if traj.blew_up_at is not None:
        raise IntegrationBlowUp(f"evolution blew up at step {traj.blew_up_at}; partial output written",
                                step=traj.blew_up_at, time=float(traj.times[-1]))
    return {"summary": summary, "lines": [f"evolved to t = {fmt(traj.times[-1])} with dt = {traj.dt:.3e}",
                                          f"{len(files)} snapshot(s), relative mass drift {traj.mass_drift:.3e}"]}


def cmd_verify(cfg: RunConfig, args) -> dict:
    from .verify import CHECKS, report, run_checks

    names = None
    if args.checks:
        names = [s.strip() for s in args.checks.split(",") if s.strip()]
        unknown = set(names) - {c[0] for c in CHECKS}
        if unknown:
            raise ValidationError(f"unknown checks: {sorted(unknown)}")
    results = run_checks(cfg.grid, names)
    rep = report(results)
    write_json(cfg.out_dir / "verify_report.json", rep)
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name}: residual {r.residual:.3e} (tolerance {r.tolerance:.1e})"
             for r in results]
    lines.append("all checks passed" if rep["passed"] else "some checks FAILED")
    return {"summary": rep, "lines": lines, "status": 0 if rep["passed"] else 1}


class JsonArgumentParser(argparse.ArgumentParser):
    """Usage errors go to stderr as JSON and exit with status 2."""

    def error(self, message):
        sys.stderr.write(json.dumps({"kind": "usage", "message": message, "usage": self.format_usage().strip()}))
        sys.stderr.write("\n")
        sys.exit(2)


def global_flags(parser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    g = parser.add_argument_group("global options")
    g.add_argument("--grid-L", dest="L", type=float, default=default, help="half-width of the grid [-L, L] (30)")
    g.add_argument("--grid-n", dest="n", type=int, default=default, help="number of grid points, even (1024)")
    g.add_argument("--config", default=default, help="JSON file with configuration keys and tolerances")
    g.add_argument("--out-dir", dest="out_dir", default=default, help="output directory (current directory)")
    g.add_argument("--threads", type=int, default=default, help="worker threads for contour sweeps (1)")
    g.add_argument("--substeps", type=int, default=default, help="integrator substeps per grid cell (8)")


def build_parser() -> argparse.ArgumentParser:
    parser = JsonArgumentParser(prog="clldt", description=__doc__.splitlines()[0])
    global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=JsonArgumentParser)

    p = sub.add_parser("scatter", help="scattering coefficients on a contour")
    p.add_argument("potential", help="potential JSON file")
    p.add_argument("--contour", help="comma list of real:a:b:n / imag:a:b:n segments")
    p.add_argument("--box", help="re_min:re_max:im_min:im_max eigenvalue box")
    p.add_argument("--jost", help="comma list of lambdas for which Jost columns are written")
    p.set_defaults(func=cmd_scatter)

    p = sub.add_parser("eigen", help="eigenvalues in a first-quadrant box")
    p.add_argument("potential")
    p.add_argument("--box", help=f"re_min:re_max:im_min:im_max ({DEFAULT_BOX})")
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("dt", help="remove or add an eigenvalue")
    p.add_argument("potential")
    p.add_argument("--seed", required=True, help="seed JSON text or file: {lambda1, mode, alpha1, c1, c2}")
    p.add_argument("--box", help=f"eigenvalue box ({DEFAULT_BOX})")
    p.add_argument("--round-trip", action="store_true", help="also report the inverse-map residual")
    p.add_argument("--output", help="file name of the transformed potential (transformed.json)")
    p.set_defaults(func=cmd_dt)

    p = sub.add_parser("soliton", help="one-soliton potential on the vacuum")
    p.add_argument("--lambda1", required=True, help="first-quadrant eigenvalue, e.g. 0.8+0.6i")
    p.add_argument("--c1", default="1")
    p.add_argument("--c2", default="1")
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--output", help="file name (soliton.json)")
    p.set_defaults(func=cmd_soliton)

    p = sub.add_parser("evolve", help="integrate the PDE")
    p.add_argument("potential")
    p.add_argument("--T", type=float, required=True, help="final time")
    p.add_argument("--dt", type=float, required=True, help="largest time step")
    p.add_argument("--snap-every", dest="snap_every", type=int, default=1)
    p.add_argument("--probe-lambdas", dest="probe_lambdas", help="comma list of continuous-spectrum lambdas")
    p.add_argument("--box", help="track the eigenvalues found in this box")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--checks", help="comma list restricting the suite")
    p.set_defaults(func=cmd_verify)

    for sp in sub.choices.values():
        global_flags(sp, suppress=True)
    return parser


def config_from_args(args) -> RunConfig:
    file_values = read_config(args.config) if getattr(args, "config", None) else {}
    flags = {k: getattr(args, k) for k in ("L", "n", "out_dir", "threads", "substeps")
             if getattr(args, k, None) is not None}
    return RunConfig.build(file_values, flags)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = args.func(cfg, args)
    except CLLError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return 1
    except OSError as exc:
        sys.stderr.write(json.dumps({"kind": "io", "message": str(exc)}) + "\n")
        return 1
    except Exception as exc:  # noqa: BLE001 - every failure must reach stderr as JSON
        sys.stderr.write(json.dumps({"kind": "internal", "type": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    for line in result["lines"]:
        print(line)
    for w in caught:
        print(f"warning: {w.message}")
    return result.get("status", 0)


if __name__ == "__main__":
    sys.exit(main())
