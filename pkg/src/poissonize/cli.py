"""Command line front door.

Subcommands: diagnose, simulate, canonical-check, equilibrium, figure.
Configuration is JSON with field components written in the expression
language.  Exit codes: 0 success, 1 tolerance failure, 2 configuration
or parse error, 3 vanishing conformal factor, 4 branch violation,
5 negative density.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys as _sys
from pathlib import Path

from . import canonical, consys, propertime, statmech
from .exprlang import ExprError, ExprScalarField, ExprVectorField
from .extension import (
    ConformalFactorVanished,
    ExtendedState,
    ExtensionSpec,
    NotClosedError,
    conformal_factor,
)
from .fieldcore import Box, Point3, PoissonizeError
from .statmech import Axis, EquilibriumSpec, NegativeDensity

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2
EXIT_VANISHED = 3
EXIT_BRANCH = 4
EXIT_NEGATIVE = 5


class ConfigError(PoissonizeError):
    pass


def _require(cfg: dict, key: str, where: str):
    if key not in cfg:
        raise ConfigError(f"missing '{key}' in {where}")
    return cfg[key]


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def build_system(cfg: dict) -> consys.ConservativeSystem:
    sys_cfg = _require(cfg, "system", "config")
    name = _require(sys_cfg, "name", "system")
    if name == "plasma_particle":
        return consys.plasma_particle()
    if name == "rigid_body":
        params = _require(sys_cfg, "params", "system")
        return consys.rigid_body(params["Ix"], params["Iy"], params["Iz"])
    if name == "nonintegrable_exb":
        return consys.nonintegrable_exb()
    if name == "exb":
        b = ExprVectorField(tuple(_require(sys_cfg, "B", "system")))
        phi = ExprScalarField(_require(sys_cfg, "phi", "system"))
        return consys.exb(b, phi, probe=_probe_box(cfg))
    if name == "custom":
        w = ExprVectorField(tuple(_require(sys_cfg, "w", "system")))
        ham = ExprScalarField(_require(sys_cfg, "H", "system"))
        return consys.ConservativeSystem("custom", w, ham)
    raise ConfigError(f"unknown system '{name}'")


def _probe_box(cfg: dict) -> Box:
    box = cfg.get("probe_box")
    if box is None:
        from .fieldcore import UNIT_BOX
        return UNIT_BOX
    lo, hi = box
    return Box(Point3(*lo), Point3(*hi))


def build_extension(cfg: dict, system: consys.ConservativeSystem) -> ExtensionSpec:
    ext_cfg = cfg.get("extension", {})
    choice = ext_cfg.get("D", "B" if system.b_field is not None else "w")
    r_floor = float(ext_cfg.get("r_floor", 1e-10))
    probe = _probe_box(cfg)
    if choice == "B":
        if system.b_field is None:
            raise ConfigError(f"system '{system.name}' has no magnetic field for D=B")
        return ExtensionSpec(system.b_field, r_floor, probe=probe)
    if choice == "w":
        try:
            return ExtensionSpec(system.operator_vector, r_floor, probe=probe)
        except NotClosedError as exc:
            print(f"note: D = w is not divergence-free ({exc}); "
                  "the Jacobi repair does not apply", file=_sys.stderr)
            return ExtensionSpec(system.operator_vector, r_floor,
                                 require_closed=False, probe=probe)
    if isinstance(choice, list) and len(choice) == 3:
        return ExtensionSpec(ExprVectorField(tuple(choice)), r_floor, probe=probe)
    raise ConfigError("extension D must be 'B', 'w' or three expressions")


def initial_state(cfg: dict) -> ExtendedState:
    values = _require(cfg, "initial_state", "config")
    if len(values) != 4:
        raise ConfigError("initial_state must be [x, y, z, s]")
    return ExtendedState(Point3(*values[:3]), float(values[3]))


def integrator_config(cfg: dict) -> propertime.IntegratorConfig:
    icfg = dict(cfg.get("integrator", {}))
    try:
        return propertime.IntegratorConfig(**icfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad integrator config: {exc}") from exc


def _parse_point(text: str) -> Point3:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError("--point wants x,y,z")
    return Point3(*(float(p) for p in parts))


def write_sidecar(path: Path, payload: dict) -> None:
    with open(path, "w") as out:
        json.dump(payload, out, indent=2)
        out.write("\n")


# ---------------------------------------------------------------------------
# Commands.

def cmd_diagnose(cfg: dict, point: Point3) -> int:
    system = build_system(cfg)
    w = system.operator_vector.eval(point)
    g = system.hamiltonian.gradient(point)
    v = consys.velocity(system, point)
    from .fieldcore import helicity_density
    h = helicity_density(system.operator_vector, point)
    div_v = consys.velocity_divergence(system, point)
    cls_cfg = cfg.get("classify", {})
    box = _probe_box(cfg)
    report = consys.classify_jacobi(system, box,
                                    samples=int(cls_cfg.get("samples", 512)),
                                    tol_h=float(cls_cfg.get("tol_h", 1e-9)))
    print(f"system: {system.name}")
    print(f"point: ({point.x:.17g}, {point.y:.17g}, {point.z:.17g})")
    print(f"w: ({w.x:.17g}, {w.y:.17g}, {w.z:.17g})")
    print(f"grad_H: ({g.x:.17g}, {g.y:.17g}, {g.z:.17g})")
    print(f"velocity: ({v.x:.17g}, {v.y:.17g}, {v.z:.17g})")
    print(f"helicity_density: {h:.17g}")
    print(f"velocity_divergence: {div_v:.17g}")
    print(f"classification: {report.kind} (max |h| = {report.max_abs_helicity:.6g} "
          f"over {report.samples} samples)")
    return EXIT_OK


def cmd_simulate(cfg: dict, out: Path) -> int:
    system = build_system(cfg)
    ext = build_extension(cfg, system)
    init = initial_state(cfg)
    conformal_factor(system, ext, init)  # raises when r(init) is below floor
    icfg = integrator_config(cfg)
    record = propertime.integrate(system, ext, init, icfg)
    record.write_csv(out)
    sidecar = {
        "status": record.status,
        "system": system.name,
        "clock": record.clock,
        "method": record.method,
        "dt": record.dt,
        "samples": len(record.samples),
        "columns": ["tau", "t", "x", "y", "z", "s", "H", "r", "h", "constraint_residual"],
    }
    write_sidecar(out.with_suffix(out.suffix + ".json"), sidecar)
    if record.status != "completed":
        print(f"conformal factor vanished; partial trajectory in {out}", file=_sys.stderr)
        return EXIT_VANISHED
    print(f"wrote {out} ({len(record.samples)} samples)")
    return EXIT_OK


def cmd_canonical_check(cfg: dict, tol: float) -> int:
    system = build_system(cfg)
    if system.name != "plasma_particle":
        raise ConfigError("the canonical chart is defined for the plasma_particle system")
    ext = build_extension(cfg, system)
    init = initial_state(cfg)
    icfg = integrator_config(cfg)
    if icfg.clock != "proper":
        raise ConfigError("canonical-check integrates in the proper clock")
    gap = canonical.flow_equivalence_gap(system, ext, init, icfg.tau_end, icfg.dt)
    print(f"flow equivalence gap: {gap:.6e} (tolerance {tol:.6e})")
    return EXIT_OK if gap < tol else EXIT_TOLERANCE


def _axes_from_config(eq_cfg: dict) -> tuple[Axis, Axis, float]:
    axes_cfg = _require(eq_cfg, "axes", "equilibrium")
    if len(axes_cfg) != 2:
        raise ConfigError("equilibrium wants exactly two axes")
    axes = [Axis(a["name"], float(a["lo"]), float(a["hi"]), int(a["count"]))
            for a in axes_cfg]
    fixed = eq_cfg.get("fixed", {})
    fixed_name = ({"x", "y", "z"} - {axes[0].name, axes[1].name}).pop()
    return axes[0], axes[1], float(fixed.get(fixed_name, 0.0))


def cmd_equilibrium(cfg: dict, out: Path) -> int:
    system = build_system(cfg)
    ext = build_extension(cfg, system)
    eq_cfg = _require(cfg, "equilibrium", "config")
    spec = EquilibriumSpec(float(_require(eq_cfg, "beta", "equilibrium")),
                           float(_require(eq_cfg, "delta_s", "equilibrium")))
    axis1, axis2, fixed_value = _axes_from_config(eq_cfg)
    threads = int(os.environ.get("POISSONIZE_THREADS", "1"))
    grid = statmech.equilibrium_grid(system, ext, spec, axis1, axis2,
                                     fixed_value, threads=threads)
    grid.write_csv(out)
    grid.write_sidecar(out.with_suffix(out.suffix + ".json"))
    print(f"wrote {out} (Z = {grid.spec.Z:.12g})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Figure presets.  Each writes its data files plus a manifest that names the
# columns a plotting tool should draw; no graphics happen here.

FIG1A_INIT = (1.0, 1.0, 0.5, 0.0)
FIG1B_INERTIA = (1.0, 2.0, 3.0)
FIG1B_INIT = (1.0, 1.0, 1.0, 0.0)
TWO_PI = 2.0 * math.pi


def _figure_fig1a(outdir: Path) -> dict:
    system = consys.plasma_particle()
    ext = ExtensionSpec(system.b_field)
    init = ExtendedState(Point3(*FIG1A_INIT[:3]), FIG1A_INIT[3])
    cfg = propertime.IntegratorConfig(clock="physical", dt=1e-3, t_end=100.0,
                                      record_every=100)
    record = propertime.integrate(system, ext, init, cfg)
    path = outdir / "fig1a_trajectory.csv"
    record.write_csv(path)
    return {
        "figure": "fig1a",
        "files": [path.name],
        "panels": [{
            "name": "fig1a",
            "kind": "trajectory3d",
            "file": path.name,
            "columns": ["x", "y", "z"],
            "title": "Helical drift orbit spiralling into the sink",
        }],
    }


def _figure_fig1b(outdir: Path) -> dict:
    system = consys.rigid_body(*FIG1B_INERTIA)
    ext = ExtensionSpec(system.operator_vector, require_closed=False)
    init = ExtendedState(Point3(*FIG1B_INIT[:3]), FIG1B_INIT[3])
    cfg = propertime.IntegratorConfig(clock="physical", dt=1e-3, t_end=50.0,
                                      record_every=50)
    record = propertime.integrate(system, ext, init, cfg)
    path = outdir / "fig1b_trajectory.csv"
    record.write_csv(path)
    return {
        "figure": "fig1b",
        "files": [path.name],
        "panels": [{
            "name": "fig1b",
            "kind": "trajectory3d",
            "file": path.name,
            "columns": ["x", "y", "z"],
            "title": "Closed free-rotor orbit",
        }],
    }


def _figure_fig2(outdir: Path) -> dict:
    init = canonical.to_canonical(ExtendedState(Point3(*FIG1A_INIT[:3]), FIG1A_INIT[3]))
    traj = canonical.integrate_hamilton(init, dt=1e-3, tau_end=100.0, record_every=100)
    cpath = outdir / "fig2_canonical.csv"
    traj.write_csv(cpath)
    ppath = outdir / "fig2_panels.csv"
    with open(ppath, "w") as out:
        out.write("tau,px,py,qx_over_tau,qy_over_tau,amp_over_tau,z\n")
        for sample in traj.samples:
            if sample.tau == 0.0:
                continue  # the per-tau ratios start one sample in
            st = sample.state
            ext_state = canonical.from_canonical(st)
            amp = ext_state.s + 0.5
            row = (sample.tau, st.px, st.py, st.qx / sample.tau, st.qy / sample.tau,
                   amp / sample.tau, ext_state.p.z)
            out.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return {
        "figure": "fig2",
        "files": [cpath.name, ppath.name],
        "panels": [
            {
                "name": "fig2a",
                "kind": "timeseries",
                "file": ppath.name,
                "abscissa": "tau",
                "ordinates": ["px", "py", "qx_over_tau", "qy_over_tau"],
                "title": "Momenta and secular positions in proper time",
            },
            {
                "name": "fig2b",
                "kind": "timeseries",
                "file": ppath.name,
                "abscissa": "tau",
                "ordinates": ["amp_over_tau", "z"],
                "title": "Chart amplitude rate and pitch angle",
            },
        ],
    }


def _figure_fig3(outdir: Path) -> dict:
    system = consys.nonintegrable_exb()
    ext = ExtensionSpec(system.b_field)
    spec = EquilibriumSpec(beta=1.0, delta_s=1.0)
    ax1 = Axis("x", 0.0, TWO_PI, 101)
    ax2 = Axis("y", 0.0, TWO_PI, 101)
    threads = int(os.environ.get("POISSONIZE_THREADS", "1"))
    grid = statmech.equilibrium_grid(system, ext, spec, ax1, ax2, 0.0, threads=threads)
    gpath = outdir / "fig3_grid.csv"
    grid.write_csv(gpath)
    spath = outdir / "fig3_grid.csv.json"
    grid.write_sidecar(spath)
    return {
        "figure": "fig3",
        "files": [gpath.name, spath.name],
        "panels": [{
            "name": "fig3",
            "kind": "heatmap",
            "file": gpath.name,
            "x": "x",
            "y": "y",
            "value": "F",
            "shape": [ax1.count, ax2.count],
            "extent": [ax1.lo, ax1.hi, ax2.lo, ax2.hi],
            "title": "Equilibrium marginal deformed by the helicity density",
        }],
    }


FIGURES = {
    "fig1a": _figure_fig1a,
    "fig1b": _figure_fig1b,
    "fig2": _figure_fig2,
    "fig3": _figure_fig3,
}


def cmd_figure(name: str, outdir: Path) -> int:
    try:
        builder = FIGURES[name]
    except KeyError:
        raise ConfigError(f"unknown figure '{name}' (have {', '.join(sorted(FIGURES))})")
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = builder(outdir)
    with open(outdir / f"{name}_manifest.json", "w") as out:
        json.dump(manifest, out, indent=2)
        out.write("\n")
    print(f"wrote {name} data and manifest to {outdir}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poissonize",
        description="Jacobi diagnostics, 4D extension and equilibria "
                    "of conservative v = w x grad(H) systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diagnose", help="field and Jacobi report at a point")
    p.add_argument("--config", required=True)
    p.add_argument("--point", default="0,0,0", help="x,y,z")

    p = sub.add_parser("simulate", help="integrate the extended flow to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("canonical-check", help="chart equivalence of the two flows")
    p.add_argument("--config", required=True)
    p.add_argument("--tol", type=float, default=1e-6)

    p = sub.add_parser("equilibrium", help="tabulate the equilibrium marginal")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("figure", help="emit a preset dataset plus manifest")
    p.add_argument("name")
    p.add_argument("--out", required=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "diagnose":
            return cmd_diagnose(load_config(args.config), _parse_point(args.point))
        if args.command == "simulate":
            return cmd_simulate(load_config(args.config), Path(args.out))
        if args.command == "canonical-check":
            return cmd_canonical_check(load_config(args.config), args.tol)
        if args.command == "equilibrium":
            return cmd_equilibrium(load_config(args.config), Path(args.out))
        if args.command == "figure":
            return cmd_figure(args.name, Path(args.out))
        raise AssertionError(args.command)
    except (ConfigError, ExprError, consys.UnknownSystem, consys.ZeroFieldError,
            NotClosedError, ValueError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except ConformalFactorVanished as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_VANISHED
    except canonical.BranchViolation as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_BRANCH
    except NegativeDensity as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_NEGATIVE


if __name__ == "__main__":
    raise SystemExit(main())
