"""Main entry point for the Casimir dipole solver."""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import (
    ScenarioConfig,
    build_quadrature,
    build_scene,
    build_sweep,
    config_echo,
    load_config,
)
from .coupling import assemble, decouple, mode_flag
from .defaults import PRESET_DEFAULTS, PRESET_DESCRIPTIONS
from .errors import CasimirError, ConfigError
from .excel_exporter import ExcelExporter
from .materials import SphereRadiative, effective_medium, material
from .models import ImagFrequency, InteractionMode, TwoDipoleConfig
from .observables import fit_power_law, sweep
from .oracle import casimir_polder_u, london_c6, two_dipole_delta_logdet, two_dipole_energy
from .results_io import (
    FLOAT_FORMAT,
    RunManifest,
    SweepWriter,
    geometry_frame,
    write_energy_csv,
    write_geometry_csv,
    write_integrand_csv,
    write_matrix_dump,
)
from .spectrum import interaction_energy

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_IO = 4
EXIT_INTERRUPTED = 130


def resolve_threads(requested: Optional[int]) -> int:
    """--threads, else CASIMIR_THREADS, else 1; 0 means one per CPU."""
    if requested is None:
        env = os.environ.get("CASIMIR_THREADS")
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise ConfigError("CASIMIR_THREADS must be an integer", [f"got '{env}'"])
        else:
            requested = 1
    if requested < 0:
        raise ConfigError("thread count must be >= 0", [f"got {requested}"])
    return requested or os.cpu_count() or 1


def run(
    cfg: ScenarioConfig,
    config_path: Optional[Path] = None,
    out_dir: Optional[str] = None,
    threads: int = 1,
    excel: bool = False,
) -> Path:
    """
    Run a validated scenario and write its artifacts.

    Args:
        cfg: Validated scenario
        config_path: Scenario file (names the default output directory)
        out_dir: Output directory (default: <output.directory>/<config stem>)
        threads: Worker threads for quadrature nodes and assembly
        excel: Also write a formatted workbook

    Returns:
        Path to the output directory

    Raises:
        CasimirError: Configuration or numerical failure (recorded in the manifest)
        Exception: Anything else is recorded as "failed" and re-raised
    """
    stem = config_path.stem if config_path else "run"
    output = Path(out_dir) if out_dir else Path(cfg.output.directory) / stem
    output.mkdir(parents=True, exist_ok=True)
    manifest_path = output / "manifest.json"

    manifest = RunManifest(config=config_echo(cfg), version=__version__, command="run", threads=threads)
    manifest.write(manifest_path)
    base_dir = config_path.parent if config_path else None

    writer: Optional[SweepWriter] = None
    try:
        scene = build_scene(cfg, base_dir)
        manifest.scene_digest = scene.digest()
        quad = build_quadrature(cfg)
        spec = build_sweep(cfg)
        logger.info(f"Scene: {len(scene.bodies)} bodies, {scene.n_particles} particles, {scene.mode.value}")

        summary = {
            "version": __version__,
            "scene_digest": manifest.scene_digest,
            "particles": scene.n_particles,
            "mode": scene.mode.value,
            "scheme": quad.scheme.value,
        }
        if spec is not None:
            csv_path = output / "sweep.csv"
            manifest.artifacts.append(str(csv_path))
            with SweepWriter(csv_path, spec.parameter) as writer:
                result = sweep(scene, spec, quad, workers=threads, on_row=writer.write_row)
                fit = None
                if cfg.sweep.fit_window is not None:
                    fit = fit_power_law(result, cfg.sweep.fit_window)
                    writer.footer(*fit)
            manifest.rows_written = writer.rows_written
            manifest.node_count = max((r.node_count for r in result.rows), default=0)
            if cfg.output.excel or excel:
                xlsx = ExcelExporter().export(str(output / "results.xlsx"), summary, sweep=result, fit=fit)
                manifest.artifacts.append(xlsx)
        else:
            energy = interaction_energy(scene, quad, workers=threads)
            manifest.node_count = energy.node_count
            manifest.artifacts.append(str(write_energy_csv(output / "energy.csv", energy)))
            if cfg.output.dump_integrand:
                manifest.artifacts.append(str(write_integrand_csv(output / "integrand.csv", energy)))
            if cfg.output.excel or excel:
                xlsx = ExcelExporter().export(str(output / "results.xlsx"), summary, energy=energy)
                manifest.artifacts.append(xlsx)
            logger.info(f"U = {energy.energy:.10e} eV (+/- {energy.quad_error_estimate:.2e})")
    except CasimirError as e:
        manifest.rows_written = writer.rows_written if writer else 0
        manifest.finish("failed", e)
        manifest.write(manifest_path)
        raise
    except KeyboardInterrupt:
        manifest.rows_written = writer.rows_written if writer else 0
        manifest.finish("incomplete")
        manifest.write(manifest_path)
        raise
    except Exception as e:
        manifest.rows_written = writer.rows_written if writer else 0
        manifest.fail_with(e)
        manifest.write(manifest_path)
        raise

    manifest.finish("complete")
    manifest.write(manifest_path)
    logger.info(f"Results in {output}")
    return output


# --- subcommands --------------------------------------------------------------

def _cmd_run(args) -> int:
    path = Path(args.config)
    output = run(load_config(path), path, args.out, resolve_threads(args.threads), args.excel)
    print(f"\nSaved to: {output}")
    return EXIT_OK


def _cmd_energy(args) -> int:
    path = Path(args.config)
    cfg = load_config(path)
    scene = build_scene(cfg, path.parent)
    result = interaction_energy(scene, build_quadrature(cfg), workers=resolve_threads(args.threads))
    print(f"energy_eV      {result.energy:.17g}")
    print(f"quad_error_eV  {result.quad_error_estimate:.3e}")
    print(f"node_count     {result.node_count}")
    if args.dump_integrand:
        print(f"integrand      {write_integrand_csv(args.dump_integrand, result)}")
    return EXIT_OK


def _cmd_geometry_dump(args) -> int:
    path = Path(args.config)
    scene = build_scene(load_config(path), path.parent)
    if args.out:
        print(f"Saved to: {write_geometry_csv(args.out, scene)}")
    else:
        geometry_frame(scene).to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT)
    return EXIT_OK


def _cmd_coupling_dump(args) -> int:
    path = Path(args.config)
    scene = build_scene(load_config(path), path.parent)
    coupled = assemble(scene, ImagFrequency.for_mode(args.xi, scene.mode), workers=resolve_threads(args.threads))
    if args.decoupled:
        coupled = decouple(coupled)
    print(f"Saved to: {write_matrix_dump(args.out, coupled, mode_flag(coupled))}")
    return EXIT_OK


def _sphere(args) -> SphereRadiative:
    return SphereRadiative(args.radius_um, material(args.material))


def _cmd_oracle(args) -> int:
    if args.oracle == "c6":
        sphere = _sphere(args)
        print(f"C6_eV_um6  {london_c6(sphere, sphere, args.cutoff_eV):.12g}")
    elif args.oracle == "cp":
        print(f"U_eV  {casimir_polder_u(args.alpha1_um3, args.alpha2_um3, args.r_um):.12g}")
    elif args.oracle == "two-dipole":
        sphere = _sphere(args)
        cfg = TwoDipoleConfig(sphere, sphere, args.r_um, InteractionMode(args.mode))
        if args.xi_eV is not None:
            print(f"delta_logdet  {two_dipole_delta_logdet(cfg, args.xi_eV):.17g}")
        else:
            print(f"U_eV  {two_dipole_energy(cfg, args.cutoff_eV):.12g}")
    elif args.oracle == "mg":
        composite = effective_medium(material(args.material), args.fill, material(args.host))
        print(f"eps_eff  {composite.response(args.xi_eV):.12g}")
    return EXIT_OK


def _cmd_presets_list(args) -> int:
    for name, defaults in PRESET_DEFAULTS.items():
        print(f"{name}: {PRESET_DESCRIPTIONS[name]}")
        print(f"    {json.dumps(defaults)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, help="Worker threads, 0 = one per CPU (default: $CASIMIR_THREADS or 1)")
    common.add_argument("--seedless", action="store_true", help="Assert a deterministic run (no RNG is ever used)")
    common.add_argument("--quiet", "-q", action="store_true", help="Only print warnings and errors")
    common.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")

    parser = argparse.ArgumentParser(
        prog="casimir",
        description="Casimir / van der Waals energies, forces and torques between clusters of polarizable particles",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s run fig1.json                      # Sweep, CSV + manifest in out/fig1/
  %(prog)s energy pair.json --dump-integrand xi.csv
  %(prog)s geometry dump fig3.json --out sites.csv
  %(prog)s coupling dump pair.json --xi 1.0 --out m.bin
  %(prog)s oracle c6 --material gold --radius-um 0.05
  %(prog)s presets list
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="Run a scenario file")
    p.add_argument("config", help="Scenario JSON file")
    p.add_argument("--out", "-o", help="Output directory (default: <output.directory>/<config stem>)")
    p.add_argument("--excel", action="store_true", help="Also write results.xlsx")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("energy", parents=[common], help="Interaction energy of a scenario's scene")
    p.add_argument("config", help="Scenario JSON file")
    p.add_argument("--dump-integrand", metavar="PATH", help="Write (xi_eV, delta_logdet) CSV")
    p.set_defaults(handler=_cmd_energy)

    p = sub.add_parser("geometry", help="Geometry tools")
    geometry = p.add_subparsers(dest="action", required=True)
    g = geometry.add_parser("dump", parents=[common], help="Particle positions and radii as CSV")
    g.add_argument("config", help="Scenario JSON file")
    g.add_argument("--out", "-o", help="CSV path (default: stdout)")
    g.set_defaults(handler=_cmd_geometry_dump)

    p = sub.add_parser("coupling", help="System matrix tools")
    coupling = p.add_subparsers(dest="action", required=True)
    c = coupling.add_parser("dump", parents=[common], help="Write the system matrix at one frequency")
    c.add_argument("config", help="Scenario JSON file")
    c.add_argument("--xi", type=float, required=True, help="Imaginary frequency in eV")
    c.add_argument("--out", "-o", required=True, help="Binary output path")
    c.add_argument("--decoupled", action="store_true", help="Zero the inter-body blocks")
    c.set_defaults(handler=_cmd_coupling_dump)

    p = sub.add_parser("oracle", help="Analytic reference values")
    oracle = p.add_subparsers(dest="oracle", required=True)
    o = oracle.add_parser("c6", parents=[common], help="London C6 of two identical spheres")
    o.add_argument("--material", default="gold")
    o.add_argument("--radius-um", type=float, required=True)
    o.add_argument("--cutoff-eV", type=float, help="Upper frequency limit (needed for non-decaying materials)")
    o = oracle.add_parser("cp", parents=[common], help="Casimir-Polder energy")
    o.add_argument("--alpha1-um3", type=float, required=True)
    o.add_argument("--alpha2-um3", type=float, required=True)
    o.add_argument("--r-um", type=float, required=True)
    o = oracle.add_parser("two-dipole", parents=[common], help="Two identical spheres")
    o.add_argument("--material", default="gold")
    o.add_argument("--radius-um", type=float, required=True)
    o.add_argument("--r-um", type=float, required=True)
    o.add_argument("--mode", choices=["retarded", "nonretarded"], default="nonretarded")
    o.add_argument("--xi-eV", type=float, help="Print the determinant at this frequency instead of the energy")
    o.add_argument("--cutoff-eV", type=float)
    o = oracle.add_parser("mg", parents=[common], help="Maxwell-Garnett permittivity")
    o.add_argument("--material", default="gold")
    o.add_argument("--host", default="vacuum")
    o.add_argument("--fill", type=float, required=True)
    o.add_argument("--xi-eV", type=float, required=True)
    p.set_defaults(handler=_cmd_oracle)

    p = sub.add_parser("presets", help="Preset geometries")
    presets = p.add_subparsers(dest="action", required=True)
    ls = presets.add_parser("list", parents=[common], help="List preset names and defaults")
    ls.set_defaults(handler=_cmd_presets_list)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    # Configure logging
    if args.verbose:
        log_level = logging.DEBUG
    elif args.quiet:
        log_level = logging.WARNING
    else:
        log_level = logging.INFO
    logging.basicConfig(level=log_level, format="%(message)s")
    if args.seedless:
        logger.debug("Deterministic run: no random number generator is used")

    try:
        return args.handler(args)
    except CasimirError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print("Interrupted", file=sys.stderr)
        return EXIT_INTERRUPTED
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_IO
    except Exception as e:
        logger.exception("Unexpected error")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
