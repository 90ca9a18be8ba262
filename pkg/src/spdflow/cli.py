"""Command-line driver: ``spdflow {generate,noise,flow,metrics,glyphs}``.

Exit codes: 0 success, 1 I/O or file-format failure, 2 usage or
configuration error, 3 numerical failure (strict SPD violation or
instability).

Every command that writes a field also writes ``<out>.manifest``, a flat
``key=value`` record of the parameters, the exact command line and the
checksums of the files involved.  A flow manifest copies the manifest of
its input (prefixed ``input.``) so a whole pipeline can be replayed.
"""

from __future__ import annotations

import argparse
import hashlib
import shlex
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .fieldio import (
    FieldFormatError,
    PATTERNS,
    SyntheticSpec,
    add_noise,
    export_glyphs,
    generate_synthetic,
    read_field,
    write_field,
)
from .flows import FLOW_KINDS, SAFEGUARDS, FlowConfig, FlowInstabilityError, SPDViolationError, run_flow
from .metrics import field_error

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(ValueError):
    pass


###############################################################################
# Manifests


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def manifest_path(out) -> Path:
    return Path(str(out) + ".manifest")


def write_manifest(path, entries: dict) -> None:
    with open(path, "w") as fh:
        for key, value in entries.items():
            fh.write(f"{key}={value}\n")


def read_manifest(path) -> dict:
    entries = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            entries[key] = value
    return entries


def flow_config_from_manifest(entries: dict) -> FlowConfig:
    """Rebuild the :class:`FlowConfig` recorded by ``spdflow flow``."""
    def opt_float(v):
        return None if v == "None" else float(v)

    return FlowConfig(
        kind=entries["config.kind"],
        dt=float(entries["config.dt"]),
        steps=int(entries["config.steps"]),
        k=opt_float(entries["config.k"]),
        sigma=float(entries["config.sigma"]),
        safeguard=entries["config.safeguard"],
        eig_floor=float(entries["config.eig_floor"]),
        seed=int(entries["config.seed"]),
        shock_pairing=entries["config.shock_pairing"],
    )


def _base_manifest(command, argv, started):
    return {
        "tool": "spdflow",
        "version": __version__,
        "command": command,
        "argv": shlex.join(["spdflow"] + list(argv)),
        "wall_clock_seconds": f"{time.perf_counter() - started:.6f}",
    }


def _inherit(entries, path, prefix="input."):
    mpath = manifest_path(path)
    if mpath.exists():
        for key, value in read_manifest(mpath).items():
            entries[prefix + key] = value


###############################################################################
# Argument parsing


def _floats(text, name):
    try:
        return tuple(float(t) for t in text.replace("x", ",").split(",") if t)
    except ValueError:
        raise UsageError(f"--{name}: expected comma-separated numbers, got {text!r}") from None


def _dims(text):
    try:
        dims = tuple(int(t) for t in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"--dims: expected e.g. 32x32 or 8x16x16, got {text!r}") from None
    return dims


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spdflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"spdflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic ground-truth field")
    p.add_argument("--pattern", choices=PATTERNS, required=True)
    p.add_argument("--dims", required=True, help="grid extents in array order, e.g. 32x32")
    p.add_argument("--spacing", default=None, help="comma-separated voxel sizes")
    p.add_argument("--tensor", default=None, help="3 diagonal or 6 vech entries (11,22,33,12,23,13)")
    p.add_argument("--tensor-b", default=None, help="right-hand tensor of two_region")
    p.add_argument("--rate", type=float, default=None, help="rotation rate of smooth_rotation (rad/length)")
    p.add_argument("--background", type=float, default=0.5)
    p.add_argument("--strength", type=float, default=2.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("noise", help="add seeded noise to a field")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", choices=("multiplicative", "additive"), default="multiplicative")

    p = sub.add_parser("flow", help="run a curvature-driven flow")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=FLOW_KINDS, required=True)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--k", type=float, default=None, help="edge-stopping constant (default: median rule)")
    p.add_argument("--sigma", type=float, default=1.0, help="Gaussian width in voxels")
    p.add_argument("--safeguard", choices=SAFEGUARDS, default="clamp")
    p.add_argument("--eig-floor", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shock-pairing", choices=("metric", "euclidean"), default="metric")
    p.add_argument("--verbose", action="store_true", help="print per-step energy")

    p = sub.add_parser("metrics", help="compare a field with a reference")
    p.add_argument("field")
    p.add_argument("reference")

    p = sub.add_parser("glyphs", help="export ellipsoid glyph table (CSV)")
    p.add_argument("field")
    p.add_argument("--out", required=True)
    return parser


###############################################################################
# Commands


def cmd_generate(args, argv, started):
    spec = SyntheticSpec(
        pattern=args.pattern,
        dims=_dims(args.dims),
        spacing=_floats(args.spacing, "spacing") if args.spacing else None,
        tensor=_floats(args.tensor, "tensor") if args.tensor else None,
        tensor_b=_floats(args.tensor_b, "tensor-b") if args.tensor_b else None,
        rate=args.rate,
        background=args.background,
        strength=args.strength,
    )
    field = generate_synthetic(spec)
    write_field(field, args.out)
    entries = _base_manifest("generate", argv, started)
    entries.update({f"spec.{k}": v for k, v in asdict(spec).items()})
    entries["output.sha256"] = sha256(args.out)
    write_manifest(manifest_path(args.out), entries)
    print(f"pattern={spec.pattern} dims={'x'.join(map(str, field.dims))} -> {args.out}")


def cmd_noise(args, argv, started):
    field = read_field(args.inp)
    noisy = add_noise(field, args.sigma, args.seed, model=args.model)
    write_field(noisy, args.out)
    entries = _base_manifest("noise", argv, started)
    entries.update({"noise.sigma": args.sigma, "noise.seed": args.seed, "noise.model": args.model,
                    "input.path": args.inp, "input.sha256": sha256(args.inp),
                    "output.sha256": sha256(args.out)})
    _inherit(entries, args.inp)
    write_manifest(manifest_path(args.out), entries)
    print(f"sigma={args.sigma} seed={args.seed} -> {args.out}")


def cmd_flow(args, argv, started):
    config = FlowConfig(kind=args.kind, dt=args.dt, steps=args.steps, k=args.k, sigma=args.sigma,
                        safeguard=args.safeguard, eig_floor=args.eig_floor, seed=args.seed,
                        shock_pairing=args.shock_pairing)
    field = read_field(args.inp)

    def report(step, _field, diag):
        print(f"step {step + 1:4d} energy={diag.energy[-1]:.12g} "
              f"max|H|={diag.max_abs_H[-1]:.4g} safeguard={diag.safeguard_activations[-1]}")

    try:
        out, diag = run_flow(field, config, callback=report if args.verbose else None)
    except SPDViolationError as exc:
        print(f"error: SPD violation at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FlowInstabilityError as exc:
        print(f"error: unstable at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_field(out, args.out)

    entries = _base_manifest("flow", argv, started)
    entries.update({f"config.{k}": v for k, v in asdict(config).items()})
    entries.update({
        "input.path": args.inp,
        "input.sha256": sha256(args.inp),
        "output.sha256": sha256(args.out),
        "k_used": diag.k,
        "steps_executed": len(diag),
        "safeguard_activations": diag.total_activations,
        "energy_initial": repr(diag.initial_energy),
        "energy_final": repr(diag.energy[-1]) if len(diag) else repr(diag.initial_energy),
        "min_eigenvalue_final": repr(diag.min_eigenvalue[-1]) if len(diag) else "",
        "energy_per_step": ",".join(repr(e) for e in diag.energy),
        "safeguard_per_step": ",".join(str(n) for n in diag.safeguard_activations),
    })
    _inherit(entries, args.inp)
    write_manifest(manifest_path(args.out), entries)
    print(f"kind={config.kind} steps={len(diag)} dt={config.dt} "
          f"safeguard_activations={diag.total_activations} -> {args.out}")


def cmd_metrics(args, argv, started):
    report = field_error(read_field(args.field), read_field(args.reference))
    sys.stdout.write(report.to_text())


def cmd_glyphs(args, argv, started):
    n = export_glyphs(read_field(args.field), args.out)
    print(f"{n} glyphs -> {args.out}")


COMMANDS = {
    "generate": cmd_generate,
    "noise": cmd_noise,
    "flow": cmd_flow,
    "metrics": cmd_metrics,
    "glyphs": cmd_glyphs,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        status = COMMANDS[args.command](args, argv, started)
    except (FieldFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SPDViolationError, FlowInstabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK if status is None else status


if __name__ == "__main__":
    sys.exit(main())
