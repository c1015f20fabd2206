"""Command-line interface: ``sif3d <command> ...``.

Every tunable can also come from a ``key = value`` file passed with
``--config``; keys mirror the long flag names and explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import _accel
from .analysis import MAGNITUDE_MODES, correspond, f_score, interpolate
from .core import DEFAULT_ISOLEVEL, load_template, save_template
from .errors import EmptyMeshError, InvalidInputError, NumericalError, ParseError
from .fitter import FitConfig, fit
from .isosurface import DEFAULT_EPSILON, DEFAULT_MIN_AREA, extract
from .losses import LossWeights
from .mesh import load_mesh, normalize_mesh, save_mesh
from .query import MeshQuery
from .sampling import read_samples, sample_near_surface, sample_surface, sample_uniform, write_samples
from .voxel import extract_watertight, voxelize_and_fill

log = logging.getLogger("sif3d")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PARSE = 4
EXIT_NUMERICAL = 5

MANIFEST = "manifest.json"
SAMPLE_FILES = {"uniform": "uniform.sifs", "surface": "surface.sifs", "near_surface": "near_surface.sifs"}
WATERTIGHT = "watertight.obj"


class UsageError(Exception):
    pass


# -- config file ----------------------------------------------------------------


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError(f"{path}:{lineno}: empty key")
        values[key.lstrip("-").replace("-", "_")] = value
    return values


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _apply_config(parser, sub, values):
    """Install config values as defaults so explicit flags still override them."""
    by_dest = {}
    # globals resolve to the top-level parser so a flag on either side wins
    for p in (sub, parser):
        for action in p._actions:
            if action.option_strings and action.dest not in ("help", "config"):
                by_dest[action.dest] = (p, action)
    unknown = sorted(k for k in values if k not in by_dest)
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
    for key, value in values.items():
        p, action = by_dest[key]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            low = value.lower()
            if low not in _TRUE | _FALSE:
                raise UsageError(f"config key {key!r} expects a boolean, got {value!r}")
            value = (low in _TRUE) == isinstance(action, argparse._StoreTrueAction)
        elif isinstance(action, argparse._CountAction):
            value = int(value)
        # string defaults are converted by argparse with the action's type
        p.set_defaults(**{key: value})


# -- shared helpers ---------------------------------------------------------------


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _weights(args):
    return LossWeights(w_u=args.w_u, w_s=args.w_s, w_a=args.w_a, w_b=args.w_b,
                       alpha=args.alpha, beta=args.beta)


def _fit_config(args):
    return FitConfig(
        elements=args.elements, steps=args.steps, learning_rate=args.lr,
        final_learning_rate=args.final_lr, uniform_batch=args.uniform_batch,
        near_surface_batch=args.near_batch, seed=args.seed, isolevel=args.isolevel,
        weights=_weights(args), log_every=args.log_every,
    )


def _parse_weights(text):
    try:
        return [float(w) for w in text.split(",")]
    except ValueError:
        raise UsageError(f"--weights expects comma-separated numbers, got {text!r}") from None


# -- commands ---------------------------------------------------------------------


def run_sample(mesh_path, out_dir, args):
    mesh, transform = normalize_mesh(load_mesh(mesh_path))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bbox = mesh.bounds()
    grid = voxelize_and_fill(mesh, args.resolution)
    if grid.leaked:
        raise InvalidInputError(f"{mesh_path}: flood fill found no enclosed volume; the mesh is not closed")
    watertight = extract_watertight(grid)
    query = MeshQuery(watertight)
    seed = args.seed
    uniform = sample_uniform(grid, bbox, args.count, seed)
    surface = sample_surface(watertight, args.surface_count or args.count, seed + 1)
    near = sample_near_surface(watertight, surface, args.near_count or args.count,
                               args.truncation, seed + 2, query=query)
    write_samples(uniform, out / SAMPLE_FILES["uniform"], text=args.text)
    write_samples(surface, out / SAMPLE_FILES["surface"], text=args.text)
    write_samples(near, out / SAMPLE_FILES["near_surface"], text=args.text)
    save_mesh(watertight, out / WATERTIGHT)
    manifest = {
        "version": 1,
        "source": Path(mesh_path).name,
        "transform": transform.to_dict(),
        "seed": seed,
        "resolution": args.resolution,
        "bbox": [[float(v) for v in bbox[0]], [float(v) for v in bbox[1]]],
        "truncation": args.truncation,
        "text": bool(args.text),
        "counts": {"uniform": len(uniform), "surface": len(surface), "near_surface": len(near)},
        "files": dict(SAMPLE_FILES, watertight=WATERTIGHT),
        "inside_fraction": grid.inside_fraction(),
    }
    _write_json(out / MANIFEST, manifest)
    log.info("wrote %d/%d/%d samples to %s", len(uniform), len(surface), len(near), out)
    return manifest


def _load_sample_dir(sample_dir):
    d = Path(sample_dir)
    try:
        manifest = json.loads((d / MANIFEST).read_text())
        text = bool(manifest.get("text", False))
        files = manifest["files"]
        bbox = tuple(np.asarray(b, dtype=float) for b in manifest["bbox"])
    except json.JSONDecodeError as exc:
        raise ParseError(f"{d / MANIFEST}: {exc}") from exc
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{d / MANIFEST}: missing field {exc}") from exc
    uniform = read_samples(d / files["uniform"], text=text)
    near = read_samples(d / files["near_surface"], text=text)
    return manifest, uniform, near, bbox


def trace_path_for(template_path):
    p = Path(template_path)
    return p.with_name(p.stem + ".trace.csv")


def run_fit(sample_dir, out_template, args):
    _, uniform, near, bbox = _load_sample_dir(sample_dir)
    template, trace = fit(uniform, near, bbox, _fit_config(args))
    save_template(template, out_template)
    trace_path = Path(args.trace) if getattr(args, "trace", None) else trace_path_for(out_template)
    trace.write_csv(trace_path)
    if trace.final is not None:
        log.info("final loss %.6g accuracy %.4f", trace.final.total, trace.final.accuracy)
    return template, trace


def run_extract(template_path, out_mesh, args):
    template = load_template(template_path)
    mesh = extract(template, args.res, args.epsilon, args.min_area, args.extract_isolevel)
    if mesh.is_empty:
        log.warning("extracted surface is empty")
    save_mesh(mesh, out_mesh)
    return mesh


def cmd_sample(args):
    run_sample(args.mesh, args.out_dir, args)


def cmd_fit(args):
    run_fit(args.sample_dir, args.out, args)


def cmd_extract(args):
    run_extract(args.template, args.out, args)


def cmd_correspond(args):
    cmap = correspond(load_mesh(args.src_mesh), load_template(args.src_template),
                      load_mesh(args.dst_mesh), load_template(args.dst_template), args.magnitude)
    cmap.write_csv(args.out)


def cmd_interpolate(args):
    weights = _parse_weights(args.weights)
    templates = [load_template(p) for p in args.templates]
    save_template(interpolate(templates, weights), args.out)


def cmd_eval(args):
    score = f_score(load_mesh(args.pred), load_mesh(args.gt), args.tau, args.samples,
                    args.seed, squared=not args.tau_is_distance)
    print(f"{score:.2f}")


def cmd_pipeline(args):
    out = Path(args.out_dir)
    run_sample(args.mesh, out / "samples", args)
    run_fit(out / "samples", out / "template.json", args)
    run_extract(out / "template.json", out / "mesh.obj", args)


# -- parser -----------------------------------------------------------------------


def _add_sample_flags(p):
    p.add_argument("--resolution", type=int, default=128, help="voxel grid resolution")
    p.add_argument("--count", type=int, default=100_000, help="samples per set")
    p.add_argument("--surface-count", type=int, default=0, help="surface samples (default: --count)")
    p.add_argument("--near-count", type=int, default=0, help="near-surface samples (default: --count)")
    p.add_argument("--truncation", type=float, default=0.1, help="near-surface band half-width")
    p.add_argument("--text", action="store_true", help="write text sample files")


def _add_fit_flags(p):
    d = FitConfig()
    w = LossWeights()
    p.add_argument("--elements", type=int, default=d.elements)
    p.add_argument("--steps", type=int, default=d.steps)
    p.add_argument("--lr", type=float, default=d.learning_rate)
    p.add_argument("--final-lr", type=float, default=d.final_learning_rate)
    p.add_argument("--uniform-batch", type=int, default=d.uniform_batch)
    p.add_argument("--near-batch", type=int, default=d.near_surface_batch)
    p.add_argument("--log-every", type=int, default=d.log_every)
    p.add_argument("--isolevel", type=float, default=DEFAULT_ISOLEVEL)
    p.add_argument("--w-u", type=float, default=w.w_u)
    p.add_argument("--w-s", type=float, default=w.w_s)
    p.add_argument("--w-a", type=float, default=w.w_a)
    p.add_argument("--w-b", type=float, default=w.w_b)
    p.add_argument("--alpha", type=float, default=w.alpha)
    p.add_argument("--beta", type=float, default=w.beta)


def _add_extract_flags(p):
    p.add_argument("--res", type=int, default=128, help="marching cubes resolution")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="influence cutoff")
    p.add_argument("--min-area", type=float, default=DEFAULT_MIN_AREA, help="smallest kept component area")
    p.add_argument("--extract-isolevel", type=float, default=None,
                   help="contour level (default: the template's own)")


def _add_global_flags(p, defaults=True):
    def d(value):
        return value if defaults else argparse.SUPPRESS

    p.add_argument("--config", default=d(None), help="key = value file with flag defaults")
    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--threads", type=int, default=d(0), help="numba worker threads (0 = library default)")
    p.add_argument("--verbose", "-v", action="count", default=d(0))


def build_parser():
    parser = argparse.ArgumentParser(prog="sif3d", description="Structured implicit shape templates.")
    _add_global_flags(parser)
    # the same flags are accepted after the command name too
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, defaults=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, **kw):
        return sub.add_parser(name, parents=[common], **kw)

    p = add("sample", help="normalize a mesh and write labeled sample sets")
    p.add_argument("mesh")
    p.add_argument("out_dir")
    _add_sample_flags(p)
    p.set_defaults(func=cmd_sample)

    p = add("fit", help="fit a template to a sample directory")
    p.add_argument("sample_dir")
    p.add_argument("out")
    p.add_argument("--trace", help="trace CSV path (default: next to the template)")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = add("extract", help="mesh the template's level set")
    p.add_argument("template")
    p.add_argument("out")
    _add_extract_flags(p)
    p.set_defaults(func=cmd_extract)

    p = add("correspond", help="vertex correspondence through template coordinates")
    for name in ("src_mesh", "src_template", "dst_mesh", "dst_template", "out"):
        p.add_argument(name)
    p.add_argument("--magnitude", choices=MAGNITUDE_MODES, default="element")
    p.set_defaults(func=cmd_correspond)

    p = add("interpolate", help="blend templates")
    p.add_argument("templates", nargs="+")
    p.add_argument("--weights", required=True, help="comma-separated, summing to 1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_interpolate)

    p = add("eval", help="F-score of a predicted mesh against ground truth")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--tau", type=float, default=1e-4)
    p.add_argument("--tau-is-distance", action="store_true", help="treat --tau as a plain distance")
    p.add_argument("--samples", type=int, default=100_000)
    p.set_defaults(func=cmd_eval)

    p = add("pipeline", help="sample, fit and extract in one go")
    p.add_argument("mesh")
    p.add_argument("out_dir")
    _add_sample_flags(p)
    _add_fit_flags(p)
    _add_extract_flags(p)
    p.set_defaults(func=cmd_pipeline)
    return parser, sub


def parse_args(argv):
    parser, sub = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        values = read_config(args.config)
        _apply_config(parser, sub.choices[args.command], values)
        args = parser.parse_args(argv)
    return args


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"sif3d: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"sif3d: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"sif3d: error: {exc}", file=sys.stderr)
        return EXIT_IO

    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    _accel.set_threads(args.threads)
    try:
        args.func(args)
    except UsageError as exc:
        code, msg = EXIT_USAGE, str(exc)
    except (ParseError, EmptyMeshError, UnicodeDecodeError) as exc:
        code, msg = EXIT_PARSE, str(exc)
    except OSError as exc:
        code, msg = EXIT_IO, str(exc)
    except NumericalError as exc:
        code, msg = EXIT_NUMERICAL, str(exc)
    except InvalidInputError as exc:
        code, msg = EXIT_USAGE, str(exc)
    else:
        return EXIT_OK
    print(f"sif3d: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
