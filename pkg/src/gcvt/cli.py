"""Command-line interface.

Every command writes its outputs and a ``manifest.json`` into ``--out-dir``.
Exit codes: 0 success, 1 input error, 2 structural failure, 3 no
convergence within the iteration budget.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .geodesics import DEFAULT_LEVEL, build_steiner_graph
from .manifest import RunManifest, substream
from .mesh import MeshError, SurfacePoint, genus, load_mesh, random_surface_points
from .tessellation import (build_gvt, combinatorial_stats, dual_idt, gcvt_energy, stats_dict,
                           validate_cells, write_boundary_obj, write_cells_obj, write_dual_obj)

EXIT_OK, EXIT_INPUT, EXIT_STRUCTURE, EXIT_NO_CONVERGENCE = 0, 1, 2, 3

OPT_METHODS = ("lloyd-riemannian", "lloyd-lmds", "mde")

LLOYD_KEYS = {"max_iters": 100, "move_tol": None, "max_halvings": 4}
MDE_KEYS = {"M": None, "lambda": 0.8, "crossover_rate": 0.9, "max_iters": 50,
            "stall_window": 10, "target_energy": None, "centroid_method": "lmds",
            "polish_iters": 0}
SUPERPIXEL_KEYS = {"max_iters": None, "window": 2.0, "enforce_connectivity": True}

PATH_FLAGS = ("--mesh", "--image", "--frames", "--config", "--generators", "--density",
              "--ground-truth", "--out-dir")


class InputError(Exception):
    pass


class StructureError(Exception):
    pass


# -- helpers ------------------------------------------------------------------------

def _load_config(path, allowed: dict) -> dict:
    cfg = dict(allowed)
    if path is None:
        return cfg
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{p}: no such config file")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{p}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise InputError(f"{p}: config must be a JSON object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise InputError(f"{p}: unknown config keys {unknown}; allowed {sorted(allowed)}")
    cfg.update(data)
    return cfg


def _load_mesh(args):
    p = Path(args.mesh)
    if not p.is_file():
        raise InputError(f"{p}: no such mesh file")
    return load_mesh(p, density=getattr(args, "density", None))


def _read_generators(path, mesh):
    """One generator per line: ``x y z`` (snapped to the surface) or
    ``face b0 b1 b2``."""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{p}: no such generator file")
    out = []
    for lineno, raw in enumerate(p.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        try:
            vals = [float(x) for x in parts]
        except ValueError:
            raise InputError(f"{p}:{lineno}: expected numbers, got {raw.strip()!r}") from None
        if len(vals) == 3:
            out.append(mesh.nearest_surface_point(np.array(vals)))
        elif len(vals) == 4:
            f = int(vals[0])
            if f != vals[0] or not 0 <= f < mesh.n_faces:
                raise InputError(f"{p}:{lineno}: face index {parts[0]} out of range")
            try:
                out.append(SurfacePoint(f, tuple(vals[1:])))
            except ValueError as exc:
                raise InputError(f"{p}:{lineno}: {exc}") from None
        else:
            raise InputError(f"{p}:{lineno}: expected 'x y z' or 'face b0 b1 b2'")
    if not out:
        raise InputError(f"{p}: no generators")
    return out


def _generators(args, mesh, stream="generators"):
    if getattr(args, "generators", None):
        return _read_generators(args.generators, mesh)
    n = args.n_generators
    if n is None or n < 1:
        raise InputError("give --n-generators >= 1 or --generators FILE")
    return random_surface_points(mesh, n, substream(args.seed, stream))


def _write_generators(path, gens, mesh):
    with open(path, "w") as fh:
        fh.write("# face b0 b1 b2 | x y z\n")
        for g in gens:
            p = g.position(mesh)
            fh.write(f"{g.face} {g.bary[0]:.17g} {g.bary[1]:.17g} {g.bary[2]:.17g}"
                     f"  # {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _export_tessellation(t, out, energy=None):
    write_cells_obj(t, out / "cells.obj")
    write_boundary_obj(t, out / "boundary.obj")
    stats = stats_dict(t, energy=energy)
    _write_json(out / "stats.json", stats)
    return stats


def _record_argv(argv):
    """Command line with path arguments made absolute."""
    out = list(argv)
    for i, a in enumerate(out[:-1]):
        if a in PATH_FLAGS:
            out[i + 1] = str(Path(out[i + 1]).resolve())
    if out and out[0] == "replay" and len(out) > 1:
        out[1] = str(Path(out[1]).resolve())
    return out


# -- commands ---------------------------------------------------------------------------

def cmd_gvt(args, manifest):
    mesh = _load_mesh(args)
    gens = _generators(args, mesh)
    t0 = time.perf_counter()
    t = build_gvt(mesh, gens, level=args.steiner_level)
    elapsed = time.perf_counter() - t0
    out = args.out_dir
    stats = _export_tessellation(t, out)
    _write_generators(out / "generators.txt", gens, mesh)
    rep = validate_cells(t)
    print(f"m={stats['m']} genus={stats['genus']} n_branch={stats['n_branch']} "
          f"n_edges={stats['n_edges']} closed_ball={stats['closed_ball']} "
          f"connected={rep.all_connected} energy={stats['energy']:.9g} time={elapsed:.3f}s")
    manifest.parameters.update(m=len(gens))
    manifest.outputs += ["cells.obj", "cells.mtl", "boundary.obj", "stats.json", "generators.txt"]
    return EXIT_OK if rep.all_connected else EXIT_STRUCTURE


def _optimize(args, mesh, method, cfg_path, manifest, stream="init"):
    """Run one optimizer; returns (generators, tessellation, energy rows, converged)."""
    graph = build_steiner_graph(mesh, args.steiner_level)
    n = args.n_generators
    if getattr(args, "generators", None):
        init = _read_generators(args.generators, mesh)
        n = len(init)
    elif n is None or n < 1:
        raise InputError("give --n-generators >= 1 or --generators FILE")
    else:
        init = None
    if method in ("lloyd-riemannian", "lloyd-lmds"):
        from .opt.lloyd import lloyd_run
        cfg = _load_config(cfg_path, LLOYD_KEYS)
        if init is None:
            init = random_surface_points(mesh, n, substream(args.seed, stream))
        r = lloyd_run(mesh, init, method.split("-", 1)[1], max_iters=int(cfg["max_iters"]),
                      move_tol=cfg["move_tol"], graph=graph, max_halvings=int(cfg["max_halvings"]))
        rows = [(i, e, e) for i, e in enumerate(r.energy_trace)]
        manifest.parameters.update(config=cfg, N=n)
        return r.generators, r.tessellation, rows, r.converged
    if method == "mde":
        from .opt.mde import MdeConfig, mde_run
        cfg = _load_config(cfg_path, MDE_KEYS)
        try:
            conf = MdeConfig(population=cfg["M"], lam=float(cfg["lambda"]),
                             crossover_rate=float(cfg["crossover_rate"]),
                             max_iterations=int(cfg["max_iters"]),
                             stall_window=int(cfg["stall_window"]),
                             target_energy=cfg["target_energy"], seed=args.seed,
                             polish_iters=int(cfg["polish_iters"]),
                             centroid=cfg["centroid_method"])
            conf.validate(n)
        except (TypeError, ValueError) as exc:
            raise InputError(f"invalid MDE config: {exc}") from None
        pop = None
        if init is not None:
            rng = substream(args.seed, stream)
            M = conf.resolved_population(n)
            pop = [tuple(init)] + [tuple(random_surface_points(mesh, n, rng)) for _ in range(M - 1)]
        r = mde_run(mesh, n, conf, graph=graph, init_population=pop)
        rows = list(r.energy_trace)
        manifest.parameters.update(mde={"seed": args.seed, "N": n,
                                        "M": conf.resolved_population(n), "lambda": conf.lam,
                                        "crossover_rate": conf.crossover_rate,
                                        "max_iters": conf.max_iterations,
                                        "stall_window": conf.stall_window,
                                        "target_energy": conf.target_energy,
                                        "centroid_method": conf.centroid,
                                        "steiner_level": args.steiner_level},
                                   polish_iters=conf.polish_iters, stop_reason=r.reason)
        converged = conf.target_energy is None or r.target_reached
        return (list(r.best_agent.generators), r.tessellation, rows, converged)
    raise InputError(f"unknown method {method!r}; choose from {OPT_METHODS}")


def _write_energy_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "best_energy", "mean_energy"])
        for g, b, m in rows:
            w.writerow([g, repr(float(b)), repr(float(m))])


def cmd_optimize(args, manifest):
    mesh = _load_mesh(args)
    gens, t, rows, converged = _optimize(args, mesh, args.method, args.config, manifest)
    out = args.out_dir
    stats = _export_tessellation(t, out)
    _write_energy_csv(out / "energy.csv", rows)
    _write_generators(out / "generators.txt", gens, mesh)
    manifest.outputs += ["cells.obj", "cells.mtl", "boundary.obj", "stats.json", "energy.csv",
                         "generators.txt"]
    print(f"method={args.method} N={len(gens)} energy={stats['energy']:.9g} "
          f"steps={len(rows) - 1} converged={converged}")
    if not converged:
        print("warning: stopped at the iteration budget without converging", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_remesh(args, manifest):
    mesh = _load_mesh(args)
    if args.method == "none":
        gens = _generators(args, mesh)
        t = build_gvt(mesh, gens, level=args.steiner_level)
        converged = True
    else:
        gens, t, rows, converged = _optimize(args, mesh, args.method, args.config, manifest)
    out = args.out_dir
    stats = _export_tessellation(t, out)
    _write_generators(out / "generators.txt", gens, mesh)
    manifest.outputs += ["cells.obj", "cells.mtl", "boundary.obj", "stats.json", "generators.txt"]
    dual = dual_idt(t)
    if not stats["closed_ball"] or not dual.valid:
        why = dual.reason or "cells are not closed balls"
        raise StructureError(f"dual is not a triangulation ({why})")
    write_dual_obj(dual, out / "dual.obj")
    manifest.outputs.append("dual.obj")
    print(f"dual: {len(dual.vertices)} vertices {len(dual.edges)} edges "
          f"{len(dual.triangles)} triangles, euler={dual.euler_characteristic}")
    return EXIT_OK if converged else EXIT_NO_CONVERGENCE


def cmd_analyze(args, manifest):
    mesh = _load_mesh(args)
    report = {
        "n_vertices": int(mesh.n_vertices),
        "n_faces": int(mesh.n_faces),
        "n_edges": int(mesh.n_edges),
        "closed": bool(mesh.is_closed),
        "euler_characteristic": int(mesh.euler_characteristic),
        "genus": int(genus(mesh)) if mesh.is_closed else None,
        "area": float(mesh.area),
    }
    if args.generators or args.n_generators:
        gens = _generators(args, mesh)
        t = build_gvt(mesh, gens, level=args.steiner_level)
        cs = combinatorial_stats(t)
        report["tessellation"] = stats_dict(t, cs)
        report["tessellation"]["connected"] = bool(validate_cells(t).all_connected)
        report["tessellation"]["expected_counts"] = list(cs.expected_counts())
    _write_json(args.out_dir / "analysis.json", report)
    manifest.outputs.append("analysis.json")
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def _superpixel_config(args, is_video):
    cfg = _load_config(args.config, SUPERPIXEL_KEYS)
    if cfg["max_iters"] is None:
        cfg["max_iters"] = 20 if args.method == "rcvt" else 10
    return cfg


def _run_superpixels(grid, args, cfg):
    from .content.superpixels import enforce_connectivity, imslic_lloyd, rcvt_lloyd
    if args.k < 1 or args.k > grid.size:
        raise InputError(f"--k must lie in [1, {grid.size}], got {args.k}")
    if args.method == "rcvt":
        r = rcvt_lloyd(grid, args.k, max_iters=int(cfg["max_iters"]), seed=args.seed,
                       window=float(cfg["window"]))
    elif args.method == "imslic":
        r = imslic_lloyd(grid, args.k, max_iters=int(cfg["max_iters"]), seed=args.seed)
    else:
        raise InputError(f"unknown method {args.method!r}")
    labels = r.labels
    if cfg["enforce_connectivity"]:
        labels = enforce_connectivity(labels)
    return r, labels


def _lambdas(args, shape, n):
    from .content.grid import default_lambdas
    d = default_lambdas(shape, args.k)
    given = [args.lambda1, args.lambda2, args.lambda3][:n]
    lams = tuple(float(g) if g is not None else float(dv) for g, dv in zip(given, d))
    for lam in lams:
        if not lam > 0:
            raise InputError(f"stretching factors must be positive, got {lams}")
    return lams


def _metrics(labels, r, args, gt):
    from .content.metrics import segmentation_metrics, size_cv
    m = {"k": int(labels.k), "size_cv": size_cv(labels.labels), "iterations": int(r.iterations),
         "energy_final": float(r.energy_final), "boundary_recall": None, "underseg_error": None}
    if gt is not None:
        s = segmentation_metrics(labels.labels, gt)
        m.update(boundary_recall=s["boundary_recall"], underseg_error=s["underseg_error"])
    return m


def _read_gt(path, shape):
    if path is None:
        return None
    from .content.io import read_image
    try:
        g = read_image(path).max(axis=-1) > 0
    except (FileNotFoundError, ValueError) as exc:
        raise InputError(str(exc)) from None
    if g.shape != tuple(shape):
        raise InputError(f"{path}: ground truth is {g.shape}, image is {tuple(shape)}")
    return g


def cmd_superpixel(args, manifest):
    from .content.grid import stretch_image
    from .content.io import boundary_overlay, read_image, to_lab, write_pgm16, write_ppm
    try:
        rgb = read_image(args.image)
    except (FileNotFoundError, ValueError) as exc:
        raise InputError(str(exc)) from None
    cfg = _superpixel_config(args, False)
    lams = _lambdas(args, rgb.shape[:2], 2)
    grid = stretch_image(to_lab(rgb), *lams)
    r, labels = _run_superpixels(grid, args, cfg)
    out = args.out_dir
    write_pgm16(out / "labels.pgm", labels.labels)
    write_ppm(out / "overlay.ppm", boundary_overlay(rgb, labels.labels))
    metrics = _metrics(labels, r, args, _read_gt(args.ground_truth, rgb.shape[:2]))
    _write_json(out / "metrics.json", metrics)
    manifest.parameters.update(lambdas=list(lams), config=cfg)
    manifest.outputs += ["labels.pgm", "overlay.ppm", "metrics.json"]
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def cmd_supervoxel(args, manifest):
    from .content.grid import stretch_video
    from .content.io import boundary_overlay, read_frames, to_lab, write_pgm16, write_ppm
    try:
        video = read_frames(args.frames)
    except (FileNotFoundError, ValueError) as exc:
        raise InputError(str(exc)) from None
    cfg = _superpixel_config(args, True)
    lams = _lambdas(args, video.shape[:3], 3)
    grid = stretch_video(np.stack([to_lab(f) for f in video]), *lams)
    r, labels = _run_superpixels(grid, args, cfg)
    out = args.out_dir
    (out / "labels").mkdir(exist_ok=True)
    (out / "overlay").mkdir(exist_ok=True)
    for i, (lab, frame) in enumerate(zip(labels.labels, video)):
        write_pgm16(out / "labels" / f"frame_{i:04d}.pgm", lab)
        write_ppm(out / "overlay" / f"frame_{i:04d}.ppm", boundary_overlay(frame, lab))
    metrics = _metrics(labels, r, args, None)
    _write_json(out / "metrics.json", metrics)
    manifest.parameters.update(lambdas=list(lams), config=cfg)
    manifest.outputs += ["labels/", "overlay/", "metrics.json"]
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def cmd_replay(args, manifest=None):
    try:
        m = RunManifest.load(args.manifest)
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise InputError(f"{args.manifest}: cannot read manifest ({exc})") from None
    bad = m.check_inputs()
    if bad:
        raise InputError(f"inputs changed since the recorded run: {bad}")
    if m.version != __version__:
        print(f"warning: manifest written by version {m.version}, running {__version__}",
              file=sys.stderr)
    return main(m.replay_argv(args.out_dir))


# -- parser ---------------------------------------------------------------------------------

def _common(p, mesh=True):
    if mesh:
        p.add_argument("--mesh", required=True, help="OBJ or OFF triangle mesh")
        p.add_argument("--density", help="per-vertex density file, one value per line")
        p.add_argument("--steiner-level", type=int, default=DEFAULT_LEVEL,
                       help="Steiner points per edge for geodesic distances (default %(default)s)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", type=Path, required=True)


def _gens(p):
    p.add_argument("--n-generators", type=int, help="number of random generators")
    p.add_argument("--generators", help="generator file: 'x y z' or 'face b0 b1 b2' per line")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gcvt", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gvt", help="geodesic Voronoi tessellation of given generators")
    _common(p)
    _gens(p)

    p = sub.add_parser("optimize", help="minimize the centroidal energy (Lloyd or MDE)")
    _common(p)
    _gens(p)
    p.add_argument("--method", required=True, choices=OPT_METHODS)
    p.add_argument("--config", help="JSON file with optimizer settings")

    p = sub.add_parser("remesh", help="dual triangulation of an optimized tessellation")
    _common(p)
    _gens(p)
    p.add_argument("--method", default="lloyd-lmds", choices=OPT_METHODS + ("none",))
    p.add_argument("--config", help="JSON file with optimizer settings")

    p = sub.add_parser("analyze", help="mesh and tessellation statistics")
    _common(p)
    _gens(p)

    for name, helptext in (("superpixel", "content-sensitive superpixels of an image"),
                           ("supervoxel", "content-sensitive supervoxels of a frame directory")):
        p = sub.add_parser(name, help=helptext)
        if name == "superpixel":
            p.add_argument("--image", required=True, help="PPM/PGM image")
            p.add_argument("--ground-truth", help="boundary image, nonzero = boundary")
        else:
            p.add_argument("--frames", required=True, help="directory of numbered frames")
        p.add_argument("--k", type=int, required=True, help="number of regions")
        p.add_argument("--method", default="rcvt", choices=("rcvt", "imslic"))
        p.add_argument("--lambda1", type=float, help="spatial stretch (default 1)")
        p.add_argument("--lambda2", type=float,
                       help="color stretch for images, temporal stretch for video")
        p.add_argument("--lambda3", type=float, help="color stretch for video")
        p.add_argument("--config", help="JSON file with clustering settings")
        _common(p, mesh=False)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("manifest", help="manifest.json or the directory holding it")
    p.add_argument("--out-dir", type=Path, help="write to this directory instead")
    return ap


COMMANDS = {"gvt": cmd_gvt, "optimize": cmd_optimize, "remesh": cmd_remesh,
            "analyze": cmd_analyze, "superpixel": cmd_superpixel,
            "supervoxel": cmd_supervoxel}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        if args.command == "replay":
            return cmd_replay(args)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        params = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
        manifest = RunManifest(args.command, params, _record_argv(argv))
        for flag in ("mesh", "density", "image", "frames", "config", "generators", "ground_truth"):
            path = getattr(args, flag, None)
            if path is not None and Path(path).exists():
                manifest.add_input(Path(path).resolve())
        t0 = time.perf_counter()
        code = EXIT_STRUCTURE
        try:
            code = COMMANDS[args.command](args, manifest)
        finally:
            manifest.runtime_seconds = time.perf_counter() - t0
            manifest.parameters["exit_code"] = code
            manifest.write(args.out_dir)
        return code
    except (InputError, MeshError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StructureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STRUCTURE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
