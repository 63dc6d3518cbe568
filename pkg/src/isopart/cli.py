"""Command line interface: ``isopart <subcommand> ...``.

Exit status is 0 on success, 1 when a validation or bench check fails and 2
on usage errors.  Reports go to ``--out`` when given, otherwise to stdout.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import bench, constructions, grid, io, minimize, network as nw, sphere
from .config import RunConfig

log = logging.getLogger("isopart")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(f"{self.prog}: error: {message}")


class _Usage(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--seed", type=int, default=0, help="random seed (64-bit)")
    c.add_argument("--tol", type=float, default=1e-9, help="stationarity / constraint tolerance")
    c.add_argument("--out", default=None, help="output file (default: stdout)")
    c.add_argument("-v", "--verbose", action="store_true")
    return c


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    p = _Parser(prog="isopart", description="Planar partitions with prescribed areas and fixed far field.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("construct", parents=[common], help="build a standard partition")
    s.add_argument("kind", choices=constructions.KINDS)
    s.add_argument("--area", type=float, action="append", default=[])
    s.add_argument("--window", type=float, default=constructions.DEFAULT_WINDOW)

    s = sub.add_parser("verify", parents=[common], help="topology and stationarity report")
    s.add_argument("file")

    s = sub.add_parser("measure", parents=[common], help="areas and interface lengths in a disk")
    s.add_argument("file")
    s.add_argument("--radius", type=float, default=None)

    s = sub.add_parser("minimize", parents=[common], help="constrained perimeter descent")
    s.add_argument("file")
    s.add_argument("--labels", type=int, nargs="*", default=None, help="constrained region labels (default: bounded)")
    s.add_argument("--jitter", type=float, default=0.0)
    s.add_argument("--max-iter", type=int, default=200)
    s.add_argument("--partition-out", default=None)

    s = sub.add_parser("anneal", parents=[common], help="lattice annealing oracle")
    s.add_argument("file")
    s.add_argument("--n", type=int, default=256)
    s.add_argument("--half", type=float, default=2.0, help="half side of the square window")
    s.add_argument("--sweeps", type=int, default=200)
    s.add_argument("--jitter", type=float, default=0.15)
    s.add_argument("--snapshot", default=None, help="prefix for PGM + JSON snapshot")

    s = sub.add_parser("project-sphere", parents=[common], help="equidistant sphere partition and its projection")
    s.add_argument("--N", type=int, default=3)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--cell", type=int, default=0)
    s.add_argument("--angle", type=float, default=0.0)
    s.add_argument("--samples", type=int, default=64, help="points per polyline arc")
    s.add_argument("--partition-out", default=None)

    s = sub.add_parser("bench", parents=[common], help="numerical checks of quantitative estimates")
    s.add_argument("which", choices=["steiner", "glueing", "growth", "cluster", "density", "all"])
    s.add_argument("--rho", type=float, nargs="*", default=[0.2, 0.1, 0.05])
    s.add_argument("--file", default=None, help="partition for growth/cluster/density")
    s.add_argument("--radii", type=float, nargs="*", default=[2.0, 5.0, 10.0])
    s.add_argument("--pairs", type=int, default=50)
    s.add_argument("--timing", action="store_true", help="include runtimes (not byte-stable)")

    s = sub.add_parser("render", parents=[common], help="SVG drawing")
    s.add_argument("file")
    s.add_argument("--size", type=int, default=480)
    return p


def _emit(cfg: RunConfig, out, text: str) -> None:
    path = cfg.resolve(out)
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _cmd_construct(a, cfg):
    p = constructions.construct(constructions.ConstructionSpec(a.kind, tuple(a.area), a.window))
    _emit(cfg, a.out, io.dumps(io.partition_to_dict(p)))
    return 0


def _cmd_verify(a, cfg):
    p = io.load_partition(a.file)
    rep = nw.check_stationarity(p, nw.Tolerances(a.tol, a.tol, a.tol))
    pr = nw.solve_pressures(p)
    out = {
        "stationarity": rep,
        "passed": rep.passed,
        "max_angle_residual": rep.max_angle_residual,
        "max_curvature_residual": rep.max_curvature_residual,
        "pressures": pr.p,
        "pressure_residual": pr.residual,
    }
    _emit(cfg, a.out, io.dumps(out))
    return 0 if rep.passed else 1


def _cmd_measure(a, cfg):
    p = io.load_partition(a.file)
    m = nw.region_measures(p, a.radius)
    _emit(cfg, a.out, io.dumps(m))
    return 0


def _cmd_minimize(a, cfg):
    p = io.load_partition(a.file)
    if a.jitter > 0:
        p = minimize.jitter(p, a.jitter, a.seed)
    mode = minimize.ConstraintMode(None if a.labels is None else frozenset(a.labels))
    opts = minimize.DescentOptions(max_iter=a.max_iter, constraint_tol=max(a.tol, 1e-12))
    res = minimize.minimize(p, mode, opts, seed=a.seed)
    if a.partition_out:
        io.save_partition(res.partition, cfg.resolve(a.partition_out))
    out = {
        "converged": res.converged,
        "energy": res.energy,
        "multipliers": res.multipliers,
        "trace": res.trace,
        "short_edges": res.short_edges,
    }
    _emit(cfg, a.out, io.dumps(out))
    return 0


def _cmd_anneal(a, cfg):
    p = io.load_partition(a.file)
    res = grid.anneal_network(p, a.n, a.half, a.jitter, a.seed, grid.Schedule(sweeps=a.sweeps))
    ref = grid.square_window_energy(p, a.half)
    if a.snapshot:
        io.save_grid(res.grid, cfg.resolve(a.snapshot))
    out = {
        "n": a.n,
        "h": res.grid.h,
        "initial_energy": res.initial_energy,
        "energy": res.energy,
        "network_energy": ref,
        "relative_difference": (res.energy - ref) / ref if ref else math.nan,
        "trace": res.trace,
    }
    _emit(cfg, a.out, io.dumps(out))
    return 0


def _cmd_project_sphere(a, cfg):
    sites = sphere.make_equidistant_sites(a.N, a.d)
    part = sphere.SpherePartition(sites)
    if a.angle:
        part = part.rotated(sphere.rotation_toward_cell(part, a.cell, a.angle))
    out = {"N": a.N, "d": a.d, "sites": sites.sites, "rotation": part.rotation}
    if a.d == 2:
        out["polylines"] = [
            {"labels": list(lab), "points": pts}
            for lab, pts in sphere.boundary_polylines(part, a.samples, window=10.0)
        ]
        if a.partition_out:
            io.save_partition(sphere.to_arc_partition(part), cfg.resolve(a.partition_out))
    _emit(cfg, a.out, io.dumps(out))
    return 0


def _random_disk_pairs(n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        c1 = rng.uniform(-1, 1, 2)
        c2 = rng.uniform(-1, 1, 2)
        r1, r2 = rng.uniform(0.2, 1.5, 2)
        r = rng.uniform(0.05, 0.5)
        R = rng.uniform(1.5, 3.0)
        yield bench.Disk(tuple(c1), r1), bench.Disk(tuple(c2), r2), r, R


def _cmd_bench(a, cfg):
    reps = []
    which = a.which
    if which in ("steiner", "all"):
        reps += [bench.steiner_check(r) for r in a.rho]
    if which in ("glueing", "all"):
        reps += [bench.glueing_check(E, F, r, R) for E, F, r, R in _random_disk_pairs(a.pairs, a.seed)]
    parts = []
    if a.file:
        parts = [io.load_partition(a.file)]
    elif which == "all" or which in ("growth", "cluster", "density"):
        parts = [
            constructions.make_lens(1.0),
            constructions.make_peanut(1.0, 1.0),
            constructions.make_reuleaux(1.0),
            constructions.make_double_bubble(1.0, 2.0),
            constructions.make_cone("triple_junction"),
        ]
    if which in ("growth", "all"):
        reps += [bench.perimeter_growth_check(p, a.radii) for p in parts]
    if which in ("cluster", "all"):
        reps += [bench.cluster_bound_check(p) for p in parts if nw.classify_far_field(p).kind == nw.CLUSTER]
    if which in ("density", "all"):
        reps += [bench.density_check(p, 20, [0.01, 0.1], seed=a.seed) for p in parts]
    rows = []
    for r in reps:
        d = r.to_dict()
        if not a.timing:
            d.pop("runtime")
        rows.append(d)
    _emit(cfg, a.out, io.dumps(rows))
    return 0 if all(r.passed for r in reps) else 1


def _cmd_render(a, cfg):
    p = io.load_partition(a.file)
    _emit(cfg, a.out, io.render_svg(p, io.SvgStyle(size=a.size)))
    return 0


_COMMANDS = {
    "construct": _cmd_construct,
    "verify": _cmd_verify,
    "measure": _cmd_measure,
    "minimize": _cmd_minimize,
    "anneal": _cmd_anneal,
    "project-sphere": _cmd_project_sphere,
    "bench": _cmd_bench,
    "render": _cmd_render,
}


def cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _Usage as exc:
        sys.stderr.write(f"{exc}\n")
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = RunConfig(seed=args.seed, tol=args.tol)
    except ValueError as exc:
        sys.stderr.write(f"isopart: {exc}\n")
        return 2
    try:
        return _COMMANDS[args.command](args, cfg)
    except (io.PartitionParseError, io.SchemaVersionError, io.PartitionValidationError) as exc:
        sys.stderr.write(f"isopart: {exc}\n")
        return 1
    except (ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"isopart: {exc}\n")
        return 2


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
