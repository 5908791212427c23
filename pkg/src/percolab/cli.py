"""Command line entry point: ``percolab <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 property violation (a duality
failure, or a necklet / blocking validation failure).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments as ex
from . import io
from .clusters import boundary_curve_of_sites, filled_cluster_sites, label_clusters
from .lattice import Kind
from .measures import SamplerSpec, sample
from .render import render_svg
from .topology import DualityViolation

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out += list(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _pair(text: str) -> tuple[int, int]:
    a, b = text.split(":")
    return int(a), int(b)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", type=Path, help="sampler key=value file")
    g.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    g.add_argument("--trials", type=int, default=100)
    g.add_argument("--out", type=Path, default=Path("out"))
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("--exhaustive", action="store_true", help="exhaustive mode where feasible")

    p = _Parser(prog="percolab", description="Dependent site percolation lab on the matching pair (Z2, Z2*).")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sample", parents=[common], help="write sampled configurations")
    s.add_argument("--count", type=int, help="number of configurations (default: --trials)")

    s = sub.add_parser("duality", parents=[common], help="annulus dichotomy check")
    s.add_argument("--annulus", type=_pair, action="append", metavar="K:N",
                   help="inner and outer half widths (repeatable, default 0:2)")

    s = sub.add_parser("chain", parents=[common], help="non-coexistence chain estimates")
    s.add_argument("--delta", type=int, default=0)
    s.add_argument("--gamma", type=int, default=1)
    s.add_argument("--heights", type=_int_list, help="e.g. --heights=-3..3")

    s = sub.add_parser("coexist", parents=[common], help="coexistence frequency per window size")
    s.add_argument("--sizes", type=_int_list, default=[17, 33, 65])

    s = sub.add_parser("necklet", parents=[common], help="flows, necklets and blocking sets")
    s.add_argument("--gamma", type=int, default=0)
    s.add_argument("--s", type=int, default=1)
    s.add_argument("--t", type=int, default=3)

    s = sub.add_parser("boundary", parents=[common], help="boundary curve hit frequencies")
    s.add_argument("--edge", type=_int_list, default=[0, -1, 0, 0], help="x0,y0,x1,y1")
    s.add_argument("--shifts", type=_int_list, default=[-2, -1, 0, 1, 2])

    s = sub.add_parser("render", parents=[common], help="SVG of a configuration")
    s.add_argument("--input", type=Path, help="configuration text file (default: first sample)")
    s.add_argument("--curve", action="store_true", help="overlay the boundary of the first spanning 1*cluster")
    s.add_argument("--file", default="render.svg", help="output file name inside --out")

    sub.add_parser("selftest", parents=[common], help="quick deterministic property checks")
    return p


def load_spec(args) -> SamplerSpec:
    spec = SamplerSpec.parse(args.config.read_text()) if args.config else SamplerSpec()
    if args.seed is not None:
        spec = spec.with_(seed=args.seed)
    return spec


def _finish(rep: ex.ExperimentReport, out: Path) -> int:
    paths = rep.write(out)
    print(f"{rep.experiment}: wrote {paths['json']} and {paths['csv']}")
    return EXIT_VIOLATION if rep.failures else EXIT_OK


def run(args) -> int:
    if args.trials < 0 or args.jobs < 1:
        raise UsageError("--trials must be >= 0 and --jobs >= 1")
    spec = load_spec(args)
    out = args.out
    cmd = args.command
    if cmd == "sample":
        out.mkdir(parents=True, exist_ok=True)
        count = args.trials if args.count is None else args.count
        for k, cfg in enumerate(sample(spec, count)):
            io.write_configuration(cfg, out / f"sample_{k:05d}.txt", spec.seed, spec.sampler_id)
        print(f"sample: wrote {count} configurations to {out}")
        return EXIT_OK
    if cmd == "duality":
        rep = ex.exp_duality_sweep(spec, args.annulus or [(0, 2)], args.trials, args.jobs, args.exhaustive)
        return _finish(rep, out)
    if cmd == "chain":
        return _finish(ex.exp_theorem1_chain(spec, args.delta, args.gamma, args.heights, args.trials, args.jobs), out)
    if cmd == "coexist":
        return _finish(ex.exp_coexistence_decay(spec, args.sizes, args.trials, args.jobs), out)
    if cmd == "necklet":
        return _finish(ex.exp_necklet_census(spec, args.gamma, args.s, args.t, args.trials, args.jobs), out)
    if cmd == "boundary":
        if len(args.edge) != 4:
            raise UsageError("--edge needs four integers x0,y0,x1,y1")
        e = args.edge
        return _finish(ex.exp_boundary_shift(spec, ((e[0], e[1]), (e[2], e[3])), args.shifts, args.trials, args.jobs), out)
    if cmd == "render":
        out.mkdir(parents=True, exist_ok=True)
        cfg = io.read_configuration(args.input)[0] if args.input else sample(spec, 1)[0]
        overlays = []
        if args.curve:
            lab = label_clusters(cfg, 1, Kind.STAR)
            spans = [i for i in range(len(lab)) if lab.spans(i)]
            if spans:
                overlays.append(boundary_curve_of_sites(filled_cluster_sites(cfg, spans[0], lab)))
        path = render_svg(cfg, out / args.file, overlays)
        print(f"render: wrote {path}")
        return EXIT_OK
    if cmd == "selftest":
        from .selftest import run_selftest

        rep = run_selftest(spec.seed)
        return _finish(rep, out)
    raise UsageError(f"unknown command {cmd}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except DualityViolation as exc:
        args.out.mkdir(parents=True, exist_ok=True)
        if exc.cfg is not None:
            io.write_configuration(exc.cfg, args.out / "violation.txt")
        print(f"property violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (UsageError, ValueError, OSError) as exc:
        print(f"percolab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
