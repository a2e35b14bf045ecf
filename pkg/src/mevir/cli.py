"""Command-line entry point: ``mevir {simulate,games,profile,ab}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import scenario as sc
from .moral_games import ContestGameParams, KinGameParams, ProfileError, hamilton_cooperate, hawk_dove_ess
from .profiler import ProfilerError, analyze, fixture_names, load_cue_rules, load_lexicon, load_templates, read_fixture
from .tribes import SimulationError

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 1, 2


class _InputError(Exception):
    pass


def _global_flags(defaults: bool) -> argparse.ArgumentParser:
    # Subparsers reuse these with suppressed defaults so a flag given before
    # or after the subcommand name both work.
    p = argparse.ArgumentParser(add_help=False)
    kw = {} if defaults else {"default": argparse.SUPPRESS}
    p.add_argument("--seed", type=int, **({"default": None} if defaults else kw))
    p.add_argument("--out", type=Path, **({"default": None} if defaults else kw))
    p.add_argument("--format", choices=("json", "text", "csv"), **({"default": None} if defaults else kw))
    return p


def _scenario_raw(args) -> dict:
    if args.scenario and args.bundled:
        raise _InputError("give either --scenario or --bundled, not both")
    if args.bundled:
        if args.bundled not in sc.bundled_scenarios():
            raise _InputError(f"no bundled scenario {args.bundled!r}; have {', '.join(sc.bundled_scenarios())}")
        return sc.bundled(args.bundled)
    if not args.scenario:
        raise _InputError("need --scenario PATH or --bundled NAME")
    return sc.load_raw(args.scenario)


def cmd_simulate(args) -> int:
    cfg = sc.validate(_scenario_raw(args))
    result = sc.run(cfg, args.seed)
    fmt = args.format or "json"
    if args.out is not None:
        paths = sc.write_outputs(result, args.out, dump_lattices=args.dump_lattices)
        for kind, path in sorted(paths.items()):
            print(f"{kind}: {path}", file=sys.stderr)
    if fmt == "csv":
        sys.stdout.write(result.csv_text())
    elif fmt == "text":
        s = result.summary
        m = s["final_metrics"]
        print(f"scenario {s['scenario']} seed {s['seed']} config {s['config_hash'][:12]}")
        for k in sorted(m):
            print(f"  {k}: {m[k]}")
        print(f"  accuracy: {s['accuracy']}")
    else:
        sys.stdout.write(result.summary_text())
    return EXIT_OK


def cmd_games(args) -> int:
    if args.game == "hamilton":
        verdict = "cooperate" if hamilton_cooperate(KinGameParams(args.r, args.b, args.c)) else "defect"
        out = {"game": "hamilton", "r": args.r, "b": args.b, "c": args.c, "result": verdict}
    else:
        p = hawk_dove_ess(ContestGameParams(args.v, args.c))
        out = {"game": "hawkdove", "v": args.v, "c": args.c, "hawk_probability": p}
        verdict = repr(p)
    if args.format == "json":
        print(json.dumps(out, sort_keys=True))
    else:
        print(verdict)
    return EXIT_OK


def cmd_profile(args) -> int:
    lexicon = load_lexicon(args.lexicon)
    templates = load_templates(args.templates)
    rules = load_cue_rules(args.rules)
    docs: list[tuple[str, str]] = []
    for name in args.fixture or []:
        if name not in fixture_names():
            raise _InputError(f"no fixture {name!r}; have {', '.join(fixture_names())}")
        docs.append((name, read_fixture(name)))
    for path in args.documents:
        path = Path(path)
        if not path.is_file():
            raise _InputError(f"document not found: {path}")
        docs.append((path.stem, path.read_text(encoding="utf-8")))
    if not docs:
        raise _InputError("no documents given")
    fmt = args.format or "text"
    if fmt == "csv":
        raise _InputError("profile reports support json or text")
    rendered = []
    for name, text in docs:
        report = analyze(text, lexicon, templates, rules, top=args.top)
        body = report.to_json() + "\n" if fmt == "json" else report.to_text()
        rendered.append((name, body))
    if args.out is not None:
        ext = "json" if fmt == "json" else "txt"
        for name, body in rendered:
            sc._atomic_write(Path(args.out) / f"{name}.profile.{ext}", body)
    else:
        for name, body in rendered:
            if len(rendered) > 1:
                print(f"== {name}")
            sys.stdout.write(body)
    return EXIT_OK


def cmd_ab(args) -> int:
    if args.n_seeds <= 0:
        raise _InputError("--seeds must be a positive count")
    raw = _scenario_raw(args)
    sc.validate(raw)
    base = 0 if args.seed is None else args.seed
    rows = sc.run_ab(raw, list(range(base, base + args.n_seeds)), tuple(args.which))
    fmt = args.format or "csv"
    if fmt == "json":
        body = json.dumps(rows, indent=2, sort_keys=True) + "\n"
    elif fmt == "text":
        lower = sum(r["polarization_delta"] < 0 for r in rows)
        lines = [f"seed {r['seed']}: polarization {r['polarization_off']:.4f} -> {r['polarization_on']:.4f} ({r['sign']})" for r in rows]
        lines.append(f"lower polarization with interventions in {lower}/{len(rows)} seeds")
        body = "\n".join(lines) + "\n"
    else:
        body = sc.ab_csv(rows)
    if args.out is not None:
        name = {"csv": "ab.csv", "json": "ab.json", "text": "ab.txt"}[fmt]
        sc._atomic_write(Path(args.out) / name, body)
    else:
        sys.stdout.write(body)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mevir", description="Agent trust simulation and moral-profile analysis.", parents=[_global_flags(True)])
    flags = _global_flags(False)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[flags], help="run a scenario")
    sim.add_argument("--scenario", type=Path)
    sim.add_argument("--bundled", metavar="NAME")
    sim.add_argument("--dump-lattices", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    games = sub.add_parser("games", parents=[flags], help="evaluate the kin or contest game")
    gsub = games.add_subparsers(dest="game", required=True)
    ham = gsub.add_parser("hamilton", parents=[flags])
    ham.add_argument("--r", type=float, required=True)
    ham.add_argument("--b", type=float, required=True)
    ham.add_argument("--c", type=float, required=True)
    hd = gsub.add_parser("hawkdove", parents=[flags])
    hd.add_argument("--v", type=float, required=True)
    hd.add_argument("--c", type=float, required=True)
    games.set_defaults(func=cmd_games)

    prof = sub.add_parser("profile", parents=[flags], help="profile documents against tribe templates")
    prof.add_argument("documents", nargs="*")
    prof.add_argument("--fixture", action="append", metavar="NAME")
    prof.add_argument("--lexicon", type=Path)
    prof.add_argument("--templates", type=Path)
    prof.add_argument("--rules", type=Path)
    prof.add_argument("--top", type=int, default=3)
    prof.set_defaults(func=cmd_profile)

    ab = sub.add_parser("ab", parents=[flags], help="paired intervention off/on runs")
    ab.add_argument("--scenario", type=Path)
    ab.add_argument("--bundled", metavar="NAME")
    ab.add_argument("--seeds", dest="n_seeds", type=int, default=20)
    ab.add_argument("--which", nargs="+", default=list(sc.INTERVENTIONS), choices=sc.INTERVENTIONS)
    ab.set_defaults(func=cmd_ab)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (_InputError, sc.ConfigError, ProfilerError, ProfileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SimulationError, OSError, RuntimeError, ValueError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
