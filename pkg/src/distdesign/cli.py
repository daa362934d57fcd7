"""``distdesign`` command line.

Exit codes: 0 success, 2 usage error, 3 bad input data, 4 numerical failure.
The master seed comes from ``--seed``, then the config file, then the
``DISTDESIGN_SEED`` environment variable, then 0.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .bench import StudyConfig, run_study
from .designs import DEFAULT_ITERS, METHODS, Design, generate, min_distance, one_d_uniform, phi_p
from .distances import DistanceTarget, ksd, pairwise_distances
from .errors import DistDesignError, InvalidInputError, NumericalError
from .sequential import GL_BOX, gramacy_lee, griewank, run_alm, run_bo
from .tuner import RimseConfig, TuneResult, catalog_lookup, quadratic_oracle, tune_shapes

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
# options that may come from the config file but must be set somewhere
REQUIRED = {"generate": ("method", "n", "d"), "tune": ("n", "d")}
PAPER_REPS = 1000
DESK_REPS = 100


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _words(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def build_parser():
    parser = argparse.ArgumentParser(prog="distdesign", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file of option defaults (flat, or keyed by command)")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build a design and write CSV + JSON")
    g.add_argument("--method", choices=METHODS)
    g.add_argument("--n", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--S", type=int, default=DEFAULT_ITERS, help="swap-search iterations")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--catalog", action="store_true", help="take (alpha, beta) from the shape catalog")
    g.add_argument("--p", type=float, default=2.0, help="phi_p exponent")
    g.add_argument("--out", default="design", help="output prefix; writes PREFIX.csv and PREFIX.json")

    e = sub.add_parser("eval", help="report distance statistics of a design file")
    e.add_argument("file")
    e.add_argument("--alpha", type=float, help="Beta target shape (default: uniform target)")
    e.add_argument("--beta", type=float)

    t = sub.add_parser("tune", help="optimize Beta shapes by Bayesian optimization")
    t.add_argument("--n", type=int)
    t.add_argument("--d", type=int)
    t.add_argument("--budget", type=int, default=50)
    t.add_argument("--seed", type=int)
    t.add_argument("--oracle", choices=("derimse", "quadratic"), default="derimse")
    t.add_argument("--T", type=int, default=30)
    t.add_argument("--R", type=int, default=30)
    t.add_argument("--D", type=int, default=5)
    t.add_argument("--S", type=int, default=DEFAULT_ITERS)
    t.add_argument("--out", default="tune.json")

    s = sub.add_parser("study", help="run a Monte Carlo study and write CSV tables")
    s.add_argument("name", choices=("logmse", "alm", "bo"))
    s.add_argument("--d", type=_ints, default=(2,), help="dimension(s), comma separated")
    s.add_argument("--reps", type=int, default=None)
    s.add_argument("--paper-scale", action="store_true", help="1000 reps and 1e5-iteration designs")
    s.add_argument("--seed", type=int)
    s.add_argument("--methods", type=_words)
    s.add_argument("--ninit", type=int, help="initial design size (alm/bo); logmse uses 2^(d+1)")
    s.add_argument("--total-n", type=int, default=64)
    s.add_argument("--checkpoints", type=_ints, default=(25,))
    s.add_argument("--design-iters", type=int, default=2000)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out-dir", default=".")

    q = sub.add_parser("seq", help="one sequential run (alm on Gramacy-Lee, bo on Griewank)")
    q.add_argument("kind", choices=("alm", "bo"))
    q.add_argument("--init", help="initial design file (default: maximin, n=8)")
    q.add_argument("--total-n", type=int, default=64)
    q.add_argument("--noise-sd", type=float, default=0.01)
    q.add_argument("--bound", type=float, default=5.0, help="bo box half-width b")
    q.add_argument("--seed", type=int)
    q.add_argument("--out", default="trace.csv")
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    try:
        with open(known.config) as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidInputError("config must be a JSON object")
    return doc


def _resolve(args, config):
    section = config.get(args.command, {}) if isinstance(config.get(args.command), dict) else {}
    flat = {k: v for k, v in config.items() if not isinstance(v, dict)}
    defaults = {**flat, **section}
    explicit = set(getattr(args, "_explicit", ()))
    for key, value in defaults.items():
        key = key.replace("-", "_")
        if hasattr(args, key) and key not in explicit:
            setattr(args, key, tuple(value) if isinstance(value, list) else value)
    if getattr(args, "seed", None) is None and hasattr(args, "seed"):
        env = os.environ.get("DISTDESIGN_SEED")
        try:
            args.seed = int(env) if env is not None else 0
        except ValueError:
            raise InvalidInputError(f"DISTDESIGN_SEED must be an integer, got {env!r}") from None
    return args


def _explicit_dests(parser, argv):
    # options given on the command line win over the config file
    sub = parser._subparsers._group_actions[0].choices
    dests = set()
    for action_parser in sub.values():
        for action in action_parser._actions:
            if any(opt in argv for opt in action.option_strings):
                dests.add(action.dest)
    return dests


def _read_design(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    if path.endswith(".json"):
        return Design.from_json(text)
    return Design.from_csv(text)


def cmd_generate(args):
    alpha, beta = args.alpha, args.beta
    if args.method in ("betadist", "lhsbeta"):
        if args.catalog:
            hit = catalog_lookup(args.n, args.d)
            alpha, beta = hit.alpha, hit.beta
            if hit.extrapolated:
                print(f"note: no catalog entry for (n={args.n}, d={args.d}); "
                      f"using nearest key {hit.key}", file=sys.stderr)
        elif alpha is None or beta is None:
            raise InvalidInputError(f"{args.method} needs --alpha and --beta, or --catalog")
    design = generate(args.method, args.n, args.d, args.seed, S=args.S, alpha=alpha, beta=beta, p=args.p)
    with open(args.out + ".csv", "w") as fh:
        fh.write(design.to_csv())
    with open(args.out + ".json", "w") as fh:
        fh.write(design.to_json())
    print(f"wrote {args.out}.csv and {args.out}.json ({design.n} x {design.d})")
    return EXIT_OK


def cmd_eval(args):
    design = _read_design(args.file)
    if design.n < 2:
        raise InvalidInputError("need at least two points")
    if args.alpha is not None or args.beta is not None:
        if args.alpha is None or args.beta is None:
            raise InvalidInputError("give both --alpha and --beta")
        target = DistanceTarget.beta_target(args.alpha, args.beta, design.d)
    else:
        target = DistanceTarget.uniform(design.d)
    report = {
        "n": design.n,
        "d": design.d,
        "target": target.describe(),
        "ksd": ksd(pairwise_distances(design.X), target),
        "min_distance": min_distance(design.X),
        "phi2": phi_p(design.X, 2.0),
        "one_d_uniform": one_d_uniform(design.X),
    }
    width = max(len(k) for k in report)
    for key, value in report.items():
        print(f"{key:<{width}}  {value!r}")
    return EXIT_OK


def cmd_tune(args):
    if args.budget < 0:
        raise InvalidInputError("--budget must be >= 0")
    config = RimseConfig(args.n, args.d, T=args.T, R=args.R, D=args.D, S=args.S)
    criterion = quadratic_oracle() if args.oracle == "quadratic" else None

    def log(rec):
        print(f"acquire alpha={rec['alpha']:.4f} beta={rec['beta']:.4f} value={rec['value']:.6g}",
              file=sys.stderr)

    result = tune_shapes(config, args.budget, args.seed, criterion=criterion, log=log)
    result.meta["oracle"] = args.oracle
    text = result.to_json()
    TuneResult.from_json(text)
    with open(args.out, "w") as fh:
        fh.write(text)
    a, b = result.best
    print(f"best (alpha, beta) = ({a:.4f}, {b:.4f}); near-optimal = {result.near_optimal}")
    return EXIT_OK


def cmd_study(args):
    reps = args.reps
    iters = args.design_iters
    if args.paper_scale:
        reps = reps or PAPER_REPS
        iters = DEFAULT_ITERS
    config = StudyConfig(
        name=args.name,
        dims=args.d,
        reps=reps or DESK_REPS,
        methods=args.methods,
        seed=args.seed,
        n=args.ninit if args.name != "logmse" else None,
        design_iters=iters,
        total_n=args.total_n,
        checkpoints=args.checkpoints,
        threads=args.threads,
    )
    _, files = run_study(config, args.out_dir)
    for name in files:
        print(os.path.join(args.out_dir, name))
    return EXIT_OK


def cmd_seq(args):
    if args.init:
        init = _read_design(args.init)
    else:
        init = generate("maximin", 8, 2, args.seed, S=2000)
    if args.kind == "alm":
        trace = run_alm(gramacy_lee, init, args.total_n, args.noise_sd, args.seed, box=GL_BOX)
    else:
        trace = run_bo(griewank, init, args.total_n, args.seed, box=(-args.bound, args.bound))
    with open(args.out, "w") as fh:
        fh.write(trace.to_csv())
    print(f"wrote {args.out}; final {trace.metric_name} = {trace.metric[-1]!r}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "eval": cmd_eval, "tune": cmd_tune, "study": cmd_study,
            "seq": cmd_seq}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        config = _apply_config(parser, argv)
    except DistDesignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    args._explicit = _explicit_dests(parser, argv)
    try:
        _resolve(args, config)
        missing = [k for k in REQUIRED.get(args.command, ()) if getattr(args, k, None) is None]
        if missing:
            flags = ", ".join("--" + k for k in missing)
            print(f"distdesign {args.command}: error: missing {flags} (flag or config)", file=sys.stderr)
            return EXIT_USAGE
        if args.command == "generate" and args.method not in METHODS:
            raise InvalidInputError(f"unknown method {args.method!r}")
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DistDesignError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
