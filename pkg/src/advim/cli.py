"""``advim`` command line: attack, bench, gen, eval, verify."""
from __future__ import annotations

import argparse
import contextlib
import dataclasses
import sys

import numpy as np

from .experiment import (
    ALGORITHMS,
    SEED_GENERATORS,
    ConfigError,
    RunConfig,
    evaluate,
    load_graph,
    read_attack_set,
    resolve_seeds,
    run_attack_command,
    run_bench_command,
)
from .forest import MemoryCapError
from .graph import DUPLICATE_POLICIES, AdmissibilityError, GraphFormatError, write_edge_list
from .sampling import SamplingError
from .synthetic import KINDS, InfeasibleSizeError, generate_synthetic
from .verify import run_verify

_LIST_FIELDS = {"q_nodes", "q_edges", "algorithms"}
_INT_FIELDS = {"k", "seed_rng", "sims", "master_seed", "theta", "memory_cap"}
_FLOAT_FIELDS = {"epsilon", "ell"}


def parse_int_list(text: str) -> list[int]:
    """``"0,1,5"`` or inclusive ranges ``"0:50"`` / ``"0:50:5"``, mixed freely."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            lo, hi = bits[0], bits[1]
            step = bits[2] if len(bits) > 2 else 1
            out.extend(range(lo, hi + 1, step))
        else:
            out.append(int(part))
    return out


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _coerce(key: str, value):
    if value is None:
        return None
    if key in _LIST_FIELDS:
        if isinstance(value, list):
            return value
        if key == "algorithms":
            return [a.strip() for a in str(value).split(",") if a.strip()]
        return parse_int_list(value)
    if key in _INT_FIELDS:
        return None if str(value).lower() == "none" else int(value)
    if key in _FLOAT_FIELDS:
        return float(value)
    return value


def build_config(args: argparse.Namespace) -> RunConfig:
    known = {f.name for f in dataclasses.fields(RunConfig)}
    values = {}
    if args.config:
        for k, v in read_config(args.config).items():
            if k not in known:
                raise ConfigError(f"unknown config key {k!r}")
            values[k] = v
    for k in known:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    if "graph" not in values:
        raise ConfigError("a graph file is required")
    return RunConfig(**{k: _coerce(k, v) for k, v in values.items()})


def _add_run_flags(p: argparse.ArgumentParser, bench: bool) -> None:
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--graph", help="edge list: 'src dst [weight]' per line")
    p.add_argument("--seeds", help="seed file, one label per line")
    p.add_argument("--seed-generator", dest="seed_generator", choices=SEED_GENERATORS)
    p.add_argument("--k", type=int, help="seed count for the generator")
    p.add_argument("--seed-rng", dest="seed_rng", type=int, help="seed for the random-k generator")
    if bench:
        p.add_argument("--algorithms", help=f"comma list from {', '.join(ALGORITHMS)}")
    else:
        p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--q-nodes", dest="q_nodes", help="node budgets, e.g. 0,1,2 or 0:50")
    p.add_argument("--q-edges", dest="q_edges", help="edge budgets, e.g. 0 or 0:50:10")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--ell", type=float)
    p.add_argument("--sims", type=int, help="evaluation simulations per grid point")
    p.add_argument("--master-seed", dest="master_seed", type=int)
    p.add_argument("--weights", help="weighted-cascade, uniform:<p> or explicit")
    p.add_argument("--theta", type=int, help="forest count for aaff")
    p.add_argument("--memory-cap", dest="memory_cap", type=int, help="aaff forest byte cap")
    p.add_argument("--duplicates", choices=DUPLICATE_POLICIES)
    p.add_argument("--dataset", help="dataset column value (default: graph file stem)")
    p.add_argument("--output", "-o", help="CSV path (default: stdout)")
    if not bench:
        p.add_argument("--attack-output", dest="attack_output", help="sidecar file for the attack sets")


@contextlib.contextmanager
def _sink(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def cmd_attack(args) -> int:
    cfg = build_config(args)
    with _sink(cfg.output) as out, (
        open(cfg.attack_output, "w") if cfg.attack_output else contextlib.nullcontext()
    ) as side:
        run_attack_command(cfg, out, side)
    return 0


def cmd_bench(args) -> int:
    cfg = build_config(args)
    with _sink(cfg.output) as out:
        run_bench_command(cfg, out)
    return 0


def cmd_gen(args) -> int:
    if args.kind == "grid":
        size = (args.rows, args.cols)
    else:
        size = (args.n, args.m)
    if None in size:
        raise ConfigError("gen needs --n/--m, or --rows/--cols for grid")
    g = generate_synthetic(args.kind, size, args.seed)
    with _sink(args.output) as out:
        out.write(f"# {args.kind} {size[0]} {size[1]} seed={args.seed}\n")
        write_edge_list(g, out, weights=False)
    return 0


def cmd_eval(args) -> int:
    cfg = RunConfig(
        graph=args.graph, seeds=args.seeds, seed_generator=args.seed_generator, k=args.k,
        seed_rng=args.seed_rng or 0, weights=args.weights or "weighted-cascade",
        sims=args.sims or 10_000, master_seed=args.master_seed,
    )
    g = load_graph(cfg)
    seeds = resolve_seeds(cfg, g)
    with open(args.attack) as fh:
        attack = read_attack_set(g, fh)
    before, after, red, se = evaluate(g, seeds, attack, cfg.sims, np.random.default_rng(args.master_seed))
    print(f"spread_before={before!r}\nspread_after={after!r}\nreduction={red!r}\nreduction_stderr={se!r}")
    return 0


def cmd_verify(args) -> int:
    cfg = RunConfig(
        graph=args.graph, seeds=args.seeds, seed_generator=args.seed_generator, k=args.k,
        weights=args.weights or "weighted-cascade",
    )
    g = load_graph(cfg)
    seeds = resolve_seeds(cfg, g)
    results = run_verify(g, seeds, args.samples, args.sims, np.random.default_rng(args.master_seed))
    for r in results:
        print(r.line())
    return 0 if all(r.passed is not False for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advim", description="Adversarial attacks on LT influence.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", help="run one algorithm over a budget grid")
    _add_run_flags(p, bench=False)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="compare algorithms on identical inputs")
    _add_run_flags(p, bench=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="write a synthetic edge list")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_gen)

    for name, helptext in [("eval", "spread before/after a given attack set"),
                           ("verify", "brute-force oracle checks on a small graph")]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--graph", required=True)
        p.add_argument("--seeds")
        p.add_argument("--seed-generator", dest="seed_generator", choices=SEED_GENERATORS)
        p.add_argument("--k", type=int)
        p.add_argument("--seed-rng", dest="seed_rng", type=int)
        p.add_argument("--weights")
        p.add_argument("--master-seed", dest="master_seed", type=int, default=0)
        if name == "eval":
            p.add_argument("--attack", required=True, help="file of 'node <label>' / 'edge <src> <dst>' lines")
            p.add_argument("--sims", type=int)
            p.set_defaults(func=cmd_eval)
        else:
            p.add_argument("--samples", type=int, default=100_000)
            p.add_argument("--sims", type=int, default=100_000)
            p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InfeasibleSizeError, GraphFormatError, AdmissibilityError,
            SamplingError, MemoryCapError, OSError) as exc:
        parser.exit(2, f"advim: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
