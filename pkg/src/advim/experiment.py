"""Attack/evaluate sweeps and algorithm benchmarks with CSV output."""
from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import os
import time
from dataclasses import dataclass, field
from typing import IO, Iterator

import numpy as np

from .attack import aaimm_attack
from .diffusion import DEFAULT_SIMS, paired_spread_samples, _stderr
from .forest import DEFAULT_MEMORY_CAP, DEFAULT_THETA, MemoryCapError, aaff_select, build_scored_forests
from .graph import AttackSet, Budgets, Graph, assign_weights, load_edge_list, load_seed_set, parse_weight_scheme
from .synthetic import random_seeds, top_degree_seeds

ALGORITHMS = ("aaimm-naive", "aaimm-fb", "aaimm-dag", "aaff")
SEED_GENERATORS = ("top-degree", "random")

# SeedSequence stream tags. Every grid point is evaluated on the same
# simulations so rows compare under common random numbers.
_OPTIMIZER, _EVALUATION = 0, 1


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    graph: str
    seeds: str | None = None
    seed_generator: str | None = None
    k: int | None = None
    seed_rng: int = 0
    algorithm: str = "aaimm-dag"
    algorithms: list[str] = field(default_factory=list)
    q_nodes: list[int] = field(default_factory=lambda: [1])
    q_edges: list[int] = field(default_factory=lambda: [0])
    epsilon: float = 0.1
    ell: float = 1.0
    sims: int = DEFAULT_SIMS
    master_seed: int | None = None
    weights: str = "weighted-cascade"
    theta: int = DEFAULT_THETA
    memory_cap: int | None = DEFAULT_MEMORY_CAP
    duplicates: str = "reject"
    dataset: str | None = None
    output: str | None = None
    attack_output: str | None = None

    def validate(self, bench: bool = False) -> "RunConfig":
        if self.master_seed is None:
            raise ConfigError("master seed is required")
        if (self.seeds is None) == (self.seed_generator is None):
            raise ConfigError("give exactly one of a seed file or a seed generator")
        if self.seed_generator is not None:
            if self.seed_generator not in SEED_GENERATORS:
                raise ConfigError(f"seed generator must be one of {SEED_GENERATORS}")
            if not self.k or self.k < 1:
                raise ConfigError("seed generator needs k >= 1")
        if not self.q_nodes or not self.q_edges:
            raise ConfigError("budget sweep lists must be non-empty")
        if min(self.q_nodes) < 0 or min(self.q_edges) < 0:
            raise ConfigError("budgets must be non-negative")
        algos = self.algorithms if bench else [self.algorithm]
        if bench and len(algos) < 2:
            raise ConfigError("bench needs at least two algorithms")
        for a in algos:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}; expected one of {ALGORITHMS}")
        if self.sims < 1:
            raise ConfigError("sims must be >= 1")
        return self


@dataclass
class ResultRow:
    dataset: str
    algorithm: str
    sampler: str
    k: int
    q_N: int
    q_E: int
    epsilon: float
    ell: float
    spread_before: float
    spread_after: float
    reduction: float
    reduction_stderr: float
    theta: float
    paths_or_forests: int
    wall_ms: float
    master_seed: int


@dataclass
class BenchRow(ResultRow):
    status: str = "ok"
    attempts: int = 0
    forests: int = 0
    work: int = 0
    memory_bytes: int = 0


def columns(bench: bool = False) -> list[str]:
    return [f.name for f in dataclasses.fields(BenchRow if bench else ResultRow)]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


class RowWriter:
    """CSV writer with a header row; flushes after every row."""

    def __init__(self, sink: IO, bench: bool = False):
        self.sink = sink
        self.fields = columns(bench)
        self.writer = csv.writer(sink, lineterminator="\n")
        self.writer.writerow(self.fields)
        sink.flush()

    def write(self, row: ResultRow) -> None:
        d = dataclasses.asdict(row)
        self.writer.writerow([_fmt(d[k]) for k in self.fields])
        self.sink.flush()


def _rng(master_seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, *tags]))


def load_graph(cfg: RunConfig) -> Graph:
    with open(cfg.graph) as fh:
        g = load_edge_list(fh, cfg.duplicates)
    scheme, p = parse_weight_scheme(cfg.weights)
    return assign_weights(g, scheme, p)


def resolve_seeds(cfg: RunConfig, g: Graph) -> np.ndarray:
    if cfg.seeds is not None:
        with open(cfg.seeds) as fh:
            return np.asarray(load_seed_set(g, fh))
    if cfg.seed_generator == "top-degree":
        return top_degree_seeds(g, cfg.k)
    return random_seeds(g, cfg.k, cfg.seed_rng)


@dataclass
class Outcome:
    attack: AttackSet
    sampler: str
    theta: float
    samples: int
    wall_ms: float
    stats: dict = field(default_factory=dict)


def run_algorithm(algorithm: str, g: Graph, seeds, budgets: Budgets, cfg: RunConfig, rng) -> Outcome:
    """Run one optimizer; ``wall_ms`` covers sampling and selection only."""
    t0 = time.perf_counter()
    if budgets.nodes + budgets.edges == 0:
        return Outcome(AttackSet(), "-", 0.0, 0, 1000 * (time.perf_counter() - t0))
    if algorithm == "aaff":
        forests = build_scored_forests(g, seeds, cfg.theta, rng, cfg.memory_cap)
        chosen = aaff_select(forests, budgets, inplace=True)
        wall = 1000 * (time.perf_counter() - t0)
        stats = {"forests": cfg.theta, "memory_bytes": forests.nbytes}
        return Outcome(AttackSet.from_element_ids(g, chosen), "forest", cfg.theta, cfg.theta, wall, stats)
    sampler = algorithm.split("-", 1)[1]
    attack, report = aaimm_attack(g, seeds, budgets, cfg.epsilon, cfg.ell, sampler, rng)
    wall = 1000 * (time.perf_counter() - t0)
    return Outcome(attack, sampler, report.theta, report.paths_sampled, wall, report.sampler_stats)


def evaluate(g: Graph, seeds, attack: AttackSet, sims: int, rng) -> tuple[float, float, float, float]:
    """``(spread_before, spread_after, reduction, stderr)`` from shared simulations."""
    base, cut = paired_spread_samples(g, seeds, attack, sims, rng)
    diff = base - cut
    return float(base.mean()), float(cut.mean()), float(diff.mean()), _stderr(diff)


def _dataset(cfg: RunConfig) -> str:
    return cfg.dataset or os.path.splitext(os.path.basename(cfg.graph))[0]


def write_attack_set(sink: IO, g: Graph, attack: AttackSet, header: str = "") -> None:
    if header:
        sink.write(f"# {header}\n")
    for v in sorted(attack.nodes):
        sink.write(f"node {g.labels[v]}\n")
    for u, v in sorted(attack.edges):
        sink.write(f"edge {g.labels[u]} {g.labels[v]}\n")


def read_attack_set(g: Graph, source) -> AttackSet:
    nodes, edges = set(), set()
    lines = source.splitlines() if isinstance(source, str) else source
    for lineno, line in enumerate(lines, 1):
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        try:
            if tok[0] == "node" and len(tok) == 2:
                nodes.add(g.label_index[tok[1]])
                continue
            if tok[0] == "edge" and len(tok) == 3:
                edges.add((g.label_index[tok[1]], g.label_index[tok[2]]))
                continue
        except KeyError as exc:
            raise ValueError(f"line {lineno}: unknown label {exc.args[0]!r}") from None
        raise ValueError(f"line {lineno}: expected 'node <label>' or 'edge <src> <dst>'")
    return AttackSet(frozenset(nodes), frozenset(edges))


def _grid(cfg: RunConfig) -> Iterator[tuple[int, int, int]]:
    for i, (qn, qe) in enumerate(itertools.product(cfg.q_nodes, cfg.q_edges)):
        yield i, qn, qe


def run_attack_command(
    cfg: RunConfig, out: IO | None = None, attack_out: IO | None = None, graph: Graph | None = None, seeds=None
) -> list[ResultRow]:
    """One row per ``(q_N, q_E)`` grid point, in grid order."""
    cfg.validate()
    g = graph if graph is not None else load_graph(cfg)
    seeds = np.asarray(seeds) if seeds is not None else resolve_seeds(cfg, g)
    writer = RowWriter(out) if out is not None else None
    rows = []
    for i, qn, qe in _grid(cfg):
        budgets = Budgets(qn, qe)
        if qn + qe:
            budgets = budgets.clamped(g.n - len(seeds), g.m)
        res = run_algorithm(cfg.algorithm, g, seeds, budgets, cfg, _rng(cfg.master_seed, i, _OPTIMIZER))
        before, after, red, se = evaluate(g, seeds, res.attack, cfg.sims, _rng(cfg.master_seed, _EVALUATION))
        row = ResultRow(
            _dataset(cfg), cfg.algorithm, res.sampler, len(seeds), qn, qe, cfg.epsilon, cfg.ell,
            before, after, red, se, res.theta, res.samples, res.wall_ms, cfg.master_seed,
        )
        rows.append(row)
        if writer:
            writer.write(row)
        if attack_out is not None:
            write_attack_set(attack_out, g, res.attack, f"q_N={qn} q_E={qe}")
            attack_out.flush()
    return rows


def run_bench_command(
    cfg: RunConfig, out: IO | None = None, graph: Graph | None = None, seeds=None
) -> list[BenchRow]:
    """Every listed algorithm on identical graph, seeds, budgets and master seed."""
    cfg.validate(bench=True)
    g = graph if graph is not None else load_graph(cfg)
    seeds = np.asarray(seeds) if seeds is not None else resolve_seeds(cfg, g)
    writer = RowWriter(out, bench=True) if out is not None else None
    rows = []
    for i, qn, qe in _grid(cfg):
        budgets = Budgets(qn, qe)
        if qn + qe:
            budgets = budgets.clamped(g.n - len(seeds), g.m)
        for algo in cfg.algorithms:
            common = dict(
                dataset=_dataset(cfg), algorithm=algo, k=len(seeds), q_N=qn, q_E=qe,
                epsilon=cfg.epsilon, ell=cfg.ell, master_seed=cfg.master_seed,
            )
            try:
                res = run_algorithm(algo, g, seeds, budgets, cfg, _rng(cfg.master_seed, i, _OPTIMIZER))
            except MemoryCapError:
                nan = float("nan")
                row = BenchRow(
                    sampler="forest", spread_before=nan, spread_after=nan, reduction=nan,
                    reduction_stderr=nan, theta=cfg.theta, paths_or_forests=0, wall_ms=nan,
                    status="memory-cap", **common,
                )
            else:
                before, after, red, se = evaluate(
                    g, seeds, res.attack, cfg.sims, _rng(cfg.master_seed, _EVALUATION)
                )
                s = res.stats
                row = BenchRow(
                    sampler=res.sampler, spread_before=before, spread_after=after, reduction=red,
                    reduction_stderr=se, theta=res.theta, paths_or_forests=res.samples, wall_ms=res.wall_ms,
                    attempts=int(s.get("attempts", 0)), forests=int(s.get("forests", 0)),
                    work=int(s.get("work", 0)), memory_bytes=int(s.get("memory_bytes", 0)), **common,
                )
            rows.append(row)
            if writer:
                writer.write(row)
    return rows


def rows_to_csv(rows: list[ResultRow], bench: bool = False) -> str:
    buf = io.StringIO()
    w = RowWriter(buf, bench)
    for r in rows:
        w.write(r)
    return buf.getvalue()
