"""Command-line entry point: ``plantolearn {extend,plan,run,eval,gen-env}``.

Exit codes
----------
0  success (``plan``: a plan was found)
1  ``plan``: goal proven unreachable; other commands: invalid input
2  missing or unreadable input (``plan`` also uses it for PDDL syntax errors)
3  ``extend``: input domain is already a learning domain
4  ``plan``: node or time budget exhausted
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .agent import AgentConfig, run as run_agent
from .evalkit import (
    TestSet,
    evaluate_models,
    generate_testset,
    report,
    table_csv,
    table_json,
    table_text,
)
from .learning_domain import AlreadyExtendedError, ExtensionError, extend
from .pddl import DomainError, parse_domain, parse_problem, print_domain, validate
from .perception import PropertyClassifier
from .planner import PlanningProblem, SearchLimitExceeded, format_plan, plan
from .simenv import MODES, ConfigError, WorldConfig, generate_world

EXIT_OK = 0
EXIT_UNSOLVABLE = 1
EXIT_INVALID = 1
EXIT_MISSING = 2
EXIT_ALREADY_EXTENDED = 3
EXIT_RESOURCE = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CliError(f"no such file: {path}", EXIT_MISSING) from None


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def read_pairs(path) -> list[tuple[str, str]]:
    """Pairs file: a JSON list of ``[type, property]`` or one ``type property`` per line."""
    text = _read(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = [line.split("#", 1)[0].split() for line in text.splitlines()]
        data = [d for d in data if d]
    if not isinstance(data, list) or any(len(p) != 2 for p in data):
        raise CliError(f"{path}: expected a list of (type, property) pairs", EXIT_INVALID)
    return [(str(t), str(p)) for t, p in data]


def pair_file_key(t: str, p: str) -> str:
    return f"{t}__{p}"


# ---------------------------------------------------------------------------
# experiment configuration


@dataclass
class ExperimentConfig:
    """A batch of runs: one per seed, all in the same mode.

    ``domain`` and ``world`` are resolved against the directory of the
    config file; ``output_dir`` against the working directory.
    """

    domain: Path
    pairs: list
    world: Path
    mode: str = "GTD"
    seeds: list = field(default_factory=lambda: [0])
    n_min: int = 50
    classifier: dict = field(default_factory=dict)
    agent: dict = field(default_factory=dict)
    output_dir: Path = Path("runs")

    KEYS = ("domain", "pairs", "world", "mode", "seeds", "n_min", "classifier", "agent", "output_dir")
    CLASSIFIER_KEYS = ("epochs", "learning_rate", "threshold", "warm_start", "balance")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        base = Path(path).parent
        try:
            raw = json.loads(_read(path))
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: {exc}", EXIT_MISSING) from None
        unknown = set(raw) - set(cls.KEYS)
        if unknown:
            raise CliError(f"{path}: unknown keys {sorted(unknown)}", EXIT_INVALID)
        missing = {"domain", "pairs", "world"} - set(raw)
        if missing:
            raise CliError(f"{path}: missing keys {sorted(missing)}", EXIT_INVALID)
        cfg = cls(
            domain=base / raw["domain"],
            pairs=[tuple(p) for p in raw["pairs"]],
            world=base / raw["world"],
            mode=raw.get("mode", "GTD"),
            seeds=list(raw.get("seeds", [0])),
            n_min=int(raw.get("n_min", 50)),
            classifier=dict(raw.get("classifier", {})),
            agent=dict(raw.get("agent", {})),
            output_dir=Path(raw.get("output_dir", "runs")),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for p in (self.domain, self.world):
            if not p.is_file():
                raise CliError(f"no such file: {p}", EXIT_MISSING)
        if not self.seeds:
            raise CliError("seeds must be non-empty", EXIT_INVALID)
        if self.mode not in MODES:
            raise CliError(f"mode must be one of {MODES}", EXIT_INVALID)
        bad = set(self.classifier) - set(self.CLASSIFIER_KEYS)
        if bad:
            raise CliError(f"unknown classifier keys {sorted(bad)}", EXIT_INVALID)
        try:
            self.agent_config()
        except (TypeError, ValueError) as exc:
            raise CliError(str(exc), EXIT_INVALID) from None

    def agent_config(self) -> AgentConfig:
        return AgentConfig.from_dict({**self.agent, **self.classifier, "n_min": self.n_min})

    def world_config(self) -> WorldConfig:
        try:
            return WorldConfig.from_json(self.world)
        except (ConfigError, ValueError, KeyError) as exc:
            raise CliError(f"{self.world}: {exc}", EXIT_INVALID) from None

    def digest(self) -> str:
        """Hash of everything that determines a run except the seed."""
        content = {
            "domain": _read(self.domain),
            "pairs": [list(p) for p in self.pairs],
            "world": self.world_config().to_dict(),
            "mode": self.mode,
            "agent": self.agent_config().to_dict(),
        }
        return hashlib.sha256(json.dumps(content, sort_keys=True).encode()).hexdigest()[:12]

    def run_dir(self, seed: int) -> Path:
        return self.output_dir / f"{self.digest()}-seed{seed}"


# ---------------------------------------------------------------------------
# commands


def cmd_extend(args) -> int:
    try:
        domain = parse_domain(_read(args.domain))
    except DomainError as exc:
        raise CliError(f"{args.domain}: {exc}", EXIT_INVALID) from None
    pairs = read_pairs(args.pairs)
    try:
        ext, rep = extend(domain, pairs, args.n_min, args.closeness)
    except AlreadyExtendedError as exc:
        raise CliError(f"{args.domain}: {exc}", EXIT_ALREADY_EXTENDED) from None
    except (ExtensionError, DomainError) as exc:
        raise CliError(str(exc), EXIT_INVALID) from None
    out = Path(args.output)
    _write(out, print_domain(ext))
    report_path = Path(args.report) if args.report else out.with_suffix(".report.json")
    _write(report_path, rep.to_json())
    print(f"wrote {out} and {report_path}")
    return EXIT_OK


def cmd_plan(args) -> int:
    try:
        domain = parse_domain(_read(args.domain))
        problem = parse_problem(_read(args.problem), domain)
    except DomainError as exc:
        raise CliError(str(exc), EXIT_MISSING) from None
    task = PlanningProblem.from_problem(domain, problem)
    out = Path(args.output) if args.output else Path(args.problem).with_suffix(".plan")
    stats_path = Path(args.stats) if args.stats else out.with_suffix(".stats.json")
    try:
        result = plan(task, node_budget=args.node_budget, time_budget=args.time_budget)
    except SearchLimitExceeded as exc:
        _write(stats_path, _dump({"status": "resource-limit", **exc.stats.to_dict(args.timing)}))
        print(f"search limit reached: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    stats = result.stats.to_dict(args.timing)
    if result.plan is None:
        _write(stats_path, _dump({"status": "unsolvable", **stats}))
        print("goal unreachable", file=sys.stderr)
        return EXIT_UNSOLVABLE
    check = validate(result.plan, domain, problem.init, problem.goal, dict(problem.objects))
    if not check.valid:  # would be a planner bug
        raise CliError(f"internal error: plan failed validation: {check.reason}", EXIT_INVALID)
    _write(out, format_plan(result.plan))
    _write(stats_path, _dump({"status": "solved", "plan_length": len(result.plan), **stats}))
    print(f"plan of length {len(result.plan)} written to {out}")
    return EXIT_OK


def _run_one(cfg: ExperimentConfig, seed: int, domain) -> Path:
    out = cfg.run_dir(seed)
    out.mkdir(parents=True, exist_ok=True)
    world = generate_world(cfg.world_config().replace(seed=seed))
    _write(out / "world.json", _dump(world.to_dict()))
    with open(out / "trace.jsonl", "w", encoding="utf-8") as trace:
        rep, agent = run_agent(domain, cfg.pairs, world, cfg.mode, cfg.agent_config(), trace)
    (out / "datasets").mkdir(exist_ok=True)
    for (t, p), ts in sorted(agent.datasets.items()):
        ts.to_csv(out / "datasets" / f"{pair_file_key(t, p)}.csv")
    (out / "models").mkdir(exist_ok=True)
    for (t, p), model in sorted(agent.property_models().items()):
        _write(out / "models" / f"{pair_file_key(t, p)}.json", model.to_json() + "\n")
    summary = {
        "seed": seed,
        "mode": cfg.mode,
        "pairs": [list(p) for p in cfg.pairs],
        "config_hash": cfg.digest(),
        "agent": cfg.agent_config().to_dict(),
        "train_sizes": [[t, p, n] for (t, p), n in sorted(agent.train_sizes().items())],
        "run": rep.to_dict(),
    }
    _write(out / "report.json", _dump(summary))
    return out


def cmd_run(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.mode:
        cfg.mode = args.mode
    if args.seeds:
        cfg.seeds = args.seeds
    if args.output_dir:
        cfg.output_dir = Path(args.output_dir)
    try:
        domain = parse_domain(_read(cfg.domain))
    except DomainError as exc:
        raise CliError(f"{cfg.domain}: {exc}", EXIT_INVALID) from None
    for seed in cfg.seeds:
        out = _run_one(cfg, seed, domain)
        rep = json.loads((out / "report.json").read_text())["run"]
        print(f"seed {seed}: {rep['termination']} after {rep['iterations']} iterations -> {out}")
    return EXIT_OK


def load_testsets(directory: Path, pairs) -> dict:
    out = {}
    for t, p in pairs:
        f = directory / f"{pair_file_key(t, p)}.csv"
        out[(t, p)] = TestSet.from_csv(f, t, p) if f.is_file() else TestSet(t, p)
    return out


def cmd_gen_env(args) -> int:
    raw = json.loads(_read(args.config))
    if "world" in raw and "pairs" in raw:  # an experiment config
        exp = ExperimentConfig.from_json(args.config)
        world_cfg, pairs = exp.world_config(), exp.pairs
    else:
        try:
            world_cfg = WorldConfig.from_dict(raw)
        except (ConfigError, ValueError) as exc:
            raise CliError(f"{args.config}: {exc}", EXIT_INVALID) from None
        pairs = []
    if args.pairs:
        pairs = read_pairs(args.pairs)
    if args.size < 1:
        raise CliError("--size must be at least 1", EXIT_INVALID)
    seed = args.seed if args.seed is not None else world_cfg.seed
    try:
        world = generate_world(world_cfg.replace(seed=seed))
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_INVALID) from None
    out = Path(args.output)
    _write(out / "world.json", _dump(world.to_dict()))
    sizes = {}
    if pairs:
        sets = generate_testset(world, pairs, seed, args.size)
        for (t, p), ts in sorted(sets.items()):
            ts.to_csv(out / f"{pair_file_key(t, p)}.csv")
            sizes[pair_file_key(t, p)] = len(ts)
    _write(out / "testsets.json", _dump({"seed": seed, "size": args.size, "sizes": sizes}))
    print(f"world and {len(sizes)} test sets written to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    rows = []
    testsets_dir = Path(args.testsets)
    if not testsets_dir.is_dir():
        raise CliError(f"no such directory: {testsets_dir}", EXIT_MISSING)
    for run_dir in map(Path, args.run_dirs):
        try:
            summary = json.loads(_read(run_dir / "report.json"))
        except json.JSONDecodeError as exc:
            raise CliError(f"{run_dir}/report.json: {exc}", EXIT_INVALID) from None
        pairs = [tuple(p) for p in summary["pairs"]]
        models = {}
        for t, p in pairs:
            f = run_dir / "models" / f"{pair_file_key(t, p)}.json"
            if f.is_file():
                models[(t, p)] = PropertyClassifier.from_dict(json.loads(f.read_text()))
        sizes = {(t, p): n for t, p, n in summary["train_sizes"]}
        tests = load_testsets(testsets_dir, sorted(sizes))
        rows += evaluate_models(models, tests, sizes, summary["mode"])
    if not rows:
        raise CliError("nothing to evaluate", EXIT_INVALID)
    render = {"text": table_text, "csv": table_csv, "json": table_json}[args.format]
    out_dir = Path(args.output) if args.output else None
    for prop in sorted({r.prop for r in rows}):
        table = report(rows, prop)
        sys.stdout.write(render(table))
        if out_dir is not None:
            _write(out_dir / f"metrics_{prop}.csv", table_csv(table))
            _write(out_dir / f"metrics_{prop}.json", table_json(table))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plantolearn", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extend", help="turn a base domain into a learning domain")
    p.add_argument("domain")
    p.add_argument("pairs", help="JSON list of [type, property] or 'type property' lines")
    p.add_argument("-o", "--output", required=True, help="extended domain file")
    p.add_argument("--report", help="extension report JSON (default: <output stem>.report.json)")
    p.add_argument("--n-min", type=int, default=50, help="views per property name (default 50)")
    p.add_argument("--closeness", default="Close_To", help="closeness predicate (default Close_To)")
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("plan", help="solve a PDDL problem")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("-o", "--output", help="plan file (default: <problem>.plan)")
    p.add_argument("--stats", help="search statistics JSON (default: <plan>.stats.json)")
    p.add_argument("--node-budget", type=int, default=200_000, help="expansions before giving up (default 200000)")
    p.add_argument("--time-budget", type=float, default=None, help="seconds before giving up (default none)")
    p.add_argument("--timing", action="store_true", help="include wall time in the stats")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="run the learning agent for every seed of an experiment config")
    p.add_argument("config")
    p.add_argument("--mode", choices=MODES, help="override the config's detection mode")
    p.add_argument("--seeds", type=int, nargs="+", help="override the config's seeds")
    p.add_argument("--output-dir", help="override the config's output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score run models on test sets")
    p.add_argument("run_dirs", nargs="+", help="run directories written by 'run'")
    p.add_argument("--testsets", required=True, help="directory written by 'gen-env'")
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.add_argument("-o", "--output", help="also write metrics_<property>.{csv,json} here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen-env", help="generate a world and optional ground-truth test sets")
    p.add_argument("config", help="world config or experiment config JSON")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, help="world seed (default: the config's)")
    p.add_argument("--pairs", help="pairs file (default: the experiment config's pairs)")
    p.add_argument("--size", type=int, default=100, help="examples per pair (default 100)")
    p.set_defaults(func=cmd_gen_env)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"plantolearn {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
