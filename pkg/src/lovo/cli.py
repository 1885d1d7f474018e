"""Command-line entry point.

Subcommands: lemma-study (decidability rates of the edge rules on random
graphs), crossval (leave-one-variable-out cross-validation on simulated
data), correlate (prediction error vs graph accuracy), falsify (verdict on
user data against an external discovery command).

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import shlex
import subprocess
import sys
import tempfile
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .edge_rules import MarginalPair, Verdict, exclude_link_admg, exclude_link_directed
from .graph import Admg, GraphGenConfig, generate_er_admg, generate_er_dag, read_graph
from .harness import (
    AdapterError,
    CrossValConfig,
    OracleProvider,
    correlate_error_with_accuracy,
    decide_edge,
    perturb_graph,
    provider_accuracy,
    run_crossval,
)
from .predictors import Abstained
from .scm import Dataset, ScmGenConfig, sample_structure, simulate


class UsageError(Exception):
    pass


def _derive_seed(*parts) -> int:
    entropy = [
        zlib.crc32(p.encode()) if isinstance(p, str) else int(p) for p in parts
    ]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def _parse_grid(text: str, cast=float) -> list:
    try:
        return [cast(t) for t in text.split(",") if t.strip() != ""]
    except ValueError:
        raise UsageError(f"malformed grid {text!r}")


# ---------------------------------------------------------------------------
# Adapter protocol
# ---------------------------------------------------------------------------

class AdapterProvider:
    """Marginal graphs from an external discovery command.

    For each left-out node, the learning data restricted to the remaining
    columns is written to CSV and the command is invoked as
    ``CMD --input <csv> --output <graph.json>``; exit 0 plus valid graph
    JSON is required. Results are cached per left-out node.
    """

    def __init__(self, command: str, learn_data: Dataset, workdir=None):
        self.argv = shlex.split(command)
        if not self.argv:
            raise UsageError("empty adapter command")
        self.learn_data = learn_data
        self.workdir = workdir
        self._cache: dict[str, Admg] = {}

    def _learn(self, dropped: str) -> Admg:
        if dropped in self._cache:
            return self._cache[dropped]
        cols = [c for c in self.learn_data.columns if c != dropped]
        with tempfile.TemporaryDirectory(dir=self.workdir) as tmp:
            csv_path = Path(tmp) / "input.csv"
            out_path = Path(tmp) / "graph.json"
            self.learn_data.restrict(cols).to_csv(csv_path)
            try:
                proc = subprocess.run(
                    self.argv + ["--input", str(csv_path), "--output", str(out_path)],
                    capture_output=True,
                    text=True,
                    timeout=600,
                )
            except (OSError, subprocess.TimeoutExpired) as err:
                raise AdapterError(f"adapter launch failed: {err}")
            if proc.returncode != 0:
                raise AdapterError(
                    f"adapter exit {proc.returncode}: {proc.stderr.strip()[:500]}"
                )
            try:
                graph = read_graph(out_path)
            except Exception as err:
                raise AdapterError(f"invalid adapter output: {err}")
        if set(graph.nodes) != set(cols):
            raise AdapterError("adapter graph nodes do not match the input columns")
        self._cache[dropped] = graph
        return graph

    def __call__(self, x: str, y: str) -> MarginalPair:
        return MarginalPair(self._learn(y), self._learn(x), x, y)


# ---------------------------------------------------------------------------
# lemma-study
# ---------------------------------------------------------------------------

def _decidable_pairs(joint: Admg, lemma: int) -> int:
    count = 0
    for x, y in itertools.combinations(sorted(joint.nodes), 2):
        mp = MarginalPair.from_joint(joint, x, y)
        if lemma == 2:
            ok = exclude_link_admg(mp).verdict is Verdict.ABSENT
        elif lemma == 3:
            ok = exclude_link_directed(mp).verdict is Verdict.ABSENT
        else:
            ok = decide_edge(mp, "dag").verdict is not Verdict.UNDECIDABLE
        count += ok
    return count


def cmd_lemma_study(args) -> int:
    out_dir = _ensure_out(args.out)
    ps = _parse_grid(args.p)
    qs = _parse_grid(args.q)
    d = args.nodes
    rows = []
    for lemma in (2, 3, 4):
        grid = [(p, q) for p in ps for q in qs] if lemma == 2 else [(p, 0.0) for p in ps]
        for p, q in grid:
            zero, decid, absent = 0, 0.0, 0.0
            for r in range(args.replications):
                seed = _derive_seed(args.seed, lemma, int(p * 1000), int(q * 1000), r)
                cfg = GraphGenConfig(d, p, q, seed)
                joint = generate_er_admg(cfg) if lemma == 2 else generate_er_dag(cfg)
                k = _decidable_pairs(joint, lemma)
                zero += k == 0
                decid += k
                absent += sum(
                    not joint.adjacent(a, b)
                    for a, b in itertools.combinations(joint.nodes, 2)
                )
            rows.append(
                {
                    "lemma": lemma,
                    "p": p,
                    "q": q,
                    "replications": args.replications,
                    "zero_decidable_fraction": zero / args.replications,
                    "mean_decidable_pairs": decid / args.replications,
                    "mean_absent_pairs": absent / args.replications,
                }
            )
    _write_csv(out_dir / "lemma_study.csv", rows)
    print(out_dir / "lemma_study.csv")
    return 0


# ---------------------------------------------------------------------------
# crossval / correlate
# ---------------------------------------------------------------------------

def _parse_mode(mode: str):
    if mode == "oracle":
        return ("oracle", None)
    if mode.startswith("perturbed:"):
        try:
            return ("perturbed", int(mode.split(":", 1)[1]))
        except ValueError:
            raise UsageError(f"malformed mode {mode!r}")
    if mode.startswith("adapter:"):
        cmd = mode.split(":", 1)[1]
        if not cmd.strip():
            raise UsageError("adapter mode needs a command")
        return ("adapter", cmd)
    raise UsageError(f"unknown mode {mode!r}")


def _replication(args, rep: int, mode, mode_arg, flips=None, n_learn=None):
    """One simulated replication: graph, data, provider; returns
    (report, accuracy)."""
    gseed = _derive_seed(args.seed, "graph", rep)
    joint = generate_er_dag(GraphGenConfig(args.nodes, args.p, 0.0, gseed))
    scm = sample_structure(joint, ScmGenConfig(seed=_derive_seed(args.seed, "scm", rep)))
    data = simulate(scm, args.n, _derive_seed(args.seed, "data", rep))
    if mode == "oracle":
        provider = OracleProvider(joint)
    elif mode == "perturbed":
        k = mode_arg if flips is None else flips
        provider = OracleProvider(
            perturb_graph(joint, k, _derive_seed(args.seed, "flip", rep, k))
        )
    else:
        n_learn = n_learn or args.n_learn
        learn = simulate(scm, n_learn, _derive_seed(args.seed, "learn", rep, n_learn))
        provider = AdapterProvider(mode_arg, learn)
    cfg = CrossValConfig(
        predictor=args.predictor,
        baseline=args.baseline,
        rule=args.rule,
        seed=_derive_seed(args.seed, "cv", rep),
    )
    report = run_crossval(data, provider, cfg)
    acc = provider_accuracy(joint, provider, rule=args.rule)
    return report, acc


def _run_replications(args, tasks):
    """tasks: list of kwargs for _replication; preserves input order."""
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            return list(pool.map(lambda kw: _replication(args, **kw), tasks))
    return [_replication(args, **kw) for kw in tasks]


def cmd_crossval(args) -> int:
    out_dir = _ensure_out(args.out)
    mode, mode_arg = _parse_mode(args.mode)
    tasks = [dict(rep=r, mode=mode, mode_arg=mode_arg) for r in range(args.replications)]
    results = _run_replications(args, tasks)
    rows = []
    for r, (report, acc) in enumerate(results):
        report.save(out_dir / f"report_{r:04d}.json")
        rows.append(
            {
                "replication": r,
                "cv_lovo": report.cv_lovo,
                "cv_base": report.cv_base,
                "abstained_fraction": report.abstained_fraction,
                "pairs_used": report.pairs_used,
            }
        )
    _write_csv(out_dir / "crossval.csv", rows)
    print(out_dir / "crossval.csv")
    return 0


def cmd_correlate(args) -> int:
    out_dir = _ensure_out(args.out)
    mode, mode_arg = _parse_mode(args.mode)
    if mode == "oracle":
        raise UsageError("correlate needs mode perturbed:K or adapter:CMD")
    if mode == "perturbed":
        grid = [("flips", f) for f in _parse_grid(args.flips, int)]
    else:
        grid = [("n_learn", n) for n in _parse_grid(args.n_learn_grid, int)]
    tasks = []
    for key, val in grid:
        for r in range(args.replications):
            tasks.append(dict(rep=_derive_seed(val, r) % 10**6, mode=mode,
                              mode_arg=mode_arg, **{key: val}))
    results = _run_replications(args, tasks)
    summary = correlate_error_with_accuracy(results)
    summary.save_csv(out_dir / "study.csv")
    stats = {
        "spearman_cv_vs_false_absence": _stat_json(summary.rho_far, summary.p_far),
        "spearman_cv_vs_shd": _stat_json(summary.rho_shd, summary.p_shd),
        "grid": [{k: v} for k, v in grid],
    }
    with open(out_dir / "correlate.json", "w") as fh:
        json.dump(stats, fh, indent=2)
        fh.write("\n")
    print(out_dir / "correlate.json")
    return 0


def _stat_json(rho, p):
    if isinstance(rho, Abstained):
        return {"abstained": rho.reason, "detail": rho.detail}
    return {"rho": rho, "p_value": p}


# ---------------------------------------------------------------------------
# falsify
# ---------------------------------------------------------------------------

def cmd_falsify(args) -> int:
    out_dir = _ensure_out(args.out)
    try:
        data = Dataset.from_csv(args.data)
    except (OSError, ValueError) as err:
        raise UsageError(f"cannot read dataset: {err}")
    if len(data.columns) < 3:
        raise UsageError("falsification needs at least 3 columns")
    cfg = CrossValConfig(
        predictor=args.predictor, baseline=args.baseline, rule=args.rule, seed=args.seed
    )
    n_fit = int(math.floor((cfg.split[0] + cfg.split[1]) * data.n))
    provider = AdapterProvider(args.discovery, data.rows(slice(0, n_fit)))
    report = run_crossval(data, provider, cfg)
    if report.no_pairs:
        verdict = "not realizable"
    elif report.cv_lovo >= report.cv_base + args.margin:
        verdict = "falsified"
    else:
        verdict = "not falsified"
    out = {
        "verdict": verdict,
        "cv_lovo": report.cv_lovo,
        "cv_base": report.cv_base,
        "margin": args.margin,
        "abstained_fraction": report.abstained_fraction,
        "pairs_used": report.pairs_used,
    }
    report.save(out_dir / "evidence.json")
    with open(out_dir / "verdict.json", "w") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")
    print(json.dumps(out))
    return 0


# ---------------------------------------------------------------------------
# Plumbing
# ---------------------------------------------------------------------------

def _ensure_out(out) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path, rows):
    import csv as _csv

    if not rows:
        raise UsageError("nothing to write")
    with open(path, "w", newline="") as fh:
        writer = _csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _default_seed() -> int:
    env = os.environ.get("LOVO_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"LOVO_SEED must be an integer, got {env!r}")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="lovo-out")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--config", default=None, help="flat key=value file; flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lovo")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lemma-study", help="decidability rates on random graphs")
    p.add_argument("--nodes", type=int, default=10)
    p.add_argument("--p", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p.add_argument("--q", default="0.1,0.5,0.9")
    p.add_argument("--replications", type=int, default=200)
    _add_common(p)
    p.set_defaults(func=cmd_lemma_study)

    p = sub.add_parser("crossval", help="LOVO cross-validation on simulated data")
    _add_sim_flags(p)
    p.add_argument("--mode", default="oracle")
    _add_common(p)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("correlate", help="prediction error vs graph accuracy")
    _add_sim_flags(p)
    p.add_argument("--mode", default="perturbed:2")
    p.add_argument("--flips", default="0,2,4,8")
    p.add_argument("--n-learn-grid", default="100,500,5000")
    _add_common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("falsify", help="falsification verdict on user data")
    p.add_argument("data", help="CSV with one column per variable")
    p.add_argument("discovery", help="adapter command (CMD --input csv --output json)")
    p.add_argument("--predictor", choices=["parent", "lingam"], default="parent")
    p.add_argument("--baseline", choices=["maxent", "random"], default="maxent")
    p.add_argument("--rule", choices=["dag", "admg", "no-confounded-links"], default="dag")
    p.add_argument("--margin", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(func=cmd_falsify)
    return parser


def _add_sim_flags(p: argparse.ArgumentParser):
    p.add_argument("--nodes", type=int, default=10)
    p.add_argument("--p", type=float, default=0.3)
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--n-learn", type=int, default=5000)
    p.add_argument("--replications", type=int, default=100)
    p.add_argument("--predictor", choices=["parent", "lingam"], default="parent")
    p.add_argument("--baseline", choices=["maxent", "random"], default="maxent")
    p.add_argument("--rule", choices=["dag", "admg", "no-confounded-links"], default="dag")


def _apply_config_file(argv: list[str]) -> list[str]:
    """Prepend config-file entries as flags so explicit flags win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise UsageError("--config needs a path")
    path = argv[idx + 1]
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as err:
        raise UsageError(f"cannot read config file: {err}")
    injected = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"malformed config line: {line!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        injected += [f"--{key}", value]
    # keep the subcommand first, then config values, then explicit flags
    return argv[:1] + injected + argv[1:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            args = parser.parse_args(_apply_config_file(argv))
        if args.seed is None:
            args.seed = _default_seed()
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except (KeyboardInterrupt, BrokenPipeError):  # pragma: no cover
        return 1
    except Exception as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
