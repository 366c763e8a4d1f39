"""Command-line front end: training runs, baselines, studies and exports.

Exit codes: 0 success, 2 configuration or input error, 3 runtime fault.
Data files go to the output directory; progress logs go to standard error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .circuits import circuit_to_dict, stage1_tree, stage2_circuit
from .classical import PERCEPT_NAMES
from .classical import classical_accuracy_bound, classical_baseline
from .config import RunConfig, default_config_json, load_config
from .exceptions import (
    ConfigError, DegenerateDistributionError, DegeneratePostSelectionError, OptimizationFault,
)
from .noise import average_variance
from .outputs import STAGE1_COLUMNS, read_json, stage1_rows, write_csv, write_json
from .rng import make_rng, spawn
from .scenario import Backend, StageOneState, evaluate, stage1_train, stage2_train

log = logging.getLogger("photonic_ps")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

STAGE1_PARAMS = "params_stage1.json"
STAGE2_PARAMS = "params_stage2.json"


class InputError(ConfigError):
    """A required input file is missing or malformed."""


def _shots(text: str) -> int:
    if text == "exact":
        return 0
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'exact', got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError("shots must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run configuration (JSON)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument("--backend", choices=("ideal", "noisy"), help="simulator backend override")
    common.add_argument("--shots", type=_shots, metavar="N|exact", help="shots per estimate; 'exact' = 0")
    common.add_argument("--threads", type=int, metavar="N", help="worker threads (results do not depend on it)")
    common.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))

    parser = argparse.ArgumentParser(prog="photonic-ps", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--print-default-config", action="store_true",
                        help="print the default configuration as JSON and exit")
    sub = parser.add_subparsers(dest="command")

    sub.add_parser("train-stage1", parents=[common], help="train the four per-percept trees")

    p = sub.add_parser("train-stage2", parents=[common], help="train the mesh on saved stage-1 parameters")
    p.add_argument("--stage1", metavar="PATH", help=f"stage-1 parameters (default OUT/{STAGE1_PARAMS})")
    p.add_argument("--resume", action="store_true", help="resume from the latest checkpoint in OUT")

    sub.add_parser("run-all", parents=[common], help="stage 1, stage 2 and evaluation")

    sub.add_parser("classical-baseline", parents=[common], help="train the classical ECM agent")

    p = sub.add_parser("variance-study", parents=[common], help="shot-noise study on stage-1 circuits")
    p.add_argument("--stage1", metavar="PATH", help="stage-1 parameters (trained if absent)")

    p = sub.add_parser("evaluate", parents=[common], help="answer probabilities and accuracy")
    p.add_argument("--stage1", metavar="PATH", help=f"default OUT/{STAGE1_PARAMS}")
    p.add_argument("--stage2", metavar="PATH", help=f"default OUT/{STAGE2_PARAMS}")

    p = sub.add_parser("export-circuit", parents=[common], help="write a compiled circuit description")
    p.add_argument("--stage1", metavar="PATH", help=f"default OUT/{STAGE1_PARAMS}")
    p.add_argument("--stage2", metavar="PATH", help="mesh parameters; omit to export the tree alone")
    p.add_argument("--percept", type=int, default=0, choices=range(4))
    p.add_argument("--output", metavar="PATH", help="destination (default OUT/circuit_p<N>.json)")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.backend is not None:
        overrides["backend"] = args.backend
    if args.shots is not None:
        overrides["shots"] = args.shots
    if args.threads is not None:
        overrides["threads"] = args.threads
    return dataclasses.replace(cfg, **overrides).validate()


def _out(cfg: RunConfig) -> Path:
    path = Path(cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_stage1(path: Path) -> StageOneState:
    if not path.exists():
        raise InputError(f"stage-1 parameters not found: {path}")
    try:
        return StageOneState.from_dict(read_json(path)["params"])
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: malformed stage-1 parameters ({exc})") from exc


def _load_mesh(path: Path) -> np.ndarray:
    if not path.exists():
        raise InputError(f"stage-2 parameters not found: {path}")
    try:
        return np.asarray(read_json(path)["params"], dtype=float)
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: malformed stage-2 parameters ({exc})") from exc


def print_stage1_table(stage1: StageOneState, stream=None) -> None:
    stream = stream or sys.stdout
    print(f"{'percept':<12}{'p_red':>8}{'p_blue':>8}{'p_circle':>10}{'p_square':>10}", file=stream)
    for p in range(4):
        row = stage1.probabilities[p]
        print(f"{PERCEPT_NAMES[p]:<12}{row[0]:>8.2f}{row[1]:>8.2f}{row[2]:>10.2f}{row[3]:>10.2f}", file=stream)


def run_stage1(cfg: RunConfig) -> StageOneState:
    out = _out(cfg)
    stage1, records = stage1_train(cfg, threads=cfg.threads)
    h = cfg.result_hash()
    write_csv(out / "stage1_distributions.csv", STAGE1_COLUMNS, stage1_rows(stage1.probabilities), h)
    write_csv(out / "stage1_losses.csv", ("percept", "episode", "ps", "shannon", "phase", "total"),
              [(r.percept, r.episode, r.loss.ps, r.loss.shannon, r.loss.phase, r.loss.total) for r in records], h)
    write_json(out / STAGE1_PARAMS, {"config_hash": h, "params": stage1.to_dict()})
    return stage1


def run_stage2(cfg: RunConfig, stage1: StageOneState, resume: bool = False):
    out = _out(cfg)
    h = cfg.result_hash()

    def checkpoint(doc):
        write_json(out / f"params_stage2_ep{doc['episode']:05d}.json", dict(doc, config_hash=h))

    state = None
    if resume:
        found = sorted(out.glob("params_stage2_ep*.json"))
        if found:
            state = read_json(found[-1])
            if state.get("config_hash") != h:
                raise InputError(f"{found[-1]}: checkpoint was written by a different configuration")
            log.info("resuming from %s", found[-1])
    result = stage2_train(cfg, stage1, checkpoint=checkpoint, resume=state, threads=cfg.threads)
    write_csv(out / "stage2_accuracy.csv", ("episode", "accuracy", "loss"),
              [(k, a, l) for k, (a, l) in enumerate(zip(result.accuracy, result.loss))], h)
    write_json(out / STAGE2_PARAMS, {"config_hash": h, "params": result.mesh_params,
                                     "flagged_episodes": result.flagged})
    return result


def report_answers(answers, acc: float, label: str, stream=None) -> None:
    stream = stream or sys.stdout
    print(f"{'percept':<12}{'p_no':>8}{'p_yes':>8}", file=stream)
    for p in range(4):
        print(f"{PERCEPT_NAMES[p]:<12}{answers[p][0]:>8.3f}{answers[p][1]:>8.3f}", file=stream)
    print(f"{label} accuracy: {acc:.4f}", file=stream)


def cmd_train_stage1(cfg: RunConfig, args) -> int:
    print_stage1_table(run_stage1(cfg))
    return EXIT_OK


def print_accuracy_summary(accuracy) -> None:
    best = int(np.argmax(accuracy))
    print(f"final accuracy: {accuracy[-1]:.4f}")
    print(f"best accuracy: {accuracy[best]:.4f} (episode {best})")


def cmd_train_stage2(cfg: RunConfig, args) -> int:
    stage1 = _load_stage1(Path(args.stage1) if args.stage1 else Path(cfg.output_dir) / STAGE1_PARAMS)
    result = run_stage2(cfg, stage1, resume=args.resume)
    print_accuracy_summary(result.accuracy)
    return EXIT_OK


def cmd_run_all(cfg: RunConfig, args) -> int:
    stage1 = run_stage1(cfg)
    print_stage1_table(stage1)
    result = run_stage2(cfg, stage1)
    print_accuracy_summary(result.accuracy)
    if cfg.backend == "noisy" and cfg.eval_shots:
        answers, acc = evaluate(result.mesh_params, stage1, Backend(cfg.backend, cfg.noise, cfg.eval_shots),
                                rng=spawn(cfg.seed, 3)[2])
        report_answers(answers, acc, f"shot-estimated ({cfg.eval_shots} shots)")
    return EXIT_OK


def cmd_classical(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    h = cfg.result_hash()
    c = cfg.classical
    rows, finals, ecm_docs = [], [], {}
    for i, ss in enumerate(spawn(cfg.seed, c.seeds)):
        res = classical_baseline(c.stage2_episodes, seed=ss, stage1_episodes=c.stage1_episodes,
                                 batch_size=cfg.stage1.batch_size)
        rows.extend((i, k, a) for k, a in enumerate(res.accuracy))
        finals.append(float(np.mean(res.accuracy[-100:])))
        ecm_docs[str(i)] = res.ecm.to_dict()
    write_csv(out / "classical_accuracy.csv", ("seed", "episode", "accuracy"), rows, h)
    write_json(out / "classical_ecm.json", ecm_docs)
    print(f"analytic bound: 1/4*1.00 + 1/2*0.75 + 1/4*0.50 = {classical_accuracy_bound():.2f}")
    print(f"empirical accuracy (last 100 episodes, mean over {c.seeds} seed(s)): {np.mean(finals):.4f}")
    return EXIT_OK


def variance_rows(cfg: RunConfig, stage1: StageOneState) -> List[tuple]:
    v = cfg.variance
    tree = stage1_tree()
    root = spawn(cfg.seed, 4)[3]
    rows = []
    for (p, shots), ss in zip([(p, s) for p in range(4) for s in v.shots], root.spawn(4 * len(v.shots))):
        rng = make_rng(ss)
        for trial in range(v.trials):
            seeds = [int(x) for x in rng.integers(0, 2 ** 63, size=v.samplings)]
            rows.append((p, shots, trial, average_variance(tree, stage1.params[p], shots, N=v.samplings, seeds=seeds)))
    return rows


def variance_medians(rows) -> dict:
    by_shots = {}
    for _, shots, _, value in rows:
        by_shots.setdefault(shots, []).append(value)
    return {s: float(np.median(vals)) for s, vals in sorted(by_shots.items())}


def cmd_variance(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    if args.stage1:
        stage1 = _load_stage1(Path(args.stage1))
    else:
        stage1, _ = stage1_train(cfg, threads=cfg.threads)
    if args.shots is not None:
        # an explicit --shots replaces the configured list; 'exact' gives zero variance
        cfg = dataclasses.replace(cfg, variance=dataclasses.replace(cfg.variance, shots=[args.shots]))
    rows = variance_rows(cfg, stage1)
    write_csv(out / "variance.csv", ("percept", "shots", "trial", "avg_variance"), rows, cfg.result_hash())
    medians = variance_medians(rows)
    shots = sorted(medians)
    print(f"{'shots':>10}{'median':>14}{'2*sqrt':>10}")
    if len(shots) == 1 and shots[0] == 0:
        print(f"{'exact':>10}{0.0:>14.3e}{0.0:>10.4f}")
        return EXIT_OK
    for s in shots:
        print(f"{s:>10}{medians[s]:>14.3e}{2 * np.sqrt(medians[s]):>10.4f}")
    upto = [s for s in shots if s <= 100000]
    monotone = all(medians[a] > medians[b] for a, b in zip(upto, upto[1:]))
    print(f"median decreasing up to 1e5 shots: {'yes' if monotone else 'no'}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, args) -> int:
    out = Path(cfg.output_dir)
    stage1 = _load_stage1(Path(args.stage1) if args.stage1 else out / STAGE1_PARAMS)
    mesh = _load_mesh(Path(args.stage2) if args.stage2 else out / STAGE2_PARAMS)
    backend = Backend(cfg.backend, cfg.noise, cfg.shots)
    answers, acc = evaluate(mesh, stage1, backend, rng=spawn(cfg.seed, 3)[2])
    report_answers(answers, acc, "exact" if not cfg.shots else f"shot-estimated ({cfg.shots} shots)")
    return EXIT_OK


def cmd_export(cfg: RunConfig, args) -> int:
    out = Path(cfg.output_dir)
    stage1 = _load_stage1(Path(args.stage1) if args.stage1 else out / STAGE1_PARAMS)
    if args.stage2:
        transfer = stage2_circuit(stage1.params)
        doc = circuit_to_dict(transfer.for_percept(args.percept), _load_mesh(Path(args.stage2)))
    else:
        doc = circuit_to_dict(stage1_tree(), stage1.params[args.percept])
    dest = Path(args.output) if args.output else _out(cfg) / f"circuit_p{args.percept}.json"
    write_json(dest, doc)
    print(dest)
    return EXIT_OK


COMMANDS = {
    "train-stage1": cmd_train_stage1,
    "train-stage2": cmd_train_stage2,
    "run-all": cmd_run_all,
    "classical-baseline": cmd_classical,
    "variance-study": cmd_variance,
    "evaluate": cmd_evaluate,
    "export-circuit": cmd_export,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_default_config:
        print(default_config_json())
        return EXIT_OK
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OptimizationFault as exc:
        where = f" at episode {exc.episode}" if exc.episode is not None else ""
        print(f"runtime fault{where}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (DegenerateDistributionError, DegeneratePostSelectionError, FloatingPointError) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
