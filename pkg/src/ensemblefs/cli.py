"""Command-line front end.

Subcommands::

    synth      write a synthetic train/test CSV pair plus schema
    prefilter  round-1 correlation filter -> prefilter.json
    trace      round-2 elimination traces -> trace_<SELECTOR>.json
    combine    traces -> trajectories.json/.csv (and evaluation with --config)
    evaluate   trajectories -> heuristic/cv/timing tables, report, figures
    run        everything above in one go

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal error. Outputs are staged in a temporary directory and only
moved into place once a command succeeds.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import shutil
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import RunConfig, load_config
from .dataset import schema_for, synth_generate, write_csv, write_schema
from .ensemble import EnsembleTrajectory, HEURISTICS, Heuristic, build_trajectory, trajectories_csv
from .errors import ConfigError, DataError, StageError
from .evaluation import (PreparedData, assemble_report, build_trajectories, compute_cv_curves, dumps,
                         evaluate_trajectories, prepare_data, run_experiment, run_prefilter,
                         run_traces, write_report)
from .selectors import SELECTORS, CorrelationReport, EliminationTrace
from .seeding import derive_seed

logger = logging.getLogger("ensemblefs")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@contextlib.contextmanager
def staged_output(out_dir: Path):
    """Yield a scratch directory whose contents replace into ``out_dir`` on success."""
    out_dir = Path(out_dir)
    parent = out_dir.parent
    parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".ensemblefs-", dir=parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    out_dir.mkdir(parents=True, exist_ok=True)
    for item in sorted(tmp.iterdir()):
        dest = out_dir / item.name
        if dest.is_dir():
            shutil.rmtree(dest)
        item.replace(dest)
    tmp.rmdir()


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


def _check_seed(doc: dict, cfg: RunConfig, path) -> None:
    if doc.get("seed") != cfg.seed:
        raise ConfigError(f"{path} was produced with seed {doc.get('seed')}, config has {cfg.seed}")


# -- subcommands ---------------------------------------------------------------

def cmd_synth(args) -> None:
    train, test = synth_generate(args.n_rows, args.informative, args.noise, args.redundant,
                                 args.flip_prob, args.seed)
    with staged_output(Path(args.out)) as tmp:
        write_csv(train, tmp / "train.csv")
        write_csv(test, tmp / "test.csv")
        write_schema(schema_for(train), tmp / "schema.txt")


def cmd_prefilter(args) -> None:
    cfg = load_config(args.config)
    prep = prepare_data(cfg)
    report = run_prefilter(prep, cfg)
    out = Path(args.out)
    doc = {"seed": cfg.seed, "provenance": prep.train.provenance,
           "feature_names": prep.train.names, "prefilter": report.to_dict(prep.train.names)}
    with staged_output(out.parent) as tmp:
        (tmp / out.name).write_text(dumps(doc), encoding="utf-8")


def cmd_trace(args) -> None:
    cfg = load_config(args.config)
    pre_doc = _read_json(args.prefilter)
    _check_seed(pre_doc, cfg, args.prefilter)
    pre = CorrelationReport.from_dict(pre_doc["prefilter"])
    prep = prepare_data(cfg)
    if pre_doc.get("feature_names") != prep.train.names:
        raise DataError(f"{args.prefilter} does not match the configured dataset")
    names = args.selector or list(cfg.selectors)
    traces = run_traces(prep, pre.kept, cfg, args.jobs, selectors=[n.upper() for n in names])
    with staged_output(Path(args.out)) as tmp:
        for name, tr in traces.items():
            doc = {"seed": cfg.seed, "provenance": prep.train.provenance,
                   "feature_names": prep.train.names, "trace": tr.to_dict(prep.train.names)}
            (tmp / f"trace_{name}.json").write_text(dumps(doc), encoding="utf-8")


def _load_traces(paths, roster=SELECTORS) -> tuple[list[EliminationTrace], list[str], int | None]:
    """Read trace JSONs, ordered by ``roster`` so stage runs match ``run``."""
    traces, names, seed = [], None, None
    for p in paths:
        doc = _read_json(p)
        traces.append(EliminationTrace.from_dict(doc["trace"]))
        if names is not None and doc.get("feature_names") != names:
            raise DataError(f"{p} was produced from a different dataset")
        names = doc.get("feature_names")
        if seed is not None and doc.get("seed") != seed:
            raise DataError(f"{p} was produced with a different seed")
        seed = doc.get("seed")
    if not traces:
        raise UsageError("no trace files given")
    rank = {n: i for i, n in enumerate(roster)}
    traces.sort(key=lambda tr: rank.get(tr.selector, len(rank)))
    return traces, names, seed


def _evaluate_into(tmp: Path, cfg: RunConfig, prep: PreparedData, traces, trajectories,
                   pre: CorrelationReport | None, jobs: int, figures: bool) -> None:
    kept = frozenset(traces[0].start_set) if traces else _start_of(trajectories)
    cv_rows = compute_cv_curves(prep.train, traces, cfg, jobs) if traces else []
    evaluated = evaluate_trajectories(prep, trajectories, kept, cfg, jobs)
    if pre is None:
        pre = CorrelationReport(kept, (), cfg.prefilter_threshold)
    report = assemble_report(cfg, prep, pre, traces, trajectories, cv_rows, evaluated)
    write_report(report, tmp, figures=figures)


def _start_of(trajectories) -> frozenset[int]:
    return trajectories[0].candidate(0)


def cmd_combine(args) -> None:
    cfg = load_config(args.config) if args.config else None
    traces, names, seed = _load_traces(args.traces, cfg.selectors if cfg else SELECTORS)
    if cfg is not None:
        if seed != cfg.seed:
            raise ConfigError(f"traces were produced with seed {seed}, config has {cfg.seed}")
        trajectories = build_trajectories(traces, cfg)
    else:
        quorum = args.quorum
        heuristics = [h.upper() for h in (args.heuristic or HEURISTICS)]
        trajectories = [build_trajectory(traces, Heuristic(h, quorum if h == "QUORUM" else None))
                        for h in heuristics]
    doc = {"seed": seed, "feature_names": names, "start_set": list(traces[0].start_set),
           "trajectories": [t.to_dict(names) for t in trajectories]}
    prep = None
    if cfg is not None:
        prep = prepare_data(cfg)
        if prep.train.names != names:
            raise DataError("traces do not match the configured dataset")
    with staged_output(Path(args.out)) as tmp:
        (tmp / "trajectories.json").write_text(dumps(doc), encoding="utf-8")
        (tmp / "trajectories.csv").write_text(trajectories_csv(trajectories, names), encoding="utf-8")
        if cfg is not None:
            pre = CorrelationReport.from_dict(_read_json(args.prefilter)["prefilter"]) if args.prefilter else None
            _evaluate_into(tmp, cfg, prep, traces, trajectories, pre, args.jobs, not args.no_figures)


def cmd_evaluate(args) -> None:
    cfg = load_config(args.config)
    doc = _read_json(args.trajectories)
    _check_seed(doc, cfg, args.trajectories)
    trajectories = [EnsembleTrajectory.from_dict(t) for t in doc["trajectories"]]
    traces = _load_traces(args.traces, cfg.selectors)[0] if args.traces else []
    prep = prepare_data(cfg)
    if doc.get("feature_names") != prep.train.names:
        raise DataError(f"{args.trajectories} does not match the configured dataset")
    pre = CorrelationReport.from_dict(_read_json(args.prefilter)["prefilter"]) if args.prefilter else None
    with staged_output(Path(args.out)) as tmp:
        _evaluate_into(tmp, cfg, prep, traces, trajectories, pre, args.jobs, not args.no_figures)


def cmd_run(args) -> None:
    cfg = load_config(args.config)
    with staged_output(Path(args.out)) as tmp:
        for r in range(cfg.repeats):
            run_cfg = cfg if r == 0 else replace(cfg, seed=derive_seed(cfg.seed, "repeat", r))
            target = tmp if cfg.repeats == 1 else tmp / f"repeat_{r:03d}"
            report = run_experiment(run_cfg, jobs=args.jobs)
            write_report(report, target, figures=not args.no_figures)


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ensemblefs", description="Two-round ensemble feature selection for anomaly detection.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def jobs(sp):
        sp.add_argument("--jobs", type=int, default=1, help="worker threads (results do not depend on it)")

    sp = sub.add_parser("synth", help="generate a synthetic train/test pair")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--n-rows", type=int, default=2000)
    sp.add_argument("--informative", type=int, default=3)
    sp.add_argument("--noise", type=int, default=12)
    sp.add_argument("--redundant", type=int, default=2)
    sp.add_argument("--flip-prob", type=float, default=0.05)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("prefilter", help="round-1 correlation pre-filter")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True, help="output JSON file")
    sp.set_defaults(func=cmd_prefilter)

    sp = sub.add_parser("trace", help="round-2 elimination traces")
    sp.add_argument("--config", required=True)
    sp.add_argument("--prefilter", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--selector", action="append", help="selector to run (repeatable); default: config roster")
    jobs(sp)
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("combine", help="combine traces into heuristic trajectories")
    sp.add_argument("--traces", nargs="+", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--config", help="also evaluate candidates with this run config")
    sp.add_argument("--prefilter", help="prefilter JSON to include in the report")
    sp.add_argument("--heuristic", action="append", help="heuristic to build (ignored with --config)")
    sp.add_argument("--quorum", type=int, help="quorum threshold (ignored with --config)")
    sp.add_argument("--no-figures", action="store_true")
    jobs(sp)
    sp.set_defaults(func=cmd_combine)

    sp = sub.add_parser("evaluate", help="evaluate trajectory candidates on the test set")
    sp.add_argument("--config", required=True)
    sp.add_argument("--trajectories", required=True)
    sp.add_argument("--traces", nargs="*", help="trace JSONs for cross-validation curves")
    sp.add_argument("--prefilter")
    sp.add_argument("--out", required=True)
    sp.add_argument("--no-figures", action="store_true")
    jobs(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("run", help="full pipeline")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--no-figures", action="store_true")
    jobs(sp)
    sp.set_defaults(func=cmd_run)
    return p


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return _exit_code(exc.cause)
    if isinstance(exc, (ConfigError, UsageError)):
        return EXIT_USAGE
    if isinstance(exc, (DataError, FileNotFoundError, KeyError)):
        return EXIT_DATA
    return EXIT_INTERNAL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("ensemblefs: error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes
        code = _exit_code(exc)
        stage = exc.stage if isinstance(exc, StageError) else args.command
        msg = str(exc.cause) if isinstance(exc, StageError) else str(exc)
        print(f"ensemblefs: error: [{stage}] {msg}", file=sys.stderr)
        if code == EXIT_INTERNAL:
            logger.debug("internal error", exc_info=True)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
