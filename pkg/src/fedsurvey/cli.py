"""Command-line entry point: ``fedsurvey {run,subsample,heterogeneity,synth,validate}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, config as cfgmod, reporting
from .dataset import load_csv, make_fold_plan, write_csv
from .errors import ConfigError, FedSurveyError
from .evaluation import ExperimentResult, run_experiment

log = logging.getLogger("fedsurvey")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4


def _load_config(args) -> dict:
    if args.config is None:
        return cfgmod.resolve(None, seed=args.seed, output_dir=args.out)
    return cfgmod.load(args.config, seed=args.seed, output_dir=args.out)


def _provenance(cfg: dict) -> tuple[str, int]:
    return cfgmod.config_hash(cfg), cfg["seed"]


def _experiments(cfg: dict, fractions, threads: int) -> list[ExperimentResult]:
    data = cfgmod.load_data(cfg)
    if data.dropped:
        log.warning("dropped %d incomplete rows", data.dropped)
    plan = make_fold_plan(data.tables, cfg["folds"], cfg["seed"])
    fed = cfgmod.fed_config(cfg)
    train = cfgmod.train_config(cfg)
    results = []
    for fraction in fractions:
        log.info("running fraction %s", fraction)
        res = run_experiment(data.tables, data.schema, plan, cfg["algorithms"], fed, cfg["seed"],
                             train_config=train, fraction=fraction, threads=threads)
        res.config = cfg
        results.append(res)
    return results


def _write_reports(cfg: dict, results: list[ExperimentResult], out: Path) -> list[Path]:
    h, seed = _provenance(cfg)
    cfg_yaml = cfgmod.to_yaml(cfg)
    return [
        reporting.write_text(out / "results.csv", reporting.results_csv(results, h, seed)),
        reporting.write_text(out / "summary.md", reporting.summary_md(results, cfg_yaml, h, seed)),
        reporting.write_text(out / "hypotheses.csv", reporting.hypotheses_csv(results, h, seed)),
        reporting.write_text(out / "roundlog.csv", reporting.roundlog_csv(results, h, seed)),
    ]


def cmd_run(args) -> int:
    cfg = _load_config(args)
    results = _experiments(cfg, [1.0], args.threads)
    paths = _write_reports(cfg, results, Path(cfg["output_dir"]))
    print(f"trained {results[0].models_trained} models; wrote {', '.join(str(p) for p in paths)}")
    return EXIT_OK


def cmd_subsample(args) -> int:
    cfg = _load_config(args)
    fractions = [1.0] + sorted({float(f) for f in cfg["subsample"]["fractions"]}, reverse=True)
    results = _experiments(cfg, fractions, args.threads)
    out = Path(cfg["output_dir"])
    paths = _write_reports(cfg, results, out)
    h, seed = _provenance(cfg)
    paths.append(reporting.write_text(out / "subsample_plot.csv", reporting.subsample_plot_csv(results, h, seed)))
    print(f"fractions {fractions}; wrote {', '.join(str(p) for p in paths)}")
    return EXIT_OK


def cmd_heterogeneity(args) -> int:
    cfg = _load_config(args)
    data = cfgmod.load_data(cfg)
    report = reporting.heterogeneity(data.tables, data.schema)
    out = Path(cfg["output_dir"])
    h, seed = _provenance(cfg)
    paths = [reporting.write_text(out / f"heterogeneity_{which}.csv",
                                  reporting.heterogeneity_csv(report, which, h, seed))
             for which in ("scheffe", "cohens_d")]
    print(f"{len(report.variables)} variables x {len(report.pairs)} site pairs; "
          f"wrote {', '.join(str(p) for p in paths)}")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _load_config(args)
    if cfg["data"]["source"] != "synthetic":
        raise ConfigError("synth needs data.source: synthetic")
    data = cfgmod.load_data(cfg)
    path = Path(cfg["output_dir"]) / "synthetic.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(path, data.tables, data.schema)
    print(f"wrote {sum(t.n for t in data.tables)} rows from {len(data.tables)} sites to {path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load_config(args)
    if args.csv is not None:
        # synthetic configs validate files written by ``synth``
        site_column = "site" if cfg["data"]["source"] == "synthetic" else cfg["data"]["csv"]["site_column"]
        tables = load_csv(args.csv, cfgmod.schema(cfg), site_column)
        source = args.csv
    elif cfg["data"]["source"] == "csv":
        tables = load_csv(cfg["data"]["csv"]["path"], cfgmod.schema(cfg), cfg["data"]["csv"]["site_column"])
        source = cfg["data"]["csv"]["path"]
    else:
        raise ConfigError("validate needs a CSV path or data.source: csv")
    print(f"{source}: {sum(t.n for t in tables)} rows kept, {tables.dropped} dropped")
    for t in tables:
        print(f"  site {t.site_id}: {t.n} rows")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment config (defaults apply when omitted)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for tree fitting and clients")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    parser = argparse.ArgumentParser(prog="fedsurvey", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="local vs centralized vs federated cross-validation"
                   ).set_defaults(func=cmd_run)
    sub.add_parser("subsample", parents=[common], help="repeat the run on reduced training data"
                   ).set_defaults(func=cmd_subsample)
    sub.add_parser("heterogeneity", parents=[common], help="pairwise site differences per variable"
                   ).set_defaults(func=cmd_heterogeneity)
    sub.add_parser("synth", parents=[common], help="write the synthetic data set as CSV"
                   ).set_defaults(func=cmd_synth)
    validate = sub.add_parser("validate", parents=[common], help="schema-check a CSV file")
    validate.add_argument("csv", nargs="?", type=Path, help="CSV to check (default: data.csv.path)")
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except FedSurveyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the runtime exit code
        log.debug("unexpected failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
