"""Command-line pipeline: ingest, features, cluster, screen, fit,
select, forecast, gains, decide, synth, and serve.

Every stage reads a dataset directory and/or previously written artifact
files and writes plain CSV/JSON artifacts into --out-dir, so stages can
be rerun and inspected independently. Exit codes: 0 success, 1
validation or config problem, 2 missing file or other I/O problem, 3
numerical failure. Errors print one machine-parsable line to stderr:
``orangecast: error: <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .clustering import write_cluster_assignment
from .decision import (
    estimate_payoffs,
    load_payoffs,
    recommend,
    save_payoffs,
    save_recommendation,
)
from .errors import (
    ConfigError,
    NumericalError,
    OrangecastError,
    ParseError,
    ValidationError,
)
from .events import (
    export_scatter_data,
    fit_event_regression,
    screen_predictors,
    write_event_fit,
    write_screening_report,
)
from .features import PHASE_POST, PHASE_PRE, compute_feature_rows, write_feature_table
from .forecast import (
    Tilt,
    exceedance_probability,
    load_distribution,
    outlook_tilt,
    save_distribution,
)
from .ingest import OrangeType
from .localreg import (
    enumerate_models,
    get_preset,
    load_model,
    save_model,
)
from .pipeline import PipelineConfig

logger = logging.getLogger(__name__)

_TILT_CHOICES = [t.value for t in Tilt]


def _fail_line(kind: str, message: str) -> str:
    flat = " ".join(str(message).split())
    return f"orangecast: error: {kind}: {flat}"


def _print_wrote(path) -> None:
    print(f"wrote {path}")


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="pipeline config JSON")
    sub.add_argument("--data-dir", help="dataset directory")
    sub.add_argument("--out-dir", help="artifact directory (default: artifacts)")
    sub.add_argument(
        "--verbose", action="store_true", help="log progress to stderr"
    )


def _load_config(args) -> tuple[PipelineConfig, Path | None]:
    """Config plus the directory its data_dir is relative to."""
    if getattr(args, "config", None):
        return PipelineConfig.from_file(args.config), Path(args.config).parent
    data_dir = getattr(args, "data_dir", None)
    if data_dir and (Path(data_dir) / pipeline.CONFIG_FILE).exists():
        path = Path(data_dir) / pipeline.CONFIG_FILE
        logger.info("using dataset config %s", path)
        return PipelineConfig.from_file(path), path.parent
    return PipelineConfig(), None


def _resolve_dirs(args) -> tuple[PipelineConfig, Path, Path]:
    cfg, base = _load_config(args)
    if getattr(args, "data_dir", None):
        data_dir = Path(args.data_dir)
    elif cfg.data_dir is not None:
        data_dir = Path(cfg.data_dir)
        if not data_dir.is_absolute() and base is not None:
            data_dir = base / data_dir
    else:
        data_dir = pipeline.default_data_dir()
    if getattr(args, "out_dir", None):
        cfg.out_dir = args.out_dir
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return cfg, data_dir, out_dir


def _orange_type(token: str) -> OrangeType:
    return OrangeType.from_token(token)


def _resolve_tilt(args, default: str = Tilt.NO_TILT.value) -> str:
    if getattr(args, "tilt", None):
        return Tilt(args.tilt).value
    if getattr(args, "outlook", None):
        return outlook_tilt(
            getattr(args, "effect_sign", None) or "+", args.outlook
        ).value
    return default


# --- subcommand handlers --------------------------------------------------


def cmd_ingest(args) -> int:
    cfg, data_dir, out_dir = _resolve_dirs(args)
    ds = pipeline.load_dataset(data_dir)

    seasons_path = out_dir / pipeline.SEASONS_ARTIFACT
    with open(seasons_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "season_year",
                "orange_type",
                "forecast_kboxes",
                "production_kboxes",
                "pct_error",
            ]
        )
        for r in sorted(ds.seasons, key=lambda r: (r.season_year, r.orange_type.value)):
            w.writerow(
                [
                    r.season_year,
                    r.orange_type.value,
                    repr(r.forecast_kboxes),
                    repr(r.production_kboxes),
                    repr(r.pct_error),
                ]
            )
    _print_wrote(seasons_path)

    stations_path = out_dir / pipeline.STATIONS_ARTIFACT
    with open(stations_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["county", "station_id"])
        for county, sid in ds.station_by_county.items():
            w.writerow([county, sid])
    _print_wrote(stations_path)
    return 0


def cmd_features(args) -> int:
    cfg, data_dir, out_dir = _resolve_dirs(args)
    ds = pipeline.load_dataset(data_dir)
    years = ds.season_years()
    rows = compute_feature_rows(
        years, ds.series_by_scope, args.phase, cfg.feature_params()
    )
    path = out_dir / pipeline.features_filename(args.phase)
    write_feature_table(rows, path)
    _print_wrote(path)
    _print_wrote(path.with_suffix(".flags.csv"))
    return 0


def cmd_cluster(args) -> int:
    cfg, data_dir, out_dir = _resolve_dirs(args)
    if args.k is not None:
        cfg.k = args.k
    if args.restarts is not None:
        cfg.restarts = args.restarts
    if args.seed is not None:
        cfg.cluster_seed = args.seed
    ds = pipeline.load_dataset(data_dir)
    from .clustering import cluster_counties

    assignment = cluster_counties(
        ds.yields, k=cfg.k, seed=cfg.cluster_seed, restarts=cfg.restarts
    )
    path = out_dir / pipeline.CLUSTERS_ARTIFACT
    write_cluster_assignment(assignment, path)
    _print_wrote(path)
    for cid in assignment.cluster_ids():
        print(f"{cid}: {', '.join(assignment.members(cid))}")
    return 0


def cmd_screen(args) -> int:
    cfg, data_dir, out_dir = _resolve_dirs(args)
    orange_type = _orange_type(args.type)
    ds = pipeline.load_dataset(data_dir)
    errors = pipeline.error_series(ds.seasons, orange_type)
    if not errors:
        raise ValidationError(f"no {orange_type.value} seasons in the dataset")

    fit = fit_event_regression(errors, ds.calendar)
    fit_path = out_dir / pipeline.event_fit_filename(orange_type)
    write_event_fit(fit, fit_path)
    _print_wrote(fit_path)

    matrix, _ = pipeline.build_matrix(ds, args.phase, cfg)
    report = screen_predictors(fit.residuals, matrix)
    report_path = out_dir / pipeline.screening_filename(orange_type, args.phase)
    write_screening_report(report, report_path)
    _print_wrote(report_path)

    if args.scatter:
        top = report.ranking("pearson_r")[: args.scatter]
        for p in export_scatter_data(fit.residuals, matrix, out_dir, top):
            _print_wrote(p)
    return 0


def _model_spec_from_args(args) -> tuple[OrangeType, str, tuple[str, ...], float, int, str]:
    """(orange_type, phase, predictors, alpha, degree, label) from either
    --preset or the explicit flags."""
    if args.preset:
        p = get_preset(args.preset)
        return p.orange_type, p.phase, tuple(p.predictors), p.alpha, p.degree, p.name
    missing = [
        flag
        for flag, v in (
            ("--type", args.type),
            ("--predictors", args.predictors),
            ("--alpha", args.alpha),
        )
        if not v
    ]
    if missing:
        raise ConfigError(
            "need --preset or all of --type/--predictors/--alpha "
            f"(missing {', '.join(missing)})"
        )
    predictors = tuple(s.strip() for s in args.predictors.split(",") if s.strip())
    return (
        _orange_type(args.type),
        args.phase,
        predictors,
        float(args.alpha),
        int(args.degree),
        args.label or "custom",
    )


def cmd_fit(args) -> int:
    cfg, data_dir, out_dir = _resolve_dirs(args)
    orange_type, phase, predictors, alpha, degree, label = _model_spec_from_args(args)
    ds = pipeline.load_dataset(data_dir)
    errors = pipeline.error_series(ds.seasons, orange_type)
    matrix, _ = pipeline.build_matrix(ds, phase, cfg)
    model, years_used = pipeline.fit_from_matrix(
        matrix, errors, predictors, alpha, degree
    )
    path = out_dir / pipeline.model_filename(orange_type, label)
    save_model(
        model,
        path,
        meta={
            "label": label,
            "orange_type": orange_type.value,
            "phase": phase,
            "training_years": years_used,
        },
    )
    _print_wrote(path)
    gcv_txt = "inf" if model.gcv_degenerate_ else f"{model.gcv_:.6g}"
    print(
        f"n={len(years_used)} predictors={','.join(predictors)} "
        f"alpha={alpha:g} gcv={gcv_txt}"
    )
    return 0


def cmd_select(args) -> int:
    cfg, data_dir, out_dir = _resolve_dirs(args)
    orange_type = _orange_type(args.type)
    mandatory = tuple(s.strip() for s in args.mandatory.split(",") if s.strip())
    optional = tuple(s.strip() for s in args.optional.split(",") if s.strip())
    if not optional:
        raise ConfigError("--optional must name at least one candidate column")
    ds = pipeline.load_dataset(data_dir)
    errors = pipeline.error_series(ds.seasons, orange_type)
    matrix, _ = pipeline.build_matrix(ds, args.phase, cfg)

    columns = list(mandatory) + [c for c in optional if c not in mandatory]
    bad = [c for c in columns if c not in matrix.columns]
    if bad:
        raise ValidationError("unknown predictor column: " + ", ".join(bad))
    complete = matrix.complete_rows(columns)
    years = [
        y
        for i, y in enumerate(matrix.years)
        if complete[i] and y in errors
    ]
    if not years:
        raise ValidationError(
            "no seasons with observed error and complete candidate predictors"
        )
    X = np.array([matrix.row(y, columns) for y in years])
    y_vec = np.array([errors[yr] for yr in years])
    table = enumerate_models(
        X,
        y_vec,
        columns,
        mandatory=mandatory,
        optional=[c for c in columns if c not in mandatory],
        degree=args.degree,
        mode=args.mode,
        fixed_alpha=args.fixed_alpha,
    )
    table_path = out_dir / pipeline.gcv_filename(orange_type, args.phase)
    table.to_csv(table_path)
    _print_wrote(table_path)

    best = table.best
    best_model, years_used = pipeline.fit_from_matrix(
        matrix, errors, best.predictors, best.alpha, args.degree
    )
    best_path = out_dir / pipeline.model_filename(orange_type, "best")
    save_model(
        best_model,
        best_path,
        meta={
            "label": "best",
            "orange_type": orange_type.value,
            "phase": args.phase,
            "training_years": years_used,
            "selection_mode": args.mode,
        },
    )
    _print_wrote(best_path)
    print(
        f"best: predictors={','.join(best.predictors)} alpha={best.alpha:g} "
        f"gcv={best.gcv:.6g} over {len(table.rows)} rows"
    )
    return 0


def cmd_forecast(args) -> int:
    cfg, data_dir, out_dir = _resolve_dirs(args)
    if args.b is not None:
        cfg.b = args.b
    if args.seed is not None:
        cfg.seed = args.seed
    if args.model:
        doc_path = Path(args.model)
        if not doc_path.exists():
            raise FileNotFoundError(f"missing model file: {doc_path}")
        model = load_model(doc_path)
        meta = getattr(model, "meta_", None) or {}
        if "orange_type" not in meta or "phase" not in meta:
            raise ConfigError(
                f"{doc_path}: model metadata lacks orange_type/phase; "
                "refit with `orangecast fit` or use --preset"
            )
        orange_type = OrangeType(meta["orange_type"])
        phase = meta["phase"]
        predictors = tuple(model.columns_)
        alpha = model.alpha
        degree = model.degree
        source = meta.get("label", doc_path.stem)
    else:
        orange_type, phase, predictors, alpha, degree, source = (
            _model_spec_from_args(args)
        )
    tilt = _resolve_tilt(args)

    ds = pipeline.load_dataset(data_dir)
    errors = pipeline.error_series(ds.seasons, orange_type)
    matrix, _ = pipeline.build_matrix(ds, phase, cfg)
    dist = pipeline.forecast_distribution(
        matrix,
        errors,
        predictors,
        alpha,
        args.season,
        orange_type,
        degree=degree,
        b=cfg.b,
        seed=cfg.seed,
        source_model=source,
        tilt=tilt,
    )
    path = out_dir / pipeline.distribution_filename(orange_type, args.season)
    save_distribution(dist, path)
    _print_wrote(path)
    print(
        f"point={dist.point_estimate:.3f} "
        f"p_exceed({cfg.tau:g})={exceedance_probability(dist, cfg.tau):.3f} "
        f"B={dist.b} seed={dist.seed}"
    )
    return 0


def cmd_gains(args) -> int:
    cfg, data_dir, out_dir = _resolve_dirs(args)
    if args.b is not None:
        cfg.b = args.b
    if args.seed is not None:
        cfg.seed = args.seed
    orange_type = _orange_type(args.type)
    ds = pipeline.load_dataset(data_dir)
    prices = pipeline.load_prices(data_dir)
    dates = pipeline.announcement_dates(ds.seasons, orange_type, cfg)
    if not dates:
        raise ValidationError(f"no {orange_type.value} seasons in the dataset")
    payoffs = estimate_payoffs(
        prices,
        dates,
        orange_type,
        b=cfg.b,
        seed=cfg.seed,
        contract_lbs=cfg.contract_lbs,
    )
    path = out_dir / pipeline.payoffs_filename(orange_type)
    save_payoffs(payoffs, path)
    _print_wrote(path)
    print(
        f"E_long={payoffs.e_long_cents_per_lb:.2f}c/lb "
        f"(${payoffs.e_long_per_contract:,.2f}/contract) "
        f"E_short={payoffs.e_short_cents_per_lb:.2f}c/lb "
        f"(${payoffs.e_short_per_contract:,.2f}/contract)"
    )
    return 0


def cmd_decide(args) -> int:
    cfg, data_dir, out_dir = _resolve_dirs(args)
    for name, value in (
        ("tau", args.tau),
        ("p_high", args.p_high),
        ("p_low", args.p_low),
    ):
        if value is not None:
            setattr(cfg, name, value)
    orange_type = _orange_type(args.type)

    dist_path = out_dir / pipeline.distribution_filename(orange_type, args.season)
    if not dist_path.exists():
        raise FileNotFoundError(
            f"missing artifact {dist_path}; run `orangecast forecast` first"
        )
    payoffs_path = out_dir / pipeline.payoffs_filename(orange_type)
    if not payoffs_path.exists():
        raise FileNotFoundError(
            f"missing artifact {payoffs_path}; run `orangecast gains` first"
        )
    dist = load_distribution(dist_path)
    payoffs = load_payoffs(payoffs_path)
    tilt = _resolve_tilt(args, default=dist.tilt)
    rec = recommend(
        dist,
        payoffs,
        tau=cfg.tau,
        p_high=cfg.p_high,
        p_low=cfg.p_low,
        tilt=tilt,
    )
    path = out_dir / pipeline.recommendation_filename(orange_type, args.season)
    save_recommendation(rec, path)
    _print_wrote(path)
    print(
        f"scenario={rec.scenario.value} position={rec.position.value} "
        f"p_exceed={rec.p_exceed:.3f} emv_long={rec.emv_long:,.2f} "
        f"emv_short={rec.emv_short:,.2f}"
    )
    return 0


def cmd_synth(args) -> int:
    from .synth import generate_dataset

    out = Path(args.out_dir or "synth-data")
    generate_dataset(
        out,
        seed=args.seed if args.seed is not None else 7,
        first_season=args.first_season,
        last_season=args.last_season,
    )
    for name in sorted(p.name for p in out.iterdir()):
        _print_wrote(out / name)
    return 0


def cmd_serve(args) -> int:
    cfg, _, _ = _resolve_dirs(args)
    if args.host:
        cfg.host = args.host
    if args.port is not None:
        cfg.port = args.port
    artifact_dir = Path(args.artifact_dir or cfg.out_dir)
    if not artifact_dir.is_dir():
        raise FileNotFoundError(f"artifact directory not found: {artifact_dir}")
    import uvicorn

    from .serve import create_app

    app = create_app(artifact_dir)
    print(f"serving {artifact_dir} on http://{cfg.host}:{cfg.port}")
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
    return 0


# --- parser ----------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orangecast",
        description=(
            "Model the October orange-production forecast error from "
            "climate predictors and turn it into hedging recommendations."
        ),
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest", help="validate inputs; write seasons/stations")
    _add_common(p)
    p.set_defaults(handler=cmd_ingest)

    p = subs.add_parser("features", help="compute climate feature tables")
    _add_common(p)
    p.add_argument("--phase", choices=[PHASE_PRE, PHASE_POST], default=PHASE_PRE)
    p.set_defaults(handler=cmd_features)

    p = subs.add_parser("cluster", help="cluster county yield histories")
    _add_common(p)
    p.add_argument("--k", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=cmd_cluster)

    p = subs.add_parser("screen", help="event regression and predictor screening")
    _add_common(p)
    p.add_argument("--type", required=True, help="valencia or nonvalencia")
    p.add_argument("--phase", choices=[PHASE_PRE, PHASE_POST], default=PHASE_PRE)
    p.add_argument(
        "--scatter", type=int, default=0, help="export scatter CSVs for top N"
    )
    p.set_defaults(handler=cmd_screen)

    p = subs.add_parser("fit", help="fit one local regression model")
    _add_common(p)
    p.add_argument("--preset")
    p.add_argument("--type")
    p.add_argument("--predictors", help="comma-separated matrix columns")
    p.add_argument("--alpha", type=float)
    p.add_argument("--degree", type=int, choices=(1, 2), default=1)
    p.add_argument("--phase", choices=[PHASE_PRE, PHASE_POST], default=PHASE_PRE)
    p.add_argument("--label")
    p.set_defaults(handler=cmd_fit)

    p = subs.add_parser("select", help="enumerate models and pick the best by GCV")
    _add_common(p)
    p.add_argument("--type", required=True)
    p.add_argument("--phase", choices=[PHASE_PRE, PHASE_POST], default=PHASE_PRE)
    p.add_argument("--mandatory", default="Freezes,Hurricanes,Cg")
    p.add_argument("--optional", required=True, help="comma-separated candidates")
    p.add_argument("--mode", choices=("drop-one", "power-set"), default="drop-one")
    p.add_argument("--degree", type=int, choices=(1, 2), default=1)
    p.add_argument("--fixed-alpha", type=float)
    p.set_defaults(handler=cmd_select)

    p = subs.add_parser("forecast", help="bootstrap an error distribution")
    _add_common(p)
    p.add_argument("--season", type=int, required=True)
    p.add_argument("--preset")
    p.add_argument("--model", help="path to a saved model JSON")
    p.add_argument("--type")
    p.add_argument("--predictors")
    p.add_argument("--alpha", type=float)
    p.add_argument("--degree", type=int, choices=(1, 2), default=1)
    p.add_argument("--phase", choices=[PHASE_PRE, PHASE_POST], default=PHASE_PRE)
    p.add_argument("--label")
    p.add_argument("--b", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tilt", choices=_TILT_CHOICES)
    p.add_argument(
        "--outlook",
        choices=("above_normal", "normal", "below_normal", "equal_chances"),
    )
    p.add_argument("--effect-sign", choices=("+", "-"))
    p.set_defaults(handler=cmd_forecast)

    p = subs.add_parser("gains", help="estimate typical long/short payoffs")
    _add_common(p)
    p.add_argument("--type", required=True)
    p.add_argument("--b", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=cmd_gains)

    p = subs.add_parser("decide", help="turn artifacts into a recommendation")
    _add_common(p)
    p.add_argument("--season", type=int, required=True)
    p.add_argument("--type", required=True)
    p.add_argument("--tau", type=float)
    p.add_argument("--p-high", type=float, dest="p_high")
    p.add_argument("--p-low", type=float, dest="p_low")
    p.add_argument("--tilt", choices=_TILT_CHOICES)
    p.add_argument(
        "--outlook",
        choices=("above_normal", "normal", "below_normal", "equal_chances"),
    )
    p.add_argument("--effect-sign", choices=("+", "-"))
    p.set_defaults(handler=cmd_decide)

    p = subs.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out-dir", help="dataset directory (default: synth-data)")
    p.add_argument("--seed", type=int)
    p.add_argument("--first-season", type=int, default=1996)
    p.add_argument("--last-season", type=int, default=2017)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(handler=cmd_synth)

    p = subs.add_parser("serve", help="serve artifacts over read-only HTTP")
    _add_common(p)
    p.add_argument("--artifact-dir", help="directory of artifact JSONs")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(handler=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except ParseError as exc:
        print(_fail_line("parse", str(exc)), file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(_fail_line("config", str(exc)), file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(_fail_line("numerical", str(exc)), file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(_fail_line("validation", str(exc)), file=sys.stderr)
        return 1
    except OrangecastError as exc:
        print(_fail_line("validation", str(exc)), file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(_fail_line("io", str(exc)), file=sys.stderr)
        return 2
    except OSError as exc:
        print(_fail_line("io", str(exc)), file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
