"""Command-line front end: batch labelling, fitting, simulation, training,
evaluation, and serving. Exit codes: 0 ok, 2 bad usage/values, 3 data
problems, 4 runtime failures."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .annotate import (
    InsufficientPool,
    SelectionPolicy,
    finalize_annotation,
    rough_age_estimate,
    select_references,
)
from .betafit import FitDiverged, fit_beta
from .catalog import (
    CatalogError,
    load_queries_with_truth,
    load_references,
    read_records,
    record_to_dict,
)
from .grid import AgeDistribution, AgeGrid
from .metrics import evaluate
from .ordinal import OrdinalHead
from .posterior import DegenerateEvidence, LogisticModel
from .simulate import (
    AnnotatorMode,
    SimulatedAnnotator,
    _derived_seed,
    ci_narrowing_experiment,
    simulate_comparison,
    write_narrowing_csv,
)
from .training import (
    NonFiniteLoss,
    TrainConfig,
    evaluate_head,
    load_checkpoint,
    save_checkpoint,
    synth_dataset,
    train,
    write_loss_trace,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


class DataError(Exception):
    pass


def _emit(args: argparse.Namespace, payload: dict, human: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload))
    else:
        print(human)


def _grid(args: argparse.Namespace) -> AgeGrid:
    return AgeGrid(args.grid_min, args.grid_max)


def cmd_fit_beta(args: argparse.Namespace) -> int:
    path = Path(args.input)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    samples = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() in ("age_diff", "delta"):
                continue
            samples.append((float(row[0]), float(row[1])))
    model = fit_beta(samples)
    _emit(args, {"beta": model.beta}, f"{model.beta:.6f}")
    return EXIT_OK


def cmd_label(args: argparse.Namespace) -> int:
    grid = _grid(args)
    refs_path = Path(args.refs)
    if not refs_path.exists():
        raise DataError(f"reference pool not found: {refs_path} (cannot fill any stratum)")
    queries_path = Path(args.queries)
    if not queries_path.exists():
        raise DataError(f"queries file not found: {queries_path}")
    pool = load_references(refs_path, grid)
    queries = load_queries_with_truth(queries_path)

    if args.serve_assist:
        return _label_via_service(args, queries)

    model = LogisticModel(args.beta)
    prior = AgeDistribution.uniform(grid)
    mode = AnnotatorMode.TRUTHFUL if args.truthful else AnnotatorMode.STOCHASTIC
    labelled = 0
    discarded = 0
    degenerate = 0
    with open(args.output, "w", encoding="utf-8") as out:
        for i, (query, true_age) in enumerate(queries):
            if true_age is None:
                raise DataError(
                    f"query {query.id!r} lacks 'true_age'; required for --simulate"
                )
            rough = rough_age_estimate(query, grid)
            task_pool = pool
            if args.bracket_window > 0:
                task_pool = [
                    r for r in pool if abs(r.age - rough) <= args.bracket_window
                ] or pool
            policy = SelectionPolicy(
                num_below=args.num_below,
                num_above=args.num_above,
                gender_match_required=not args.ignore_gender,
                rng_seed=_derived_seed(args.seed, i, 0),
            )
            refs = select_references(query, task_pool, policy, rough, fallback=True)
            annotator = SimulatedAnnotator(
                beta_true=args.simulate, seed=_derived_seed(args.seed, i, 1), mode=mode
            )
            events = [
                simulate_comparison(annotator, true_age, r.age, r.id) for r in refs
            ]
            try:
                record = finalize_annotation(query.id, events, model, prior)
            except DegenerateEvidence:
                degenerate += 1
                continue
            if record.discarded:
                discarded += 1
            else:
                labelled += 1
            out.write(json.dumps(record_to_dict(record)) + "\n")
    summary = {
        "labelled": labelled,
        "discarded": discarded,
        "degenerate": degenerate,
        "output": str(args.output),
    }
    _emit(
        args,
        summary,
        f"labelled={labelled} discarded={discarded} degenerate={degenerate} -> {args.output}",
    )
    return EXIT_OK


def _label_via_service(args: argparse.Namespace, queries) -> int:
    """Thin-client mode: enqueue every query as a task on a running service."""
    import httpx

    created = 0
    skipped = 0
    with httpx.Client(base_url=args.serve_assist, timeout=30.0) as client:
        for query, _ in queries:
            body = {
                "id": query.id,
                "image_uri": query.image_uri,
                "gender": query.gender.value,
                "rough_age_hint": query.rough_age_hint,
            }
            resp = client.post("/tasks", json=body)
            if resp.status_code == 201:
                created += 1
            elif resp.json().get("error") == "duplicate_query":
                skipped += 1
            else:
                raise DataError(f"service rejected {query.id!r}: {resp.text}")
    summary = {"created": created, "skipped": skipped, "service": args.serve_assist}
    _emit(args, summary, f"created={created} skipped={skipped} on {args.serve_assist}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    grid = _grid(args)
    annotator = SimulatedAnnotator(
        beta_true=args.annotator_beta,
        seed=args.seed,
        mode=AnnotatorMode.TRUTHFUL if args.truthful else AnnotatorMode.STOCHASTIC,
    )
    policy = SelectionPolicy(num_below=args.num_below, num_above=args.num_above,
                             gender_match_required=False, rng_seed=args.seed)
    ms = [int(v) for v in args.ms.split(",")]
    rows = ci_narrowing_experiment(
        annotator,
        policy,
        args.trials,
        grid=grid,
        model=LogisticModel(args.beta),
        ms=ms,
        bracket_window=args.bracket_window if args.bracket_window > 0 else None,
    )
    write_narrowing_csv(args.output, rows)
    human = "\n".join(
        f"M={r.m}: median={r.median_width:.1f} frac<8={r.frac_lt8:.3f} discard={r.discard_rate:.3f}"
        for r in rows
    )
    _emit(args, {"rows": [vars(r) for r in rows], "output": str(args.output)}, human)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    grid = _grid(args)
    dataset = synth_dataset(args.n, args.seed, grid, feature_dim=args.feature_dim)
    head = OrdinalHead.zeros(grid, args.feature_dim, beta=args.beta)
    config = TrainConfig(
        lr=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        loss_mode=args.loss,
        seed=args.seed,
    )
    trace = train(head, dataset, config)
    save_checkpoint(args.checkpoint, head)
    if args.trace:
        write_loss_trace(args.trace, trace)
    final = trace[-1] if trace else None
    payload = {
        "checkpoint": str(args.checkpoint),
        "epochs": len(trace),
        "final_loss": None if final is None else final.loss_total,
    }
    _emit(
        args,
        payload,
        f"trained {len(trace)} epochs, final loss "
        f"{'n/a' if final is None else f'{final.loss_total:.4f}'} -> {args.checkpoint}",
    )
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    if args.annotations:
        if not args.queries:
            raise DataError("--annotations needs --queries for the true ages")
        records = read_records(args.annotations)
        truth_by_id = {
            q.id: t for q, t in load_queries_with_truth(args.queries) if t is not None
        }
        pairs = [
            (r.mode_age, truth_by_id[r.query_id])
            for r in records
            if not r.discarded and r.query_id in truth_by_id
        ]
        if not pairs:
            raise DataError("no labelled records matched queries with true ages")
        report = evaluate([p for p, _ in pairs], [t for _, t in pairs])
    else:
        if not args.checkpoint:
            raise DataError("provide --checkpoint or --annotations")
        head = load_checkpoint(args.checkpoint)
        dataset = synth_dataset(
            args.synth_n, args.synth_seed, head.grid, feature_dim=head.feature_dim
        )
        report = evaluate_head(head, dataset, predictor=args.predictor)
    payload = report.to_dict()
    human = (
        f"{report.ca_rule}\n"
        f"MAE={report.mae:.3f} exact={report.exact_group_acc:.2f} "
        f"1-off={report.one_off_acc:.2f} "
        + " ".join(f"CA({n})={v:.2f}" for n, v in sorted(report.ca.items()))
    )
    _emit(args, payload, human)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app
    from .service.config import ServiceConfig

    config = ServiceConfig.from_env(
        grid_min=args.grid_min,
        grid_max=args.grid_max,
        beta=args.beta,
        num_below=args.num_below,
        num_above=args.num_above,
        selection_seed=args.seed,
        refs_path=args.refs,
        data_dir=args.data_dir,
        host=args.host,
        port=args.port,
    )
    if config.refs_path and not Path(config.refs_path).exists():
        raise DataError(f"reference pool not found: {config.refs_path}")
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return EXIT_OK


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid-min", type=int, default=0)
    p.add_argument("--grid-max", type=int, default=70)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agepost")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-beta", help="fit the response steepness from a CSV of (age_diff, frac_older)")
    p.add_argument("--input", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_fit_beta)

    p = sub.add_parser("label", help="label a query catalog against a reference pool")
    p.add_argument("--queries", required=True)
    p.add_argument("--refs", required=True)
    p.add_argument("--output", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--simulate", type=float, metavar="BETA_TRUE",
                       help="answer comparisons with a simulated annotator")
    group.add_argument("--serve-assist", metavar="URL",
                       help="enqueue tasks on a running service instead")
    p.add_argument("--truthful", action="store_true",
                   help="simulated annotator answers deterministically")
    p.add_argument("--beta", type=float, default=0.36, help="posterior model steepness")
    p.add_argument("--num-below", type=int, default=3)
    p.add_argument("--num-above", type=int, default=3)
    p.add_argument("--bracket-window", type=int, default=8,
                   help="max |ref age - rough age| during selection; 0 disables")
    p.add_argument("--ignore-gender", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    _add_grid_flags(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("simulate", help="run the interval-narrowing experiment")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--output", required=True)
    p.add_argument("--beta", type=float, default=0.36)
    p.add_argument("--annotator-beta", type=float, default=0.36)
    p.add_argument("--truthful", action="store_true")
    p.add_argument("--ms", default="1,2,4,6,8")
    p.add_argument("--num-below", type=int, default=3)
    p.add_argument("--num-above", type=int, default=3)
    p.add_argument("--bracket-window", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    _add_grid_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train the rank head on synthetic features")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--loss", choices=("both", "hyper", "kl"), default="both")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--beta", type=float, default=0.36)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--trace")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    _add_grid_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint or a labelled output")
    p.add_argument("--checkpoint")
    p.add_argument("--synth-n", type=int, default=1000)
    p.add_argument("--synth-seed", type=int, default=1)
    p.add_argument("--predictor", choices=("posterior", "ohrank"), default="posterior")
    p.add_argument("--annotations", help="JSON-lines records from 'label'")
    p.add_argument("--queries", help="query catalog with true ages")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--refs")
    p.add_argument("--data-dir", default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--num-below", type=int, default=None)
    p.add_argument("--num-above", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--grid-min", type=int, default=None)
    p.add_argument("--grid-max", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ValueError, FitDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CatalogError, InsufficientPool, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateEvidence, NonFiniteLoss, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
