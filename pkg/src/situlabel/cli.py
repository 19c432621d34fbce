"""Command-line orchestration: simulate, ingest, window, train, compare, serve.

Dataset directories hold one CSV per (mechanism, user) named
``<mechanism>__<user>.csv`` with an optional ``<mechanism>__<user>__truth.csv``
sidecar; all subcommands share that layout.
"""

from __future__ import annotations

import argparse
import asyncio
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from . import report as report_mod
from .dataset import WindowConfig, stack_windows, stratified_kfold, windows_from_bundle
from .mechanisms import analyze_labels
from .rnn import (
    ModelSpec,
    TrainConfig,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train_arrays,
)
from .simulate import (
    LabellerModel,
    default_gait,
    default_route,
    draw_labellers,
    ground_truth_csv,
    load_sim_config,
    simulate_session,
)
from .stats import (
    bonferroni,
    cochran_q,
    confusion,
    correctness_matrix,
    mcnemar,
    precision_recall_f1,
    rm_anova_f,
)
from .stream import ActivityLabel, CsvParseError, StreamMeta, emit_csv, parse_csv

LABEL_NAMES = {0: "Downstairs", 1: "Walking", 2: "Upstairs"}


# ---------------------------------------------------------------------------
# dataset directory layout
# ---------------------------------------------------------------------------


def dataset_filename(mechanism: str, user: str, truth: bool = False) -> str:
    suffix = "__truth.csv" if truth else ".csv"
    return f"{mechanism}__{user}{suffix}"


def load_dataset_dir(path: Path) -> dict[str, list]:
    """Load all session CSVs grouped by mechanism."""
    datasets: dict[str, list] = {}
    for csv_path in sorted(path.glob("*.csv")):
        if csv_path.name.endswith("__truth.csv"):
            continue
        stem = csv_path.stem
        if "__" in stem:
            mechanism, user = stem.split("__", 1)
        else:
            mechanism, user = "unknown", stem
        meta = StreamMeta(user=user, mechanism=mechanism)
        bundle = parse_csv(csv_path.read_text(), meta=meta)
        datasets.setdefault(mechanism, []).append(bundle)
    if not datasets:
        raise FileNotFoundError(f"no session CSVs found in {path}")
    return datasets


def _bundles_to_windows(bundles, window_config: WindowConfig):
    windows = []
    for bundle in bundles:
        windows.extend(windows_from_bundle(bundle, window_config))
    return windows


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def run_simulate(
    out_dir: Path,
    mechanisms: list[str],
    n_users: int,
    seed: int,
    route=None,
    gait=None,
    labeller: LabellerModel | None = None,
    rate_hz: float = 50.0,
) -> list[Path]:
    """Simulate sessions for every (mechanism, user) pair; returns CSV paths."""
    route = route or default_route()
    gait = gait or default_gait()
    out_dir.mkdir(parents=True, exist_ok=True)
    labellers = [labeller] * n_users if labeller else draw_labellers(n_users, seed)
    written = []
    ss = np.random.SeedSequence(seed)
    session_seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(n_users * len(mechanisms))]
    k = 0
    for u in range(n_users):
        user = f"user{u}"
        for mech in mechanisms:
            result = simulate_session(
                route, mech, labellers[u], gait, seed=session_seeds[k],
                rate_hz=rate_hz, user=user,
            )
            k += 1
            csv_path = out_dir / dataset_filename(mech, user)
            csv_path.write_text(emit_csv(result.bundle))
            (out_dir / dataset_filename(mech, user, truth=True)).write_text(
                ground_truth_csv(result)
            )
            written.append(csv_path)
    return written


def cmd_simulate(args) -> int:
    if args.config:
        cfg = load_sim_config(args.config)
        seed = args.seed if args.seed is not None else cfg["seed"]
        run_simulate(
            Path(args.out), cfg["mechanisms"], cfg["users"], seed,
            route=cfg["route"], gait=cfg["gait"], labeller=cfg["labeller"],
            rate_hz=cfg["rate_hz"],
        )
    else:
        gait = default_gait(args.noise) if args.noise is not None else default_gait()
        run_simulate(
            Path(args.out), args.mechanisms.split(","), args.users,
            args.seed or 0, gait=gait, rate_hz=args.rate,
        )
    print(f"wrote sessions to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# ingest / windows / rates
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    status = 0
    for name in args.files:
        path = Path(name)
        try:
            bundle = parse_csv(path.read_text())
        except CsvParseError as exc:
            print(f"{path}: INVALID ({exc})")
            status = 1
            continue
        labelled = sum(1 for s in bundle.samples() if s.label is not None)
        print(
            f"{path}: {len(bundle.frames)} frames, {len(bundle.events)} label changes, "
            f"{labelled} labelled, {bundle.duration_s:.1f}s"
        )
    return status


def cmd_windows(args) -> int:
    config = WindowConfig(
        length=args.length, overlap=args.overlap, purity_min=args.purity,
        overlap_is_percent=args.percent,
    )
    out = Path(args.out) if args.out else None
    lines = []
    total = 0
    for name in args.files:
        path = Path(name)
        stem = path.stem
        mechanism, _, user = stem.partition("__")
        bundle = parse_csv(path.read_text(), meta=StreamMeta(user or "unknown", mechanism))
        for w in windows_from_bundle(bundle, config):
            record = {
                "start_t_ms": w.start_t_ms,
                "label": int(w.label),
                "user": w.user,
                "mechanism": w.mechanism,
            }
            if args.with_data:
                record["x"] = w.x.tolist()
            lines.append(json.dumps(record))
            total += 1
    text = "\n".join(lines) + ("\n" if lines else "")
    if out:
        out.write_text(text)
    else:
        sys.stdout.write(text)
    print(f"{total} windows", file=sys.stderr)
    return 0


def cmd_rates(args) -> int:
    datasets = _load_data_arg(args.data)
    headers = ["mechanism", "user", "Downstairs", "Walking", "Upstairs",
               "total", "changes", "labels_per_min", "changes_per_min"]
    rows = []
    for mechanism in sorted(datasets):
        for bundle in datasets[mechanism]:
            duration = max(bundle.duration_s, 1e-9)
            stats = analyze_labels(bundle.events, duration)
            rows.append([
                mechanism, bundle.meta.user,
                str(stats.counts[ActivityLabel.DOWNSTAIRS]),
                str(stats.counts[ActivityLabel.WALKING]),
                str(stats.counts[ActivityLabel.UPSTAIRS]),
                str(stats.total), str(stats.changes),
                report_mod.fmt_stat(stats.labels_per_min),
                report_mod.fmt_stat(stats.changes_per_min),
            ])
    text = report_mod.render_table(headers, rows, title="Labelling rates")
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text)
    return 0


def _load_data_arg(data: str) -> dict[str, list]:
    path = Path(data)
    if path.is_dir():
        return load_dataset_dir(path)
    stem = path.stem
    mechanism, _, user = stem.partition("__")
    bundle = parse_csv(path.read_text(), meta=StreamMeta(user or "unknown", mechanism))
    return {mechanism: [bundle]}


# ---------------------------------------------------------------------------
# train / evaluate
# ---------------------------------------------------------------------------


def _window_config(args) -> WindowConfig:
    return WindowConfig(length=args.length, overlap=args.overlap,
                        purity_min=args.purity)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr, batch_size=args.batch, epochs=args.epochs,
        folds=args.folds, seed=args.seed or 0,
    )


def cmd_train(args) -> int:
    datasets = _load_data_arg(args.data)
    if args.mechanism:
        datasets = {args.mechanism: datasets[args.mechanism]}
    windows = _bundles_to_windows(
        [b for bundles in datasets.values() for b in bundles], _window_config(args)
    )
    if args.user:
        from .dataset import split_by_user

        windows, _ = split_by_user(windows, args.user)
    spec = ModelSpec.by_name(args.model, hidden=args.hidden)
    config = _train_config(args)
    x, y = stack_windows(windows)
    plan = stratified_kfold(windows, config.folds, config.seed)
    history = train_arrays(x, y, spec, config, plan, keep_models=True)
    print(
        f"{args.model}: mean CV accuracy {history.mean_accuracy:.4f} "
        f"(std {history.std_accuracy:.4f}) over {plan.k} folds, {len(windows)} windows"
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        best = max(history.folds, key=lambda f: f.test_accuracy)
        save_checkpoint(out / f"{args.model}.npz", best.model, best.norm_stats, config)
        curves = {
            "all": {args.model: [(f.epoch_loss, f.epoch_accuracy) for f in history.folds]}
        }
        (out / "curves.csv").write_text(report_mod.curves_csv(curves))
        print(f"checkpoint and curves written to {out}")
    return 0


def cmd_evaluate(args) -> int:
    model, norm_stats, _ = load_checkpoint(args.model)
    datasets = _load_data_arg(args.data)
    config = WindowConfig(length=args.length, overlap=args.overlap, purity_min=args.purity)
    windows = _bundles_to_windows(
        [b for bundles in datasets.values() for b in bundles], config
    )
    accuracy, _ = evaluate(model, windows, norm_stats)
    print(f"accuracy {accuracy:.4f} on {len(windows)} windows")
    return 0


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def run_compare(
    datasets: dict[str, list],
    model_names: list[str],
    window_config: WindowConfig,
    train_config: TrainConfig,
    alpha: float = 0.05,
    hidden: int = 64,
    out_dir: Path | None = None,
) -> dict:
    """Train every model on every mechanism dataset with shared folds, then
    run the full comparison suite and emit the report artifacts."""
    if len(model_names) < 2:
        raise ValueError("compare needs at least two model specs")
    # duplicate specs are allowed (they yield degenerate comparisons); give
    # repeats distinct display names so report columns stay unambiguous
    display_names: list[str] = []
    counts: dict[str, int] = {}
    for name in model_names:
        counts[name] = counts.get(name, 0) + 1
        display_names.append(name if counts[name] == 1 else f"{name}_{counts[name]}")
    results: dict = {"alpha": alpha, "models": display_names, "mechanisms": {}}
    accuracy_summary: dict = {}
    fold_accuracy: dict = {}
    curves: dict = {}
    f1_table: dict = {}
    qf_table: dict = {}
    mcnemar_grids: dict = {}

    for mechanism in sorted(datasets):
        windows = _bundles_to_windows(datasets[mechanism], window_config)
        x, y = stack_windows(windows)
        plan = stratified_kfold(windows, train_config.folds, train_config.seed)
        histories = {}
        for raw, name in zip(model_names, display_names):
            spec = ModelSpec.by_name(raw, hidden=hidden)
            histories[name] = train_arrays(x, y, spec, train_config, plan)
        fingerprints = {h.plan.fingerprint() for h in histories.values()}
        if len(fingerprints) != 1:
            raise AssertionError("fold plans diverged across models")

        oof = {name: h.oof_predictions(len(windows)) for name, h in histories.items()}
        matrix = correctness_matrix(y, oof)
        q_res = cochran_q(matrix, alpha)
        f_res = rm_anova_f(matrix, alpha)
        pair_p = {}
        for i, j in itertools.combinations(range(len(display_names)), 2):
            pair_p[(display_names[i], display_names[j])] = mcnemar(
                matrix[:, i], matrix[:, j], alpha
            )

        cm_first = confusion(oof[display_names[0]], y)
        f1_table[mechanism] = {
            LABEL_NAMES[c]: precision_recall_f1(cm_first, c)[2] for c in range(3)
        }
        accuracy_summary[mechanism] = {
            name: (h.mean_accuracy, h.std_accuracy) for name, h in histories.items()
        }
        fold_accuracy[mechanism] = {
            name: h.fold_accuracies for name, h in histories.items()
        }
        curves[mechanism] = {
            name: [(f.epoch_loss, f.epoch_accuracy) for f in h.folds]
            for name, h in histories.items()
        }
        results["mechanisms"][mechanism] = {
            "windows": len(windows),
            "accuracy": {
                name: {"mean": h.mean_accuracy, "std": h.std_accuracy,
                       "folds": h.fold_accuracies}
                for name, h in histories.items()
            },
            "cochran_q": {"statistic": q_res.statistic, "p": q_res.p,
                          "degenerate": q_res.degenerate},
            "f_test": {"statistic": f_res.statistic, "p": f_res.p,
                       "degenerate": f_res.degenerate},
            "mcnemar": {f"{a}|{b}": r.p for (a, b), r in pair_p.items()},
            "f1": f1_table[mechanism],
        }
        qf_table[mechanism] = (q_res, f_res)
        mcnemar_grids[mechanism] = pair_p

    # Bonferroni families: one Q/F test per technique; three pairwise McNemars
    techniques = sorted(qf_table)
    m_techniques = len(techniques)
    qf_rendered = {}
    for technique in techniques:
        q_res, f_res = qf_table[technique]
        q_adj = bonferroni([q_res.p], m_techniques)[0]
        f_adj = bonferroni([f_res.p], m_techniques)[0]
        qf_rendered[technique] = (q_res.statistic, q_adj, f_res.statistic, f_adj)
        results["mechanisms"][technique]["cochran_q"]["p_adjusted"] = q_adj
        results["mechanisms"][technique]["f_test"]["p_adjusted"] = f_adj
    grids_adjusted = {}
    for technique, pairs in mcnemar_grids.items():
        adj = bonferroni([r.p for r in pairs.values()], len(pairs))
        grids_adjusted[technique] = dict(zip(pairs.keys(), adj))
        results["mechanisms"][technique]["mcnemar_adjusted"] = {
            f"{a}|{b}": p for (a, b), p in grids_adjusted[technique].items()
        }

    artifacts = {
        "accuracy_table.txt": report_mod.render_accuracy_table(accuracy_summary),
        "accuracy.csv": report_mod.accuracy_csv(fold_accuracy),
        "epoch_curves.csv": report_mod.curves_csv(curves),
        "f1_table.txt": report_mod.render_f1_table(f1_table),
        "f1.csv": report_mod.f1_csv(f1_table),
        "qf_table.txt": report_mod.render_qf_table(qf_rendered),
        "qf.csv": report_mod.qf_csv(qf_rendered),
        "mcnemar_tables.txt": "".join(
            report_mod.render_mcnemar_grid(
                display_names, grids_adjusted[t],
                title=f"McNemar p values (Bonferroni-adjusted): {t}",
            ) + "\n"
            for t in sorted(grids_adjusted)
        ),
        "mcnemar.csv": report_mod.mcnemar_csv(grids_adjusted),
        "results.json": json.dumps(results, indent=2, sort_keys=True) + "\n",
    }
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in artifacts.items():
            (out_dir / name).write_text(text)
    results["artifacts"] = artifacts
    return results


def cmd_compare(args) -> int:
    datasets = load_dataset_dir(Path(args.data))
    models = args.models.split(",")
    run_compare(
        datasets, models, _window_config(args), _train_config(args),
        alpha=args.alpha, hidden=args.hidden, out_dir=Path(args.out),
    )
    print(f"report artifacts written to {args.out}")
    return 0


def cmd_report(args) -> int:
    results = json.loads(Path(args.results).read_text())
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    accuracy_summary = {}
    f1_table = {}
    qf_rendered = {}
    grids = {}
    models = results["models"]
    for technique, data in results["mechanisms"].items():
        accuracy_summary[technique] = {
            name: (acc["mean"], acc["std"]) for name, acc in data["accuracy"].items()
        }
        f1_table[technique] = data["f1"]
        qf_rendered[technique] = (
            data["cochran_q"]["statistic"], data["cochran_q"].get("p_adjusted", data["cochran_q"]["p"]),
            data["f_test"]["statistic"], data["f_test"].get("p_adjusted", data["f_test"]["p"]),
        )
        grids[technique] = {
            tuple(k.split("|")): p
            for k, p in data.get("mcnemar_adjusted", data["mcnemar"]).items()
        }
    (out_dir / "accuracy_table.txt").write_text(
        report_mod.render_accuracy_table(accuracy_summary))
    (out_dir / "f1_table.txt").write_text(report_mod.render_f1_table(f1_table))
    (out_dir / "qf_table.txt").write_text(report_mod.render_qf_table(qf_rendered))
    (out_dir / "mcnemar_tables.txt").write_text("".join(
        report_mod.render_mcnemar_grid(models, grids[t], title=f"McNemar p values: {t}") + "\n"
        for t in sorted(grids)
    ))
    print(f"tables re-rendered to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


def cmd_serve(args) -> int:
    from .server import serve

    try:
        written = asyncio.run(serve(
            args.port, args.out, mechanism=args.mechanism,
            sensor_source=args.sensor, rate_hz=args.rate, seed=args.seed or 0,
        ))
    except OSError as exc:
        print(f"startup error: {exc}", file=sys.stderr)
        return 1
    if written:
        print(f"session written to {written}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_global_flags(p) -> None:
    # the globals also parse after the subcommand; SUPPRESS keeps a
    # subcommand-position value from clobbering one given up front
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    p.add_argument("--config", default=argparse.SUPPRESS, help="config file (JSON)")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output path")


def _add_window_flags(p) -> None:
    p.add_argument("--length", type=int, default=100, help="window length in samples")
    p.add_argument("--overlap", type=int, default=20, help="window overlap in samples")
    p.add_argument("--purity", type=float, default=0.6, help="minimum modal-label share")


def _add_train_flags(p) -> None:
    p.add_argument("--model", default="gru", choices=["gru", "lstm", "stacked"])
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.0025)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--folds", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="situlabel",
        description="In-situ labelling pipeline: simulate, label, train, compare.",
    )
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--config", default=None, help="config file (JSON)")
    parser.add_argument("--out", default=None, help="output path")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic labelled sessions")
    _add_global_flags(p)
    p.add_argument("--users", type=int, default=10)
    p.add_argument("--mechanisms", default="three_button")
    p.add_argument("--noise", type=float, default=None, help="gait noise sigma")
    p.add_argument("--rate", type=float, default=50.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="validate and summarize session CSVs")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("windows", help="dump labelled windows as JSON lines")
    _add_global_flags(p)
    p.add_argument("files", nargs="+")
    _add_window_flags(p)
    p.add_argument("--percent", action="store_true", help="overlap is a percentage")
    p.add_argument("--with-data", action="store_true", help="include channel matrices")
    p.set_defaults(func=cmd_windows)

    p = sub.add_parser("train", help="train one model with k-fold CV")
    _add_global_flags(p)
    p.add_argument("--data", required=True, help="dataset dir or CSV")
    p.add_argument("--mechanism", default=None, help="restrict to one mechanism")
    p.add_argument("--user", default=None, help="restrict to one user's windows")
    _add_window_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on labelled data")
    _add_global_flags(p)
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True)
    _add_window_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="train all models and run the comparison suite")
    _add_global_flags(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--models", default="gru,lstm,stacked")
    p.add_argument("--alpha", type=float, default=0.05)
    _add_window_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("rates", help="labelling-rate analytics per session")
    _add_global_flags(p)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("serve", help="run the live-labelling protocol server")
    _add_global_flags(p)
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--mechanism", default="app")
    p.add_argument("--sensor", default="client", choices=["client", "sim"])
    p.add_argument("--rate", type=float, default=50.0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="re-render tables from results.json")
    _add_global_flags(p)
    p.add_argument("--results", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.out is None and args.command in ("simulate", "compare", "serve", "report"):
        parser.error(f"{args.command} requires --out")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
