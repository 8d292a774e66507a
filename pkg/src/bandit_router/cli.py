"""Command-line interface: one binary for the whole routing workflow.

Subcommands: gen-synth, validate-data, train, calibrate, evaluate, sweep,
oracle, hetero, plot, serve.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 infeasible
budget. Every artifact-producing run also writes a ``<artifact>.manifest.json``
recording the resolved flags, seed, and a config hash; re-running a command
with ``--config <manifest>`` reproduces its primary artifacts byte for byte.
Artifacts are written to a temp path and renamed into place on success.
Output is plain text (NO_COLOR is moot: nothing is ever colored).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from decimal import Decimal
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    ROSTER_PRESETS,
    RewardConfig,
    atomic_write_bytes,
    atomic_write_text,
    load_dataset,
    save_dataset,
    token_cost,
)
from .errors import (
    ConfigError,
    DataError,
    InfeasibleBudgetError,
    InputError,
    InstanceTooLargeError,
    RouterError,
)
from .evalkit import (
    DEFAULT_P_GRID,
    BudgetSpec,
    aggregate_reports,
    calibrate_p,
    evaluate,
    frontier_sweep,
    heterogeneity_matrix,
    report_to_dict,
    single_arm_baseline,
    write_frontier_report,
)
from .oracle import BudgetProblem, solve_budgeted, threshold_route
from .policy import TrainConfig, load_model, save_model, train
from .replay import SynthSpec, gen_synthetic


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; our contract reserves 2 for data
    # errors, so surface them as exceptions and exit 1 from main().
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{self.prog}: {message}")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help()
            return 1
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except InfeasibleBudgetError as exc:
        print(f"infeasible budget: {exc}", file=sys.stderr)
        if exc.cheapest_achievable is not None:
            print(f"cheapest achievable cost: {exc.cheapest_achievable}", file=sys.stderr)
        return 3
    except (ConfigError, InputError, InstanceTooLargeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RouterError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="bandit-router",
        description="Cost-aware LLM routing: data, training, evaluation, serving.",
        epilog="exit codes: 0 ok, 1 usage error, 2 data error, 3 infeasible budget",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = _add(sub, "gen-synth", _cmd_gen_synth, "generate a synthetic routing dataset")
    p.add_argument("--arms", type=int, help="number of arms (default 4)")
    p.add_argument("--clusters", type=int, help="number of embedding clusters (default 4)")
    p.add_argument("--dim", type=int, help="embedding dimension (default 32)")
    p.add_argument("--records", type=int, help="number of records (default 1000)")
    p.add_argument("--noise", type=float, help="correctness flip probability (default 0.02)")
    p.add_argument("--costs", help="comma-separated per-arm prices, e.g. 0.02,0.025,0.1,1.0")
    p.add_argument("--preset", choices=sorted(ROSTER_PRESETS), help="named price roster")
    p.add_argument("--seed", type=int, help="generator seed (default 0)")
    p.add_argument(
        "--capabilities",
        help="arm->cluster map like '0=0;1=1;2=2;3=1,2,3' (default: round-robin)",
    )
    p.add_argument("--sidecar", action="store_true", default=None,
                   help="store embeddings in a float32 sidecar file")
    p.add_argument("--out", help="output dataset path")

    p = _add(sub, "validate-data", _cmd_validate, "check a dataset file against its schema")
    p.add_argument("--data", help="dataset path")

    p = _add(sub, "train", _cmd_train, "train a routing policy")
    _train_flags(p)
    p.add_argument("--data", help="training dataset path")
    p.add_argument("--out", help="output model path")

    p = _add(sub, "calibrate", _cmd_calibrate, "pick the smallest p fitting a budget")
    _train_flags(p)
    p.add_argument("--train", dest="train_path", help="training dataset path")
    p.add_argument("--val", help="validation dataset path")
    p.add_argument("--budget", help="dollar budget over the validation set")
    p.add_argument("--slack", type=float, help="relative budget slack (default 0)")
    p.add_argument("--grid", help="comma-separated p values, or 'default'")
    p.add_argument("--out-dir", help="directory for the chosen p and its 5 models")

    p = _add(sub, "evaluate", _cmd_evaluate, "score a model (or single arm) on a dataset")
    p.add_argument("--model", action="append", help="model path (repeat for a multi-run mean)")
    p.add_argument("--baseline-arm", type=int, help="score this fixed arm instead of a model")
    p.add_argument("--data", help="evaluation dataset path")
    p.add_argument("--out", help="output report path (JSON)")

    p = _add(sub, "sweep", _cmd_sweep, "trace the cost/accuracy frontier over a p grid")
    _train_flags(p)
    p.add_argument("--train", dest="train_path", help="training dataset path")
    p.add_argument("--test", help="test dataset path")
    p.add_argument("--grid", help="comma-separated p values, or 'default'")
    p.add_argument("--jobs", type=int, help="parallel grid cells (default 1)")
    p.add_argument("--out", help="output report path (TSV; JSON summary written alongside)")

    p = _add(sub, "oracle", _cmd_oracle, "ground-truth routing on cached correctness bits")
    p.add_argument("--data", help="dataset path")
    p.add_argument("--p", type=float, help="threshold-route at this cost scaling")
    p.add_argument("--budget", help="or: solve for the smallest p fitting this dollar budget")
    p.add_argument("--out", help="output assignments path (TSV; JSON summary alongside)")

    p = _add(sub, "hetero", _cmd_hetero, "per-arm-pair counts of one-right-one-wrong queries")
    p.add_argument("--data", help="dataset path")
    p.add_argument("--out", help="output matrix path (TSV)")

    p = _add(sub, "plot", _cmd_plot, "render a chart from a report file")
    p.add_argument("--kind", choices=["frontier", "hetero", "selection"], help="chart type")
    p.add_argument("--input", help="report file produced by sweep/hetero/evaluate")
    p.add_argument("--row", type=int, help="row of the report to plot (selection; default 0)")
    p.add_argument("--out", help="output image path (PNG)")

    p = _add(sub, "serve", _cmd_serve, "run the HTTP gateway")
    p.add_argument("--gateway-config", help="gateway config JSON (endpoints, templates)")
    p.add_argument("--model", help="policy model path")
    p.add_argument("--host", help="bind host (default 127.0.0.1)")
    p.add_argument("--port", type=int, help="bind port (default 8080)")

    return parser


def _add(sub, name: str, func, help_text: str):
    p = sub.add_parser(name, help=help_text, description=help_text)
    p.add_argument("--config", help="JSON file (or a run manifest) whose keys mirror flags")
    p.set_defaults(func=func)
    return p


def _train_flags(p) -> None:
    p.add_argument("--p", type=float, help="reward cost scaling (train only; default 0)")
    p.add_argument("--cost-mode", choices=["fixed", "dynamic"], help="reward cost basis")
    p.add_argument("--steps", type=int, help="training passes over the data (default 20)")
    p.add_argument("--lr", type=float, help="SGD learning rate (default 0.01)")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--mode", choices=["greedy_arm", "full_information"], help="update mode")
    p.add_argument("--epsilon", type=float, help="exploration rate for greedy_arm (default 0)")
    p.add_argument("--no-bias", action="store_true", default=None,
                   help="disable the per-arm intercept")


# ---------------------------------------------------------------------------
# flag resolution and manifests

def _resolve(args, defaults: dict, required: tuple[str, ...] = ()) -> dict:
    """Merge CLI flags over --config values over built-in defaults."""
    from_file: dict = {}
    if getattr(args, "config", None):
        try:
            payload = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        from_file = payload.get("argv", payload) if isinstance(payload, dict) else {}
        unknown = set(from_file) - set(defaults)
        if unknown:
            raise ConfigError(f"config file has unknown keys: {sorted(unknown)}")
    resolved = {}
    for key, default in defaults.items():
        given = getattr(args, key, None)
        resolved[key] = given if given is not None else from_file.get(key, default)
    for key in required:
        if resolved[key] is None:
            raise _UsageError(f"missing required flag --{key.replace('_', '-')}")
    return resolved


def _manifest(command: str, resolved: dict, artifact: Path) -> None:
    canon = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    payload = {
        "format": "run-manifest",
        "version": 1,
        "command": command,
        "argv": resolved,
        "seed": resolved.get("seed"),
        "config_hash": hashlib.sha256(canon.encode()).hexdigest(),
        "package_version": __version__,
    }
    atomic_write_text(
        artifact.with_name(artifact.name + ".manifest.json"),
        json.dumps(payload, indent=2, sort_keys=True) + "\n",
    )


def _train_config(r: dict) -> TrainConfig:
    return TrainConfig(
        steps=r["steps"],
        learning_rate=r["lr"],
        seed=r["seed"],
        update_mode=r["mode"],
        epsilon=r["epsilon"],
        use_bias=not r["no_bias"],
        reward=RewardConfig(p=r["p"], cost_mode=r["cost_mode"]),
    )


_TRAIN_DEFAULTS = {
    "p": 0.0,
    "cost_mode": "fixed",
    "steps": 20,
    "lr": 0.01,
    "seed": 0,
    "mode": "greedy_arm",
    "epsilon": 0.0,
    "no_bias": False,
}


def _parse_grid(spec: str) -> tuple[float, ...]:
    if spec == "default":
        return DEFAULT_P_GRID
    try:
        values = tuple(float(v) for v in spec.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad p grid {spec!r}: {exc}") from exc
    if not values:
        raise ConfigError("empty p grid")
    return values


# ---------------------------------------------------------------------------
# subcommands

def _cmd_gen_synth(args) -> int:
    defaults = {
        "arms": 4, "clusters": 4, "dim": 32, "records": 1000, "noise": 0.02,
        "costs": None, "preset": None, "seed": 0, "capabilities": None,
        "sidecar": False, "out": None,
    }
    r = _resolve(args, defaults, required=("out",))
    if r["preset"]:
        entries = ROSTER_PRESETS[r["preset"]]
        names: tuple[str, ...] | None = tuple(n for n, _ in entries)
        costs = tuple(price for _, price in entries)
        r["arms"] = len(entries)
    elif r["costs"]:
        names = None
        costs = tuple(v.strip() for v in str(r["costs"]).split(","))
    else:
        raise _UsageError("gen-synth needs --costs or --preset")
    capabilities = _parse_capabilities(r["capabilities"]) if r["capabilities"] else None
    spec = SynthSpec(
        n_arms=r["arms"],
        n_clusters=r["clusters"],
        dim=r["dim"],
        n_records=r["records"],
        noise=r["noise"],
        costs=costs,
        seed=r["seed"],
        capabilities=capabilities,
        names=names,
    )
    dataset = gen_synthetic(spec)
    out = Path(r["out"])
    save_dataset(dataset, out, sidecar=bool(r["sidecar"]))
    _manifest("gen-synth", r, out)
    print(f"wrote {len(dataset.records)} records, {dataset.n_arms} arms -> {out}")
    return 0


def _parse_capabilities(spec: str) -> tuple[tuple[int, ...], ...]:
    try:
        by_arm: dict[int, tuple[int, ...]] = {}
        for part in spec.split(";"):
            arm, clusters = part.split("=")
            by_arm[int(arm)] = tuple(int(c) for c in clusters.split(","))
        return tuple(by_arm[j] for j in sorted(by_arm))
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad --capabilities {spec!r}: {exc}") from exc


def _cmd_validate(args) -> int:
    r = _resolve(args, {"data": None}, required=("data",))
    dataset = load_dataset(r["data"])
    warnings: list[str] = []
    names = [a.name for a in dataset.arms]
    if len(set(names)) != len(names):
        warnings.append("duplicate arm names in roster")
    for arm in dataset.arms:
        if arm.price_per_1k_tokens == 0:
            warnings.append(f"arm {arm.name!r} has price 0")
    for rec in dataset.records:
        if not np.all(np.isfinite(rec.embedding)):
            raise DataError(f"record {rec.query_id!r}: embedding has non-finite values")
        if rec.token_counts and max(rec.token_counts) == 0:
            warnings.append(f"record {rec.query_id!r}: all token counts are zero")
    for w in warnings:
        print(f"warning: {w}")
    print(
        f"ok: {len(dataset.records)} records, {dataset.n_arms} arms, "
        f"dim {dataset.embedding_dim}, encoder {dataset.encoder or '-'}, "
        f"{len(warnings)} warnings"
    )
    return 0


def _cmd_train(args) -> int:
    defaults = dict(_TRAIN_DEFAULTS, data=None, out=None)
    r = _resolve(args, defaults, required=("data", "out"))
    dataset = load_dataset(r["data"])
    model = train(dataset, _train_config(r))
    out = Path(r["out"])
    save_model(model, out)
    _manifest("train", r, out)
    print(f"trained on {len(dataset.records)} records -> {out}")
    return 0


def _cmd_calibrate(args) -> int:
    defaults = dict(
        _TRAIN_DEFAULTS,
        train_path=None, val=None, budget=None, slack=0.0, grid="default", out_dir=None,
    )
    r = _resolve(args, defaults, required=("train_path", "val", "budget", "out_dir"))
    train_set = load_dataset(r["train_path"])
    val_set = load_dataset(r["val"])
    budget = BudgetSpec(budget=Decimal(str(r["budget"])), slack=r["slack"])
    config = _train_config(r)
    p_star, models = calibrate_p(train_set, val_set, budget, config, _parse_grid(r["grid"]))
    out_dir = Path(r["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, model in enumerate(models):
        save_model(model, out_dir / f"model_seed{config.seed + i}.json")
    val_costs = [evaluate(m, val_set).total_spend for m in models]
    mean_cost = sum(val_costs, Decimal(0)) / len(val_costs)
    summary = {
        "p": p_star,
        "budget": str(budget.budget),
        "slack": budget.slack,
        "mean_validation_cost": str(mean_cost),
        "models": [f"model_seed{config.seed + i}.json" for i in range(len(models))],
    }
    atomic_write_text(out_dir / "p_star.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _manifest("calibrate", r, out_dir / "calibrate")
    print(f"p = {p_star} (mean validation cost {mean_cost} <= {budget.ceiling()})")
    return 0


def _cmd_evaluate(args) -> int:
    defaults = {"model": None, "baseline_arm": None, "data": None, "out": None}
    r = _resolve(args, defaults, required=("data",))
    dataset = load_dataset(r["data"])
    if (r["model"] is None) == (r["baseline_arm"] is None):
        raise _UsageError("evaluate needs exactly one of --model or --baseline-arm")
    if r["baseline_arm"] is not None:
        report = single_arm_baseline(r["baseline_arm"], dataset)
    else:
        models = [load_model(path) for path in r["model"]]
        runs = [evaluate(m, dataset) for m in models]
        report = runs[0] if len(runs) == 1 else aggregate_reports(runs)
    payload = report_to_dict(report)
    if r["out"]:
        out = Path(r["out"])
        atomic_write_text(out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
        _manifest("evaluate", r, out)
    print(
        f"accuracy {report.test_accuracy:.4f}  cost/10k {payload['cost_per_10k']}  "
        f"runs {report.n_runs}"
    )
    return 0


def _cmd_sweep(args) -> int:
    defaults = dict(
        _TRAIN_DEFAULTS, train_path=None, test=None, grid="default", jobs=1, out=None
    )
    r = _resolve(args, defaults, required=("train_path", "test", "out"))
    train_set = load_dataset(r["train_path"])
    test_set = load_dataset(r["test"])
    config = _train_config(r)
    grid = _parse_grid(r["grid"])
    if r["jobs"] > 1:
        # Each grid cell is independent; assembly stays a deterministic
        # reduction regardless of completion order.
        with ThreadPoolExecutor(max_workers=r["jobs"]) as pool:
            cells = list(
                pool.map(
                    lambda p: frontier_sweep(train_set, test_set, (p,), config)[0], grid
                )
            )
        rows = sorted(cells, key=lambda row: -row.p)
    else:
        rows = frontier_sweep(train_set, test_set, grid, config)
    out = Path(r["out"])
    write_frontier_report(out, rows, test_set.arms)
    summary = {
        "format": "frontier-report",
        "version": 1,
        "arms": [a.name for a in test_set.arms],
        "rows": [report_to_dict(row) for row in rows],
    }
    atomic_write_text(
        out.with_suffix(out.suffix + ".json"),
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
    )
    _manifest("sweep", r, out)
    print(f"swept {len(rows)} p values -> {out}")
    return 0


def _cmd_oracle(args) -> int:
    defaults = {"data": None, "p": None, "budget": None, "out": None}
    r = _resolve(args, defaults, required=("data", "out"))
    dataset = load_dataset(r["data"])
    if (r["p"] is None) == (r["budget"] is None):
        raise _UsageError("oracle needs exactly one of --p or --budget")
    arms = dataset.arms
    if r["p"] is not None:
        p_used = r["p"]
        norm = [a.normalized_cost for a in arms]
        assignment = [
            threshold_route(rec.correctness, norm, p_used) for rec in dataset.records
        ]
    else:
        dollars = np.array(
            [
                [float(token_cost(a.price_per_1k_tokens, rec.token_counts[j]))
                 for j, a in enumerate(arms)]
                for rec in dataset.records
            ]
        )
        problem = BudgetProblem(
            accuracy=dataset.accuracy_matrix(), costs=dollars, budget=float(r["budget"])
        )
        solution = solve_budgeted(problem)
        p_used = solution.p_star
        assignment = list(solution.assignment)
    lines = ["query_id\tarm_id\tarm_name\tcorrect\tcost"]
    spend = Decimal(0)
    hits = 0
    for rec, j in zip(dataset.records, assignment):
        cost = token_cost(arms[j].price_per_1k_tokens, rec.token_counts[j])
        spend += cost
        hits += rec.correctness[j]
        lines.append(f"{rec.query_id}\t{j}\t{arms[j].name}\t{rec.correctness[j]}\t{cost}")
    out = Path(r["out"])
    atomic_write_text(out, "\n".join(lines) + "\n")
    n = len(dataset.records)
    summary = {
        "p": p_used,
        "accuracy": hits / n if n else 0.0,
        "total_spend": str(spend),
        "cost_per_10k": str((spend * 10000 / n) if n else Decimal(0)),
    }
    atomic_write_text(
        out.with_suffix(out.suffix + ".json"),
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
    )
    _manifest("oracle", r, out)
    print(f"oracle p={p_used}: accuracy {summary['accuracy']:.4f}, spend {spend}")
    return 0


def _cmd_hetero(args) -> int:
    r = _resolve(args, {"data": None, "out": None}, required=("data", "out"))
    dataset = load_dataset(r["data"])
    matrix = heterogeneity_matrix(dataset)
    names = [a.name for a in dataset.arms]
    lines = ["\t".join(["arm"] + names)]
    for i, name in enumerate(names):
        lines.append("\t".join([name] + [str(int(v)) for v in matrix[i]]))
    out = Path(r["out"])
    atomic_write_text(out, "\n".join(lines) + "\n")
    _manifest("hetero", r, out)
    print(f"wrote {len(names)}x{len(names)} matrix -> {out}")
    return 0


def _cmd_plot(args) -> int:
    r = _resolve(
        args, {"kind": None, "input": None, "row": 0, "out": None},
        required=("kind", "input", "out"),
    )
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(r["input"])
    try:
        header, *rows = [
            line.split("\t") for line in path.read_text().strip().splitlines()
        ]
    except OSError as exc:
        raise DataError(f"cannot read report {path}: {exc}") from exc
    fig, ax = plt.subplots(figsize=(7, 5))
    if r["kind"] == "frontier":
        cost = [float(row[header.index("cost_per_10k")]) for row in rows]
        acc = [float(row[header.index("acc_mean")]) for row in rows]
        ax.plot(cost, acc, marker="o")
        for row, x, y in zip(rows, cost, acc):
            ax.annotate(f"p={row[0]}", (x, y), fontsize=8)
        ax.set_xscale("log")
        ax.set_xlabel("cost per 10k queries ($)")
        ax.set_ylabel("accuracy")
        ax.set_title("cost/accuracy frontier")
    elif r["kind"] == "hetero":
        names = header[1:]
        matrix = np.array([[int(v) for v in row[1:]] for row in rows])
        im = ax.imshow(matrix, cmap="viridis")
        ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
        ax.set_yticks(range(len(names)), names)
        for i in range(len(names)):
            for j in range(len(names)):
                ax.text(j, i, str(matrix[i, j]), ha="center", va="center", color="w")
        fig.colorbar(im, ax=ax)
        ax.set_title("right-here, wrong-there counts")
    else:  # selection
        row = rows[r["row"]]
        names = [c.split(":", 1)[1] for c in header if c.startswith("sel_correct:")]
        correct = [int(row[header.index(f"sel_correct:{n}")]) for n in names]
        wrong = [int(row[header.index(f"sel_incorrect:{n}")]) for n in names]
        xs = np.arange(len(names))
        ax.bar(xs - 0.2, correct, width=0.4, label="correct")
        ax.bar(xs + 0.2, wrong, width=0.4, label="incorrect")
        ax.set_xticks(xs, names, rotation=30, ha="right")
        ax.set_ylabel("times selected")
        ax.set_title(f"arm selections (p={row[0]})")
        ax.legend()
    fig.tight_layout()
    out = Path(r["out"])
    tmp = out.with_name(out.name + ".tmp")
    fig.savefig(tmp, dpi=120, format="png")
    plt.close(fig)
    tmp.replace(out)
    print(f"wrote {out}")
    return 0


def _cmd_serve(args) -> int:
    r = _resolve(
        args,
        {"gateway_config": None, "model": None, "host": "127.0.0.1", "port": 8080},
        required=("gateway_config", "model"),
    )
    import uvicorn

    from .gateway import create_app, load_gateway_config

    config = load_gateway_config(r["gateway_config"])
    model = load_model(r["model"])
    app = create_app(config, model)
    uvicorn.run(app, host=r["host"], port=r["port"], log_level="info")
    return 0


if __name__ == "__main__":
    sys.exit(main())
