"""Command-line pipeline driver.

Subcommands cover the whole workflow: ``prepare`` builds and persists splits
plus the normalized augmented graph, ``estimate-factors`` prints the shifting
and scaling factors, ``train``/``evaluate`` run the propagation model,
``grid-search`` sweeps (kappa, mu, delta), ``spectrum`` emits eigenvalue and
importance tables, ``noise-exp`` measures robustness to side-information
noise, and ``graph info`` inspects a persisted graph file.

Every command is driven by a JSON run config (``--config``) whose fields can
be overridden by flags. Outputs embed the config echo plus content hashes of
the input files, and contain no timestamps, so re-running a command with the
same config and seed reproduces the artifacts byte for byte.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
"""

import argparse
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data_io import (DataFormatError, inject_edge_noise, inject_feature_noise,
                      load_features, load_interactions, load_social_edges,
                      load_splits, save_features, save_splits, split_dataset)
from .evaluation import evaluate
from .filters import FILTER_KINDS, FilterSpec, propagate
from .graph import (KnnConfig, assemble_augmented, build_bipartite,
                    build_knn_graph, graph_info, load_graph, rescale_social,
                    save_graph, sym_normalize)
from .plots import (plot_grid_heatmap, plot_noise_curve, plot_spectrum_shift,
                    plot_training_history)
from .spectral import (SscFactors, estimate_factors, make_shifted_operator,
                       spectrum_shift_report)
from .synthetic import two_community_dataset
from .train import (TrainConfig, load_checkpoint, save_checkpoint, train_loop,
                    write_history_csv)

SIDE_MODES = ("none", "social", "multimodal", "both")
FACTOR_MODES = ("manual", "estimated")

MU_GRID = tuple(round(0.05 * i, 2) for i in range(9))            # 0.0 .. 0.4
DELTA_GRID = tuple(round(0.4 + 0.05 * i, 2) for i in range(13))  # 0.4 .. 1.0
SOCIAL_KAPPA_GRID = tuple(round(0.25 * i, 2) for i in range(7))  # 0.0 .. 1.5
MULTIMODAL_KAPPA_GRID = (0, 5, 10, 15, 20)

FEATURE_NOISE_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
EDGE_NOISE_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)

METRIC_KEYS = ("recall@10", "recall@20", "ndcg@10", "ndcg@20")


class UsageError(Exception):
    """Bad invocation or config; reported with exit code 2."""


@dataclass
class RunConfig:
    """Pipeline parameters for one run; serialized as JSON.

    ``kappa`` is the social edge-weight rescale and ``knn_kappa`` the
    multimodal neighbor count; each applies only when the matching side mode
    is active. Manual factor mode requires mu and delta; estimated mode
    ignores any provided values and recomputes them from the graph.
    """

    interactions: str
    output_dir: str = "run"
    side_mode: str = "none"
    social_edges: str | None = None
    features: tuple = ()
    kappa: float = 0.0
    knn_kappa: int = 0
    similarity: str = "inner"
    modality_weights: dict | None = None
    factor_mode: str = "manual"
    mu: float | None = 0.0
    delta: float | None = 1.0
    filter: FilterSpec = field(default_factory=lambda: FilterSpec("lightgcn", 2))
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    min_interactions: int = 5
    rating_threshold: float = 4.0
    split_ratios: tuple = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if self.side_mode not in SIDE_MODES:
            raise ValueError(f"side_mode must be one of {SIDE_MODES}, got {self.side_mode!r}")
        if self.factor_mode not in FACTOR_MODES:
            raise ValueError(f"factor_mode must be one of {FACTOR_MODES}, got {self.factor_mode!r}")
        if self.side_mode in ("social", "both") and not self.social_edges:
            raise ValueError(f"side_mode {self.side_mode!r} needs a social_edges path")
        if self.side_mode in ("multimodal", "both") and not self.features:
            raise ValueError(f"side_mode {self.side_mode!r} needs feature paths")
        if self.kappa < 0 or self.knn_kappa < 0:
            raise ValueError("kappa and knn_kappa must be >= 0")
        self.features = tuple(self.features)
        self.split_ratios = tuple(self.split_ratios)
        if self.factor_mode == "manual":
            if self.mu is None or self.delta is None:
                raise ValueError("manual factor mode requires both mu and delta")
            if self.delta <= 0:
                raise ValueError("delta must be > 0")
        else:
            self.mu = None
            self.delta = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        allowed = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ValueError(f"unknown run-config fields: {unknown}")
        if isinstance(data.get("filter"), dict):
            data["filter"] = FilterSpec.from_dict(data["filter"])
        if "train" in data and isinstance(data["train"], dict):
            train = dict(data["train"])
            train.setdefault("seed", int(data.get("seed", 0)))
            data["train"] = TrainConfig(**train)
        elif "train" not in data:
            data["train"] = TrainConfig(seed=int(data.get("seed", 0)))
        return cls(**data)


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    try:
        return RunConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None


# --- pipeline assembly -------------------------------------------------------

def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()[:16]


def _provenance(config: RunConfig) -> dict:
    inputs = {}
    candidates = [config.interactions, config.social_edges, *config.features]
    for entry in candidates:
        if entry is None:
            continue
        path = Path(entry)
        if path.is_dir():
            for child in sorted(path.iterdir()):
                if child.is_file():
                    inputs[str(child)] = _sha256(child)
        elif path.is_file():
            inputs[str(path)] = _sha256(path)
    return {"config": config.to_dict(), "inputs": inputs}


def _load_dataset(config: RunConfig):
    path = Path(config.interactions)
    if not path.exists():
        raise UsageError(f"interactions path not found: {path}")
    if path.is_dir():
        return load_splits(path)
    raw = load_interactions(path, min_interactions=config.min_interactions,
                            rating_threshold=config.rating_threshold)
    return split_dataset(raw, ratios=config.split_ratios, seed=config.seed)


def _load_side_info(config: RunConfig, dataset):
    social = None
    features = None
    if config.side_mode in ("social", "both"):
        if not Path(config.social_edges).exists():
            raise UsageError(f"social edges file not found: {config.social_edges}")
        social = load_social_edges(config.social_edges, dataset.user_id_map)
    if config.side_mode in ("multimodal", "both"):
        for entry in config.features:
            if not Path(entry).exists():
                raise UsageError(f"feature file not found: {entry}")
        features = [load_features(entry) for entry in config.features]
        for fm in features:
            if fm.num_items != dataset.num_items:
                raise UsageError(
                    f"feature matrix {fm.modality_name!r} has {fm.num_items} rows "
                    f"but the dataset has {dataset.num_items} items")
    return social, features


def _assemble(config: RunConfig, dataset, social, features):
    """Normalized augmented adjacency per the configured side mode."""
    bipartite = build_bipartite(dataset.train, dataset.num_users, dataset.num_items)
    user_block = None
    item_block = None
    if social is not None:
        user_block = rescale_social(social, config.kappa)
    if features is not None:
        knn = KnnConfig(kappa=config.knn_kappa,
                        modality_weights=config.modality_weights,
                        similarity=config.similarity)
        item_block = build_knn_graph(features, knn)
    augmented = assemble_augmented(bipartite, user_block=user_block,
                                   item_block=item_block)
    return sym_normalize(augmented, num_users=dataset.num_users)


def _resolve_factors(config: RunConfig, adj) -> SscFactors:
    if config.factor_mode == "estimated":
        return estimate_factors(adj)
    return SscFactors(mu=config.mu, delta=config.delta,
                      lambda_min_est=config.mu - config.delta)


def _factors_dict(factors: SscFactors) -> dict:
    return {"lambda_min_est": factors.lambda_min_est,
            "mu": factors.mu, "delta": factors.delta}


def _run_training(config: RunConfig, dataset, adj):
    factors = _resolve_factors(config, adj)
    op = make_shifted_operator(adj, factors.mu, factors.delta)
    embeddings, history = train_loop(dataset, op, config.filter, config.train)
    return factors, op, embeddings, history


def _print(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


# --- subcommands -------------------------------------------------------------

def cmd_prepare(args) -> int:
    config = _config_from_args(args)
    dataset = _load_dataset(config)
    social, features = _load_side_info(config, dataset)
    adj = _assemble(config, dataset, social, features)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_splits(dataset, out / "splits")
    save_graph(adj.matrix, out / "graph.bin")
    info = graph_info(adj.matrix)
    meta = {"info": info, **_provenance(config)}
    (out / "graph_meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n")
    _print(info)
    return 0


def cmd_estimate_factors(args) -> int:
    config = _config_from_args(args)
    dataset = _load_dataset(config)
    social, features = _load_side_info(config, dataset)
    adj = _assemble(config, dataset, social, features)
    factors = estimate_factors(adj)
    _print(_factors_dict(factors))
    if args.write:
        if not args.config:
            raise UsageError("--write needs a --config file to update")
        path = Path(args.config)
        data = json.loads(path.read_text())
        data.update(factor_mode="manual", mu=factors.mu, delta=factors.delta)
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_train(args) -> int:
    config = _config_from_args(args)
    dataset = _load_dataset(config)
    social, features = _load_side_info(config, dataset)
    adj = _assemble(config, dataset, social, features)
    factors, op, embeddings, history = _run_training(config, dataset, adj)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.json").write_text(
        json.dumps(_provenance(config), indent=2, sort_keys=True) + "\n")
    metadata = {"factors": _factors_dict(factors),
                "filter": config.filter.to_dict(),
                "best_val_ndcg@20": max(row["ndcg@20"] for row in history)}
    save_checkpoint(embeddings, metadata, out / "embeddings.f32")
    write_history_csv(history, out / "history.csv")
    plot_training_history(history, out / "history.png")

    final = propagate(op, embeddings.values.astype(np.float64), config.filter)
    report = evaluate(final, dataset, "val")
    (out / "metrics_val.json").write_text(report.to_json() + "\n")
    _print({"factors": _factors_dict(factors), **report.to_dict()})
    return 0


def cmd_evaluate(args) -> int:
    config = _config_from_args(args)
    checkpoint = Path(args.checkpoint or Path(config.output_dir) / "embeddings.f32")
    if not checkpoint.exists():
        raise UsageError(f"checkpoint not found: {checkpoint}")
    dataset = _load_dataset(config)
    social, features = _load_side_info(config, dataset)
    adj = _assemble(config, dataset, social, features)
    factors = _resolve_factors(config, adj)
    op = make_shifted_operator(adj, factors.mu, factors.delta)

    embeddings, _ = load_checkpoint(checkpoint)
    if embeddings.values.shape[0] != dataset.num_nodes:
        raise UsageError(
            f"checkpoint has {embeddings.values.shape[0]} rows but the dataset "
            f"has {dataset.num_nodes} nodes")
    final = propagate(op, embeddings.values.astype(np.float64), config.filter)
    report = evaluate(final, dataset, args.split)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"metrics_{args.split}.tsv").write_text(report.to_tsv())
    print(report.to_tsv(), end="")
    return 0


def build_grid(side_mode, kappas=None, mus=None, deltas=None):
    """(kappa, mu, delta) cells for the hyperparameter sweep, in search order.

    The default kappa grid depends on the side mode: neighbor counts for
    multimodal, edge-weight rescales for social (also used when both side
    graphs are active, holding the neighbor count fixed), and the single
    value 0 when no side information is configured.
    """
    if kappas is None:
        if side_mode == "multimodal":
            kappas = MULTIMODAL_KAPPA_GRID
        elif side_mode in ("social", "both"):
            kappas = SOCIAL_KAPPA_GRID
        else:
            kappas = (0.0,)
    mus = MU_GRID if mus is None else tuple(mus)
    deltas = DELTA_GRID if deltas is None else tuple(deltas)
    return [(float(k), float(m), float(d))
            for k in kappas for m in mus for d in deltas]


def _cell_config(config: RunConfig, kappa, mu, delta) -> RunConfig:
    updates = {"factor_mode": "manual", "mu": mu, "delta": delta}
    if config.side_mode == "multimodal":
        updates["knn_kappa"] = int(round(kappa))
    elif config.side_mode in ("social", "both"):
        updates["kappa"] = kappa
    return dataclasses.replace(config, **updates)


def cmd_grid_search(args) -> int:
    config = _config_from_args(args)
    dataset = _load_dataset(config)
    social, features = _load_side_info(config, dataset)
    cells = build_grid(config.side_mode, kappas=args.kappas,
                       mus=args.mus, deltas=args.deltas)

    adj_cache = {}

    def adj_for(kappa):
        if kappa not in adj_cache:
            adj_cache[kappa] = _assemble(_cell_config(config, kappa, 0.0, 1.0),
                                         dataset, social, features)
        return adj_cache[kappa]

    if args.around_estimate:
        kept = []
        for kappa in sorted({k for k, _, _ in cells}):
            est = estimate_factors(adj_for(kappa))
            kept.extend(
                (k, m, d) for k, m, d in cells
                if k == kappa and abs(m - est.mu) <= 0.1 + 1e-12
                and abs(d - est.delta) <= 0.1 + 1e-12)
        cells = kept
        if not cells:
            raise RuntimeError("around-estimate pruning removed every grid cell")

    rows = []
    best = None
    best_embeddings = None
    best_op_spec = None
    for kappa, mu, delta in cells:
        cell = _cell_config(config, kappa, mu, delta)
        adj = adj_for(kappa)
        factors, op, embeddings, history = _run_training(cell, dataset, adj)
        val_metric = max(row["ndcg@20"] for row in history)
        row = {"kappa": kappa, "mu": mu, "delta": delta,
               "val_ndcg@20": val_metric,
               "val_recall@20": max(r["recall@20"] for r in history),
               "epochs_run": len(history)}
        rows.append(row)
        print(f"kappa={kappa:g} mu={mu:g} delta={delta:g} "
              f"val_ndcg@20={val_metric:.6f}")
        if best is None or val_metric > best["val_ndcg@20"]:
            best = row
            best_embeddings = embeddings
            best_op_spec = (op, cell.filter)

    # test metrics once, for the selected cell only
    op, spec = best_op_spec
    final = propagate(op, best_embeddings.values.astype(np.float64), spec)
    test_report = evaluate(final, dataset, "test")

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = "kappa,mu,delta,val_ndcg@20,val_recall@20,epochs_run"
    lines = [header] + [
        f"{r['kappa']:g},{r['mu']:g},{r['delta']:g},"
        f"{r['val_ndcg@20']:.8f},{r['val_recall@20']:.8f},{r['epochs_run']}"
        for r in rows]
    (out / "grid.csv").write_text("\n".join(lines) + "\n")
    plot_grid_heatmap(rows, out / "grid_heatmap.png")
    summary = {"best": best, "test": test_report.to_dict(),
               **_provenance(config)}
    (out / "grid_best.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _print({"best": best, "test": test_report.to_dict()})
    return 0


def cmd_spectrum(args) -> int:
    config = _config_from_args(args)
    if config.side_mode not in ("social", "multimodal"):
        raise UsageError("spectrum diagnostics need side_mode social or multimodal")
    dataset = _load_dataset(config)
    social, features = _load_side_info(config, dataset)
    if args.kappas is not None:
        kappas = tuple(args.kappas)
    elif config.side_mode == "social":
        kappas = (0.0, 0.5, 1.0)
    else:
        kappas = (0, 5, 10)
    knn = KnnConfig(kappa=config.knn_kappa,
                    modality_weights=config.modality_weights,
                    similarity=config.similarity)
    reports = spectrum_shift_report(dataset, kappas, social_edges=social,
                                    features=features, knn_config=knn)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for report in reports:
        lines = ["eigenvalue,importance"] + [
            f"{lam:.10f},{imp:.10f}"
            for lam, imp in zip(report.eigenvalues, report.importance)]
        (out / f"spectrum_kappa_{report.kappa:g}.csv").write_text(
            "\n".join(lines) + "\n")
    plot_spectrum_shift(reports, out / "spectrum.png")
    _print([{"kappa": r.kappa, "lambda_min": r.lambda_min,
             "lambda_max": r.lambda_max} for r in reports])
    return 0


def cmd_noise_exp(args) -> int:
    config = _config_from_args(args)
    if args.noise == "feature" and config.side_mode not in ("multimodal", "both"):
        raise UsageError("feature noise needs side_mode multimodal or both")
    if args.noise == "edge" and config.side_mode not in ("social", "both"):
        raise UsageError("edge noise needs side_mode social or both")
    deltas = tuple(args.deltas) if args.deltas is not None else (
        FEATURE_NOISE_GRID if args.noise == "feature" else EDGE_NOISE_GRID)
    dataset = _load_dataset(config)
    social, features = _load_side_info(config, dataset)

    rows = []
    aggregates = []
    for delta in deltas:
        per_seed = []
        for s in range(args.num_seeds):
            noisy_social, noisy_features = social, features
            if args.noise == "feature":
                noisy_features = [inject_feature_noise(fm, delta, seed=config.seed + s)
                                  for fm in features]
            else:
                noisy_social = inject_edge_noise(social, delta, seed=config.seed + s)
            run = dataclasses.replace(
                config, train=dataclasses.replace(config.train,
                                                  seed=config.train.seed + s))
            adj = _assemble(run, dataset, noisy_social, noisy_features)
            _, op, embeddings, _ = _run_training(run, dataset, adj)
            final = propagate(op, embeddings.values.astype(np.float64), run.filter)
            report = evaluate(final, dataset, "test")
            metrics = report.to_dict()
            per_seed.append(metrics)
            rows.append({"delta": delta, "seed": str(s),
                         **{k: metrics[k] for k in METRIC_KEYS}})
            print(f"delta={delta:g} seed={s} ndcg@20={metrics['ndcg@20']:.6f}")
        stacked = {k: np.array([m[k] for m in per_seed]) for k in METRIC_KEYS}
        for stat, fn in (("mean", np.mean), ("std", np.std)):
            rows.append({"delta": delta, "seed": stat,
                         **{k: float(fn(stacked[k])) for k in METRIC_KEYS}})
        aggregates.append({"delta": delta,
                           "mean": float(stacked["ndcg@20"].mean()),
                           "std": float(stacked["ndcg@20"].std())})

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = "delta,seed," + ",".join(METRIC_KEYS)
    lines = [header] + [
        f"{r['delta']:g},{r['seed']}," + ",".join(f"{r[k]:.8f}" for k in METRIC_KEYS)
        for r in rows]
    csv_path = out / f"noise_{args.noise}.csv"
    csv_path.write_text("\n".join(lines) + "\n")
    plot_noise_curve([a["delta"] for a in aggregates],
                     [a["mean"] for a in aggregates],
                     [a["std"] for a in aggregates],
                     out / f"noise_{args.noise}.png")
    _print(aggregates)
    return 0


def cmd_graph_info(args) -> int:
    if args.graph:
        path = Path(args.graph)
    else:
        config = _config_from_args(args)
        path = Path(config.output_dir) / "graph.bin"
    if not path.exists():
        raise UsageError(f"graph file not found: {path} (run prepare first?)")
    _print(graph_info(load_graph(path)))
    return 0


def cmd_make_fixture(args) -> int:
    """Generate a ready-to-run two-community dataset with item features."""
    dataset, features = two_community_dataset(
        num_users=args.num_users, num_items=args.num_items,
        interactions_per_user=args.per_user, within_prob=args.within_prob,
        feature_noise=args.feature_noise, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_splits(dataset, out / "splits")
    save_features(features[0], out / "features_community.f32")
    config = RunConfig(
        interactions=str(out / "splits"),
        output_dir=str(out / "run"),
        side_mode="multimodal",
        features=(str(out / "features_community.f32"),),
        knn_kappa=5,
        factor_mode="estimated",
        filter=FilterSpec("lightgcn", 2),
        train=TrainConfig(learning_rate=1e-2, batch_size=512, dim=32,
                          epochs=30, patience=10, seed=args.seed),
        seed=args.seed)
    (out / "config.json").write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    _print({"splits": str(out / "splits"),
            "features": str(out / "features_community.f32"),
            "config": str(out / "config.json")})
    return 0


# --- argument parsing --------------------------------------------------------

_SIMPLE_OVERRIDES = (
    ("interactions", "interactions"),
    ("out", "output_dir"),
    ("side_mode", "side_mode"),
    ("social_edges", "social_edges"),
    ("kappa", "kappa"),
    ("knn_kappa", "knn_kappa"),
    ("similarity", "similarity"),
    ("mu", "mu"),
    ("delta", "delta"),
    ("factor_mode", "factor_mode"),
    ("seed", "seed"),
)

_FILTER_OVERRIDES = (("filter_kind", "kind"), ("num_layers", "num_layers"),
                     ("jacobi_a", "a"), ("jacobi_b", "b"))

_TRAIN_OVERRIDES = (("lr", "learning_rate"), ("batch_size", "batch_size"),
                    ("dim", "dim"), ("epochs", "epochs"),
                    ("patience", "patience"), ("l2", "l2"))


def _config_from_args(args) -> RunConfig:
    data = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc})") from None
    for attr, key in _SIMPLE_OVERRIDES:
        value = getattr(args, attr, None)
        if value is not None:
            data[key] = value
    if getattr(args, "features", None):
        data["features"] = list(args.features)
    filter_over = {key: getattr(args, attr, None) for attr, key in _FILTER_OVERRIDES}
    if any(v is not None for v in filter_over.values()):
        merged = dict(data.get("filter") or {"kind": "lightgcn", "num_layers": 2})
        merged.update({k: v for k, v in filter_over.items() if v is not None})
        data["filter"] = merged
    train_over = {key: getattr(args, attr, None) for attr, key in _TRAIN_OVERRIDES}
    if any(v is not None for v in train_over.values()):
        merged = dict(data.get("train") or {})
        merged.update({k: v for k, v in train_over.items() if v is not None})
        data["train"] = merged
    if "interactions" not in data:
        raise UsageError("an interactions path is required (--config or --interactions)")
    try:
        return RunConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid run config: {exc}") from None


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config; flags override its fields")
    common.add_argument("--interactions", help="interactions TSV or prepared splits dir")
    common.add_argument("--out", help="output directory")
    common.add_argument("--side-mode", dest="side_mode", choices=SIDE_MODES)
    common.add_argument("--social-edges", dest="social_edges")
    common.add_argument("--features", nargs="+", help="feature binary paths")
    common.add_argument("--kappa", type=float, help="social edge-weight rescale")
    common.add_argument("--knn-kappa", dest="knn_kappa", type=int,
                        help="multimodal neighbor count")
    common.add_argument("--similarity", choices=("inner", "cosine"))
    common.add_argument("--mu", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--factor-mode", dest="factor_mode", choices=FACTOR_MODES)
    common.add_argument("--filter-kind", dest="filter_kind", choices=FILTER_KINDS)
    common.add_argument("--num-layers", dest="num_layers", type=int)
    common.add_argument("--jacobi-a", dest="jacobi_a", type=float)
    common.add_argument("--jacobi-b", dest="jacobi_b", type=float)
    common.add_argument("--lr", type=float)
    common.add_argument("--batch-size", dest="batch_size", type=int)
    common.add_argument("--dim", type=int)
    common.add_argument("--epochs", type=int)
    common.add_argument("--patience", type=int)
    common.add_argument("--l2", type=float)
    common.add_argument("--seed", type=int)
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="speccf",
        description="Spectrum-corrected graph collaborative filtering pipeline")
    sub = parser.add_subparsers(dest="command", metavar="command")
    common = _common_parser()

    p = sub.add_parser("prepare", parents=[common],
                       help="build and persist splits plus the normalized graph")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("estimate-factors", parents=[common],
                       help="print power-iteration mu/delta estimates")
    p.add_argument("--write", action="store_true",
                   help="write the estimates back into the config file")
    p.set_defaults(func=cmd_estimate_factors)

    p = sub.add_parser("train", parents=[common],
                       help="train embeddings and save a checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score a checkpoint on a held-out split")
    p.add_argument("--checkpoint", help="embedding table (default <out>/embeddings.f32)")
    p.add_argument("--split", choices=("val", "test"), default="test")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid-search", parents=[common],
                       help="sweep kappa/mu/delta by validation NDCG@20")
    p.add_argument("--around-estimate", action="store_true",
                   help="restrict mu/delta to +-0.1 of the per-kappa estimates")
    p.add_argument("--kappas", nargs="+", type=float)
    p.add_argument("--mus", nargs="+", type=float)
    p.add_argument("--deltas", nargs="+", type=float)
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("spectrum", parents=[common],
                       help="emit eigenvalue/importance tables for a kappa sweep")
    p.add_argument("--kappas", nargs="+", type=float)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("noise-exp", parents=[common],
                       help="re-train under side-information noise")
    p.add_argument("--noise", choices=("feature", "edge"), required=True)
    p.add_argument("--deltas", nargs="+", type=float)
    p.add_argument("--num-seeds", dest="num_seeds", type=int, default=5)
    p.set_defaults(func=cmd_noise_exp)

    p = sub.add_parser("graph", help="graph file utilities")
    gsub = p.add_subparsers(dest="graph_command", metavar="action")
    info = gsub.add_parser("info", parents=[common],
                           help="print stats for a persisted graph")
    info.add_argument("--graph", help="graph file (default <out>/graph.bin)")
    info.set_defaults(func=cmd_graph_info)

    p = sub.add_parser("make-fixture",
                       help="generate a two-community dataset with features")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-users", dest="num_users", type=int, default=200)
    p.add_argument("--num-items", dest="num_items", type=int, default=120)
    p.add_argument("--per-user", dest="per_user", type=int, default=20)
    p.add_argument("--within-prob", dest="within_prob", type=float, default=0.9)
    p.add_argument("--feature-noise", dest="feature_noise", type=float, default=0.5)
    p.set_defaults(func=cmd_make_fixture)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    if not hasattr(args, "func"):
        parser.print_help(file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
