"""Command-line interface: each pipeline stage as a subcommand.

Subcommands: synth, ingest, featurize, lrfind, train-ae, train-vae,
score, generate, eval, pipeline. Exit codes: 0 ok, 1 runtime/numeric
failure, 2 usage/config error.

Configuration is flat ``key=value`` text; CLI flags override file keys.
Every text artifact starts with a comment line recording the tool
version, a config hash, and the seed, so results can be traced back.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from . import __version__, ae, features, ingest, metrics, nn_core, synthgen, vae
from .errors import ConfigError, InsiderKitError


@dataclass
class RunConfig:
    """Flat pipeline configuration; see README for key meanings."""

    seed: int = 1
    out_dir: str = "out"
    data_dir: str = ""  # empty -> <out_dir>/data
    synth: bool = True
    users: int = 100
    insiders: int = 10
    days: int = 60
    start_date: str = "2010-01-04"
    sample_n: int = 5000
    ratio: float = 0.75
    pad_to: int = 50
    pad: bool = True
    label_as_feature: bool = False
    lr: str = "auto"
    lr_min: float = 1e-5
    lr_max: float = 1.0
    lr_steps: int = 100
    ae_epochs: int = 30
    ae_batch: int = 256
    ae_bottleneck: int = 16
    ae_loss: str = "bce"
    vae_epochs: int = 200
    vae_batch: int = 128
    latent: int = 2
    kl_weight: float = 1.0
    vae_score_samples: int = 0
    train_on: str = "benign"  # benign | all
    threshold_strategy: str = "max-f1"  # max-f1 | quantile
    quantile_q: float = 0.95
    calib_frac: float = 0.25


_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _CONFIG_FIELDS[key].type
    raw = raw.strip()
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"config key {key}: expected a boolean, got {raw!r}")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"config key {key}: expected {kind}, got {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def load_run_config(
    path: str | Path | None, overrides: dict | None = None
) -> RunConfig:
    values: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        values.update(parse_config_text(path.read_text(encoding="utf-8")))
    for key, raw in (overrides or {}).items():
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, str(raw))
    return RunConfig(**values)


def config_hash(cfg: RunConfig) -> str:
    canonical = "\n".join(
        f"{k}={getattr(cfg, k)}" for k in sorted(_CONFIG_FIELDS)
    )
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def _meta(seed: int, cfg_hash: str) -> dict:
    return {"tool": f"insiderkit/{__version__}", "config": cfg_hash, "seed": seed}


def _args_hash(args: argparse.Namespace) -> str:
    pairs = sorted(
        f"{k}={v}" for k, v in vars(args).items() if k not in ("func", "command")
    )
    return hashlib.sha256("\n".join(pairs).encode()).hexdigest()[:12]


def _require_file(path: str | Path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


def _write_scores_csv(path: Path, scores, labels, meta: dict) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(features.comment_header(meta))
        writer = csv.writer(fh)
        writer.writerow(["index", "score", "label"])
        for i, (s, l) in enumerate(zip(scores, labels)):
            writer.writerow([i, repr(float(s)), int(l)])


def _read_scores_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    scores, labels = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["index", "score", "label"]:
            raise ConfigError(f"{path}: expected header index,score,label")
        for row in reader:
            scores.append(float(row[1]))
            labels.append(int(row[2]))
    return np.array(scores), np.array(labels, dtype=np.int64)


def _write_curve_csv(path: Path, curve, suggested: float, meta: dict) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(features.comment_header({**meta, "suggested_lr": repr(suggested)}))
        writer = csv.writer(fh)
        writer.writerow(["step", "lr", "smoothed_loss"])
        for i, (rate, loss) in enumerate(curve):
            writer.writerow([i, repr(rate), repr(loss)])


def _load_events_labeled(
    data_dir: Path, sample_n: int, roster: set[str]
) -> list[features.EncodedEvent]:
    raw = ingest.load_corpus(data_dir, sample_n)
    encoded = [features.encode_event(e) for e in raw]
    return features.label_insiders(encoded, roster)


def _roster_from(path: Path | None, data_dir: Path | None) -> set[str]:
    if path is not None:
        return set(synthgen.read_ground_truth(_require_file(path, "roster file")))
    if data_dir is not None:
        candidate = data_dir / "ground_truth.csv"
        if candidate.exists():
            return set(synthgen.read_ground_truth(candidate))
    return set()


def _auto_lr_ae(model: ae.AeModel, X, args_lr: str, lr_min, lr_max, steps, seed) -> float:
    if args_lr != "auto":
        return float(args_lr)
    _, suggested = nn_core.lr_finder(
        model.net, X, X, lr_min, lr_max, steps, loss=model.loss, seed=seed
    )
    return suggested


def _auto_lr_vae(model: vae.VaeModel, X, args_lr: str, lr_min, lr_max, steps, seed) -> float:
    if args_lr != "auto":
        return float(args_lr)
    _, suggested = vae.lr_finder_vae(model, X, lr_min, lr_max, steps, seed=seed)
    return suggested


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args: argparse.Namespace) -> int:
    meta = _meta(args.seed, _args_hash(args))
    params = synthgen.DEFAULT_SCENARIO_PARAMS
    if args.scenario_set:
        overrides = {}
        valid = {f.name for f in dataclasses.fields(synthgen.ScenarioParams)}
        for item in args.scenario_set:
            key, sep, raw = item.partition("=")
            if not sep or key not in valid:
                raise ConfigError(f"unknown scenario parameter {item!r}")
            current = getattr(params, key)
            try:
                if isinstance(current, tuple):
                    overrides[key] = tuple(int(v) for v in raw.split(","))
                elif isinstance(current, int):
                    overrides[key] = int(raw)
                else:
                    overrides[key] = float(raw)
            except ValueError:
                raise ConfigError(f"bad value for scenario parameter {key}: {raw!r}") from None
        params = dataclasses.replace(params, **overrides)
    start = date.fromisoformat(args.start_date)
    _, truth = synthgen.gen_dataset(
        args.users, args.insiders, args.days, args.seed, args.out,
        params=params, start_date=start, meta=meta,
    )
    print(
        f"wrote corpus to {args.out}: {args.users} users, "
        f"{len(truth.roster)} insiders, {args.days} days"
    )
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    data_dir = _require_file(args.data, "data directory")
    roster = _roster_from(Path(args.roster) if args.roster else None, data_dir)
    events = _load_events_labeled(data_dir, args.sample, roster)
    meta = _meta(args.seed, _args_hash(args))
    features.write_events_csv(args.out, events, meta)
    positives = sum(e.insider for e in events)
    print(f"wrote {len(events)} events to {args.out} ({positives} insider-labeled)")
    return 0


def cmd_featurize(args: argparse.Namespace) -> int:
    events = features.read_events_csv(_require_file(args.events, "events file"))
    X, y = features.vectorize(
        events, pad_to=args.pad_to, pad=not args.no_pad,
        label_as_feature=args.label_as_feature,
    )
    split = features.train_test_split(X, y, args.ratio, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    features.write_vectors(out_dir / "train.bin", split.train_x, split.train_y)
    features.write_vectors(out_dir / "test.bin", split.test_x, split.test_y)
    if args.csv:
        meta = _meta(args.seed, _args_hash(args))
        features.write_vectors_csv(out_dir / "train.csv", split.train_x, split.train_y, meta)
        features.write_vectors_csv(out_dir / "test.csv", split.test_x, split.test_y, meta)
    print(
        f"split {X.shape[0]} vectors (width {X.shape[1]}) into "
        f"{split.train_x.shape[0]} train / {split.test_x.shape[0]} test"
    )
    return 0


def cmd_lrfind(args: argparse.Namespace) -> int:
    X, _ = features.read_vectors(_require_file(args.train, "training file"))
    X = X.astype(np.float64)
    model = ae.build_ae(X.shape[1], args.bottleneck, seed=args.seed)
    curve, suggested = nn_core.lr_finder(
        model.net, X, X, args.lr_min, args.lr_max, args.steps,
        batch_size=args.batch, seed=args.seed,
    )
    if args.out:
        _write_curve_csv(Path(args.out), curve, suggested, _meta(args.seed, _args_hash(args)))
    print(f"suggested lr: {suggested:.6g} (swept {len(curve)} steps)")
    return 0


def _filter_benign(X: np.ndarray, y: np.ndarray, benign_only: bool) -> np.ndarray:
    if not benign_only:
        return X
    benign = X[y == 0]
    if benign.shape[0] == 0:
        raise ConfigError("no benign rows to train on")
    return benign


def cmd_train_ae(args: argparse.Namespace) -> int:
    X, y = features.read_vectors(_require_file(args.train, "training file"))
    X = _filter_benign(X.astype(np.float64), y, args.benign_only)
    model = ae.build_ae(X.shape[1], args.bottleneck, seed=args.seed, loss=args.loss)
    lr = _auto_lr_ae(model, X, args.lr, args.lr_min, args.lr_max, args.lr_steps, args.seed)
    cfg = nn_core.TrainConfig(
        epochs=args.epochs, batch_size=args.batch, lr=lr, seed=args.seed, loss=args.loss
    )
    ae.train_ae(model, X, cfg)
    ae.save_ae(args.out, model)
    if args.history:
        nn_core.write_history_csv(
            args.history, model.history, _meta(args.seed, _args_hash(args))
        )
    print(
        f"trained autoencoder on {X.shape[0]} vectors for {args.epochs} epochs "
        f"(lr {lr:.6g}, final loss {model.history[-1]:.6f}) -> {args.out}"
    )
    return 0


def cmd_train_vae(args: argparse.Namespace) -> int:
    X, y = features.read_vectors(_require_file(args.train, "training file"))
    X = _filter_benign(X.astype(np.float64), y, args.benign_only)
    model = vae.build_vae(
        X.shape[1], latent_dim=args.latent, seed=args.seed, kl_weight=args.kl_weight
    )
    lr = _auto_lr_vae(model, X, args.lr, args.lr_min, args.lr_max, args.lr_steps, args.seed)
    cfg = nn_core.TrainConfig(
        epochs=args.epochs, batch_size=args.batch, lr=lr, seed=args.seed
    )
    vae.train_vae(model, X, cfg)
    vae.save_vae(args.out, model)
    if args.history:
        nn_core.write_history_csv(
            args.history, model.history, _meta(args.seed, _args_hash(args))
        )
    print(
        f"trained variational model on {X.shape[0]} vectors for {args.epochs} epochs "
        f"(lr {lr:.6g}, final loss {model.history[-1]:.6f}) -> {args.out}"
    )
    return 0


def _load_any_model(path: Path):
    with path.open("rb") as fh:
        magic = fh.read(4)
    if magic == ae.AE_MAGIC:
        return ae.load_ae(path)
    if magic == vae.VAE_MAGIC:
        return vae.load_vae(path)
    raise ConfigError(f"{path}: unrecognized model file")


def _model_scores(model, X: np.ndarray, n_samples: int, seed: int) -> np.ndarray:
    if isinstance(model, ae.AeModel):
        return np.asarray(ae.reconstruction_error(model, X))
    return np.asarray(vae.vae_score(model, X, n_samples=n_samples, seed=seed))


def cmd_score(args: argparse.Namespace) -> int:
    model = _load_any_model(_require_file(args.model, "model file"))
    X, y = features.read_vectors(_require_file(args.data, "data file"))
    scores = _model_scores(model, X.astype(np.float64), args.n_samples, args.seed)
    _write_scores_csv(Path(args.out), scores, y, _meta(args.seed, _args_hash(args)))
    print(f"scored {len(scores)} vectors -> {args.out}")
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    model = vae.load_vae(_require_file(args.model, "model file"))
    samples = vae.generate(model, n=args.n, seed=args.seed)
    with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
        fh.write(features.comment_header(_meta(args.seed, _args_hash(args))))
        writer = csv.writer(fh)
        writer.writerow([f"b{i}" for i in range(samples.shape[1])])
        for row in samples:
            writer.writerow([f"{v:.6f}" for v in row])
    print(f"generated {args.n} samples -> {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    names = args.names or [f"model-{i}" for i in range(len(args.scores))]
    if len(names) != len(args.scores):
        raise ConfigError("--names must match --scores in count")
    thresholds = args.thresholds or ["auto"] * len(args.scores)
    if len(thresholds) == 1 and len(args.scores) > 1:
        thresholds = thresholds * len(args.scores)
    if len(thresholds) != len(args.scores):
        raise ConfigError("--thresholds must match --scores in count")

    reports = []
    for path, name, thr in zip(args.scores, names, thresholds):
        scores, labels = _read_scores_csv(_require_file(Path(path), "scores file"))
        if thr == "auto":
            threshold = ae.calibrate_threshold(
                scores, labels, strategy=args.strategy, q=args.quantile_q
            )
        else:
            threshold = float(thr)
        preds = (scores > threshold).astype(np.int64)
        reports.append(metrics.EvalReport.from_predictions(name, preds, labels))

    table = metrics.render_report(reports)
    meta = _meta(args.seed, _args_hash(args))
    if args.out:
        Path(args.out).write_text(features.comment_header(meta) + table, encoding="utf-8")
    if args.json:
        payload = {**meta, "models": [r.to_dict() for r in reports]}
        Path(args.json).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    print(table, end="")
    return 0


# ---------------------------------------------------------------------------
# Full pipeline


def run_pipeline(cfg: RunConfig) -> dict:
    """Execute every stage; returns the report payload written to JSON."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_hash = config_hash(cfg)
    meta = _meta(cfg.seed, cfg_hash)
    data_dir = Path(cfg.data_dir) if cfg.data_dir else out_dir / "data"
    stage = "synth"
    try:
        if cfg.synth:
            print(f"[synth] {cfg.users} users, {cfg.insiders} insiders, {cfg.days} days")
            synthgen.gen_dataset(
                cfg.users, cfg.insiders, cfg.days, cfg.seed, data_dir,
                start_date=date.fromisoformat(cfg.start_date), meta=meta,
            )
        elif not data_dir.is_dir():
            raise ConfigError(f"data directory not found: {data_dir}")

        stage = "ingest"
        roster = _roster_from(None, data_dir)
        events = _load_events_labeled(data_dir, cfg.sample_n, roster)
        features.write_events_csv(out_dir / "events.csv", events, meta)
        print(f"[ingest] {len(events)} events, {sum(e.insider for e in events)} insider-labeled")

        stage = "featurize"
        X, y = features.vectorize(
            events, pad_to=cfg.pad_to, pad=cfg.pad, label_as_feature=cfg.label_as_feature
        )
        split = features.train_test_split(X, y, cfg.ratio, cfg.seed)
        features.write_vectors(out_dir / "train.bin", split.train_x, split.train_y)
        features.write_vectors(out_dir / "test.bin", split.test_x, split.test_y)
        n_train = split.train_x.shape[0]
        n_calib = max(1, min(n_train - 1, int(n_train * cfg.calib_frac + 0.5)))
        fit_x = split.train_x[: n_train - n_calib].astype(np.float64)
        fit_y = split.train_y[: n_train - n_calib]
        calib_x = split.train_x[n_train - n_calib :].astype(np.float64)
        calib_y = split.train_y[n_train - n_calib :]
        train_x = _filter_benign(fit_x, fit_y, cfg.train_on == "benign")
        print(f"[featurize] {X.shape[0]} vectors, {train_x.shape[0]} fit / {n_calib} calibration")

        stage = "lrfind"
        ae_model = ae.build_ae(X.shape[1], cfg.ae_bottleneck, seed=cfg.seed, loss=cfg.ae_loss)
        vae_model = vae.build_vae(
            X.shape[1], latent_dim=cfg.latent, seed=cfg.seed, kl_weight=cfg.kl_weight
        )
        if cfg.lr == "auto":
            ae_curve, ae_lr = nn_core.lr_finder(
                ae_model.net, train_x, train_x, cfg.lr_min, cfg.lr_max, cfg.lr_steps,
                batch_size=cfg.ae_batch, loss=cfg.ae_loss, seed=cfg.seed,
            )
            vae_curve, vae_lr = vae.lr_finder_vae(
                vae_model, train_x, cfg.lr_min, cfg.lr_max, cfg.lr_steps,
                batch_size=cfg.vae_batch, seed=cfg.seed,
            )
            _write_curve_csv(out_dir / "lr_curve_ae.csv", ae_curve, ae_lr, meta)
            _write_curve_csv(out_dir / "lr_curve_vae.csv", vae_curve, vae_lr, meta)
            print(f"[lrfind] suggested lr: ae {ae_lr:.6g}, vae {vae_lr:.6g}")
        else:
            ae_lr = vae_lr = float(cfg.lr)

        stage = "train-ae"
        ae_cfg = nn_core.TrainConfig(
            epochs=cfg.ae_epochs, batch_size=cfg.ae_batch, lr=ae_lr,
            seed=cfg.seed, loss=cfg.ae_loss,
        )
        ae.train_ae(ae_model, train_x, ae_cfg)
        nn_core.write_history_csv(out_dir / "ae_history.csv", ae_model.history, meta)
        print(f"[train-ae] {cfg.ae_epochs} epochs, final loss {ae_model.history[-1]:.6f}")

        stage = "train-vae"
        vae_cfg = nn_core.TrainConfig(
            epochs=cfg.vae_epochs, batch_size=cfg.vae_batch, lr=vae_lr, seed=cfg.seed
        )
        vae.train_vae(vae_model, train_x, vae_cfg)
        nn_core.write_history_csv(out_dir / "vae_history.csv", vae_model.history, meta)
        print(f"[train-vae] {cfg.vae_epochs} epochs, final loss {vae_model.history[-1]:.6f}")

        stage = "score"
        reports = []
        for name, model in (
            ("Autoencoder (AE)", ae_model),
            ("Variational Autoencoder (VAE)", vae_model),
        ):
            calib_scores = _model_scores(model, calib_x, cfg.vae_score_samples, cfg.seed)
            threshold = ae.calibrate_threshold(
                calib_scores, calib_y, strategy=cfg.threshold_strategy, q=cfg.quantile_q
            )
            model.threshold = threshold
            tag = "ae" if isinstance(model, ae.AeModel) else "vae"
            _write_scores_csv(
                out_dir / f"{tag}_calibration_scores.csv", calib_scores, calib_y, meta
            )
            test_scores = _model_scores(
                model, split.test_x.astype(np.float64), cfg.vae_score_samples, cfg.seed
            )
            _write_scores_csv(out_dir / f"{tag}_scores.csv", test_scores, split.test_y, meta)
            preds = (test_scores > threshold).astype(np.int64)
            reports.append(metrics.EvalReport.from_predictions(name, preds, split.test_y))
            print(f"[score] {name}: threshold {threshold:.6f}")
        ae.save_ae(out_dir / "ae.model", ae_model)
        vae.save_vae(out_dir / "vae.model", vae_model)

        stage = "eval"
        table = metrics.render_report(reports)
        (out_dir / "report.txt").write_text(
            features.comment_header(meta) + table, encoding="utf-8"
        )
        payload = {**meta, "models": [r.to_dict() for r in reports]}
        (out_dir / "report.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(table, end="")
        return payload
    except InsiderKitError as exc:
        raise type(exc)(f"pipeline failed at stage {stage}: {exc}") from None


def cmd_pipeline(args: argparse.Namespace) -> int:
    overrides = {}
    for item in args.set or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = raw.strip()
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    cfg = load_run_config(args.config, overrides)
    run_pipeline(cfg)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="insiderkit",
        description="Insider-threat detection pipeline on CERT-style audit logs",
    )
    parser.add_argument("--version", action="version", version=f"insiderkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", help="generate a synthetic log corpus")
    p.add_argument("--users", type=int, default=100)
    p.add_argument("--insiders", type=int, default=10)
    p.add_argument("--days", type=int, default=60)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory for the CSV files")
    p.add_argument("--start-date", default="2010-01-04")
    p.add_argument(
        "--scenario-set", action="append", metavar="KEY=VALUE",
        help="override a scenario parameter (repeatable)",
    )
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="parse, sample and merge the log files")
    p.add_argument("--data", required=True, help="directory with the seven CSV files")
    p.add_argument("--out", required=True, help="merged events.csv path")
    p.add_argument("--roster", help="ground_truth.csv naming the insiders")
    p.add_argument("--sample", type=int, default=ingest.DEFAULT_SAMPLE_N)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("featurize", help="one-hot encode events and split train/test")
    p.add_argument("--events", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ratio", type=float, default=0.75)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--pad-to", type=int, default=features.DEFAULT_PAD_TO)
    p.add_argument("--no-pad", action="store_true", help="keep the natural 38-bit width")
    p.add_argument("--label-as-feature", action="store_true",
                   help="append the insider label as an input bit")
    p.add_argument("--csv", action="store_true", help="also emit 0/1 CSV copies")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("lrfind", help="learning-rate range test")
    p.add_argument("--train", required=True)
    p.add_argument("--lr-min", type=float, default=1e-5)
    p.add_argument("--lr-max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--bottleneck", type=int, default=None)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", help="write the (lr, smoothed loss) curve here")
    p.set_defaults(func=cmd_lrfind)

    p = sub.add_parser("train-ae", help="train the autoencoder")
    p.add_argument("--train", required=True)
    p.add_argument("--epochs", type=int, default=ae.DEFAULT_AE_EPOCHS)
    p.add_argument("--batch", type=int, default=ae.DEFAULT_AE_BATCH)
    p.add_argument("--lr", default="auto", help="'auto' or a float")
    p.add_argument("--lr-min", type=float, default=1e-5)
    p.add_argument("--lr-max", type=float, default=1.0)
    p.add_argument("--lr-steps", type=int, default=100)
    p.add_argument("--bottleneck", type=int, default=None,
                   help="defaults to the input width (no compression)")
    p.add_argument("--loss", choices=("bce", "mse"), default="bce")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--benign-only", action="store_true",
                   help="train on label-0 rows only")
    p.add_argument("--out", required=True)
    p.add_argument("--history", help="write epoch,loss CSV here")
    p.set_defaults(func=cmd_train_ae)

    p = sub.add_parser("train-vae", help="train the variational autoencoder")
    p.add_argument("--train", required=True)
    p.add_argument("--epochs", type=int, default=vae.DEFAULT_VAE_EPOCHS)
    p.add_argument("--batch", type=int, default=vae.DEFAULT_VAE_BATCH)
    p.add_argument("--latent", type=int, default=vae.DEFAULT_LATENT_DIM)
    p.add_argument("--kl-weight", type=float, default=1.0)
    p.add_argument("--lr", default="auto", help="'auto' or a float")
    p.add_argument("--lr-min", type=float, default=1e-5)
    p.add_argument("--lr-max", type=float, default=1.0)
    p.add_argument("--lr-steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--benign-only", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--history")
    p.set_defaults(func=cmd_train_vae)

    p = sub.add_parser("score", help="score vectors with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-samples", type=int, default=0,
                   help="latent draws per score (variational models only)")
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("generate", help="sample new vectors from a trained VAE")
    p.add_argument("--model", required=True)
    p.add_argument("-n", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="confusion metrics from score files")
    p.add_argument("--scores", nargs="+", required=True)
    p.add_argument("--names", nargs="+")
    p.add_argument("--threshold", dest="thresholds", nargs="+",
                   help="'auto' or floats, one per scores file")
    p.add_argument("--strategy", choices=("max-f1", "quantile"), default="max-f1")
    p.add_argument("--quantile-q", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", help="plain-text report path")
    p.add_argument("--json", help="JSON report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InsiderKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
