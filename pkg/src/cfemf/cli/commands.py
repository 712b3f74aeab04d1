"""The four CLI commands: simulate, dataset, train and bench."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..experiments import evaluate, make_sample, parse_policy, run_policy
from ..ml.dataset import Dataset, read_dataset, split_tags, write_dataset
from ..ml.mlp import E2E_DL_HIDDEN, E2E_UL_HIDDEN, UNFOLDED_HIDDEN
from ..ml.models import PowerMLPRegressor, UnfoldedPowerNet, load_model, save_model
from ..pipeline import build_snapshot, trial_seed
from .config import ConfigError, ExperimentConfig

__all__ = ["cmd_simulate", "cmd_dataset", "cmd_train", "cmd_bench", "fmt"]

log = logging.getLogger(__name__)

PERCENTILES = (5, 10, 50, 90, 95)


def fmt(value):
    """Float text that round-trips exactly (17 significant digits)."""
    return "%.17g" % float(value)


def _policy_file(name):
    return name.replace("(", "-").replace(")", "") + ".csv"


def _write_text(path, text):
    tmp = f"{path}.part"
    try:
        with open(tmp, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _write_json(path, doc):
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _map(fn, jobs, workers):
    """Ordered map, in-process for one worker."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# models are loaded once per worker process
_MODEL_CACHE = {}


def _load_models(cfg: ExperimentConfig):
    models = {}
    for family, path in (("e2e-dnn", cfg.e2e_model), ("u-dnn", cfg.unfolded_model)):
        if path:
            if path not in _MODEL_CACHE:
                _MODEL_CACHE[path] = load_model(path)[0]
            models[family] = _MODEL_CACHE[path]
    return models


def _check_models(cfg: ExperimentConfig):
    for name in cfg.policies:
        family, _ = parse_policy(name)
        if family == "e2e-dnn" and not cfg.e2e_model:
            raise ConfigError("policy e2e-dnn needs [experiment] e2e_model (or --model)")
        if family == "u-dnn" and not cfg.unfolded_model:
            raise ConfigError("policy u-dnn needs [experiment] unfolded_model (or --model)")
        if family == "opc-lse" and cfg.direction != "dl":
            raise ConfigError("opc-lse is a downlink policy")


# simulate ---------------------------------------------------------------------

def _simulate_trial(job):
    cfg, trial = job
    snap = build_snapshot(cfg.system, trial_seed(cfg.seed, trial), beamformer=cfg.beamformer)
    models = _load_models(cfg)
    out = {}
    for name in cfg.policies:
        outcome = run_policy(name, snap, cfg.direction, cfg.solver, models)
        if outcome.failed:
            out[name] = {"failed": True, "message": outcome.message,
                         "wall_time": outcome.wall_time}
            continue
        ev = evaluate(snap, outcome.allocation, cfg.direction, cfg.evaluation)
        out[name] = {"failed": False, "rate": ev["rate"], "ipd": ev["ipd"], "sar": ev["sar"],
                     "violations": ev["violations"], "wall_time": outcome.wall_time}
    return out


def cmd_simulate(cfg: ExperimentConfig):
    """Monte Carlo evaluation of every configured policy.

    Writes one CSV per policy (trial, ue, rate_bps, ipd_wm2, sar_wkg) and
    ``summary.json``. Failed trials appear as rows of ``nan``.
    """
    _check_models(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    results = _map(_simulate_trial, [(cfg, t) for t in range(cfg.trials)], cfg.workers)
    K = cfg.system.num_ues
    summary = {"command": "simulate", "direction": cfg.direction,
               "beamformer": cfg.beamformer, "evaluation": cfg.evaluation,
               "trials": cfg.trials, "seed": cfg.seed, "policies": {}}
    for name in cfg.policies:
        rows, min_rates, times = [], [], []
        failures, messages = 0, []
        violations = {}
        for trial, res in enumerate(results):
            r = res[name]
            times.append(r["wall_time"])
            if r["failed"]:
                failures += 1
                messages.append(f"trial {trial}: {r['message']}")
                rows.extend([trial, k, "nan", "nan", "nan"] for k in range(K))
                continue
            min_rates.append(float(np.min(r["rate"])))
            for key, count in r["violations"].items():
                violations[key] = violations.get(key, 0) + int(count)
            for k in range(K):
                rows.append([trial, k, fmt(r["rate"][k]), fmt(r["ipd"][k]), fmt(r["sar"][k])])
        _write_text(os.path.join(cfg.out, _policy_file(name)),
                    _csv_text(["trial", "ue", "rate_bps", "ipd_wm2", "sar_wkg"], rows))
        stats = {"completed": len(min_rates), "failures": failures,
                 "failure_messages": messages[:20], "violations": violations,
                 "mean_wall_time_s": float(np.mean(times)) if times else None}
        if min_rates:
            stats["min_rate_percentiles_bps"] = {
                f"p{p}": float(v) for p, v in zip(PERCENTILES, np.percentile(min_rates, PERCENTILES))}
            stats["mean_min_rate_bps"] = float(np.mean(min_rates))
        summary["policies"][name] = stats
    _write_json(os.path.join(cfg.out, "summary.json"), summary)
    return summary


# dataset ------------------------------------------------------------------------

def _sample_job(job):
    cfg, trial = job
    sample = make_sample(cfg.system, trial_seed(cfg.seed, trial), cfg.direction,
                         beamformer=cfg.beamformer, solver=cfg.solver,
                         unfold=cfg.unfold and cfg.direction == "dl")
    return trial, sample


def dataset_paths(cfg: ExperimentConfig):
    base = os.path.join(cfg.out, f"dataset_{cfg.direction}.cfd")
    return base, os.path.join(cfg.out, f"dataset_{cfg.direction}_lse_trace.cfd")


def cmd_dataset(cfg: ExperimentConfig):
    """Solve ``cfg.samples`` scenarios and store FPC features with optimal powers.

    Scenarios whose solver fails are skipped (and counted); trial indices keep
    increasing so the output depends only on the seed.
    """
    os.makedirs(cfg.out, exist_ok=True)
    path, trace_path = dataset_paths(cfg)
    feats, labels, traces, trials = [], [], [], []
    skipped, next_trial = 0, 0
    limit = 2 * cfg.samples + 100
    while len(feats) < cfg.samples:
        want = cfg.samples - len(feats)
        if next_trial + want > limit:
            raise RuntimeError(f"too many solver failures ({skipped}) while building the dataset")
        jobs = [(cfg, t) for t in range(next_trial, next_trial + want)]
        next_trial += want
        for trial, sample in _map(_sample_job, jobs, cfg.workers):
            if sample is None:
                skipped += 1
                continue
            feats.append(sample.features)
            labels.append(sample.label)
            traces.append(sample.trace)
            trials.append(trial)

    s = cfg.system
    dim_in = s.cluster_size * s.num_ues if cfg.direction == "dl" else s.num_ues
    X = np.array(feats).reshape(len(feats), dim_in)
    Y = np.array(labels).reshape(len(labels), dim_in)
    meta = {"kind": "samples", "direction": cfg.direction, "beamformer": cfg.beamformer,
            "seed": cfg.seed, "num_ues": s.num_ues, "cluster_size": s.cluster_size,
            "system": s.to_dict(), "solver": cfg.solver.to_dict(),
            "solver_hash": cfg.solver.digest(), "label_solver": "opc-maximin",
            "trials": trials, "skipped": skipped}
    written = [path]
    try:
        write_dataset(path, Dataset(X, Y, meta))
        if cfg.unfold and cfg.direction == "dl":
            # rows: (sample index, iteration) -> LSE iterate on the serving links
            rows_in, rows_out = [], []
            for i, trace in enumerate(traces):
                for it, x in enumerate(trace, start=1):
                    rows_in.append([i, it])
                    rows_out.append(x)
            tmeta = dict(meta, kind="lse-trace", columns_in=["sample", "iteration"])
            write_dataset(trace_path, Dataset(np.array(rows_in, dtype=float).reshape(-1, 2),
                                              np.array(rows_out).reshape(-1, dim_in), tmeta))
            written.append(trace_path)
    except BaseException:
        for p in written:
            for q in (p, f"{p}.json"):
                if os.path.exists(q):
                    os.remove(q)
        raise
    return {"path": path, "rows": len(feats), "skipped": skipped,
            "trace_path": trace_path if len(written) > 1 else None}


# train ---------------------------------------------------------------------------

def _expected_dims(cfg: ExperimentConfig):
    s = cfg.system
    return s.cluster_size * s.num_ues if cfg.direction == "dl" else s.num_ues


def cmd_train(cfg: ExperimentConfig):
    """Train the configured network on ``cfg.dataset``; writes model JSON and loss CSV."""
    if not cfg.dataset:
        raise ConfigError("train needs a dataset (--dataset or [experiment] dataset)")
    try:
        ds = read_dataset(cfg.dataset)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read dataset: {exc}") from None
    dim = _expected_dims(cfg)
    if ds.meta.get("direction", cfg.direction) != cfg.direction:
        raise ConfigError(f"dataset direction {ds.meta.get('direction')!r} does not match "
                          f"configured direction {cfg.direction!r}")
    if ds.X.shape[1] != dim or ds.Y.shape[1] != dim:
        raise ConfigError(f"dataset has {ds.X.shape[1]}/{ds.Y.shape[1]} columns, "
                          f"the {cfg.direction} network expects {dim}")
    if cfg.model == "unfolded" and cfg.direction != "dl":
        raise ConfigError("the unfolded network is downlink only")

    tcfg = cfg.train_config()
    common = dict(learning_rate=tcfg.lr, lr_decay=tcfg.lr_decay, decay_epochs=tcfg.decay_epochs,
                  max_epochs=tcfg.max_epochs, batch_size=tcfg.batch_size, l2=tcfg.l2,
                  floor_dbm=cfg.floor_dbm, random_state=tcfg.seed)
    if cfg.model == "unfolded":
        model = UnfoldedPowerNet(n_stages=cfg.stages, hidden_layer_sizes=UNFOLDED_HIDDEN, **common)
    else:
        hidden = E2E_DL_HIDDEN if cfg.direction == "dl" else E2E_UL_HIDDEN
        model = PowerMLPRegressor(hidden_layer_sizes=hidden, **common)
    Xtr, Ytr = ds.split("train")
    Xva, Yva = ds.split("val")
    Xte, Yte = ds.split("test")
    model.fit(Xtr, Ytr, Xva, Yva)

    os.makedirs(cfg.out, exist_ok=True)
    stem = f"{cfg.model}_{cfg.direction}"
    model_path = os.path.join(cfg.out, f"model_{stem}.json")
    provenance = {"dataset": os.path.abspath(cfg.dataset), "dataset_meta": {
        k: ds.meta.get(k) for k in ("direction", "seed", "solver_hash", "beamformer")},
        "train": tcfg.to_dict(), "splits": {t: int(np.sum(split_tags(ds.n_rows) == t))
                                            for t in ("train", "val", "test")}}
    save_model(model_path, model, provenance)

    stages = model.stages_ if cfg.model == "unfolded" else [model]
    rows = []
    for i, stage in enumerate(stages, start=1):
        for rec in stage.history_:
            rows.append([i, rec["epoch"], fmt(rec["lr"]), fmt(rec["train_loss"]),
                         fmt(rec["val_loss"])])
    curves_path = os.path.join(cfg.out, f"curves_{stem}.csv")
    _write_text(curves_path, _csv_text(["stage", "epoch", "lr", "train_loss", "val_loss"], rows))

    report = {"model": model_path, "curves": curves_path, "rows": ds.n_rows}
    if len(Xte):
        if cfg.model == "unfolded":
            report["test_mae_per_stage"] = model.staged_normalized_mae(Xte, Yte)
        else:
            report["test_mae"] = model.normalized_mae(Xte, Yte)
    _write_json(os.path.join(cfg.out, f"train_{stem}.json"), report)
    return report


# bench ------------------------------------------------------------------------------

def untrained_model(cfg: ExperimentConfig, X):
    """A network with the right layout and random weights (for timing only)."""
    hidden = E2E_DL_HIDDEN if cfg.direction == "dl" else E2E_UL_HIDDEN
    model = PowerMLPRegressor(hidden_layer_sizes=hidden, max_epochs=0, random_state=cfg.seed)
    X = np.atleast_2d(X)
    return model.fit(X, np.abs(X) + 1e-9)


def _bench_models(cfg: ExperimentConfig, snaps):
    from ..ml.dataset import dl_features, ul_features

    models = _load_models(cfg)
    need = {parse_policy(p)[0] for p in cfg.policies}
    if "e2e-dnn" in need and "e2e-dnn" not in models:
        feats = []
        for snap in snaps:
            a, assoc = snap.large_scale.alpha, snap.association
            feats.append(dl_features(a, assoc, cfg.system)[0] if cfg.direction == "dl"
                         else ul_features(a, assoc, cfg.system))
        models["e2e-dnn"] = untrained_model(cfg, np.array(feats))
    if "u-dnn" in need and "u-dnn" not in models:
        raise ConfigError("u-dnn timing needs a trained unfolded model")
    return models


def cmd_bench(cfg: ExperimentConfig):
    """Mean and standard deviation of the wall time of every policy.

    Runs in-process on the same scenarios for every policy (timings from a
    worker pool would interfere with each other).
    """
    if cfg.direction != "dl":
        for name in cfg.policies:
            if parse_policy(name)[0] == "opc-lse":
                raise ConfigError("opc-lse is a downlink policy")
    os.makedirs(cfg.out, exist_ok=True)
    snaps = [build_snapshot(cfg.system, trial_seed(cfg.seed, t), beamformer=cfg.beamformer)
             for t in range(cfg.trials)]
    models = _bench_models(cfg, snaps) if snaps else {}
    times = {name: [] for name in cfg.policies}
    failures = {name: 0 for name in cfg.policies}
    for snap in snaps:
        for name in cfg.policies:
            outcome = run_policy(name, snap, cfg.direction, cfg.solver, models)
            times[name].append(outcome.wall_time)
            failures[name] += int(outcome.failed)
    rows = []
    if snaps:
        for name in cfg.policies:
            t = np.array(times[name])
            rows.append([name, len(t), fmt(t.mean()), fmt(t.std())])
    _write_text(os.path.join(cfg.out, "bench.csv"),
                _csv_text(["policy", "trials", "mean_s", "std_s"], rows))

    means = {name: float(np.mean(v)) for name, v in times.items() if v}
    summary = {"command": "bench", "direction": cfg.direction, "trials": cfg.trials,
               "mean_s": means, "failures": failures}
    dnn = [v for k, v in means.items() if parse_policy(k)[0] in ("e2e-dnn", "u-dnn")]
    if dnn and "opc-lse" in means and "opc-maximin" in means:
        ratio = means["opc-maximin"] / means["opc-lse"]
        summary["ordering"] = {
            "dnn_lt_lse_lt_maximin": bool(max(dnn) < means["opc-lse"] < means["opc-maximin"]),
            "maximin_over_lse": ratio,
            "ratio_below_one": bool(ratio < 1.0),
        }
    _write_json(os.path.join(cfg.out, "bench_summary.json"), summary)
    return summary
