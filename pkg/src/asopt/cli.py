"""Command-line entry point.

One JSON config drives each command; --set key=value overrides nested keys.
Every run writes the resolved config next to its outputs, all randomness is
derived from the single root seed, and reruns are byte-identical regardless
of the worker count (ASOPT_WORKERS).
"""

import argparse
import copy
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, cluster_core, debp, devo, dpng, epmc, mlp, sitgan
from . import dataset as ds
from .rng import subseed, substream


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config handling

DEFAULT_CONFIG = {
    "seed": 0,
    "out_dir": "asopt-run",
    "data": {
        "csv": None,
        "level": "phylum",
        "synthetic": None,  # {"kind": "regression"|"blobs", ...}
    },
    "predict": {
        "model": "both",  # bpnn | debp | both
        "splits": "paper3",  # or [[lo, hi], ...]
        "hidden": None,
        "alpha": 0,
        "gd": {"num_epoch": 1500, "learn_rate": 1e-2, "weight_decay": 1e-2},
        "de": {"pop_size": 20, "f0": 0.9, "cr": 0.4, "max_gen": 20},
    },
    "cluster": {
        "algo": "dpng",  # epmc | dpng | both
        "features": "all",
        "n_clusters": 10,
        "runs": 25,
        "pca_on": "centroids",  # centroids | instances
        "epmc": {
            "pop_size": 15, "elitnum": 2, "iterations": 100, "alpha": 0.8,
            "beta": 0.2, "radius": 2, "elite_pool": True, "accept_scale": None,
            "max_evals": None,
        },
        "dpng": {
            "w_start": 0.9, "w_end": 0.4, "sigma0": 5.0, "d0": 5.0,
            "eta_step": 0.8, "s": 1.0, "lambda_mix": 0.5,
            "pc_min": 0.5, "pc_max": 0.8, "pm_min": 0.005, "pm_max": 0.05,
            "p_elim": 0.05, "maxgen": 300, "enable_inertia": True,
            "enable_antenna": True, "enable_adaptive_ga": True,
            "enable_elim": True, "random_coeffs": True,
        },
    },
    "generate": {
        "n": 1186,
        "gan": {
            "hidden_dim": 24, "num_layer": 3, "iterations": 100, "lam": 1.0,
            "eta": 10.0, "batch_size": 128, "learn_rate": 0.1, "momentum": 0.9,
        },
    },
    "augment": {
        "sizes": [0, 100, 948],
        "seeds": [0, 1, 2],
        "models": ["bpnn", "debp"],
        "test_range": [0.8, 1.0],
        "gd": {"num_epoch": 1500, "learn_rate": 1e-2, "weight_decay": 1e-2},
        "de": {"pop_size": 20, "f0": 0.9, "cr": 0.4, "max_gen": 20},
        "gan": {
            "hidden_dim": 24, "num_layer": 3, "iterations": 100, "lam": 1.0,
            "eta": 10.0, "batch_size": 128, "learn_rate": 0.1, "momentum": 0.9,
        },
        "hidden": None,
    },
    "analyze": {
        "predictions_csv": None,
        "assignments_csv": None,
        "pca_components": 3,
        "mi_bins": 10,
    },
    "bench": {"quick": False},
}


def _merge_checked(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge_checked(base[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path, overrides=()):
    if path is None:
        user = {}
    else:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from None
    cfg = _merge_checked(DEFAULT_CONFIG, user)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got '{item}'")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"unknown config key: {key}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key: {key}")
        node[parts[-1]] = value
    return cfg


def workers_from_env() -> int:
    raw = os.environ.get("ASOPT_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"ASOPT_WORKERS must be an integer, got '{raw}'") from None


def _parallel_map(fn, jobs, workers):
    """Run jobs in a bounded pool; results are merged in submission order."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# ---------------------------------------------------------------------------
# deterministic writers


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(path: Path, payload):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _resolve_out_dir(cfg) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "resolved_config.json", cfg)
    return out


# ---------------------------------------------------------------------------
# data loading


def load_data(cfg) -> ds.Dataset:
    section = cfg["data"]
    if section.get("csv"):
        schema = ds.standard_schema(section.get("level", "phylum"))
        return ds.load_csv(section["csv"], schema)
    synth = section.get("synthetic")
    if not synth:
        raise ConfigError("config needs data.csv or data.synthetic")
    kind = synth.get("kind")
    seed = subseed(cfg["seed"], "data.synthetic")
    if kind == "regression":
        return ds.synth_regression(
            n=synth.get("n", 200),
            in_dim=synth.get("in_dim", 37),
            out_dim=synth.get("out_dim", 21),
            noise=synth.get("noise", 0.05),
            seed=synth.get("seed", seed),
        )
    if kind == "blobs":
        data, _ = ds.synth_blobs(
            k=synth.get("k", 3),
            per_cluster=synth.get("per_cluster", 50),
            dim=synth.get("dim", 5),
            separation=synth.get("separation", 10.0),
            seed=synth.get("seed", seed),
        )
        return data
    raise ConfigError(f"unknown synthetic kind: {kind!r}")


def _split_specs(spec):
    if spec == "paper3":
        return ds.paper_splits()
    return [ds.SplitSpec(lo, hi) for lo, hi in spec]


# ---------------------------------------------------------------------------
# commands


def cmd_predict(cfg) -> int:
    out = _resolve_out_dir(cfg)
    data = load_data(cfg)
    norm, norm_params = ds.minmax_normalize(data)
    (out / "norm_params.json").write_text(norm_params.to_json() + "\n", encoding="utf-8")
    section = cfg["predict"]
    models = ["bpnn", "debp"] if section["model"] == "both" else [section["model"]]
    splits = _split_specs(section["splits"])
    m = norm.schema.n_features
    n_out = norm.schema.n_targets
    hidden = section["hidden"] or mlp.hidden_size(m, n_out, section["alpha"])
    gd_base = mlp.GdConfig(seed=0, **section["gd"])
    de_base = devo.DeConfig(seed=0, **section["de"])

    def run_cell(job):
        model, split_idx = job
        spec = splits[split_idx]
        train, test = ds.split(norm, spec)
        gd_cfg = mlp.GdConfig(
            num_epoch=gd_base.num_epoch, learn_rate=gd_base.learn_rate,
            weight_decay=gd_base.weight_decay,
            seed=subseed(cfg["seed"], "predict.gd", split_idx),
        )
        if model == "bpnn":
            net = mlp.init_network(m, n_out, seed=gd_cfg.seed, hidden=hidden)
            net, curve = mlp.train_gd(net, train.features, train.targets, gd_cfg)
            de_hist = None
        else:
            de_cfg = devo.DeConfig(
                pop_size=de_base.pop_size, f0=de_base.f0, cr=de_base.cr,
                max_gen=de_base.max_gen,
                seed=subseed(cfg["seed"], "predict.de", split_idx),
            )
            net, de_res, curve = debp.train_debp(
                train.features, train.targets,
                debp.DebpConfig(de=de_cfg, gd=gd_cfg, net_shape=(m, hidden, n_out)),
            )
            de_hist = list(zip(de_res.history, de_res.mean_history))
        pred = mlp.forward(net, test.features)
        return model, split_idx, net, curve, de_hist, pred, test.targets

    jobs = [(model, i) for model in models for i in range(len(splits))]
    results = _parallel_map(run_cell, jobs, workers_from_env())

    mse_rows = []
    for model, split_idx, net, curve, de_hist, pred, obs in results:
        tag = f"{model}_split{split_idx}"
        (out / f"network_{tag}.json").write_text(net.to_json() + "\n", encoding="utf-8")
        write_csv(out / f"curve_{tag}.csv", ["epoch", "mse"],
                  [(i, v) for i, v in enumerate(curve)])
        if de_hist is not None:
            write_csv(out / f"de_history_{tag}.csv", ["generation", "best_fit", "mean_fit"],
                      [(i, b, mean) for i, (b, mean) in enumerate(de_hist)])
        pairs, slope, intercept = analysis.obs_pred_pairs(
            pred, obs, list(norm.schema.target_names))
        write_csv(out / f"predictions_{tag}.csv", ["otu", "observed", "predicted"], pairs)
        write_json(out / f"obs_pred_fit_{tag}.json", {"slope": slope, "intercept": intercept})
        table = analysis.mse_table(pred, obs)
        mse_rows.append((model, split_idx, table.overall))
        write_csv(out / f"mse_per_otu_{tag}.csv", ["otu", "mse"],
                  list(zip(norm.schema.target_names, table.per_column)))
        importance = mlp.garson_importance(net)
        write_csv(out / f"garson_{tag}.csv", ["feature", "importance"],
                  list(zip(norm.schema.feature_names, importance)))
    write_csv(out / "mse_table.csv", ["model", "split", "test_mse"], mse_rows)
    return 0


def _epmc_config(cfg, seed) -> epmc.EpmcConfig:
    section = cfg["cluster"]
    return epmc.EpmcConfig(
        n_clusters=section["n_clusters"], seed=seed, **section["epmc"])


def _dpng_config(cfg, seed) -> dpng.DpngConfig:
    section = cfg["cluster"]
    return dpng.DpngConfig(
        n_clusters=section["n_clusters"], seed=seed,
        **section["epmc"], **section["dpng"])


def cmd_cluster(cfg) -> int:
    out = _resolve_out_dir(cfg)
    data = load_data(cfg)
    norm, norm_params = ds.minmax_normalize(data)
    section = cfg["cluster"]
    cols = norm.schema.group_indices(section["features"])
    x = norm.features[:, cols]
    algos = ["epmc", "dpng"] if section["algo"] == "both" else [section["algo"]]
    runs = section["runs"]

    def run_one(job):
        algo, run_idx = job
        seed = subseed(cfg["seed"], "cluster", algo, run_idx)
        if algo == "epmc":
            return algo, run_idx, epmc.run_epmc(x, _epmc_config(cfg, seed))
        return algo, run_idx, dpng.run_dpng_epmc(x, _dpng_config(cfg, seed))

    jobs = [(algo, r) for algo in algos for r in range(runs)]
    results = _parallel_map(run_one, jobs, workers_from_env())

    summary = []
    for algo in algos:
        algo_results = [(r, res) for a, r, res in results if a == algo]
        best_run, best = min(algo_results, key=lambda item: item[1].best.fit)
        best_ind = best.best
        labels = cluster_core.assign(x, best_ind.h)
        write_csv(out / f"assignment_{algo}.csv", ["row_index", "cluster"],
                  list(enumerate(labels)))
        feature_names = [norm.schema.feature_names[i] for i in cols]
        write_csv(out / f"centroids_{algo}.csv", ["cluster"] + feature_names,
                  [(c, *best_ind.h[c]) for c in range(best_ind.h.shape[0])])
        if isinstance(best, dpng.DpngResult):
            header = ["iteration", "best_fit", "mean_fit", "n_elite",
                      "w_t", "sigma_t", "mean_pc", "mean_pm"]
            rows = [
                (i, best.history[i], best.mean_history[i], best.elite_counts[i],
                 best.w_history[i], best.sigma_history[i],
                 best.pc_history[i], best.pm_history[i])
                for i in range(len(best.history))
            ]
        else:
            header = ["iteration", "best_fit", "mean_fit", "n_elite"]
            rows = [
                (i, best.history[i], best.mean_history[i], best.elite_counts[i])
                for i in range(len(best.history))
            ]
        write_csv(out / f"history_{algo}.csv", header, rows)
        for run_idx, res in algo_results:
            summary.append((algo, run_idx, res.best.fit, res.evaluations))

        community, empty = analysis.core_community(labels, norm.targets)
        write_csv(out / f"core_community_{algo}.csv",
                  ["cluster"] + list(norm.schema.target_names),
                  [(c, *community[c]) for c in range(community.shape[0]) if not empty[c]])
        log_rows, _ = analysis.core_community(labels, norm.targets, log_view=True)
        write_csv(out / f"core_community_log_{algo}.csv",
                  ["cluster"] + list(norm.schema.target_names),
                  [(c, *log_rows[c]) for c in range(log_rows.shape[0]) if not empty[c]])

        pca_target = best_ind.h if section["pca_on"] == "centroids" else x
        p = min(3, pca_target.shape[0] - 1, pca_target.shape[1])
        if p >= 1:
            model = analysis.pca_fit(pca_target, p)
            scores = analysis.pca_project(model, pca_target)
            write_csv(out / f"pca_{section['pca_on']}_{algo}.csv",
                      ["row"] + [f"pc{i + 1}" for i in range(p)],
                      [(i, *scores[i]) for i in range(scores.shape[0])])

        effluent = norm.schema.group_indices("effluent")
        if len(effluent) and norm.schema.n_targets:
            mi_rows = []
            for fi in effluent:
                name = norm.schema.feature_names[fi]
                values = [
                    analysis.mutual_information(
                        norm.features[:, fi], norm.targets[:, tj],
                        bins=cfg["analyze"]["mi_bins"])
                    for tj in range(norm.schema.n_targets)
                ]
                mi_rows.append((name, *values))
            write_csv(out / f"mi_effluent_{algo}.csv",
                      ["feature"] + list(norm.schema.target_names), mi_rows)

    write_csv(out / "runs_summary.csv", ["algo", "run", "best_fit", "evaluations"], summary)
    if len(algos) == 2:
        paired = []
        for r in range(runs):
            fit_e = next(res.best.fit for a, rr, res in results if a == "epmc" and rr == r)
            fit_d = next(res.best.fit for a, rr, res in results if a == "dpng" and rr == r)
            paired.append((r, fit_e, fit_d))
        write_csv(out / "paired_comparison.csv", ["run", "epmc_fit", "dpng_fit"], paired)
    return 0


def _normalized_rows(data: ds.Dataset):
    """Feature- and target-normalized copies plus the target params."""
    norm, feat_params = ds.minmax_normalize(data)
    targets01, targ_params = ds.minmax_matrix(norm.targets, norm.schema.target_names)
    full = ds.Dataset(norm.features, targets01, norm.schema, norm_state="minmax")
    return full, feat_params, targ_params


def cmd_generate(cfg) -> int:
    out = _resolve_out_dir(cfg)
    data = load_data(cfg)
    full, feat_params, targ_params = _normalized_rows(data)
    gan_cfg = sitgan.GanConfig(seed=subseed(cfg["seed"], "gan.train"), **cfg["generate"]["gan"])
    quartet, curves = sitgan.train_sitgan(full, gan_cfg)
    write_csv(out / "gan_losses.csv",
              ["phase", "step", "reconstruction", "supervised", "adversarial"], curves)
    gen = sitgan.generate(quartet, cfg["generate"]["n"], substream(cfg["seed"], "gan.sample"))
    feats = ds.denormalize_matrix(gen.features, feat_params)
    targs = ds.denormalize_matrix(gen.targets, targ_params)
    header = list(data.schema.feature_names) + list(data.schema.target_names)
    write_csv(out / "generated.csv", header,
              [tuple(feats[i]) + tuple(targs[i]) for i in range(gen.n_rows)])
    return 0


def cmd_augment(cfg) -> int:
    out = _resolve_out_dir(cfg)
    data = load_data(cfg)
    full, _, _ = _normalized_rows(data)
    section = cfg["augment"]
    train, test = ds.split(full, ds.SplitSpec(*section["test_range"]))
    gan_cfg = sitgan.GanConfig(seed=subseed(cfg["seed"], "gan.train"), **section["gan"])
    quartet, _ = sitgan.train_sitgan(train, gan_cfg)
    gd_cfg = mlp.GdConfig(seed=0, **section["gd"])
    de_cfg = devo.DeConfig(seed=0, **section["de"])
    report = sitgan.augmentation_experiment(
        train, test, quartet,
        sizes=section["sizes"], seeds=section["seeds"], models=tuple(section["models"]),
        gd_cfg=gd_cfg, de_cfg=de_cfg, hidden=section["hidden"],
        workers=workers_from_env(),
    )
    write_csv(out / "augmentation_report.csv", ["size", "seed", "model", "test_mse"],
              report.rows)
    write_csv(out / "augmentation_means.csv", ["size", "model", "mean_test_mse"],
              [(size, model, value) for (size, model), value in sorted(report.means.items(),
               key=lambda kv: (kv[0][0], kv[0][1]))])
    return 0


def cmd_analyze(cfg) -> int:
    out = _resolve_out_dir(cfg)
    data = load_data(cfg)
    norm, _ = ds.minmax_normalize(data)
    section = cfg["analyze"]
    wrote = False
    if section["predictions_csv"]:
        table = _read_pred_csv(section["predictions_csv"])
        pairs, slope, intercept = analysis.obs_pred_pairs(table["predicted"], table["observed"])
        write_json(out / "obs_pred_fit.json", {"slope": slope, "intercept": intercept})
        mse = analysis.mse_table(table["predicted"], table["observed"])
        write_csv(out / "mse_summary.csv", ["overall"], [(mse.overall,)])
        wrote = True
    if section["assignments_csv"]:
        labels = _read_assignment_csv(section["assignments_csv"], norm.n_rows)
        community, empty = analysis.core_community(labels, norm.targets)
        write_csv(out / "core_community.csv",
                  ["cluster"] + list(norm.schema.target_names),
                  [(c, *community[c]) for c in range(community.shape[0]) if not empty[c]])
        wrote = True
    p = min(section["pca_components"], norm.n_rows - 1, norm.schema.n_features)
    model = analysis.pca_fit(norm.features, p)
    scores = analysis.pca_project(model, norm.features)
    write_csv(out / "pca_instances.csv", ["row"] + [f"pc{i + 1}" for i in range(p)],
              [(i, *scores[i]) for i in range(scores.shape[0])])
    write_csv(out / "pca_eigenvalues.csv", ["component", "eigenvalue"],
              list(enumerate(model.eigenvalues)))
    return 0 if (wrote or True) else 1


def _read_pred_csv(path):
    import csv as _csv

    observed, predicted = {}, {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        for row in reader:
            key = row["otu"]
            observed.setdefault(key, []).append(float(row["observed"]))
            predicted.setdefault(key, []).append(float(row["predicted"]))
    names = list(observed.keys())
    obs = np.array([observed[k] for k in names]).T
    pred = np.array([predicted[k] for k in names]).T
    return {"observed": obs, "predicted": pred}


def _read_assignment_csv(path, n_rows):
    import csv as _csv

    labels = np.zeros(n_rows, dtype=int)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        for row in reader:
            labels[int(row["row_index"])] = int(row["cluster"])
    return labels


def cmd_bench(cfg) -> int:
    """Seeded self-checks: gradient oracle, DE sphere, blob clustering."""
    out = _resolve_out_dir(cfg)
    quick = cfg["bench"]["quick"]
    checks = {}

    rng = np.random.default_rng(0)
    worst = 0.0
    cases = 3 if quick else 8
    for c in range(cases):
        net = mlp.init_network(6, 3, seed=c)
        x = rng.normal(size=(5, 6))
        y = rng.normal(size=(5, 3))
        g = mlp.backprop(net, x, y, 0.01)
        for arr, pick in ((net.w1, "w1"), (net.w2, "w2")):
            flat = arr.ravel()
            idx = int(rng.integers(0, flat.size))
            orig = flat[idx]
            h = 1e-5
            flat[idx] = orig + h
            up = mlp.penalized_loss(net, x, y, 0.01)
            flat[idx] = orig - h
            down = mlp.penalized_loss(net, x, y, 0.01)
            flat[idx] = orig
            numeric = (up - down) / (2 * h)
            analytic = (g.w1 if pick == "w1" else g.w2).ravel()[idx]
            denom = max(abs(numeric), abs(analytic), 1e-6)
            worst = max(worst, abs(numeric - analytic) / denom)
    checks["gradient_oracle"] = {"max_rel_err": worst, "pass": worst < 1e-5}

    de_wins = 0
    seeds = 2 if quick else 5
    for seed in range(seeds):
        res = devo.run_de(
            lambda v: float(np.sum(np.asarray(v) ** 2)),
            devo.DeConfig(pop_size=30, f0=0.3, cr=0.3, max_gen=60 if quick else 200, seed=seed),
            lambda r: r.uniform(-1, 1, 10),
        )
        if res.best.fit < (1e-1 if quick else 1e-3):
            de_wins += 1
    checks["de_sphere"] = {"wins": de_wins, "of": seeds, "pass": de_wins >= max(1, seeds - 1)}

    blob, labels = ds.synth_blobs(3, 30, 3, 10.0, seed=1)
    x01, _ = ds.minmax_matrix(blob.features)
    aris = []
    for run in range(2 if quick else 5):
        res = dpng.run_dpng_epmc(
            x01,
            dpng.DpngConfig(pop_size=15, iterations=30 if quick else 100,
                            n_clusters=3, radius=2, seed=run),
        )
        aris.append(analysis.adjusted_rand_index(
            cluster_core.assign(x01, res.best.h), labels))
    med = float(np.median(aris))
    checks["blob_clustering"] = {"median_ari": med, "pass": med >= (0.5 if quick else 0.9)}

    payload = {"checks": checks, "all_pass": all(c["pass"] for c in checks.values())}
    write_json(out / "bench.json", payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0 if payload["all_pass"] else 1


COMMANDS = {
    "predict": cmd_predict,
    "cluster": cmd_cluster,
    "generate": cmd_generate,
    "augment": cmd_augment,
    "analyze": cmd_analyze,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="asopt",
        description="Prediction, clustering and generation toolkit for WWTP tables",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file", default=None)
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key (dotted path)")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        code = COMMANDS[args.command](cfg)
    except (ConfigError, ds.DataError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())
