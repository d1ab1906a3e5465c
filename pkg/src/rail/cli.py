"""Command-line front end.

Subcommands: synth (generate fixture files), ingest (validate and
optionally normalize embedding files), grid-search, train-eval, metrics,
sweep. Every command exits 0 on success and 2 with a message on stderr on
any validation or numeric failure; failures inside a run carry the step
index of the domain that failed.
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import RailError
from .harness import (
    MetricMatrix,
    RunConfig,
    compute_metrics,
    grid_search,
    payload_to_json,
    result_payload,
    run_mtil,
    run_xtail,
    sweep_ablation,
    sweep_to_csv,
)
from .store import (
    load_embeddings,
    load_text_table,
    save_embeddings,
    save_text_table,
    synthesize_domains,
)


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RailError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser():
    parser = argparse.ArgumentParser(prog="rail")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic domain fixture")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--domains", type=int, default=3)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--samples", type=int, default=40)
    p.add_argument("--test-samples", type=int, default=20)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--separation", type=float, default=1.2,
                   help="pairwise angle between class means, radians")
    p.add_argument("--noise", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="validate embedding files")
    p.add_argument("files", nargs="+")
    p.add_argument("--normalize", action="store_true",
                   help="rewrite each file with unit-norm rows and the flag set")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("grid-search", help="tune lambda/gamma on the first domain")
    p.add_argument("--config", required=True)
    p.add_argument("--lambda-grid", help="comma-separated values")
    p.add_argument("--gamma-grid", help="comma-separated values")
    p.add_argument("--validation-fraction", type=float)
    _add_overrides(p)
    p.set_defaults(func=_cmd_grid_search)

    p = sub.add_parser("train-eval", help="run the full protocol")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="write the result JSON here")
    p.add_argument("--csv", help="write the accuracy matrix as CSV here")
    _add_overrides(p)
    p.set_defaults(func=_cmd_train_eval)

    p = sub.add_parser("metrics", help="recompute metrics from a result JSON")
    p.add_argument("result")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("sweep", help="rerun the protocol across one axis")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True, choices=["beta", "rhl_dim"])
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", help="write the CSV table here")
    _add_overrides(p)
    p.set_defaults(func=_cmd_sweep)

    return parser


def _add_overrides(p):
    p.add_argument("--mode", choices=["xtail", "mtil"])
    p.add_argument("--adapter", choices=["primal", "dual"])
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--rhl-dim", type=int)
    p.add_argument("--kernel", choices=["rbf", "linear"])
    p.add_argument("--targets", choices=["onehot", "text"])
    p.add_argument("--order", help="file listing domain names, one per line")


def _load_config(args):
    config = RunConfig.from_json_file(args.config)
    updates = {}
    for name in ("mode", "adapter", "shots", "seed", "beta", "lam", "gamma",
                 "rhl_dim", "kernel", "targets"):
        value = getattr(args, name, None)
        if value is not None:
            updates[name] = value
    if updates:
        config = replace(config, **updates)
    if getattr(args, "order", None):
        with open(args.order, "r", encoding="utf-8") as fh:
            names = [line.strip() for line in fh if line.strip()]
        by_name = {d.name: d for d in config.domains}
        missing = [n for n in names if n not in by_name]
        if missing:
            raise ValueError(f"order file names unknown domains: {missing}")
        if len(names) != len(config.domains):
            raise ValueError("order file must list every domain exactly once")
        config = replace(config, domains=[by_name[n] for n in names])
    return config


def _cmd_synth(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trains, table = synthesize_domains(args.domains, args.classes, args.samples,
                                       args.dim, args.separation, args.seed,
                                       noise=args.noise, role="train")
    tests, _ = synthesize_domains(args.domains, args.classes, args.test_samples,
                                  args.dim, args.separation, args.seed,
                                  noise=args.noise, role="test")
    domains = []
    for train, test in zip(trains, tests):
        train_path = out / f"{train.domain_name}.train.emb"
        test_path = out / f"{test.domain_name}.test.emb"
        save_embeddings(train, str(train_path))
        save_embeddings(test, str(test_path))
        domains.append({"name": train.domain_name,
                        "train": train_path.name, "test": test_path.name})
    save_text_table(table, str(out / "text.emb"))
    config = {
        "domains": domains,
        "text_tables": ["text.emb"],
        "adapter": "dual",
        "mode": "xtail",
        "shots": 16,
        "seed": args.seed,
        "lam": None,
        "kernel": "rbf",
        "gamma": None,
        "rhl_dim": 256,
        "rhl_seed": None,
        "beta": 0.8,
        "logit_scale": 100.0,
        "raw_fusion": False,
        "targets": "onehot",
    }
    config_path = out / "config.json"
    with open(config_path, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(domains)} domains under {out} (config: {config_path})")
    return 0


def _cmd_ingest(args):
    for path in args.files:
        if _sidecar_kind(path) == "text_table":
            table = load_text_table(path)
            print(f"ok {path}: text table classes={len(table.class_names)} "
                  f"d={table.feature_dim}")
            continue
        ds = load_embeddings(path, normalize=args.normalize)
        if args.normalize:
            save_embeddings(ds, path)
        norms = np.linalg.norm(ds.features, axis=1)
        print(f"ok {path}: domain={ds.domain_name} n={ds.n_samples} d={ds.feature_dim} "
              f"classes={len(ds.class_names)} normalized={ds.normalized} "
              f"norm_range=[{norms.min():.4f}, {norms.max():.4f}]")
    return 0


def _sidecar_kind(path):
    try:
        with open(f"{path}.json", "r", encoding="utf-8") as fh:
            return json.load(fh).get("kind", "embeddings")
    except (OSError, json.JSONDecodeError):
        return "embeddings"


def _cmd_grid_search(args):
    config = _load_config(args)
    lgrid = _parse_values(args.lambda_grid) if args.lambda_grid else config.lambda_grid
    ggrid = _parse_values(args.gamma_grid) if args.gamma_grid else config.gamma_grid
    frac = args.validation_fraction if args.validation_fraction is not None \
        else config.validation_fraction
    lam, gamma = grid_search(config, lgrid, ggrid, frac)
    print(json.dumps({"lambda": lam, "gamma": gamma}, sort_keys=True))
    return 0


def _cmd_train_eval(args):
    config = _load_config(args)
    matrix = run_xtail(config) if config.mode == "xtail" else run_mtil(config)
    payload = result_payload(matrix, config)
    text = payload_to_json(payload)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(matrix.to_csv())
    metrics = payload["metrics"]
    transfer = "--" if metrics["transfer"] is None else f"{metrics['transfer']:.4f}"
    print(f"{config.mode} {config.adapter}: transfer={transfer} "
          f"average={metrics['average']:.4f} last={metrics['last']:.4f}")
    if not args.out and not args.csv:
        print(text, end="")
    return 0


def _cmd_metrics(args):
    with open(args.result, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    matrix = MetricMatrix(domains=payload["domains"],
                          values=np.asarray(payload["matrix"], dtype=np.float64))
    print(json.dumps(compute_metrics(matrix), sort_keys=True, indent=2))
    return 0


def _cmd_sweep(args):
    config = _load_config(args)
    rows = sweep_ablation(config, args.axis, _parse_values(args.values))
    csv = sweep_to_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv)
    print(csv, end="")
    return 0


def _parse_values(text):
    return [float(v) for v in text.split(",") if v.strip()]


if __name__ == "__main__":
    sys.exit(main())
