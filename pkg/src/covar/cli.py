"""``covar generate|train|embed|evaluate --config <path> [--out <dir>]``.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric abort.
Failures print one line ``error[<code>]: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import fileformats, pipeline, siamese
from .config import ConfigError, load_config, to_dict
from .numeric import DimensionError

log = logging.getLogger("covar")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4
SPLIT_NAMES = ("train_pos", "train_neg", "test_pos", "test_neg")


class DataError(RuntimeError):
    pass


def _out_dir(args, cfg):
    return Path(args.out if args.out else cfg.out)


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"


def _read_manifest(out):
    path = out / "manifest.json"
    if not path.exists():
        raise DataError(f"{path} not found; run `covar generate` first")
    return json.loads(path.read_text())


def _load_splits(out):
    manifest = _read_manifest(out)
    try:
        parts = [fileformats.load_dataset(out / manifest["files"][name]) for name in SPLIT_NAMES]
    except (OSError, KeyError) as exc:
        raise DataError(f"cannot load datasets from {out}: {exc}") from exc
    return pipeline.Splits(*parts)


def _check_dims(cfg, splits, jn=None):
    d1, d2 = splits.train_pos.d1, splits.train_pos.d2
    for name, ds in splits.items():
        if (ds.d1, ds.d2) != (d1, d2):
            raise DataError(f"{name} has dims ({ds.d1}, {ds.d2}), expected ({d1}, {d2})")
    if jn is not None and (jn.net1.input_dim, jn.net2.input_dim) != (d1, d2):
        raise DataError(f"model expects inputs ({jn.net1.input_dim}, {jn.net2.input_dim}), "
                        f"data has ({d1}, {d2})")


def cmd_generate(cfg, out):
    splits = pipeline.generate(cfg)
    files = {}
    for name, ds in splits.items():
        files[name] = f"{name}.cvl"
        fileformats.save_dataset(out / files[name], ds)
    manifest = {
        "config": to_dict(cfg),
        "files": files,
        "counts": {name: ds.n for name, ds in splits.items()},
        "d1": splits.train_pos.d1,
        "d2": splits.train_pos.d2,
    }
    fileformats.atomic_write(out / "manifest.json", _json(manifest))
    return manifest


def cmd_train(cfg, out, model_path=None):
    splits = _load_splits(out)
    _check_dims(cfg, splits)
    jn, losses = pipeline.fit(cfg, splits)
    model_path = Path(model_path) if model_path else out / "model.json"
    fileformats.save_model(model_path, jn, {"experiment": cfg.experiment, "seed": cfg.seed,
                                            "optimizer": cfg.train.optimizer})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "loss"])
    for i, loss in enumerate(losses, 1):
        writer.writerow([i, format(loss, ".17g")])
    fileformats.atomic_write(out / "loss.csv", buf.getvalue())
    return jn, losses


def cmd_embed(cfg, out, model_path=None, dataset_path=None, method=None, k=None):
    model_path = Path(model_path) if model_path else out / "model.json"
    dataset_path = Path(dataset_path) if dataset_path else out / "test_pos.cvl"
    jn, _ = _load_model(model_path)
    ds = fileformats.load_dataset(dataset_path)
    if (jn.net1.input_dim, jn.net2.input_dim) != (ds.d1, ds.d2):
        raise DataError(f"model expects inputs ({jn.net1.input_dim}, {jn.net2.input_dim}), "
                        f"{dataset_path} has ({ds.d1}, {ds.d2})")
    method = method or cfg.embedding.method
    k = k or cfg.embedding.k
    coords, sensor, hx = pipeline.embed_outputs(jn, ds, method, k, cfg.embedding.bandwidth,
                                                cfg.embedding.neighbors)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["sensor"] + [f"coord{j + 1}" for j in range(k)]
    if hx is not None:
        header.append("hidden_x")
    writer.writerow(header)
    for i in range(len(sensor)):
        row = [int(sensor[i])] + [format(v, ".17g") for v in coords[i]]
        if hx is not None:
            row.append(format(hx[i], ".17g"))
        writer.writerow(row)
    target = out / f"embedding_{method}.csv"
    fileformats.atomic_write(target, buf.getvalue())
    return target


def cmd_evaluate(cfg, out, model_path=None):
    model_path = Path(model_path) if model_path else out / "model.json"
    jn, _ = _load_model(model_path)
    splits = _load_splits(out)
    _check_dims(cfg, splits, jn)
    baseline = None
    if cfg.experiment == "spinning_sprites":
        baseline = pipeline.init_network(cfg, splits.train_pos)
    report = pipeline.evaluate_run(cfg, jn, splits, baseline)
    fileformats.atomic_write(out / "report.json", _json(report))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["split", "accuracy", "n_pos", "n_neg", "mean_pos_score", "mean_neg_score"])
    for name in ("train", "test", "untrained_baseline"):
        r = report.get(name)
        if r is not None:
            writer.writerow([name, r["accuracy"], r["n_test_pos"], r["n_test_neg"],
                             r["mean_pos_score"], r["mean_neg_score"]])
    fileformats.atomic_write(out / "report.csv", buf.getvalue())
    return report


def _load_model(path):
    if not Path(path).exists():
        raise DataError(f"model file {path} not found; run `covar train` first")
    return fileformats.load_model(path)


def build_parser():
    parser = argparse.ArgumentParser(prog="covar", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "train", "embed", "evaluate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", help="run directory (defaults to the config's `out`)")
        if name in ("train", "embed", "evaluate"):
            p.add_argument("--model", help="model file (default <out>/model.json)")
        if name == "embed":
            p.add_argument("--dataset", help="dataset file (default <out>/test_pos.cvl)")
            p.add_argument("--method", choices=("pca", "diffusion"))
            p.add_argument("--k", type=int)
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    if args.command == "generate":
        cmd_generate(cfg, out)
    elif args.command == "train":
        cmd_train(cfg, out, args.model)
    elif args.command == "embed":
        cmd_embed(cfg, out, args.model, args.dataset, args.method, args.k)
    else:
        report = cmd_evaluate(cfg, out, args.model)
        print(f"test accuracy {report['test']['accuracy']:.4f}")


def main(argv=None):
    try:
        run(argv)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, f"config: {exc}")
    except (DataError, fileformats.FormatError, DimensionError, OSError) as exc:
        return _fail(EXIT_DATA, f"data: {exc}")
    except (siamese.DivergenceError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, f"numeric: {exc}")
    return 0


def _fail(code, message):
    print(f"error[{code}]: {' '.join(str(message).split())}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
