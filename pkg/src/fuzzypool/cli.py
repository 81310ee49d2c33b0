"""Command-line entry point: ``fuzzypool <command> [options]``.

Commands: pool-image, compare-poolings, train, eval, dump-featuremaps, bench.
Exit codes: 0 success, 2 usage error, 3 data/format error, 4 numeric error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from .bench import bench_pooling
from .core import PoolWindowSpec
from .errors import (
    CheckpointError, ConfigError, DimensionError, FormatError, InputError,
    ParameterError, SelectionError, ShapeError,
)
from .experiments import compare_poolings, featuremap_experiment, normalize_channel, pool_image
from .metrics import compare_pooled_image
from .nn import build_lenet, evaluate, load_checkpoint, save_checkpoint, train
from .pooling import OPERATORS

log = logging.getLogger("fuzzypool")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

# option name -> (type, default)
OPTIONS = {
    "operator": (str, "fuzzy"),
    "k": (int, 2),
    "stride": (int, 2),
    "pad": (int, 0),
    "tau": (float, 0.0),
    "rmax": (float, 6.0),
    "lr": (float, 0.01),
    "epochs": (int, 3),
    "batch": (int, 32),
    "seed": (int, 0),
    "train_subset": (int, None),
    "test_subset": (int, None),
    "workers": (int, 1),
    "out_dir": (str, "."),
    "variance": (float, 0.01),
    "dataset": (str, "mnist"),
    "data_dir": (str, None),
    "operators": (str, ",".join(OPERATORS)),
    "sizes": (str, "16x64x64"),
    "trials": (int, 5),
}
METRIC_COLUMNS = ["image", "operator", "rms_contrast", "psnr_db", "ssim"]


class UsageError(Exception):
    pass


def _add(parser, *names):
    for name in names:
        typ = OPTIONS[name][0]
        parser.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fuzzypool", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="INI-style key=value file; flags override it")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    pool_opts = ("k", "stride", "pad", "tau", "rmax")

    p = sub.add_parser("pool-image", help="pool one image and append its quality metrics to CSV")
    p.add_argument("--input", required=True)
    _add(p, "operator", *pool_opts, "out_dir")

    p = sub.add_parser("compare-poolings", help="metrics of all operators over an image directory")
    p.add_argument("--corpus", required=True)
    _add(p, *pool_opts, "workers", "out_dir")

    p = sub.add_parser("train", help="train LeNet with the chosen pooling operator")
    _add(p, "dataset", "data_dir", "operator", "tau", "rmax", "lr", "epochs", "batch", "seed",
         "train_subset", "test_subset", "workers", "out_dir")

    p = sub.add_parser("eval", help="accuracy of a checkpoint on a test set")
    p.add_argument("--checkpoint", required=True)
    _add(p, "dataset", "data_dir", "test_subset")

    p = sub.add_parser("dump-featuremaps", help="first-layer feature maps before/after each pooling")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True, nargs="+")
    _add(p, "variance", "seed", "k", "stride", "pad", "tau", "out_dir")

    p = sub.add_parser("bench", help="pooling throughput in windows per second")
    _add(p, "operators", "sizes", "k", "stride", "pad", "trials", "seed", "out_dir")
    return parser


def _read_config(path) -> dict:
    text = Path(path).read_text()
    if not text.lstrip().startswith("["):
        text = "[fuzzypool]\n" + text
    cp = configparser.ConfigParser()
    cp.read_string(text)
    values = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            values[key.replace("-", "_")] = value
    return values


def resolve(args) -> dict:
    """Merge defaults < config file < flags, converting and validating every value."""
    file_values = _read_config(args.config) if args.config else {}
    unknown = set(file_values) - set(OPTIONS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = {}
    for name, (typ, default) in OPTIONS.items():
        if not hasattr(args, name):
            continue
        value = getattr(args, name)
        if value is None and name in file_values:
            try:
                value = typ(file_values[name])
            except ValueError as exc:
                raise UsageError(f"config key {name}: {exc}") from exc
        cfg[name] = default if value is None else value
    _validate(cfg)
    return cfg


def _validate(cfg):
    def positive(name):
        if name in cfg and cfg[name] is not None and cfg[name] <= 0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")

    for name in ("k", "stride", "rmax", "lr", "batch", "workers", "trials", "train_subset", "test_subset"):
        positive(name)
    for name in ("pad", "epochs"):
        if name in cfg and cfg[name] < 0:
            raise UsageError(f"--{name} must be >= 0")
    if cfg.get("tau", 0) < 0 or cfg.get("variance", 0) < 0:
        raise UsageError("--tau and --variance must be >= 0")
    if "operator" in cfg and cfg["operator"] not in OPERATORS:
        raise UsageError(f"--operator must be one of {', '.join(OPERATORS)}")
    if "dataset" in cfg and cfg["dataset"] not in ("mnist", "fashion-mnist", "cifar10"):
        raise UsageError("--dataset must be mnist, fashion-mnist or cifar10")


def _spec(cfg) -> PoolWindowSpec:
    return PoolWindowSpec.square(cfg["k"], cfg["stride"], cfg["pad"])


def _out_dir(cfg) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(out: Path, command: str, cfg: dict, extra=None):
    cp = configparser.ConfigParser()
    section = {k: ("" if v is None else str(v)) for k, v in cfg.items()}
    section.update({k: str(v) for k, v in (extra or {}).items()})
    cp[command] = section
    with open(out / f"{command}.effective.ini", "w") as fh:
        cp.write(fh)


def _fmt(x) -> str:
    if isinstance(x, float):
        return "inf" if math.isinf(x) else repr(x)
    return str(x)


def _append_rows(path: Path, header, rows):
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


# -- commands -----------------------------------------------------------------


def cmd_pool_image(args, cfg):
    out = _out_dir(cfg)
    img = data_mod.load_gray_image(args.input)
    pooled = pool_image(img, cfg["operator"], _spec(cfg), cfg["rmax"], cfg["tau"])
    stem = Path(args.input).stem
    target = out / f"{stem}_{cfg['operator']}.pgm"
    data_mod.save_pgm(target, pooled)
    rep = compare_pooled_image(img, pooled)
    _append_rows(out / "metrics.csv", METRIC_COLUMNS,
                 [[stem, cfg["operator"], rep.rms_contrast, rep.psnr_db, rep.ssim]])
    _echo_config(out, "pool-image", cfg, {"input": args.input})
    print(f"{target}\trms={rep.rms_contrast:.4f}\tpsnr={rep.psnr_db:.4f}\tssim={rep.ssim:.4f}")
    return rep


def cmd_compare_poolings(args, cfg):
    out = _out_dir(cfg)
    corpus = data_mod.load_corpus(args.corpus)
    rows, means = compare_poolings(corpus, _spec(cfg), OPERATORS, cfg["rmax"], cfg["tau"], cfg["workers"])
    path = out / "compare.csv"
    path.unlink(missing_ok=True)
    body = [[r.image, r.operator, r.report.rms_contrast, r.report.psnr_db, r.report.ssim] for r in rows]
    body += [["MEAN", op, m.rms_contrast, m.psnr_db, m.ssim] for op, m in means.items()]
    _append_rows(path, METRIC_COLUMNS, body)
    _echo_config(out, "compare-poolings", cfg, {"corpus": args.corpus})
    for op, m in means.items():
        print(f"{op}\trms={m.rms_contrast:.4f}\tpsnr={m.psnr_db:.4f}\tssim={m.ssim:.4f}")
    return rows, means


def load_dataset(name, data_dir=None, train=True, subset=None):
    if name == "cifar10":
        ds = data_mod.load_cifar10_dir(data_dir, train=train)
    else:
        default = data_mod.data_root() / ("fashion-mnist" if name == "fashion-mnist" else "mnist")
        ds = data_mod.load_mnist(data_dir or default, train=train)
    return ds.subset(subset)


def cmd_train(args, cfg):
    out = _out_dir(cfg)
    train_set = load_dataset(cfg["dataset"], cfg["data_dir"], True, cfg["train_subset"])
    test_set = load_dataset(cfg["dataset"], cfg["data_dir"], False, cfg["test_subset"])
    config = build_lenet(
        cfg["operator"], train_set.images.shape[1:], train_set.class_count,
        r_max=cfg["rmax"], tau=cfg["tau"], lr=cfg["lr"], batch_size=cfg["batch"],
        epochs=cfg["epochs"], seed=cfg["seed"],
    )

    def progress(epoch, step, loss):
        if step % 50 == 0:
            log.info("epoch %d step %d loss %.4f", epoch, step, loss)

    report = train(config, train_set, test_set, workers=cfg["workers"], progress=progress)
    save_checkpoint(out / "model.fzp", report.network)
    with open(out / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "test_accuracy", "seconds", "seed"])
        writer.writerow([0, "", _fmt(report.initial_test_accuracy), "", report.seed])
        for i, (loss, acc, sec) in enumerate(zip(report.train_loss, report.test_accuracy, report.seconds)):
            writer.writerow([i + 1, _fmt(loss), _fmt(acc), _fmt(sec), report.seed])
    with open(out / "batch_losses.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        writer.writerows([i, _fmt(v)] for i, v in enumerate(report.batch_losses))
    _echo_config(out, "train", cfg)
    print(f"accuracy {report.final_accuracy:.4f}")
    return report


def cmd_eval(args, cfg):
    network = load_checkpoint(args.checkpoint)
    test_set = load_dataset(cfg["dataset"], cfg["data_dir"], False, cfg["test_subset"])
    expected = tuple(network.config.input_shape)
    if test_set.images.shape[1:] != expected:
        raise CheckpointError(
            f"checkpoint expects inputs {expected}, dataset has {test_set.images.shape[1:]}",
            args.checkpoint,
        )
    acc = evaluate(network, test_set)
    print(f"accuracy {acc:.4f}")
    return acc


def cmd_dump_featuremaps(args, cfg):
    out = _out_dir(cfg)
    network = load_checkpoint(args.checkpoint)
    spec = _spec(cfg)
    rows, summary = [], []
    for index, path in enumerate(args.image):
        stem = Path(path).stem
        img = data_mod.load_gray_image(path)
        dump = featuremap_experiment(network, img, cfg["variance"], cfg["seed"] + index, spec, OPERATORS, cfg["tau"])
        data_mod.save_pgm(out / f"{stem}_noisy.pgm", dump.noisy_image)
        summary.append([stem, "input", "", dump.input_psnr, "", ""])
        for c in range(len(dump.reference)):
            lo, hi = float(dump.conv_maps[c].min()), float(dump.conv_maps[c].max())
            data_mod.save_pgm(out / f"{stem}_conv_c{c}.pgm", normalize_channel(dump.conv_maps[c], lo, hi))
            for op in OPERATORS:
                data_mod.save_pgm(out / f"{stem}_{op}_c{c}.pgm", normalize_channel(dump.pooled[op][c], lo, hi))
                rows.append([stem, op, c, dump.channel_psnr[op][c], lo, hi])
        for op in OPERATORS:
            summary.append([stem, op, "all", dump.psnr_db[op], "", ""])
    path = out / "featuremaps.csv"
    path.unlink(missing_ok=True)
    _append_rows(path, ["image", "operator", "channel", "psnr_db", "norm_min", "norm_max"], summary + rows)
    _echo_config(out, "dump-featuremaps", cfg, {"checkpoint": args.checkpoint, "image": " ".join(args.image)})
    for op in OPERATORS:
        vals = [r[3] for r in summary if r[1] == op]
        print(f"{op}\tmean_psnr={float(np.mean(vals)):.4f}")
    return summary


def _parse_sizes(text):
    sizes = []
    for item in filter(None, text.split(",")):
        try:
            z, h, w = (int(v) for v in item.lower().split("x"))
        except ValueError as exc:
            raise UsageError(f"bad size {item!r}; expected ZxHxW") from exc
        sizes.append((z, h, w))
    return sizes


def cmd_bench(args, cfg):
    operators = [op for op in cfg["operators"].split(",") if op]
    results = bench_pooling(operators, _parse_sizes(cfg["sizes"]), _spec(cfg), cfg["trials"], seed=cfg["seed"])
    header = ["operator", "shape", "windows", "median_seconds", "windows_per_second"]
    body = [[r.operator, "x".join(map(str, r.shape)), r.windows, r.median_seconds, r.windows_per_second] for r in results]
    writer = csv.writer(sys.stdout)
    writer.writerow(header)
    writer.writerows([_fmt(v) for v in row] for row in body)
    if args.out_dir is not None:
        path = _out_dir(cfg) / "bench.csv"
        path.unlink(missing_ok=True)
        _append_rows(path, header, body)
    return results


COMMANDS = {
    "pool-image": cmd_pool_image,
    "compare-poolings": cmd_compare_poolings,
    "train": cmd_train,
    "eval": cmd_eval,
    "dump-featuremaps": cmd_dump_featuremaps,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve(args)
    except (UsageError, configparser.Error, OSError) as exc:
        print(f"fuzzypool: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"fuzzypool: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SelectionError, FloatingPointError, ArithmeticError) as exc:
        print(f"fuzzypool: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, InputError, ConfigError, DimensionError, ShapeError, ParameterError, OSError) as exc:
        print(f"fuzzypool: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
