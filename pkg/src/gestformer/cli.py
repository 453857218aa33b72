"""``gestformer`` command line: gen-data, train, eval, fuse, gradcheck, bench.

Exit codes: 0 success, 2 usage or configuration, 3 data or file format,
4 numerical failure (non-finite loss or a failed gradient check).
"""

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import costs, gradcheck, kernels
from .checkpoint import load_checkpoint, save_checkpoint
from .config import GRADCHECK_DEFAULTS, RunConfig
from .data import SyntheticSpec, gen_synthetic, load_split, write_dataset
from .errors import ConfigError, FormatError, InputError, NumericalError
from .fusion import late_fuse_batch
from .model import init_weights
from .train import TrainConfig, evaluate, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

logger = logging.getLogger("gestformer")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _common(p):
    p.add_argument("--config", metavar="PATH", help="key=value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides",
                   help="override one configuration key (repeatable)")
    p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser():
    parser = _Parser(prog="gestformer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="write a synthetic gesture dataset")
    _common(p)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--modalities", type=int, default=1)
    p.add_argument("--noise", type=float, default=0.3)
    p.add_argument("--train", type=int, default=240)
    p.add_argument("--test", type=int, default=60)

    p = sub.add_parser("train", help="train a model from manifests")
    _common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--modality")

    p = sub.add_parser("fuse", help="late-fuse per-modality posterior files")
    _common(p)
    p.add_argument("posteriors", nargs="+", metavar="POSTERIORS_CSV")

    p = sub.add_parser("gradcheck", help="finite-difference check of every block")
    _common(p)

    p = sub.add_parser("bench", help="parameter and MAC report")
    _common(p)
    p.add_argument("--kernels", action="store_true", help="also time the kernel backends")
    p.add_argument("--repeat", type=int, default=50)
    return parser


def _out_dir(args, default):
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- posterior files -----------------------------------------------------------

def write_posteriors(path, ids, labels, probs):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "label"] + [f"p{j}" for j in range(probs.shape[1])])
        for sid, label, row in zip(ids, labels, probs):
            w.writerow([sid, int(label)] + [repr(float(v)) for v in row])


def read_posteriors(path):
    """Returns (ids, labels (N,), probs (N, n))."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["sample_id", "label"]:
        raise InputError(f"{path}: missing 'sample_id,label,p0,...' header")
    n = len(rows[0]) - 2
    ids, labels, probs = [], [], []
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != n + 2:
            raise InputError(f"{path}:{lineno}: expected {n + 2} fields, got {len(row)}")
        try:
            labels.append(int(row[1]))
            probs.append([float(v) for v in row[2:]])
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-numeric field") from None
        ids.append(row[0])
    return ids, np.array(labels, dtype=np.int64), np.array(probs, dtype=np.float64).reshape(len(ids), n)


# -- commands ------------------------------------------------------------------

def cmd_gen_data(args):
    seed = 0 if args.seed is None else args.seed
    spec = SyntheticSpec(n=args.classes, m=args.frames, d_in=args.dim, modalities=args.modalities,
                         sigma=args.noise, seed=seed, n_train=args.train, n_test=args.test)
    out = _out_dir(args, "data")
    manifests = write_dataset(gen_synthetic(spec), out)
    for split, path in manifests.items():
        print(f"{split}: {path}")
    return EXIT_OK


def _load_training_data(cfg):
    if not cfg["train_manifest"]:
        raise ConfigError("train_manifest is not set")
    modality = cfg["modality"] or None
    train_x, train_y, _ = load_split(cfg["train_manifest"], modality)
    test_x = test_y = None
    if cfg["test_manifest"]:
        test_x, test_y, _ = load_split(cfg["test_manifest"], modality)
        if test_x.shape[1:] != train_x.shape[1:]:
            raise InputError(f"train features {train_x.shape[1:]} and test features {test_x.shape[1:]} differ")
    m, d_in = train_x.shape[1:]
    for key, actual in (("m", m), ("d_in", d_in)):
        if key in cfg.explicit and cfg[key] != actual:
            raise ConfigError(f"config {key}={cfg[key]} but the data has {key}={actual}")
        cfg.set(key, int(actual))
    labels = train_y if test_y is None else np.concatenate([train_y, test_y])
    if labels.min() < 0 or labels.max() >= cfg["n"]:
        raise ConfigError(f"labels span [{labels.min()}, {labels.max()}] but n={cfg['n']}")
    return train_x, train_y, test_x, test_y


def cmd_train(args):
    cfg = RunConfig.build(args.config, args.overrides, args.seed)
    train_x, train_y, test_x, test_y = _load_training_data(cfg)
    out = _out_dir(args, "run")
    (out / "config.txt").write_text(cfg.to_text())
    model = init_weights(cfg.model_config(), cfg["seed"])
    tc = TrainConfig(epochs=cfg["epochs"], batch_size=cfg["batch_size"], lr=cfg["lr"], seed=cfg["seed"])
    with open(out / "metrics.log", "w") as log:
        def on_epoch(row):
            log.write(row.to_line() + "\n")
            log.flush()
            logger.info("epoch %d  loss %.4f  train %.3f  test %.3f",
                        row.epoch, row.loss, row.train_acc, row.test_acc)

        history = train(model, train_x, train_y, test_x, test_y, tc, on_epoch)
    save_checkpoint(out / "checkpoint.mwpt", model)
    last = history[-1]
    print(f"epochs={last.epoch} loss={last.loss:.6f} train_acc={last.train_acc:.4f} test_acc={last.test_acc:.4f}")
    print(f"checkpoint: {out / 'checkpoint.mwpt'}")
    return EXIT_OK


def _confusion_text(confusion):
    n = confusion.shape[0]
    width = max(5, len(str(confusion.max())) + 1)
    lines = ["true\\pred" + "".join(f"{j:>{width}}" for j in range(n))]
    for i in range(n):
        lines.append(f"{i:>9}" + "".join(f"{c:>{width}}" for c in confusion[i]))
    return "\n".join(lines)


def cmd_eval(args):
    model = load_checkpoint(args.checkpoint)
    x, y, ids = load_split(args.manifest, args.modality)
    cfg = model.config
    if x.shape[1:] != (cfg.m, cfg.d_in):
        raise ConfigError(f"checkpoint expects ({cfg.m}, {cfg.d_in}) features, data has {x.shape[1:]}")
    if y.min() < 0 or y.max() >= cfg.n:
        raise ConfigError(f"labels span [{y.min()}, {y.max()}] but the checkpoint has n={cfg.n}")
    result = evaluate(model, x, y)
    print(f"accuracy = {result.accuracy:.6f} ({int(np.trace(result.confusion))}/{len(y)})")
    print(_confusion_text(result.confusion))
    if args.out:
        out = _out_dir(args, ".")
        name = f"posteriors_{args.modality}.csv" if args.modality else "posteriors.csv"
        write_posteriors(out / name, ids, y, result.probs)
        print(f"posteriors: {out / name}")
    return EXIT_OK


def cmd_fuse(args):
    loaded = [(path, *read_posteriors(path)) for path in args.posteriors]
    ref_path, ref_ids, ref_labels, ref_probs = loaded[0]
    for path, ids, labels, probs in loaded[1:]:
        if len(ids) != len(ref_ids):
            raise InputError(f"{path} has {len(ids)} samples, {ref_path} has {len(ref_ids)}")
        for row, (a, b) in enumerate(zip(ref_ids, ids)):
            if a != b:
                raise InputError(f"sample id mismatch at row {row + 1}: {ref_path} has {a!r}, {path} has {b!r}")
        if not np.array_equal(labels, ref_labels):
            raise InputError(f"{path}: labels disagree with {ref_path}")
        if probs.shape[1] != ref_probs.shape[1]:
            raise InputError(f"{path} has {probs.shape[1]} classes, {ref_path} has {ref_probs.shape[1]}")
    stack = np.stack([probs for *_, probs in loaded])
    fused = late_fuse_batch(stack)
    for path, _, labels, probs in loaded:
        print(f"{Path(path).stem}: accuracy = {np.mean(np.argmax(probs, axis=1) == labels):.6f}")
    print(f"fused: accuracy = {np.mean(fused == ref_labels):.6f}")
    if args.out:
        out = _out_dir(args, ".")
        with open(out / "fused.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sample_id", "label", "prediction"])
            w.writerows(zip(ref_ids, ref_labels.tolist(), fused.tolist()))
    return EXIT_OK


def cmd_gradcheck(args):
    cfg = RunConfig.build(args.config, args.overrides, args.seed, defaults=GRADCHECK_DEFAULTS)
    start = time.perf_counter()
    results = gradcheck.run_suite(cfg["seed"], cfg.model_config())
    failed = 0
    for r in results:
        status = "ok" if r.passed else "FAIL"
        failed += not r.passed
        print(f"{r.name:<28} rel={r.error:.3e}  abs={r.abs_error:.3e}  {status}")
    print(f"{len(results) - failed}/{len(results)} passed in {time.perf_counter() - start:.1f}s "
          f"(tolerance {gradcheck.TOLERANCE:g})")
    return EXIT_OK if failed == 0 else EXIT_NUMERIC


def _time_kernels(repeat):
    rng = np.random.default_rng(0)
    x4 = rng.normal(size=(8, 1, 40, 64))
    w = rng.normal(size=(1, 3, 3))
    x3 = rng.normal(size=(8, 40, 64))
    cases = {
        "dwconv2d_forward": lambda: kernels.dwconv2d_forward(x4, w),
        "dwconv2d_backward": lambda: kernels.dwconv2d_backward(x4, w, x4),
        "avgpool2d_forward": lambda: kernels.avgpool2d_forward(x3, 7),
        "avgpool2d_backward": lambda: kernels.avgpool2d_backward(x3, 7),
        "haar_forward": lambda: kernels.haar_forward(x3),
        "haar_inverse": lambda: kernels.haar_inverse(kernels.haar_forward(x3)),
    }
    previous = kernels.backend_name()
    rows = {}
    try:
        for backend in kernels.available_backends():
            kernels.use_backend(backend)
            for name, fn in cases.items():
                fn()
                t0 = time.perf_counter()
                for _ in range(repeat):
                    fn()
                rows.setdefault(name, {})[backend] = (time.perf_counter() - t0) / repeat * 1e3
    finally:
        kernels.use_backend(previous)
    return rows


def cmd_bench(args):
    cfg = RunConfig.build(args.config, args.overrides, args.seed)
    mc = cfg.model_config()
    params = costs.count_params(init_weights(mc, cfg["seed"]))
    macs = costs.count_macs(mc)
    print("# parameters")
    print(params.to_text(), end="")
    print("# multiply-accumulates per sequence")
    print(macs.to_text(), end="")
    print(f"conv = {macs.subtotal('conv')}")
    print(f"dense = {macs.subtotal('dense')}")
    if args.kernels:
        print("# kernel timings (ms per call)")
        for name, per in _time_kernels(args.repeat).items():
            print(name + "".join(f"  {b}={t:.3f}" for b, t in per.items()))
    if args.out:
        out = _out_dir(args, ".")
        (out / "params.txt").write_text(params.to_text())
        (out / "macs.txt").write_text(macs.to_text())
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "fuse": cmd_fuse,
    "gradcheck": cmd_gradcheck,
    "bench": cmd_bench,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, FormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
