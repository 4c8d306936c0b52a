"""``phaselab`` command-line interface.

Every subcommand reads one JSON config (``--config``) patched by repeatable
``--set dotted.key=value`` overrides. On failure a single line
``error: <category>: <message>`` goes to stderr and the exit status is
nonzero.
"""
import argparse
import csv
import glob
import json
import os
import sys

import numpy as np

from . import kernels
from .bench import MissingArtifactError, check_methods, measurement_seed, run_benchmark, stage_share, train_refiners
from .config import ConfigError, RunConfig
from .data import generate_corpus, load_pgm, save_pgm, write_report
from .errors import FormatError, TrainingDivergedError
from .grid import GridError
from .measure import NoiseParams, load_measurement, save_measurement, simulate
from .pipeline import full_pipeline
from .refiner import filter_frequency_response, load_weights, save_weights

EXIT_CODES = {
    "usage": 2, "config": 2, "missing-artifact": 3, "io": 4, "format": 5, "grid": 6,
    "train.diverged": 7, "validation": 8, "internal": 70,
}


class UsageError(Exception):
    category = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def resolve_threads(flag, env=None):
    """``--threads`` wins over ``PHASELAB_THREADS``; 0 means one per CPU."""
    env = os.environ if env is None else env
    value = flag
    if value is None:
        raw = env.get("PHASELAB_THREADS", "").strip()
        if raw:
            try:
                value = int(raw)
            except ValueError:
                raise ConfigError(f"PHASELAB_THREADS must be an integer, got {raw!r}") from None
    if value is None:
        return 1
    if value < 0:
        raise ConfigError(f"thread count must be >= 0, got {value}")
    return value if value > 0 else (os.cpu_count() or 1)


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed {text} is outside the u64 range")
    return value


def _images(cfg, split):
    directory = cfg.paths["corpus_dir" if split == "train" else "test_dir"]
    if directory is None:
        imgs = generate_corpus(cfg.corpus if split == "train" else cfg.test_corpus)
        return [f"img{i:04d}" for i in range(len(imgs))], imgs
    if not os.path.isdir(directory):
        raise ConfigError(f"corpus directory does not exist: {directory}")
    files = sorted(glob.glob(os.path.join(directory, "*.pgm")))
    if not files:
        raise ConfigError(f"no .pgm images in {directory}")
    return [os.path.splitext(os.path.basename(f))[0] for f in files], [load_pgm(f) for f in files]


def _noise_seed(cfg, split):
    return cfg.noise_seed if split == "train" else cfg.test_noise_seed


def _weights(cfg, key, required):
    path = cfg.paths[key]
    if path is None:
        if required:
            raise MissingArtifactError(f"paths.{key} is required for this command")
        return None
    if not os.path.exists(path):
        raise MissingArtifactError(f"paths.{key} does not exist: {path}")
    return load_weights(path)


def _out_dir(cfg):
    out = cfg.paths["out_dir"]
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_generate_corpus(cfg, args, threads):
    ids, imgs = _images(cfg, args.split)
    out = os.path.join(_out_dir(cfg), args.split)
    os.makedirs(out, exist_ok=True)
    for name, img in zip(ids, imgs):
        save_pgm(img, os.path.join(out, f"{name}.pgm"))
    spec = cfg.corpus if args.split == "train" else cfg.test_corpus
    _write_json(os.path.join(out, "corpus.json"), {
        "count": len(imgs), "n": spec.n, "seed": spec.seed, "style": spec.style, "images": ids,
    })
    return f"wrote {len(imgs)} images to {out}"


def cmd_simulate(cfg, args, threads):
    ids, imgs = _images(cfg, args.split)
    out = os.path.join(_out_dir(cfg), "measurements")
    os.makedirs(out, exist_ok=True)
    base = _noise_seed(cfg, args.split)
    entries = []
    for i, (name, img) in enumerate(zip(ids, imgs)):
        for alpha in cfg.alphas:
            seed = measurement_seed(base, i)
            meas = simulate(img, cfg.grid_side(img.shape[0]), NoiseParams(alpha, seed))
            path = os.path.join(out, f"{name}_a{alpha:g}.prm")
            save_measurement(meas, path)
            entries.append({
                "image_id": name, "alpha": alpha, "seed": seed, "path": path,
                "snr_db": meas.snr_db if np.isfinite(meas.snr_db) else None,
                "clamped_fraction": meas.clamped_fraction,
            })
    snr = {}
    for e in entries:
        if e["snr_db"] is not None:
            snr.setdefault(e["alpha"], []).append(e["snr_db"])
    _write_json(os.path.join(out, "manifest.json"), {
        "measurements": entries,
        "mean_snr_db": {f"{a:g}": float(np.mean(v)) for a, v in sorted(snr.items())},
    })
    return f"wrote {len(entries)} measurements to {out}"


def cmd_train(cfg, args, threads):
    ids, imgs = _images(cfg, "train")
    w1, w2, log = train_refiners(
        imgs, cfg.train_alpha, cfg.init, cfg.loop, cfg.hio, cfg.arch, cfg.train,
        noise_seed=cfg.noise_seed, m=cfg.m, workers=threads, refiner2_min_psnr=cfg.refiner2_min_psnr,
    )
    out = _out_dir(cfg)
    paths = {"refiner1": os.path.join(out, "refiner1.prw"), "refiner2": os.path.join(out, "refiner2.prw")}
    save_weights(w1, paths["refiner1"])
    save_weights(w2, paths["refiner2"])
    log["weights"] = paths
    _write_json(os.path.join(out, "train_log.json"), log)
    return (f"trained on {len(imgs)} images; loss {log['refiner1_loss'][0]:.3e}->{log['refiner1_loss'][-1]:.3e} "
            f"and {log['refiner2_loss'][0]:.3e}->{log['refiner2_loss'][-1]:.3e}")


def cmd_reconstruct(cfg, args, threads):
    cfg.require_paths("measurement")
    meas = load_measurement(cfg.paths["measurement"])
    w1 = _weights(cfg, "weights1", True)
    w2 = _weights(cfg, "weights2", True)
    n = int(w1.meta.get("n", meas.m // 2))
    truth = None
    if cfg.paths["truth"] is not None:
        cfg.require_paths("truth")
        truth = load_pgm(cfg.paths["truth"])
        n = truth.shape[0]
    result = full_pipeline(meas, n, cfg.init, w1, w2, cfg.loop, cfg.hio)
    out = _out_dir(cfg)
    doc = result.to_json(out, truth=truth)
    with open(os.path.join(out, "result.json"), "w") as fh:
        fh.write(doc + "\n")
    return f"reconstructed in {result.cycle_count} loop cycles; outputs in {out}"


def cmd_benchmark(cfg, args, threads):
    ids, imgs = _images(cfg, "test")
    needs = set(cfg.methods)
    w1 = _weights(cfg, "weights1", bool(needs & {"dnn1", "iterative", "pipeline"}))
    w2 = _weights(cfg, "weights2", "pipeline" in needs)
    check_methods(cfg.methods, w1, w2)
    report = run_benchmark(
        imgs, cfg.alphas, cfg.runs, cfg.methods, ids, cfg.m, cfg.init, cfg.loop, cfg.hio,
        w1, w2, noise_seed=cfg.test_noise_seed, workers=threads, record_runtime=cfg.record_runtime,
    )
    if cfg.record_runtime and "pipeline" in needs:
        report.meta["init_runtime_share"] = stage_share(report)
    csv_path, _ = write_report(report, _out_dir(cfg))
    means = ", ".join(f"{a['method']}@{a['alpha']:g}={a['mean_psnr']:.2f}dB" for a in report.aggregate())
    return f"{len(report.rows)} rows in {csv_path}; {means}"


def cmd_analyze_filters(cfg, args, threads):
    layer = int(cfg.doc["analyze"]["layer"])
    grid = int(cfg.doc["analyze"]["grid"])
    found = [(k, _weights(cfg, k, False)) for k in ("weights1", "weights2")]
    found = [(k, w) for k, w in found if w is not None]
    if not found:
        raise MissingArtifactError("set paths.weights1 and/or paths.weights2")
    out = _out_dir(cfg)
    rows = []
    for key, weights in found:
        if not 0 <= layer < len(weights.layers):
            raise ConfigError(f"analyze.layer {layer} out of range for {len(weights.layers)} layers")
        name = "refiner1" if key == "weights1" else "refiner2"
        mags, scores = filter_frequency_response(weights, layer, grid)
        sub = os.path.join(out, name)
        os.makedirs(sub, exist_ok=True)
        for j, (mag, s) in enumerate(zip(mags, scores)):
            peak = mag.max()
            save_pgm(255.0 * mag / peak if peak > 0 else mag, os.path.join(sub, f"filter_{j:02d}.pgm"))
            rows.append((name, j, s))
    with open(os.path.join(out, "lowpass_scores.csv"), "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("refiner", "filter", "lowpass_score"))
        for name, j, s in rows:
            wr.writerow((name, j, repr(float(s))))
    return f"analyzed {len(rows)} filters; outputs in {out}"


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "reconstruct": cmd_reconstruct,
    "benchmark": cmd_benchmark,
    "analyze-filters": cmd_analyze_filters,
    "generate-corpus": cmd_generate_corpus,
}


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field by dotted path (repeatable)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads, 0 = one per CPU (default: $PHASELAB_THREADS or 1)")
    common.add_argument("--seed", type=_u64, default=None, help="override the initialization base seed")
    parser = _Parser(prog="phaselab", description="Fourier phase retrieval toolkit")
    parser.add_argument("--version", action="version", version=f"phaselab (kernels: {kernels.BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("simulate", "generate-corpus"):
            p.add_argument("--split", choices=("train", "test"), default="test",
                           help="which corpus to use (default: test)")
    return parser


def _category(exc):
    if isinstance(exc, (UsageError, ConfigError, MissingArtifactError, FormatError)):
        return exc.category
    if isinstance(exc, TrainingDivergedError):
        return "train.diverged"
    if isinstance(exc, GridError):
        return "grid"
    if isinstance(exc, OSError):
        return "io"
    if isinstance(exc, ValueError):
        return "validation"
    return "internal"


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        threads = resolve_threads(args.threads)
        cfg = RunConfig.load(args.config, args.overrides, args.seed)
        print(COMMANDS[args.command](cfg, args, threads))
        return 0
    except Exception as exc:  # noqa: BLE001 - every failure becomes one categorized line
        category = _category(exc)
        message = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {category}: {message}", file=sys.stderr)
        return EXIT_CODES.get(category.split(".")[0], EXIT_CODES.get(category, 1))


if __name__ == "__main__":
    sys.exit(main())
