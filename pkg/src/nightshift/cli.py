"""Command-line interface.

Subcommands compose the pipeline: synth, build-vocab, featurize, train,
translate, retrieve, evaluate. Every run writes a resolved-config echo next
to its primary output; feeding that echo back via --config reproduces the
run bit for bit. Exit codes: 0 success, 1 usage error, 2 data error,
3 numerical divergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, render_config, resolve_config
from .dataset import ingest, load_images
from .errors import DataError, TrainingDiverged
from .geoeval import evaluate_retrieval, format_report, read_pose_csv, write_report
from .imgproc import read_image, write_image
from .pipeline import build_vocabulary, featurize_image, featurize_manifest, fit_projection, run_queries
from .retrieval import build_index, write_matches
from .synth import synth_dataset
from .training import TrainConfig, fit_translator, translate
from .vlad import (
    read_descriptor_db,
    read_pca,
    read_vocabulary,
    write_descriptor_db,
    write_pca,
    write_vocabulary,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageExit(message)


class _UsageExit(Exception):
    pass


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _write_echo(cfg: RunConfig, anchor: Path) -> None:
    """Drop the resolved config next to the command's primary output."""
    if anchor.is_dir():
        echo_path = anchor / "run.config"
    else:
        echo_path = anchor.with_name(anchor.name + ".config")
    echo_path.write_text(render_config(cfg))


def _build_parser() -> _Parser:
    parser = _Parser(prog="nightshift", description="Night-to-day translation and retrieval-based localization")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic day/night dataset")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--refs", type=int, default=200, help="number of day reference images")
    p.add_argument("--queries", type=int, default=60, help="number of night query images")
    p.add_argument("--config", default=None)

    p = sub.add_parser("build-vocab", help="fit a visual vocabulary (and optional PCA)")
    p.add_argument("--config", default=None)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True, help="vocabulary output file")
    p.add_argument("--pca-out", default=None, help="also fit and save a PCA model here")

    p = sub.add_parser("featurize", help="compute a descriptor DB for a directory")
    p.add_argument("--voc", required=True)
    p.add_argument("--pca", default=None)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True, help="descriptor DB output file")
    p.add_argument("--config", default=None)

    p = sub.add_parser("train", help="train the night/day translator")
    p.add_argument("--config", default=None)
    p.add_argument("--day", required=True)
    p.add_argument("--night", required=True)
    p.add_argument("--out", required=True, help="checkpoint output file")

    p = sub.add_parser("translate", help="translate night images to day")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--config", default=None)

    p = sub.add_parser("retrieve", help="match query images against a descriptor DB")
    p.add_argument("--db", required=True)
    p.add_argument("--voc", required=True)
    p.add_argument("--pca", default=None)
    p.add_argument("--queries", required=True)
    p.add_argument("--ckpt", default=None, help="translate queries before featurization")
    p.add_argument("--dual", action="store_true", help="also try the flip-translate-unflip route")
    p.add_argument("--hist-eq", action="store_true", help="histogram-equalize queries first")
    p.add_argument("--poses", default=None, help="reference pose table (optional bookkeeping)")
    p.add_argument("--out", required=True, help="match CSV output")
    p.add_argument("--config", default=None)

    p = sub.add_parser("evaluate", help="score matches against ground-truth poses")
    p.add_argument("--matches", required=True)
    p.add_argument("--truth", required=True, help="query ground-truth pose CSV")
    p.add_argument("--ref-poses", required=True, help="reference pose CSV")
    p.add_argument("--out", required=True, help="report path prefix")
    p.add_argument("--config", default=None)
    return parser


def _cmd_synth(args) -> int:
    overrides = {} if args.seed is None else {"seed": args.seed}
    cfg = resolve_config(args.config, overrides)
    out_dir = Path(args.out)
    synth_dataset(cfg.seed, args.refs, args.queries, out_dir)
    _write_echo(cfg, out_dir)
    _log(f"wrote {args.refs} reference and {args.queries} query images under {out_dir}")
    return 0


def _cmd_build_vocab(args) -> int:
    cfg = resolve_config(args.config)
    manifest = ingest(args.images)
    if len(manifest) == 0:
        raise DataError(f"no images found in {args.images}")
    vocab = build_vocabulary(manifest, cfg, log=_log)
    write_vocabulary(vocab, args.out)
    _write_echo(cfg, Path(args.out))
    _log(f"vocabulary with k={vocab.k} written to {args.out}")
    if args.pca_out is not None:
        entries = featurize_manifest(manifest, vocab, cfg=cfg, log=_log)
        model = fit_projection(entries, cfg)
        write_pca(model, args.pca_out)
        _log(f"PCA model ({model.dim} -> {model.p}) written to {args.pca_out}")
    return 0


def _cmd_featurize(args) -> int:
    cfg = resolve_config(args.config)
    vocab = read_vocabulary(args.voc)
    pca = read_pca(args.pca) if args.pca else None
    manifest = ingest(args.images)
    entries = featurize_manifest(manifest, vocab, pca, cfg, log=_log)
    write_descriptor_db(entries, args.out)
    _write_echo(cfg, Path(args.out))
    _log(f"descriptor DB with {len(entries)} entries written to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = resolve_config(args.config)
    day = ingest(args.day, split="train")
    night = ingest(args.night, split="train")
    if len(day) == 0 or len(night) == 0:
        raise ValueError("both --day and --night directories must contain images")
    day_images = load_images(day)
    night_images = load_images(night)
    out = Path(args.out)
    train_cfg = TrainConfig.from_run_config(cfg)

    def checkpoint_fn(model, epoch):
        save_checkpoint(model, out)

    model = fit_translator(train_cfg, day_images, night_images, log=_log, checkpoint_fn=checkpoint_fn)
    save_checkpoint(model, out)
    _write_echo(cfg, out)
    _log(f"checkpoint written to {out}")
    return 0


def _cmd_translate(args) -> int:
    cfg = resolve_config(args.config)
    model = load_checkpoint(args.ckpt)
    manifest = ingest(args.in_dir, split="query")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for image_id in manifest.ids:
        src = manifest.paths[image_id]
        out = translate(model, read_image(src))
        write_image(out, out_dir / src.name)
    _write_echo(cfg, out_dir)
    _log(f"translated {len(manifest)} images into {out_dir}")
    return 0


def _cmd_retrieve(args) -> int:
    overrides = {}
    if args.dual:
        overrides["dual"] = True
    if args.hist_eq:
        overrides["hist_eq"] = True
    cfg = resolve_config(args.config, overrides)
    vocab = read_vocabulary(args.voc)
    pca = read_pca(args.pca) if args.pca else None
    db = read_descriptor_db(args.db)
    if not db:
        raise DataError(f"descriptor DB {args.db} is empty")
    poses = read_pose_csv(args.poses) if args.poses else None
    index = build_index(db, poses=poses)
    manifest = ingest(args.queries, split="query")

    translate_fn = None
    if args.ckpt is not None:
        model = load_checkpoint(args.ckpt)
        translate_fn = lambda img: translate(model, img)

    def featurize(img):
        return featurize_image(img, vocab, pca, cfg)

    matches = run_queries(
        index,
        manifest,
        featurize,
        translate_fn=translate_fn,
        dual=cfg.dual,
        hist_eq=cfg.hist_eq,
        log=_log,
    )
    write_matches(matches, args.out)
    _write_echo(cfg, Path(args.out))
    _log(f"{len(matches)} matches written to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = resolve_config(args.config)
    from .retrieval import read_matches

    matches = read_matches(args.matches)
    truth = read_pose_csv(args.truth)
    ref_poses = read_pose_csv(args.ref_poses)
    report = evaluate_retrieval(matches, truth, ref_poses, thresholds=cfg.thresholds)
    paths = write_report(report, args.out)
    _write_echo(cfg, Path(args.out))
    sys.stdout.write(format_report(report))
    _log(f"report written to {', '.join(str(p) for p in paths)}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "build-vocab": _cmd_build_vocab,
    "featurize": _cmd_featurize,
    "train": _cmd_train,
    "translate": _cmd_translate,
    "retrieve": _cmd_retrieve,
    "evaluate": _cmd_evaluate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageExit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
