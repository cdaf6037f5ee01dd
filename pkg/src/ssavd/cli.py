"""Command-line surface: synth, train, eval, infer, params, gradcheck.

Exit codes: 0 success, 1 validation failure, 2 usage error.  The
``SSAVD_SEED`` environment variable supplies the default seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .augment import AugmentConfig
from .config import ModelConfig, PRESETS
from .gradcheck import standard_suite
from .io import FORGERY_TYPES, FormatError, read_manifest, read_tensor, restore_model
from .model import SSAVDModel
from .objective import LossConfig
from .synth import SynthConfig, split, synth_dataset
from .trainer import ClipDataset, TrainPlan, evaluate, train

SPLIT_RATIOS = (0.75, 0.1, 0.15)


def _default_seed():
    return int(os.environ.get("SSAVD_SEED", "0"))


def _build_parser():
    parser = argparse.ArgumentParser(prog="ssavd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic audio-visual dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--counts", default="10,10,10,10",
                   help=f"per-type clip counts, order: {','.join(FORGERY_TYPES)}")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--preset", choices=PRESETS, default="desk")

    p = sub.add_parser("train", help="train on a synthetic dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--preset", choices=PRESETS, default="desk")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--lr-start", type=float, default=5e-4)
    p.add_argument("--lr-end", type=float, default=1e-4)
    p.add_argument("--no-lsa", action="store_true")
    p.add_argument("--no-mmssa", action="store_true")
    p.add_argument("--no-adv-loss", action="store_true")
    p.add_argument("--no-con-loss", action="store_true")
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--ablation", choices=list("abcdef"), default=None,
                   help="toggle combination row; overrides the --no-* flags")

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="test")
    p.add_argument("--seed", type=int, default=None, help="split seed used at training time")
    p.add_argument("--report", default="report.txt")

    p = sub.add_parser("infer", help="classify one clip")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--video", required=True)
    p.add_argument("--audio", required=True)

    p = sub.add_parser("params", help="parameter count with breakdown")
    p.add_argument("--preset", choices=PRESETS, default="paper")

    p = sub.add_parser("gradcheck", help="finite-difference checks for every op")
    p.add_argument("--seeds", type=int, default=5)
    return parser


def _cmd_synth(args):
    counts = [int(c) for c in args.counts.split(",")]
    if len(counts) != 4:
        raise ValueError("--counts needs four comma-separated integers")
    cfg = SynthConfig.for_model(
        ModelConfig.preset(args.preset),
        counts=dict(zip(FORGERY_TYPES, counts)),
        seed=args.seed if args.seed is not None else _default_seed(),
    )
    records = synth_dataset(cfg, args.out)
    print(f"wrote {len(records)} clips to {args.out}")
    return 0


def _loss_config(args):
    if args.ablation:
        return LossConfig.ablation(args.ablation)
    return LossConfig(
        use_lsa=not args.no_lsa,
        use_mmssa=not args.no_mmssa,
        use_adv=not args.no_adv_loss,
        use_con=not args.no_con_loss,
    )


def _cmd_train(args):
    seed = args.seed if args.seed is not None else _default_seed()
    records = read_manifest(os.path.join(args.data, "manifest.jsonl"))
    train_recs, val_recs, _ = split(records, SPLIT_RATIOS, seed)
    cfg = ModelConfig.preset(args.preset)
    model = SSAVDModel(cfg, seed=seed)
    plan = TrainPlan(
        epochs=args.epochs,
        batch_size=args.batch,
        lr_start=args.lr_start,
        lr_end=args.lr_end,
        seed=seed,
        loss=_loss_config(args),
        augment=AugmentConfig.disabled() if args.no_augment else AugmentConfig(),
    )
    report, _ = train(
        model,
        plan,
        ClipDataset(records=train_recs, root=args.data),
        ClipDataset(records=val_recs, root=args.data),
        out_dir=args.out,
    )
    print(report.render())
    return 0


def _cmd_eval(args):
    seed = args.seed if args.seed is not None else _default_seed()
    model = restore_model(args.ckpt)
    records = read_manifest(os.path.join(args.data, "manifest.jsonl"))
    if args.split == "all":
        subset = records
    else:
        parts = dict(zip(("train", "val", "test"), split(records, SPLIT_RATIOS, seed)))
        subset = parts[args.split]
    report = evaluate(model, ClipDataset(records=subset, root=args.data))
    report.save(args.report)
    print(report.render())
    return 0


def _cmd_infer(args):
    model = restore_model(args.ckpt)
    video = read_tensor(args.video)
    audio = read_tensor(args.audio)
    out = model.predict(video[None] if video.ndim == 4 else video,
                        audio[None] if audio.ndim == 2 else audio)
    print(json.dumps({
        "y_v": float(out["p_v"].numpy()[0]),
        "y_a": float(out["p_a"].numpy()[0]),
        "y_w": float(out["p_w"].numpy()[0]),
    }))
    return 0


def _cmd_params(args):
    model = SSAVDModel(ModelConfig.preset(args.preset), seed=0)
    total, breakdown = model.param_count()
    for name, value in breakdown.items():
        print(f"{name:20s} {value:10d}")
    print(f"{'total':20s} {total:10d}  ({total / 1e6:.3f}M)")
    return 0


def _cmd_gradcheck(args):
    results = standard_suite(seeds=args.seeds)
    failed = False
    for name, err, threshold, ok in results:
        print(f"{name:20s} max_rel_err={err:.3e}  threshold={threshold:.0e}  "
              f"{'pass' if ok else 'FAIL'}")
        failed |= not ok
    return 1 if failed else 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "infer": _cmd_infer,
    "params": _cmd_params,
    "gradcheck": _cmd_gradcheck,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FormatError, FloatingPointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
