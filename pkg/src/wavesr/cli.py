"""Command-line interface: ``wavesr <command> [options]``.

Exit codes: 0 ok, 1 configuration error, 2 I/O or shape error, 3 training
divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    Diverged,
    MissingPerceptualEncoder,
    OddDimension,
    ShapeMismatch,
    UnreadableImage,
    WaveSRError,
)
from .metrics import SsimConfig, evaluate_folder, psnr, ssim
from .wavelet import FORWARD_SCALE, Image, SubbandSet, dwt2_haar, idwt2_haar

log = logging.getLogger("wavesr")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DIVERGED = 0, 1, 2, 3
BAND_SUFFIX = {"ll": "_LL", "lh": "_LH", "hl": "_HL", "hh": "_HH"}
SUBBAND_MANIFEST = "manifest.txt"
DETAIL_ENCODING = "0.5+c/2"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- helpers ---------------------------------------------------------------------

def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg.with_overrides(
        seed=getattr(args, "seed", None),
        mode=getattr(args, "mode", None),
        scale=getattr(args, "scale", None),
    )


def _require_out(args, what: str) -> Path:
    out = getattr(args, "out", None)
    if not out:
        raise CliError(f"{what} needs --out", EXIT_CONFIG)
    return Path(out)


def _source_bits(path: Path) -> int:
    from PIL import Image as PILImage

    with PILImage.open(path) as pil:
        return 16 if pil.mode.startswith("I") else 8


def _encode_detail(c: np.ndarray) -> np.ndarray:
    return np.clip(0.5 + c / 2.0, 0.0, 1.0)


def _decode_detail(v: np.ndarray) -> np.ndarray:
    return (v - 0.5) * 2.0


def _parse_oneline(text: str, source: str) -> dict[str, str]:
    out = {}
    for tok in text.split():
        key, sep, value = tok.partition("=")
        if not sep:
            raise CliError(f"{source}: malformed manifest token {tok!r}", EXIT_IO)
        out[key] = value
    return out


def _metrics_cfg_for(shape, cfg: SsimConfig) -> SsimConfig:
    if cfg.mode == "windowed" and min(shape) < cfg.window:
        log.warning("image smaller than SSIM window; using global SSIM")
        return SsimConfig("global", k1=cfg.k1, k2=cfg.k2, data_range=cfg.data_range)
    return cfg


# -- commands --------------------------------------------------------------------

def cmd_decompose(args) -> int:
    from .data import load_image, save_image

    src = Path(args.input)
    out = _require_out(args, "decompose")
    img = load_image(src)
    h, w = img.shape
    if h % 2 or w % 2:
        dim = "height" if h % 2 else "width"
        raise OddDimension(f"{src}: {dim} is odd ({h}x{w}); decomposition needs even dimensions")
    sub = dwt2_haar(img)
    out.mkdir(parents=True, exist_ok=True)
    stem = src.stem
    for band, arr in zip(("ll", "lh", "hl", "hh"), sub.bands()):
        stored = arr if band == "ll" else _encode_detail(arr)
        save_image(out / f"{stem}{BAND_SUFFIX[band]}.png", stored, bits=16)
        if args.raw:
            ckpt_io.write_tensor(out / f"{stem}{BAND_SUFFIX[band]}.mbt", arr)
    line = (
        f"stem={stem} parent_shape={h}x{w} forward_scale={FORWARD_SCALE} "
        f"detail_encoding={DETAIL_ENCODING} bits=16 source_bits={_source_bits(src)} "
        f"raw={'true' if args.raw else 'false'}"
    )
    (out / SUBBAND_MANIFEST).write_text(line + "\n", encoding="utf-8")
    print(f"wrote 4 subbands of {h}x{w} image to {out}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    from .data import read_pixels, save_image

    folder = Path(args.subbands)
    mpath = folder / SUBBAND_MANIFEST
    if not mpath.is_file():
        raise UnreadableImage(f"{folder}: no {SUBBAND_MANIFEST}")
    meta = _parse_oneline(mpath.read_text(encoding="utf-8"), str(mpath))
    try:
        stem = meta["stem"]
        ph, pw = (int(v) for v in meta["parent_shape"].split("x"))
        scale = float(meta.get("forward_scale", FORWARD_SCALE))
    except (KeyError, ValueError) as exc:
        raise CliError(f"{mpath}: incomplete manifest ({exc})", EXIT_IO) from exc
    if scale != FORWARD_SCALE:
        raise CliError(f"{mpath}: forward_scale {scale} unsupported (expected {FORWARD_SCALE})", EXIT_IO)
    raw = meta.get("raw") == "true"

    bands = {}
    for band, suffix in BAND_SUFFIX.items():
        if raw:
            path = folder / f"{stem}{suffix}.mbt"
            if not path.is_file():
                raise UnreadableImage(f"missing subband file {path}")
            bands[band] = ckpt_io.read_tensor(path).astype(np.float64)
        else:
            path = folder / f"{stem}{suffix}.png"
            if not path.is_file():
                raise UnreadableImage(f"missing subband file {path}")
            px = read_pixels(path)
            bands[band] = px if band == "ll" else _decode_detail(px)
    for band, arr in bands.items():
        if arr.shape != (ph // 2, pw // 2) or ph % 2 or pw % 2:
            raise ShapeMismatch(
                f"{stem}{BAND_SUFFIX[band]} is {arr.shape[0]}x{arr.shape[1]}, "
                f"manifest parent_shape {ph}x{pw} implies {ph // 2}x{pw // 2}"
            )
    sub = SubbandSet(bands["ll"], bands["lh"], bands["hl"], bands["hh"], (ph, pw))
    px = np.clip(idwt2_haar(sub, None), 0.0, 1.0)
    out = Path(args.out) if getattr(args, "out", None) else folder / f"{stem}_reconstructed.png"
    save_image(out, Image(px, "unit"), bits=int(meta.get("source_bits", 8)))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_sr(args) -> int:
    from .data import load_image, save_image
    from .pipeline import super_resolve
    from .trainer import load_generator

    cfg = _run_config(args)
    out = _require_out(args, "sr")
    ck = ckpt_io.ModelCheckpoint.load(args.checkpoint)
    gen = load_generator(ck)
    if getattr(args, "mode", None) and args.mode != gen.cfg.mode:
        raise CliError(f"--mode {args.mode} but checkpoint was trained in {gen.cfg.mode} mode", EXIT_IO)
    if getattr(args, "scale", None) and args.scale != gen.cfg.scale:
        raise CliError(f"--scale {args.scale} but checkpoint was trained for x{gen.cfg.scale}", EXIT_IO)
    lr = load_image(args.input)
    h, w = lr.shape
    if gen.cfg.mode == "progressive" and (h % 2 or w % 2):
        dim = "height" if h % 2 else "width"
        raise OddDimension(f"{args.input}: {dim} is odd ({h}x{w}); progressive mode needs even LR dims")
    ref = load_image(args.reference) if args.reference else None
    s = gen.cfg.scale
    if ref is not None and ref.shape != (h * s, w * s):
        raise ShapeMismatch(f"reference is {ref.shape[0]}x{ref.shape[1]}, output will be {h * s}x{w * s}")
    sr = super_resolve(gen, lr)
    save_image(out, sr)
    print(f"wrote {out} ({sr.shape[0]}x{sr.shape[1]})")
    if ref is not None:
        a, b = ref.to_byte(), Image(np.round(sr.pixels * 255.0) / 255.0, "unit").to_byte()
        mcfg = _metrics_cfg_for(a.shape, cfg.metrics)
        print(f"psnr_db\t{psnr(a, b):.4f}")
        print(f"ssim\t{ssim(a, b, mcfg):.6f}")
    return EXIT_OK


def _dataset(cfg: RunConfig):
    from .data import build_dataset

    return build_dataset(cfg.dataset)


def cmd_pretrain(args) -> int:
    from .trainer import pretrain_perceptual

    cfg = _run_config(args)
    out = _require_out(args, "pretrain-perceptual")
    ds = _dataset(cfg)
    out.mkdir(parents=True, exist_ok=True)
    ck = pretrain_perceptual(ds, cfg.train, cfg.perceptual, log_path=out / "pretrain_log.jsonl")
    ck.manifest.update(cfg.manifest_entries())
    ck.save(out)
    (out / "run.cfg").write_text(cfg.to_text(), encoding="utf-8")
    print(f"encoder checkpoint {ck.checkpoint_id} written to {out}")
    return EXIT_OK


def _encoder_arg(args):
    # without --encoder, train() falls back to one stored in a resumed checkpoint
    if getattr(args, "encoder", None):
        return ckpt_io.ModelCheckpoint.load(args.encoder)
    return None


def cmd_train(args) -> int:
    from .trainer import train

    cfg = _run_config(args)
    out = _require_out(args, "train")
    exp = cfg.experiment()
    enc = _encoder_arg(args)
    initial = ckpt_io.ModelCheckpoint.load(args.resume) if args.resume else None
    if exp.train.loss.feature_term and enc is None and (initial is None or not initial.subset("encoder")):
        raise MissingPerceptualEncoder(
            f"loss variant {exp.train.loss.variant} needs --encoder (run pretrain-perceptual first)"
        )
    ds = _dataset(cfg)
    out.mkdir(parents=True, exist_ok=True)
    ck = train(
        ds, exp, initial, encoder=enc, checkpoint_dir=out,
        log_path=out / "train_log.jsonl", extra_manifest=cfg.manifest_entries(),
    )
    ck.save(out / "final")
    (out / "run.cfg").write_text(cfg.to_text(), encoding="utf-8")
    print(f"checkpoint {ck.checkpoint_id} written to {out / 'final'}")
    return EXIT_OK


def cmd_finetune(args) -> int:
    from .trainer import finetune

    cfg = _run_config(args)
    out = _require_out(args, "finetune")
    exp = cfg.experiment()
    parent = ckpt_io.ModelCheckpoint.load(args.checkpoint)
    enc = _encoder_arg(args)
    if exp.train.loss.feature_term and enc is None and not parent.subset("encoder"):
        raise MissingPerceptualEncoder(f"loss variant {exp.train.loss.variant} needs --encoder")
    ds = _dataset(cfg)
    out.mkdir(parents=True, exist_ok=True)
    ck = finetune(
        parent, ds, exp, encoder=enc, checkpoint_dir=out,
        log_path=out / "train_log.jsonl", extra_manifest=cfg.manifest_entries(),
    )
    ck.save(out / "final")
    (out / "run.cfg").write_text(cfg.to_text(), encoding="utf-8")
    print(f"checkpoint {ck.checkpoint_id} (parent {parent.checkpoint_id}) written to {out / 'final'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _run_config(args)
    table = evaluate_folder(args.sr, args.hr, cfg.metrics)
    sys.stdout.write(table.to_tsv())
    if args.jsonl:
        Path(args.jsonl).write_text(table.to_jsonl(), encoding="utf-8")
    return EXIT_OK


def cmd_report(args) -> int:
    from dataclasses import replace

    from .trainer import ExperimentConfig, run_experiment_matrix

    cfg = _run_config(args)
    base = cfg.experiment()
    specs = []
    variants = args.variants.split(",") if args.variants else [base.train.loss.variant]
    rhos = [int(r) for r in args.rho.split(",")] if args.rho else [base.generator.rho]
    try:
        for variant in variants:
            for rho in rhos:
                exp = ExperimentConfig.for_variant(
                    variant, name=f"{variant}_rho{rho}",
                    generator=replace(base.generator, rho=rho), critic=base.critic, train=base.train,
                )
                specs.append(exp)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    enc = ckpt_io.ModelCheckpoint.load(args.encoder) if args.encoder else None
    ds = _dataset(cfg)
    header = "effective config: " + " ".join(f"{k}={v}" for k, v in cfg.manifest_entries().items())
    report = run_experiment_matrix(specs, ds, encoder=enc, enc_cfg=cfg.perceptual, header=header)
    text = report.to_tsv()
    if getattr(args, "out", None):
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------

def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="run config file")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--out", default=argparse.SUPPRESS, help="output file or directory")
    p.add_argument("--mode", choices=("pre_interpolated", "progressive"), default=argparse.SUPPRESS)
    p.add_argument("--scale", type=int, choices=(2, 4), default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="wavesr", parents=[common], description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", parents=[common], help="write the four Haar subbands of an image")
    p.add_argument("input")
    p.add_argument("--raw", action="store_true", help="also write exact float32 .mbt sidecars")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("reconstruct", parents=[common], help="rebuild an image from decomposed subbands")
    p.add_argument("subbands", help="directory written by decompose")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("sr", parents=[common], help="super-resolve one image")
    p.add_argument("input")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--reference", help="ground truth; prints psnr/ssim")
    p.set_defaults(func=cmd_sr)

    p = sub.add_parser("pretrain-perceptual", parents=[common], help="train the perceptual encoder")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", parents=[common], help="train a super-resolution model")
    p.add_argument("--encoder", help="perceptual encoder checkpoint")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("finetune", parents=[common], help="fine-tune a trained model on new data")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--encoder")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("eval", parents=[common], help="score SR images against ground truth")
    p.add_argument("--sr", required=True)
    p.add_argument("--hr", required=True)
    p.add_argument("--jsonl", help="also write records to this file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", parents=[common], help="train a config matrix and tabulate results")
    p.add_argument("--rho", help="comma-separated rho values to sweep")
    p.add_argument("--variants", help="comma-separated loss variants")
    p.add_argument("--encoder")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, MissingPerceptualEncoder) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Diverged as exc:
        where = f" (last checkpoint: {exc.last_checkpoint})" if exc.last_checkpoint else ""
        print(f"training diverged: {exc}{where}", file=sys.stderr)
        return EXIT_DIVERGED
    except (WaveSRError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
