"""Batch command-line front end.

Subcommands: ``enhance``, ``fuse``, ``score``, ``refs`` and ``eval``.
Exit status is 0 on success, 1 when some inputs failed, 2 for an invalid
invocation (bad flags or config, no inputs, mismatched fuse inputs).
"""

import argparse
import hashlib
import io
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from PIL import Image

from . import config as cfgmod
from .formats import atomic_write, encode_gamma_bin
from .gamma_opt import progressive_enhance
from .imgcore import ImageDecodeError, decode_srgb8, encode_srgb8, to_uint8
from .metrics import evaluate
from .pseudo_gt import CandidateSet, fuse, weighted_fuse
from .quality import composite_score
from .refgen import sample_references

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class UsageError(Exception):
    pass


def stable_hash64(name):
    return int.from_bytes(hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest(), "little")


def image_seed(master_seed, path):
    """Per-image seed: master seed XOR a stable hash of the file name."""
    return (master_seed ^ stable_hash64(os.path.basename(path))) & cfgmod.SEED_MASK


def expand_inputs(paths):
    """Expand directories to their image files (sorted); keep files as given."""
    out = []
    for p in paths:
        if os.path.isdir(p):
            names = sorted(n for n in os.listdir(p) if n.lower().endswith(IMAGE_SUFFIXES))
            out.extend(os.path.join(p, n) for n in names)
        else:
            out.append(p)
    return out


def load(path):
    with open(path, "rb") as fh:
        return decode_srgb8(fh.read())


def stem(path):
    return os.path.splitext(os.path.basename(path))[0]


def _png_bytes(pil_image):
    buf = io.BytesIO()
    pil_image.save(buf, format="PNG")
    return buf.getvalue()


def _gray_png(plane):
    lo, hi = float(plane.min()), float(plane.max())
    norm = (plane - lo) / (hi - lo) if hi > lo else np.zeros_like(plane)
    return _png_bytes(Image.fromarray(to_uint8(norm), mode="L"))


def _index_png(indices):
    pil = Image.fromarray(indices.astype(np.uint8), mode="P")
    rng = np.random.default_rng(0)
    palette = rng.integers(0, 256, size=(256, 3), dtype=np.uint8)
    palette[0] = (0, 0, 0)
    pil.putpalette(palette.ravel().tolist())
    return _png_bytes(pil)


def _fmt(v):
    return f"{v:.6g}"


# --- enhance --------------------------------------------------------------


def _enhance_one(path, resolved, out_dir, emit_gamma):
    """Worker: returns (ok, message)."""
    try:
        img = load(path)
    except (OSError, ImageDecodeError) as exc:
        return False, f"{path}: {exc}"
    seed = image_seed(resolved["seed"], path)
    ecfg = cfgmod.build_enhance_config(resolved, seed=seed)
    out, field, trace = progressive_enhance(img, ecfg)
    s = stem(path)
    atomic_write(os.path.join(out_dir, f"{s}_enhanced.png"), encode_srgb8(out))
    atomic_write(os.path.join(out_dir, f"{s}_trace.csv"), trace.to_text())
    if emit_gamma:
        atomic_write(os.path.join(out_dir, f"{s}_gamma.bin"), encode_gamma_bin(field.gamma))
    h, w = img.shape[:2]
    return True, (
        f"{os.path.basename(path)}: {w}x{h} seed={seed} epochs={len(trace)} "
        f"loss={_fmt(trace.total[-1])} score_T={_fmt(trace.mean_score_T[-1])} "
        f"mean_in={_fmt(img.mean())} mean_out={_fmt(out.mean())}"
    )


def _sha256(path):
    try:
        with open(path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()
    except OSError:
        return "unreadable"


def write_manifest(out_dir, command, resolved, inputs):
    lines = [f"# gammafuse run manifest\n# command {command}\n", cfgmod.dump(resolved)]
    lines += [f"# input {_sha256(p)} {p}\n" for p in inputs]
    atomic_write(os.path.join(out_dir, "run_manifest.txt"), "".join(lines))


def run_enhance(inputs, out_dir, resolved, out=sys.stdout, err=sys.stderr):
    jobs = resolved["jobs"] or os.cpu_count() or 1
    args = [(p, resolved, out_dir, resolved["emit_gamma"]) for p in inputs]
    if jobs == 1 or len(inputs) == 1:
        results = [_enhance_one(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(inputs))) as pool:
            results = list(pool.map(_enhance_one, *zip(*args)))
    failed = 0
    for ok, msg in results:
        if ok:
            print(msg, file=out)
        else:
            failed += 1
            print(f"error: {msg}", file=err)
    write_manifest(out_dir, "enhance", resolved, inputs)
    return EXIT_PARTIAL if failed else EXIT_OK


# --- fuse / score / refs ---------------------------------------------------


def run_fuse(inputs, out_dir, resolved, out=sys.stdout, err=sys.stderr):
    if len(inputs) < 2:
        raise UsageError("fuse needs at least two images")
    images = [load(p) for p in inputs]
    for p, img in zip(inputs[1:], images[1:]):
        if img.shape != images[0].shape:
            raise UsageError(
                f"dimension mismatch: {inputs[0]} is {images[0].shape[1]}x{images[0].shape[0]}, "
                f"{p} is {img.shape[1]}x{img.shape[0]}"
            )
    qcfg = cfgmod.build_enhance_config(resolved).quality
    cands = CandidateSet(images, [os.path.basename(p) for p in inputs])
    fuse_fn = weighted_fuse if resolved["baseline_weighted_fusion"] else fuse
    result = fuse_fn(cands, qcfg)
    atomic_write(os.path.join(out_dir, "fused.png"), encode_srgb8(result.pseudo_gt))
    atomic_write(os.path.join(out_dir, "fused_winner.png"), _index_png(result.winner_index))
    counts = np.bincount(result.winner_index.ravel(), minlength=len(cands))
    for p, n in zip(inputs, counts):
        print(f"{os.path.basename(p)}: {n} px", file=out)
    write_manifest(out_dir, "fuse", resolved, inputs)
    return EXIT_OK


_PLANES = ("exposedness", "contrast", "saturation", "composite")


def run_score(inputs, out_dir, resolved, out=sys.stdout, err=sys.stderr):
    qcfg = cfgmod.build_enhance_config(resolved).quality
    failed = 0
    for path in inputs:
        try:
            img = load(path)
        except (OSError, ImageDecodeError) as exc:
            print(f"error: {path}: {exc}", file=err)
            failed += 1
            continue
        maps = composite_score(img, qcfg)
        s = stem(path)
        stats = ["plane,min,max,mean\n"]
        for name in _PLANES:
            plane = getattr(maps, name)
            atomic_write(os.path.join(out_dir, f"{s}_{name}.png"), _gray_png(plane))
            stats.append(f"{name},{plane.min()!r},{plane.max()!r},{plane.mean()!r}\n")
        atomic_write(os.path.join(out_dir, f"{s}_score_stats.txt"), "".join(stats))
        print(f"{os.path.basename(path)}: mean composite {_fmt(maps.composite.mean())}", file=out)
    write_manifest(out_dir, "score", resolved, inputs)
    return EXIT_PARTIAL if failed else EXIT_OK


def run_refs(inputs, out_dir, resolved, out=sys.stdout, err=sys.stderr):
    failed = 0
    for path in inputs:
        try:
            img = load(path)
        except (OSError, ImageDecodeError) as exc:
            print(f"error: {path}: {exc}", file=err)
            failed += 1
            continue
        rcfg = cfgmod.build_enhance_config(resolved, seed=image_seed(resolved["seed"], path)).refgen
        refs, gammas = sample_references(img, rcfg)
        s = stem(path)
        for i, (ref, g) in enumerate(zip(refs, gammas)):
            kind = "dark" if i < rcfg.n_each_side else "bright"
            name = f"{s}_ref{i}_{kind}_gamma{g:.6f}.png"
            atomic_write(os.path.join(out_dir, name), encode_srgb8(ref))
            print(name, file=out)
    write_manifest(out_dir, "refs", resolved, inputs)
    return EXIT_PARTIAL if failed else EXIT_OK


# --- eval -----------------------------------------------------------------


def _pair_files(pred_dir, ref_dir):
    refs = {stem(p): p for p in expand_inputs([ref_dir])}
    pairs, missing = [], []
    for p in expand_inputs([pred_dir]):
        s = stem(p)
        key = s if s in refs else s.removesuffix("_enhanced")
        if key in refs:
            pairs.append((key, p, refs[key]))
        else:
            missing.append(p)
    return pairs, missing


def run_eval(inputs, out_dir, resolved, out=sys.stdout, err=sys.stderr):
    if len(inputs) != 2:
        raise UsageError("eval takes exactly two paths: <enhanced> <reference>")
    a, b = inputs
    if os.path.isdir(a) and os.path.isdir(b):
        pairs, missing = _pair_files(a, b)
    elif os.path.isfile(a) and os.path.isfile(b):
        pairs, missing = [(stem(a), a, b)], []
    else:
        raise UsageError("eval takes two directories or two files")
    if not pairs:
        raise UsageError("no matching image pairs")
    failed = len(missing)
    for p in missing:
        print(f"error: {p}: no reference image with a matching name", file=err)
    rows = ["name,psnr,ssim\n"]
    for name, p, r in pairs:
        try:
            rep = evaluate(load(p), load(r))
        except (OSError, ValueError) as exc:
            print(f"error: {p}: {exc}", file=err)
            failed += 1
            continue
        rows.append(f"{name},{rep.psnr:.4f},{rep.ssim:.6f}\n")
    out.write("".join(rows))
    if out_dir:
        atomic_write(os.path.join(out_dir, "eval.csv"), "".join(rows))
    return EXIT_PARTIAL if failed else EXIT_OK


COMMANDS = {
    "enhance": run_enhance,
    "fuse": run_fuse,
    "score": run_score,
    "refs": run_refs,
    "eval": run_eval,
}

# flag dest -> config key
_FLAG_KEYS = {
    "seed": "seed",
    "alpha": "alpha",
    "epochs": "epochs",
    "steps": "steps",
    "lr": "lr",
    "n_refs": "n_refs",
    "patch_k": "patch_k",
    "mu": "mu",
    "work_size": "work_size",
    "jobs": "jobs",
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("inputs", nargs="*", help="image files or directories")
    common.add_argument("-o", "--output-dir", help="directory for artifacts")
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    common.add_argument("--seed")
    common.add_argument("--alpha")
    common.add_argument("--epochs")
    common.add_argument("--steps")
    common.add_argument("--lr")
    common.add_argument("--n-refs", dest="n_refs")
    common.add_argument("--patch-k", dest="patch_k")
    common.add_argument("--mu")
    common.add_argument("--work-size", dest="work_size")
    common.add_argument("--jobs")
    common.add_argument("--emit-gamma", action="store_true", default=None)
    common.add_argument("--baseline-weighted-fusion", action="store_true", default=None)

    parser = argparse.ArgumentParser(
        prog="gammafuse",
        description="Reference-free exposure correction by progressive gamma-field fitting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "enhance": "enhance images",
        "fuse": "fuse aligned images into a pseudo ground truth",
        "score": "dump per-pixel quality planes",
        "refs": "write randomized reference images",
        "eval": "PSNR/SSIM of enhanced images against references",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def resolve_args(args):
    layers = []
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                layers.append(cfgmod.parse_config_text(fh.read()))
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        k, v = cfgmod.parse_value(k, v)
        overrides[k] = v
    for dest, key in _FLAG_KEYS.items():
        v = getattr(args, dest)
        if v is not None:
            overrides.update([cfgmod.parse_value(key, v)])
    if args.emit_gamma:
        overrides["emit_gamma"] = True
    if args.baseline_weighted_fusion:
        overrides["baseline_weighted_fusion"] = True
    layers.append(overrides)
    return cfgmod.resolve(*layers)


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        resolved = resolve_args(args)
        if args.command == "eval":
            inputs = list(args.inputs)
        else:
            inputs = expand_inputs(args.inputs)
            if not inputs:
                raise UsageError("no inputs")
            if not args.output_dir:
                raise UsageError("--output-dir is required")
        if args.output_dir:
            os.makedirs(args.output_dir, exist_ok=True)
        return COMMANDS[args.command](inputs, args.output_dir, resolved, out=out, err=err)
    except (UsageError, cfgmod.ConfigError) as exc:
        print(f"gammafuse {args.command}: {exc}", file=err)
        return EXIT_USAGE
    except (OSError, ImageDecodeError) as exc:
        # Only reached by commands that cannot skip a bad input.
        print(f"gammafuse {args.command}: {exc}", file=err)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
