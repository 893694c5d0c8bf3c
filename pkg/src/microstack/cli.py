"""microstack command-line tool.

Subcommands wire ingestion, classification, deblurring, fusion and metrics
into one scriptable pipeline. Exit codes: 0 ok, 1 usage, 2 config/model,
3 empty pipeline result, 4 I/O failure. Reports always echo the seed and
config so every number is reproducible.
"""

import argparse
import csv
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from microstack import __version__, defocus, deblur, focusmeasure, fusion, imgcore, nn, quality, synth
from microstack.backend import backend_name
from microstack.report import write_report

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_EMPTY = 3
EXIT_IO = 4


class ConfigError(Exception):
    pass


class EmptyResultError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the CLI contract says 1
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_REQUIRED = object()

CLASSIFIER_SCHEMA = {
    "epochs": (int, _REQUIRED),
    "lr": (float, 1e-3),
    "batch_size": (int, 8),
    "levels": (int, 10),
    "loss": (str, "cross_entropy"),
    "seed": (int, 0),
    "crops_per_level": (int, 200),
    "blur_family": (str, "gaussian"),
    "level_step": (float, 0.8),
    "source": (str, "synthetic"),
    "specimens": (int, 4),
    "image_size": (int, 256),
    "data_seed": (int, 11),
    "stack_dir": (str, ""),
    "sharpest_index": (int, 0),
    "step_frames": (int, 1),
}

DEBLUR_SCHEMA = {
    "epochs": (int, _REQUIRED),
    "lr": (float, 1e-3),
    "batch_size": (int, 4),
    "patch_size": (int, 64),
    "seed": (int, 0),
    "pairs": (int, 20),
    "frames": (int, 4),
    "image_size": (int, 192),
    "data_seed": (int, 7),
    "noise_sigma": (float, 0.01),
    "kinds": (str, "motion,gaussian"),
    "motion_min": (int, 3),
    "motion_max": (int, 9),
    "sigma_min": (float, 0.5),
    "sigma_max": (float, 2.0),
}


def load_config(path, schema):
    """Flat key=value (TOML) config with strict key checking."""
    try:
        data = tomllib.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid config syntax in {path}: {e}") from e
    for key in data:
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r} in {path}")
    out = {}
    for key, (typ, default) in schema.items():
        if key in data:
            try:
                out[key] = typ(data[key])
            except (TypeError, ValueError) as e:
                raise ConfigError(f"config key {key!r}: {e}") from e
        elif default is _REQUIRED:
            raise ConfigError(f"missing required config key {key!r} in {path}")
        else:
            out[key] = default
    return out


def _common_parent():
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--seed", type=int, default=0, help="global random seed")
    parent.add_argument("--threads", type=int, default=1, help="frame-level workers")
    parent.add_argument("--report", type=str, default=None, help="write a report file")
    parent.add_argument("--format", choices=("json", "md"), default="json",
                        help="report format")
    return parent


def build_parser():
    parent = _common_parent()
    parser = _Parser(prog="microstack",
                     description="z-stack microscopy processing toolkit")
    parser.add_argument("--version", action="version", version=f"microstack {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("focus-score", parents=[parent],
                       help="print per-frame focus scores as CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--op", default="tenengrad", choices=focusmeasure.OPERATORS)
    p.add_argument("--pattern", default="frame_*.*")

    p = sub.add_parser("classify", parents=[parent],
                       help="per-frame in/out-of-focus decisions")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--pattern", default="frame_*.*")
    p.add_argument("--n-crops", type=int, default=8)
    p.add_argument("--level-threshold", type=float, default=None)
    p.add_argument("--fg-threshold", type=float, default=0.05)

    p = sub.add_parser("train-classifier", parents=[parent],
                       help="train the defocus-level classifier")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None, help="loss log CSV (default: <out>.loss.csv)")

    p = sub.add_parser("train-deblur", parents=[parent],
                       help="train the deblurring network")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None)

    p = sub.add_parser("deblur", parents=[parent], help="restore a directory of frames")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--pattern", default="frame_*.*")
    p.add_argument("--tile", type=int, default=256)
    p.add_argument("--overlap", type=int, default=16)

    p = sub.add_parser("fuse", parents=[parent], help="focus-stack a z-stack directory")
    p.add_argument("--input", required=True)
    p.add_argument("--pattern", default="frame_*.*")
    p.add_argument("--method", choices=("masks", "wavelet"), default="masks")
    p.add_argument("--output", required=True)
    p.add_argument("--save-masks", default=None)
    p.add_argument("--save-index-map", default=None)
    p.add_argument("--feather", type=float, default=2.0)
    p.add_argument("--levels", type=int, default=4)

    p = sub.add_parser("metrics", parents=[parent], help="image quality metrics")
    p.add_argument("--ref", default=None)
    p.add_argument("--test", default=None)
    p.add_argument("--no-ref", default=None)
    p.add_argument("--pristine", default=None)

    p = sub.add_parser("fit-pristine", parents=[parent],
                       help="fit the no-reference pristine statistics model")
    p.add_argument("--input", required=True)
    p.add_argument("--pattern", default="*.png")
    p.add_argument("--out", required=True)
    p.add_argument("--lam", type=float, default=1e-3)

    p = sub.add_parser("pipeline", parents=[parent],
                       help="classify, deblur, fuse and score a stack")
    p.add_argument("--input", required=True)
    p.add_argument("--pattern", default="frame_*.*")
    p.add_argument("--classifier", default=None)
    p.add_argument("--deblurrer", default=None)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--level-threshold", type=float, default=None)
    p.add_argument("--n-crops", type=int, default=8)
    p.add_argument("--method", choices=("masks", "wavelet"), default="masks")
    p.add_argument("--feather", type=float, default=2.0)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--tile", type=int, default=256)
    p.add_argument("--skip-classify", action="store_true")
    p.add_argument("--skip-deblur", action="store_true")
    p.add_argument("--skip-fuse", action="store_true")
    p.add_argument("--fuse-before-deblur", action="store_true")
    p.add_argument("--truth", default=None, help="all-in-focus reference image")
    p.add_argument("--pristine", default=None, help="pristine model for no-ref score")

    p = sub.add_parser("synth", parents=[parent],
                       help="generate synthetic stacks and blur pairs")
    p.add_argument("--kind", choices=("zstack", "specimens", "pairs", "complementary"),
                   required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--step", type=float, default=0.8)
    p.add_argument("--family", choices=("gaussian", "disk", "airy"), default="gaussian")
    p.add_argument("--bands", type=int, default=2)
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--noise", type=float, default=0.01)

    return parser


def _load_model(path):
    try:
        return nn.load_model(path)
    except FileNotFoundError as e:
        raise ConfigError(f"model file not found: {path}") from e
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _map_frames(fn, frames, threads):
    if threads <= 1:
        return [fn(i, f) for i, f in enumerate(frames)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: fn(*t), enumerate(frames)))


def _base_report(args, config):
    return {
        "tool_version": __version__,
        "backend": backend_name(),
        "seed": args.seed,
        "config": config,
        "timings": {},
    }


def cmd_focus_score(args):
    stack = imgcore.load_stack(args.input, args.pattern)
    writer = csv.writer(sys.stdout)
    rows = []
    for i, frame in enumerate(stack.frames):
        score = focusmeasure.score_image(frame, args.op)
        writer.writerow([i, score.operator, f"{score.value:.9g}"])
        rows.append({"index": i, "operator": score.operator, "value": score.value})
    if args.report:
        rep = _base_report(args, {"input": args.input, "op": args.op})
        rep["frames"] = rows
        write_report(rep, args.report, args.format)
    return EXIT_OK


def _classify_stack(net, stack, args):
    def one(i, frame):
        decision, mean_level, crop_levels = defocus.classify_frame(
            net,
            frame,
            n_crops=args.n_crops,
            seed=args.seed + i,
            level_threshold=args.level_threshold,
            fg_threshold=args.fg_threshold,
        )
        return {
            "index": i,
            "decision": decision,
            "mean_level": mean_level,
            "crop_levels": crop_levels,
        }

    return _map_frames(one, stack.frames, args.threads)


def cmd_classify(args):
    net = _load_model(args.model)
    stack = imgcore.load_stack(args.input, args.pattern)
    t0 = time.perf_counter()
    records = _classify_stack(net, stack, args)
    for rec in records:
        print(f"frame {rec['index']:5d}: {rec['decision']} (mean level {rec['mean_level']:.3f})")
    if args.report:
        rep = _base_report(args, {
            "model": args.model,
            "input": args.input,
            "n_crops": args.n_crops,
            "level_threshold": args.level_threshold,
            "fg_threshold": args.fg_threshold,
        })
        rep["frames"] = records
        rep["timings"]["classify"] = time.perf_counter() - t0
        write_report(rep, args.report, args.format)
    return EXIT_OK


def _write_loss_log(path, losses):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "loss"])
        for i, v in enumerate(losses, start=1):
            w.writerow([i, f"{v:.9g}"])


def _classifier_dataset(cfg):
    if cfg["source"] == "synthetic":
        images = [
            synth.make_specimen(cfg["image_size"], cfg["image_size"], seed=cfg["data_seed"] + i)
            for i in range(cfg["specimens"])
        ]
        return defocus.build_synthetic_dataset(
            images,
            k_levels=cfg["levels"],
            crops_per_level=cfg["crops_per_level"],
            blur_family=cfg["blur_family"],
            seed=cfg["data_seed"],
            level_step=cfg["level_step"],
        )
    if cfg["source"] == "zstack":
        if not cfg["stack_dir"]:
            raise ConfigError("source = 'zstack' requires stack_dir")
        stack = imgcore.load_stack(cfg["stack_dir"])
        return defocus.build_zstack_dataset(
            stack,
            sharpest_index=cfg["sharpest_index"],
            k_levels=cfg["levels"],
            step_frames=cfg["step_frames"],
            crops_per_level=cfg["crops_per_level"],
            seed=cfg["data_seed"],
        )
    raise ConfigError(f"unknown source {cfg['source']!r} (use synthetic or zstack)")


def cmd_train_classifier(args):
    cfg = load_config(args.config, CLASSIFIER_SCHEMA)
    dataset = _classifier_dataset(cfg)
    config = defocus.ClassifierConfig(
        k_levels=cfg["levels"],
        epochs=cfg["epochs"],
        lr=cfg["lr"],
        batch_size=cfg["batch_size"],
        loss=cfg["loss"],
        seed=cfg["seed"],
    )
    try:
        config.validate()
    except ValueError as e:
        raise ConfigError(str(e)) from e
    t0 = time.perf_counter()
    net, losses = defocus.train_classifier(dataset, config)
    train_s = time.perf_counter() - t0
    final_loss = defocus.dataset_loss(net, dataset, config.loss)
    extra = dict(cfg)
    extra["final_train_loss"] = final_loss
    nn.save_model(net, args.out, extra=extra)
    log_path = args.log or f"{args.out}.loss.csv"
    _write_loss_log(log_path, losses)
    print(f"trained {cfg['epochs']} epochs in {train_s:.1f} s; "
          f"final loss {final_loss:.6f}; model -> {args.out}")
    if args.report:
        rep = _base_report(args, extra)
        rep["timings"]["train"] = train_s
        write_report(rep, args.report, args.format)
    return EXIT_OK


def _deblur_pairs(cfg):
    frames = [
        synth.make_texture(cfg["image_size"], cfg["image_size"], seed=cfg["data_seed"] + i)
        for i in range(cfg["frames"])
    ]
    kinds = tuple(k.strip() for k in cfg["kinds"].split(",") if k.strip())
    recipe = deblur.BlurRecipe(
        kinds=kinds,
        motion_length=(cfg["motion_min"], cfg["motion_max"]),
        gaussian_sigma=(cfg["sigma_min"], cfg["sigma_max"]),
        noise_sigma=cfg["noise_sigma"],
    )
    return deblur.make_blur_pairs(frames, recipe, cfg["pairs"], seed=cfg["data_seed"])


def cmd_train_deblur(args):
    cfg = load_config(args.config, DEBLUR_SCHEMA)
    pairs = _deblur_pairs(cfg)
    config = deblur.DeblurConfig(
        patch_size=cfg["patch_size"],
        epochs=cfg["epochs"],
        lr=cfg["lr"],
        batch_size=cfg["batch_size"],
        seed=cfg["seed"],
    )
    try:
        config.validate()
    except ValueError as e:
        raise ConfigError(str(e)) from e
    t0 = time.perf_counter()
    net, losses = deblur.train_deblur(pairs, config)
    train_s = time.perf_counter() - t0
    final_loss = deblur.pairs_loss(net, pairs)
    extra = dict(cfg)
    extra["final_train_loss"] = final_loss
    nn.save_model(net, args.out, extra=extra)
    log_path = args.log or f"{args.out}.loss.csv"
    _write_loss_log(log_path, losses)
    print(f"trained {cfg['epochs']} epochs in {train_s:.1f} s; "
          f"final full-frame loss {final_loss:.6f}; model -> {args.out}")
    if args.report:
        rep = _base_report(args, extra)
        rep["timings"]["train"] = train_s
        write_report(rep, args.report, args.format)
    return EXIT_OK


def cmd_deblur(args):
    net = _load_model(args.model)
    stack = imgcore.load_stack(args.input, args.pattern)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()

    def one(i, frame):
        restored = deblur.deblur_image(net, frame, tile=args.tile, overlap=args.overlap)
        imgcore.save_image(restored, out_dir / f"frame_{i:05d}.png")
        return i

    _map_frames(one, stack.frames, args.threads)
    if args.report:
        rep = _base_report(args, {
            "model": args.model, "input": args.input, "output": args.output,
            "tile": args.tile, "overlap": args.overlap,
        })
        rep["deblur"] = {"frames": len(stack)}
        rep["timings"]["deblur"] = time.perf_counter() - t0
        write_report(rep, args.report, args.format)
    return EXIT_OK


def _fuse_stack(stack, method, feather, levels, save_masks=None, save_index_map=None):
    if method == "wavelet":
        return fusion.wavelet_fuse(stack, levels=levels), None
    index_map = fusion.refine_mask(fusion.focus_index_map(stack))
    fused = fusion.composite_fuse(stack, index_map, feather=feather)
    if save_masks:
        mask_dir = Path(save_masks)
        mask_dir.mkdir(parents=True, exist_ok=True)
        for i, mask in enumerate(fusion.masks_from_index_map(index_map, len(stack))):
            imgcore.save_mask(mask, mask_dir / f"mask_{i:05d}.png")
    if save_index_map:
        fusion.save_index_map(index_map, save_index_map)
    return fused, index_map


def cmd_fuse(args):
    stack = imgcore.load_stack(args.input, args.pattern)
    t0 = time.perf_counter()
    fused, _ = _fuse_stack(stack, args.method, args.feather, args.levels,
                           args.save_masks, args.save_index_map)
    imgcore.save_image(fused, args.output)
    print(f"fused {len(stack)} frames -> {args.output}")
    if args.report:
        rep = _base_report(args, {
            "input": args.input, "method": args.method,
            "feather": args.feather, "levels": args.levels,
        })
        rep["fusion"] = {"method": args.method, "output": str(args.output),
                         "frames": len(stack)}
        rep["timings"]["fuse"] = time.perf_counter() - t0
        write_report(rep, args.report, args.format)
    return EXIT_OK


def cmd_metrics(args):
    results = {}
    if args.no_ref:
        if not args.pristine:
            raise ConfigError("--no-ref requires --pristine <model.json>")
        model = quality.load_pristine(args.pristine)
        img = imgcore.load_image(args.no_ref)
        results["noref_score"] = quality.brisque_score(img, model)
        print(f"noref_score {results['noref_score']:.4f}")
    elif args.ref and args.test:
        a = imgcore.load_image(args.ref)
        b = imgcore.load_image(args.test)
        results["psnr"] = quality.psnr(a, b)
        results["ssim"] = quality.ssim(a, b)
        psnr_text = "inf" if results["psnr"] == float("inf") else f"{results['psnr']:.4f}"
        print(f"psnr {psnr_text}")
        print(f"ssim {results['ssim']:.4f}")
    else:
        raise ConfigError("metrics needs either --ref and --test, or --no-ref")
    if args.report:
        rep = _base_report(args, {
            "ref": args.ref, "test": args.test,
            "no_ref": args.no_ref, "pristine": args.pristine,
        })
        rep["quality"] = results
        write_report(rep, args.report, args.format)
    return EXIT_OK


def cmd_fit_pristine(args):
    paths = sorted(Path(args.input).glob(args.pattern))
    if not paths:
        raise ConfigError(f"no images matching {args.pattern!r} in {args.input}")
    corpus = [imgcore.load_image(p) for p in paths]
    try:
        model = quality.fit_pristine(corpus, lam=args.lam)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    quality.save_pristine(model, args.out)
    print(f"pristine model over {len(corpus)} images -> {args.out}")
    return EXIT_OK


def cmd_pipeline(args):
    classifier = _load_model(args.classifier) if args.classifier and not args.skip_classify else None
    deblurrer = _load_model(args.deblurrer) if args.deblurrer and not args.skip_deblur else None
    if not args.skip_classify and classifier is None:
        raise ConfigError("pipeline needs --classifier (or --skip-classify)")
    if not args.skip_deblur and deblurrer is None:
        raise ConfigError("pipeline needs --deblurrer (or --skip-deblur)")

    stack = imgcore.load_stack(args.input, args.pattern)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = {
        "input": args.input,
        "classifier": args.classifier,
        "deblurrer": args.deblurrer,
        "level_threshold": args.level_threshold,
        "n_crops": args.n_crops,
        "method": args.method,
        "feather": args.feather,
        "levels": args.levels,
        "tile": args.tile,
        "skip_classify": args.skip_classify,
        "skip_deblur": args.skip_deblur,
        "skip_fuse": args.skip_fuse,
        "fuse_before_deblur": args.fuse_before_deblur,
        "threads": args.threads,
        "truth": args.truth,
        "pristine": args.pristine,
    }
    rep = _base_report(args, config)
    rep["frames"] = []
    rep["deblur"] = None
    rep["fusion"] = None
    rep["quality"] = None

    # classify: drop out-of-focus frames
    survivors = list(range(len(stack)))
    if not args.skip_classify:
        t0 = time.perf_counter()
        records = _classify_stack(classifier, stack, args)
        rep["frames"] = records
        rep["timings"]["classify"] = time.perf_counter() - t0
        survivors = [r["index"] for r in records if r["decision"] == "in_focus"]
    report_path = args.report or out_dir / "report.json"
    if not survivors:
        rep["survivors"] = []
        write_report(rep, report_path, args.format)
        print("pipeline: every frame classified out_of_focus", file=sys.stderr)
        return EXIT_EMPTY
    rep["survivors"] = survivors
    frames = [stack.frames[i] for i in survivors]

    def run_deblur(frame_list):
        t0 = time.perf_counter()
        restored = _map_frames(
            lambda i, f: deblur.deblur_image(deblurrer, f, tile=args.tile),
            frame_list,
            args.threads,
        )
        rep["deblur"] = {"frames": len(restored)}
        rep["timings"]["deblur"] = time.perf_counter() - t0
        return restored

    def run_fuse(frame_list):
        t0 = time.perf_counter()
        fused_img, _ = _fuse_stack(
            imgcore.ZStack(list(frame_list)), args.method, args.feather, args.levels,
            save_masks=None, save_index_map=None,
        )
        fused_path = out_dir / "fused.png"
        imgcore.save_image(fused_img, fused_path)
        rep["fusion"] = {"method": args.method, "output": str(fused_path),
                         "frames": len(frame_list)}
        rep["timings"]["fuse"] = time.perf_counter() - t0
        return fused_img

    fused = None
    if args.fuse_before_deblur and not args.skip_fuse:
        fused = run_fuse(frames)
        if not args.skip_deblur:
            fused = run_deblur([fused])[0]
            imgcore.save_image(fused, out_dir / "fused.png")
    else:
        if not args.skip_deblur:
            frames = run_deblur(frames)
        if not args.skip_fuse:
            fused = run_fuse(frames)

    if fused is not None:
        scores = {}
        if args.truth:
            truth = imgcore.load_image(args.truth)
            scores["psnr_vs_truth"] = quality.psnr(fused, truth)
            scores["ssim_vs_truth"] = quality.ssim(fused, truth)
        if args.pristine:
            model = quality.load_pristine(args.pristine)
            scores["noref_score"] = quality.brisque_score(fused, model)
        if scores:
            rep["quality"] = scores
    write_report(rep, report_path, args.format)
    print(f"pipeline done: {len(survivors)}/{len(stack)} frames kept; report -> {report_path}")
    return EXIT_OK


def cmd_synth(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "zstack":
        stack = synth.make_zstack(args.size, args.size, n_frames=args.frames,
                                  seed=args.seed, step=args.step, family=args.family)
        for i, frame in enumerate(stack.frames):
            imgcore.save_image(frame, out / f"frame_{i:05d}.png")
        print(f"wrote {len(stack)} frames -> {out}")
    elif args.kind == "specimens":
        for i in range(args.frames):
            img = synth.make_specimen(args.size, args.size, seed=args.seed + i)
            imgcore.save_image(img, out / f"frame_{i:05d}.png")
        print(f"wrote {args.frames} specimens -> {out}")
    elif args.kind == "pairs":
        frames = [synth.make_texture(args.size, args.size, seed=args.seed + i)
                  for i in range(max(1, args.frames // 4))]
        recipe = deblur.BlurRecipe(noise_sigma=args.noise)
        pairs = deblur.make_blur_pairs(frames, recipe, args.frames, seed=args.seed)
        for i, (b, s) in enumerate(zip(pairs.blurred, pairs.sharp)):
            imgcore.save_image(b, out / f"blurred_{i:05d}.png")
            imgcore.save_image(s, out / f"sharp_{i:05d}.png")
        print(f"wrote {len(pairs)} pairs -> {out}")
    elif args.kind == "complementary":
        stack, truth = synth.make_complementary_stack(
            args.size, args.size, n_bands=args.bands, seed=args.seed, sigma=args.sigma)
        for i, frame in enumerate(stack.frames):
            imgcore.save_image(frame, out / f"frame_{i:05d}.png")
        imgcore.save_image(truth, out / "truth.png")
        print(f"wrote {len(stack)} complementary frames + truth -> {out}")
    return EXIT_OK


_HANDLERS = {
    "focus-score": cmd_focus_score,
    "classify": cmd_classify,
    "train-classifier": cmd_train_classifier,
    "train-deblur": cmd_train_deblur,
    "deblur": cmd_deblur,
    "fuse": cmd_fuse,
    "metrics": cmd_metrics,
    "fit-pristine": cmd_fit_pristine,
    "pipeline": cmd_pipeline,
    "synth": cmd_synth,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as e:
        print(f"microstack: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except EmptyResultError as e:
        print(f"microstack: {e}", file=sys.stderr)
        return EXIT_EMPTY
    except OSError as e:
        print(f"microstack: i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"microstack: error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
