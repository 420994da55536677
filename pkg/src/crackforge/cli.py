"""Batch command line: generate -> embed -> train -> segment -> eval.

Every run writes a manifest JSON capturing the exact parameters and seeds
used plus content hashes of inputs and outputs, so any artifact can be
reproduced bit-exactly from its manifest.  Subcommand parameters may come
from a ``--config run.json`` file; explicit flags override config values.

Exit codes: 0 success, 2 configuration error, 3 runtime error.  The
``CRACKFORGE_THREADS`` environment variable caps the generation worker pool.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .dilation import adaptive_dilate, dilate_fixed_width
from .embed import embed_crack, estimate_pore_gvd
from .errors import ConfigError, CrackforgeError
from .fbm import FbmParams, combine_cracks, gen_fbm_height_field, \
    gen_fbm_profile, rasterize_height_field, rasterize_height_profile
from .metrics import score
from .multiscale import FusionConfig, segment_multiscale
from .network import NetworkConfig, RieszNetwork, TrainConfig, load_model, \
    predict, save_model, train
from .surface import boundary_cycle, min_weight_surface, rasterize_surface
from .volume import BinaryMask, VoxelVolume, load_mask, load_volume, \
    normalize_gray, save_mask, save_volume
from .voronoi import build_voronoi, sample_poisson_points, VoronoiParams


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _file_entry(path) -> dict:
    return {"path": str(path), "sha256": _sha256(path)}


def _volume_files(path) -> list[Path]:
    stem = Path(path)
    if stem.suffix in (".raw", ".json"):
        stem = stem.with_suffix("")
    return [stem.with_suffix(".raw"), stem.with_suffix(".json")]


def _write_manifest(path, command: str, params: dict, inputs=(), outputs=()):
    manifest = {
        "tool": f"crackforge {__version__}",
        "command": command,
        "params": params,
        "inputs": [_file_entry(p) for group in inputs
                   for p in _volume_files(group)] if inputs else [],
        "outputs": [_file_entry(p) for group in outputs
                    for p in _volume_files(group)] if outputs else [],
    }
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def _worker_count() -> int:
    env = os.environ.get("CRACKFORGE_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"CRACKFORGE_THREADS={env!r} is not an integer") from exc
        if n < 1:
            raise ConfigError("CRACKFORGE_THREADS must be >= 1")
        return n
    return min(8, os.cpu_count() or 1)


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return cfg


def _merge(args: argparse.Namespace, config: dict, key: str, default):
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


# generate --------------------------------------------------------------------


def _spawn_seeds(master: int, count: int) -> list[int]:
    return [int(s.generate_state(1)[0] % (2**31))
            for s in np.random.SeedSequence(master).spawn(count)]


def _generate_one_mask(spec: dict, dims, width, seed: int) -> BinaryMask:
    model = spec.get("model", "fbm")
    n_cracks = int(spec.get("cracks_per_image", 1))
    crack_seeds = _spawn_seeds(seed, n_cracks + 1)
    parts = []
    for cs in crack_seeds[:n_cracks]:
        if model == "fbm":
            parts.append(_fbm_mask(spec, dims, cs))
        elif model == "voronoi":
            parts.append(_voronoi_mask(spec, dims, cs))
        else:
            raise ConfigError(f"unknown crack model {model!r}")
    mask = combine_cracks(parts)
    dilation = spec.get("dilation", {})
    if width is not None:
        mask = dilate_fixed_width(mask, width)
    elif "p" in dilation:
        mask, _ = adaptive_dilate(mask, float(dilation["p"]), crack_seeds[-1])
    return mask


def _fbm_mask(spec: dict, dims, seed: int) -> BinaryMask:
    nx, ny, nz = dims
    hurst = float(spec.get("hurst", 0.8))
    if nz == 1:
        amplitude = float(spec.get("amplitude", 0.15 * ny))
        params = FbmParams(hurst=hurst, grid_n=nx, amplitude=amplitude, seed=seed)
        mask, _ = rasterize_height_profile(gen_fbm_profile(params) + ny / 2.0, dims)
    else:
        if nx != ny:
            raise ConfigError(f"fbm surfaces need nx == ny, got {dims}")
        amplitude = float(spec.get("amplitude", 0.15 * nz))
        params = FbmParams(hurst=hurst, grid_n=nx, amplitude=amplitude, seed=seed)
        mask, _ = rasterize_height_field(gen_fbm_height_field(params) + nz / 2.0, dims)
    return mask


def _voronoi_mask(spec: dict, dims, seed: int) -> BinaryMask:
    nx, ny, nz = dims
    if nz == 1:
        raise ConfigError("the voronoi model needs a 3D volume (nz > 1)")
    window_spec = spec.get("window", [float(nx), float(ny), float(nz)])
    window = ((0.0, 0.0, 0.0), tuple(float(w) for w in window_spec))
    params = VoronoiParams(
        intensity=float(spec.get("intensity", 20.0 / np.prod(window[1]))),
        window=window, weight_mode=spec.get("weight_mode", "geometric"),
        seed=seed)
    points = sample_poisson_points(params)
    tess = build_voronoi(points, window, weight_mode=params.weight_mode,
                         seed=seed)
    cycle = boundary_cycle(tess, seed=seed)
    chain = min_weight_surface(tess, cycle)
    return rasterize_surface(tess, chain, dims)


def cmd_generate(args) -> int:
    config = _load_config(args.config)
    spec_path = _merge(args, config, "spec", None)
    if spec_path is None:
        raise ConfigError("generate needs --spec crackspec.json")
    spec = _load_config(spec_path)
    out_dir = Path(_merge(args, config, "out", "generated"))
    out_dir.mkdir(parents=True, exist_ok=True)

    dims = tuple(int(n) for n in spec.get("dims", (64, 64, 64)))
    if len(dims) != 3 or min(dims) < 1:
        raise ConfigError(f"bad dims {dims}")
    master_seed = int(_merge(args, config, "seed", spec.get("seed", 0)))

    dilation = spec.get("dilation", {})
    widths = spec.get("widths")
    if widths is None and "fixed_width" in dilation:
        widths = [dilation["fixed_width"]]
    if widths is not None:
        widths = [int(w) for w in widths]
        for w in widths:
            if w < 1 or w % 2 == 0:
                raise ConfigError(f"crack widths must be odd and >= 1, got {w}")
        per_width = int(spec.get("count", 1))
        jobs = [(w, k) for w in widths for k in range(per_width)]
    else:
        if "p" in dilation and not 0.0 < float(dilation["p"]) < 1.0:
            raise ConfigError(f"dilation p must be in (0, 1), got {dilation['p']}")
        jobs = [(None, k) for k in range(int(spec.get("count", 1)))]

    seeds = _spawn_seeds(master_seed, len(jobs))
    spacing = float(spec.get("spacing_um", 1.0))

    def build(job_index: int):
        width, _ = jobs[job_index]
        seed = seeds[job_index]
        mask = _generate_one_mask(spec, dims, width, seed)
        name = out_dir / f"crack_{job_index:04d}_mask"
        save_mask(mask, name, spacing_um=spacing)
        return {"index": job_index, "width": width, "seed": seed,
                "path": str(name.with_suffix(".raw")),
                "foreground_voxels": mask.count()}

    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        records = list(pool.map(build, range(len(jobs))))

    manifest = {
        "tool": f"crackforge {__version__}",
        "command": "generate",
        "spec": spec,
        "master_seed": master_seed,
        "dims": list(dims),
        "masks": records,
        "outputs": [
            e for r in records for e in
            (_file_entry(Path(r["path"])),
             _file_entry(Path(r["path"]).with_suffix(".json")))
        ],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"generate: wrote {len(records)} masks to {out_dir}")
    return 0


# embed -------------------------------------------------------------------------


def cmd_embed(args) -> int:
    config = _load_config(args.config)
    ct_path = _merge(args, config, "ct", None)
    mask_path = _merge(args, config, "mask", None)
    out_path = _merge(args, config, "out", None)
    if not (ct_path and mask_path and out_path):
        raise ConfigError("embed needs --ct, --mask and --out")
    seed = int(_merge(args, config, "seed", 0))
    pore_quantile = float(_merge(args, config, "pore-quantile", 0.02))
    alpha = float(_merge(args, config, "alpha", 0.5))

    ct = load_volume(ct_path)
    if not args.assume_normalized:
        ct = normalize_gray(ct)
    mask = load_mask(mask_path)
    gvd = estimate_pore_gvd(ct, pore_quantile=pore_quantile)
    out = embed_crack(ct, mask, gvd, seed=seed, alpha=alpha)
    save_volume(out.astype(np.float32), out_path)
    _write_manifest(
        Path(out_path).with_suffix(".manifest.json"), "embed",
        {"seed": seed, "pore_quantile": pore_quantile, "alpha": alpha,
         "pore_voxels": gvd.n_voxels, "pore_threshold": gvd.threshold},
        inputs=[ct_path, mask_path], outputs=[out_path])
    print(f"embed: wrote {out_path}")
    return 0


# train -------------------------------------------------------------------------


def _find_pairs(data_dir: Path) -> list[tuple[Path, Path]]:
    pairs = []
    for img in sorted(data_dir.glob("*_img.raw")):
        mask = img.with_name(img.name.replace("_img.raw", "_mask.raw"))
        if mask.exists():
            pairs.append((img, mask))
    if not pairs:
        raise ConfigError(
            f"no *_img.raw / *_mask.raw pairs found in {data_dir}")
    return pairs


def cmd_train(args) -> int:
    config = _load_config(args.config)
    data_dir = _merge(args, config, "data", None)
    out_path = _merge(args, config, "out", None)
    if not (data_dir and out_path):
        raise ConfigError("train needs --data and --out")
    pairs = _find_pairs(Path(data_dir))
    dataset = [(load_volume(img), load_mask(msk)) for img, msk in pairs]
    d = 2 if dataset[0][0].ndim_spatial == 2 else 3

    warm_start = _merge(args, config, "warm-start", None)
    if warm_start:
        net = load_model(warm_start)
        if net.config.d != d:
            raise ConfigError(
                f"warm-start model is {net.config.d}D but data is {d}D")
    else:
        channels = _merge(args, config, "channels", "1,16,16,32,1")
        if isinstance(channels, str):
            channels = tuple(int(c) for c in channels.split(","))
        net = RieszNetwork.initialize(
            NetworkConfig(tuple(channels), d=d),
            seed=int(_merge(args, config, "seed", 0)))

    raw_weight = _merge(args, config, "class-weight", "auto")
    cfg = TrainConfig(
        epochs=int(_merge(args, config, "epochs", 20)),
        batch_size=int(_merge(args, config, "batch-size", 8)),
        learning_rate=float(_merge(args, config, "lr", 1e-3)),
        lr_decay=float(_merge(args, config, "lr-decay", 0.5)),
        lr_decay_every=int(_merge(args, config, "lr-decay-every", 5)),
        class_weight="auto" if raw_weight == "auto" else float(raw_weight),
        seed=int(_merge(args, config, "seed", 0)))

    result = train(net, dataset, cfg)
    save_model(net, out_path)
    manifest_path = Path(out_path).with_suffix(".manifest.json")
    manifest = {
        "tool": f"crackforge {__version__}",
        "command": "train",
        "params": {
            "epochs": cfg.epochs, "batch_size": cfg.batch_size,
            "learning_rate": cfg.learning_rate, "lr_decay": cfg.lr_decay,
            "lr_decay_every": cfg.lr_decay_every, "seed": cfg.seed,
            "channels": list(net.config.channels), "d": net.config.d,
            "class_weight": result.class_weight,
            "warm_start": str(warm_start) if warm_start else None,
        },
        "loss_history": result.loss_history,
        "inputs": [e for img, msk in pairs
                   for p in (img, msk) for e in [_file_entry(p)]],
        "outputs": [_file_entry(out_path)],
    }
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"train: {len(dataset)} pairs, class weight "
          f"{result.class_weight:.2f}, final loss {result.loss_history[-1]:.4f}")
    print(f"train: wrote {out_path}")
    return 0


# segment -----------------------------------------------------------------------


def cmd_segment(args) -> int:
    config = _load_config(args.config)
    model_path = _merge(args, config, "model", None)
    input_path = _merge(args, config, "input", None)
    out_path = _merge(args, config, "out", None)
    if not (model_path and input_path and out_path):
        raise ConfigError("segment needs --model, --input and --out")
    levels = int(_merge(args, config, "levels", 3))
    threshold = float(_merge(args, config, "threshold", 0.5))
    prob_path = _merge(args, config, "prob", None)

    net = load_model(model_path)
    volume = load_volume(input_path)
    if not args.assume_normalized:
        volume = normalize_gray(volume)

    prob_holder: dict[int, VoxelVolume] = {}

    def segmenter(level_volume: VoxelVolume) -> VoxelVolume:
        _, prob = predict(net, level_volume, threshold=threshold)
        if level_volume.dims == volume.dims:
            prob_holder[0] = prob  # level-0 map doubles as the --prob output
        return prob

    if levels == 1:
        mask, prob = predict(net, volume, threshold=threshold)
        prob_holder[0] = prob
    else:
        cfg = FusionConfig(levels=levels, factor=2, threshold=threshold)
        mask = segment_multiscale(segmenter, volume, cfg)

    save_mask(mask, out_path, spacing_um=volume.spacing_um)
    outputs = [out_path]
    if prob_path:
        save_volume(prob_holder[0].astype(np.float32), prob_path)
        outputs.append(prob_path)
    _write_manifest(
        Path(out_path).with_suffix(".manifest.json"), "segment",
        {"levels": levels, "threshold": threshold,
         "model": _file_entry(model_path)},
        inputs=[input_path], outputs=outputs)
    print(f"segment: wrote {out_path} ({mask.count()} crack voxels)")
    return 0


# eval --------------------------------------------------------------------------


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    pred_path = _merge(args, config, "pred", None)
    gt_path = _merge(args, config, "gt", None)
    if not (pred_path and gt_path):
        raise ConfigError("eval needs --pred and --gt")
    tol_raw = _merge(args, config, "tol", "0,1,2")
    if isinstance(tol_raw, str):
        tolerances = tuple(int(t) for t in tol_raw.split(","))
    else:
        tolerances = tuple(int(t) for t in tol_raw)
    json_path = _merge(args, config, "json", None)

    pred = load_mask(pred_path)
    gt = load_mask(gt_path)
    report = score(pred, gt, tolerances=tolerances)
    payload = report.to_dict()
    payload["inputs"] = {"pred": _file_entry(_volume_files(pred_path)[0]),
                         "gt": _file_entry(_volume_files(gt_path)[0])}
    text = json.dumps(payload, indent=2)
    if json_path:
        Path(json_path).write_text(text + "\n")
    for t in tolerances:
        s = report.scores[t]
        print(f"eval: tol {t}  precision {s.precision:.4f}  "
              f"recall {s.recall:.4f}  f1 {s.f1:.4f}")
    if not json_path:
        print(text)
    return 0


# export-slices -----------------------------------------------------------------


def cmd_export_slices(args) -> int:
    from PIL import Image

    config = _load_config(args.config)
    input_path = _merge(args, config, "input", None)
    if input_path is None:
        raise ConfigError("export-slices needs --input")
    mask_path = _merge(args, config, "mask", None)
    axis_name = str(_merge(args, config, "axis", "z")).lower()
    if axis_name not in ("x", "y", "z"):
        raise ConfigError(f"axis must be one of x, y, z; got {axis_name!r}")
    axis = "xyz".index(axis_name)
    out_dir = Path(_merge(args, config, "out", "slices"))
    out_dir.mkdir(parents=True, exist_ok=True)

    volume = load_volume(input_path)
    mask = load_mask(mask_path) if mask_path else None
    if mask is not None and mask.dims != volume.dims:
        raise ConfigError(f"mask dims {mask.dims} != volume dims {volume.dims}")

    indices_raw = _merge(args, config, "indices", None)
    if indices_raw is None:
        indices = [volume.dims[axis] // 2]
    elif isinstance(indices_raw, str):
        indices = [int(i) for i in indices_raw.split(",")]
    else:
        indices = [int(i) for i in indices_raw]

    prefix = _merge(args, config, "prefix", Path(str(input_path)).stem)
    written = []
    for index in indices:
        if not 0 <= index < volume.dims[axis]:
            raise ConfigError(
                f"slice index {index} out of range for axis {axis_name} "
                f"(dim {volume.dims[axis]})")
        plane = np.take(volume.data, index, axis=axis).astype(np.float64)
        gray = np.clip(plane, 0.0, 1.0)
        gray8 = np.round(gray * 255.0).astype(np.uint8)
        if mask is None:
            img = Image.fromarray(gray8.T, mode="L")
        else:
            mplane = np.take(mask.bits, index, axis=axis)
            rgb = np.stack([gray8, gray8, gray8], axis=-1)
            rgb[mplane, 0] = 255
            rgb[mplane, 1] = gray8[mplane] // 3
            rgb[mplane, 2] = gray8[mplane] // 3
            img = Image.fromarray(np.swapaxes(rgb, 0, 1), mode="RGB")
        name = out_dir / f"{prefix}_{axis_name}{index:04d}.png"
        img.save(name)
        written.append(str(name))
    manifest = {
        "tool": f"crackforge {__version__}",
        "command": "export-slices",
        "params": {"axis": axis_name, "indices": indices,
                   "prefix": str(prefix),
                   "mask": str(mask_path) if mask_path else None},
        "inputs": [_file_entry(p) for src in
                   ([input_path, mask_path] if mask_path else [input_path])
                   for p in _volume_files(src)],
        "outputs": [{"path": p, "sha256": _sha256(p)} for p in written],
    }
    (out_dir / f"{prefix}_manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n")
    print(f"export-slices: wrote {len(written)} images to {out_dir}")
    return 0


# parser ------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crackforge",
        description="semi-synthetic crack images and scale-invariant "
                    "crack segmentation for concrete CT volumes")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate synthetic crack masks")
    g.add_argument("--spec", help="crack spec JSON file")
    g.add_argument("--out", help="output directory")
    g.add_argument("--seed", type=int)
    g.add_argument("--config")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("embed", help="embed a crack mask into a CT background")
    e.add_argument("--ct")
    e.add_argument("--mask")
    e.add_argument("--out")
    e.add_argument("--seed", type=int)
    e.add_argument("--pore-quantile", type=float)
    e.add_argument("--alpha", type=float)
    e.add_argument("--assume-normalized", action="store_true")
    e.add_argument("--config")
    e.set_defaults(func=cmd_embed)

    t = sub.add_parser("train", help="train the segmentation network")
    t.add_argument("--data", help="directory with *_img.raw / *_mask.raw pairs")
    t.add_argument("--out", help="model file to write (.rnet)")
    t.add_argument("--channels", help="comma list, default 1,16,16,32,1")
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--lr-decay", type=float)
    t.add_argument("--lr-decay-every", type=int)
    t.add_argument("--class-weight")
    t.add_argument("--seed", type=int)
    t.add_argument("--warm-start", help="existing model to fine-tune")
    t.add_argument("--config")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("segment", help="segment a volume with a trained model")
    s.add_argument("--model")
    s.add_argument("--input")
    s.add_argument("--out")
    s.add_argument("--prob", help="also write the probability map")
    s.add_argument("--levels", type=int)
    s.add_argument("--threshold", type=float)
    s.add_argument("--assume-normalized", action="store_true")
    s.add_argument("--config")
    s.set_defaults(func=cmd_segment)

    v = sub.add_parser("eval", help="score a segmentation against ground truth")
    v.add_argument("--pred")
    v.add_argument("--gt")
    v.add_argument("--tol", help="comma list of tolerances, default 0,1,2")
    v.add_argument("--json", help="write the report JSON here")
    v.add_argument("--config")
    v.set_defaults(func=cmd_eval)

    x = sub.add_parser("export-slices", help="export 2D slices as PNG")
    x.add_argument("--input")
    x.add_argument("--mask")
    x.add_argument("--axis")
    x.add_argument("--indices", help="comma list of slice indices")
    x.add_argument("--out")
    x.add_argument("--prefix")
    x.add_argument("--config")
    x.set_defaults(func=cmd_export_slices)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CrackforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
