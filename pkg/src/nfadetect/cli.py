"""Command-line front door: detect, eval, synth and calibrate subcommands.

Configuration comes from built-in defaults, overridden by an optional
key=value config file (--config), overridden by explicit flags.  Every
run report echoes the effective configuration so a run can be repeated
exactly; --print-config shows it without running.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import multiprocessing
import os
import sys
import time

import numpy as np

from .background import estimate_background, make_model
from .dataset import DatasetRecord, load_image, read_manifest, save_image_png, \
    write_manifest
from .detect import DetectConfig, detect, write_detections_csv, \
    read_detections_csv
from .evaluate import evaluate_detections, read_gt_csv, write_gt_csv, \
    write_pr_csv, write_report_json
from .nfa import nfa_gaussian_map
from .synth import gen_dataset, gen_noise_image

__all__ = ["main"]


class CliUsageError(Exception):
    """Bad flags or configuration; exits with code 1."""


class CliDataError(Exception):
    """Bad or missing input data; exits with code 2."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliUsageError(message)


DETECT_DEFAULTS = {
    "epsilon": 1.0,
    "method": "empirical",
    "ridge": 1e-6,
    "connectivity": 8,
    "alpha": 1.0,
    "tau": 0.0,
    "scales": "1",
    "scale_weights": "",
    "one_sided": False,
    "jobs": 1,
}

EVAL_DEFAULTS = {"iou_min": 0.05}

SYNTH_DEFAULTS = {
    "n_images": 10,
    "height": 256,
    "width": 256,
    "mean": 1000.0,
    "sigma": 100.0,
    "targets_per_image": 1,
    "amplitude": 5.0,
    "radius": 0,
    "profile": "point",
    "seed": 0,
}

CALIBRATE_DEFAULTS = {
    "epsilons": "0.1,1,10",
    "trials": 100,
    "height": 256,
    "width": 256,
    "mean": 1000.0,
    "sigma": 100.0,
    "seed": 0,
    "variant": "both",
}


def _read_config_file(path, defaults):
    """Parse key = value lines; unknown keys are rejected."""
    values = {}
    try:
        with open(path) as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].split(";", 1)[0].strip()
                if not line or line.startswith("["):
                    continue
                if "=" not in line:
                    raise CliUsageError(f"{path}:{line_no}: expected key = value")
                key, _, value = line.partition("=")
                key = key.strip().replace("-", "_")
                if key not in defaults:
                    raise CliUsageError(f"{path}:{line_no}: unknown key {key!r}")
                values[key] = _coerce_like(defaults[key], value.strip(), key)
    except OSError as exc:
        raise CliUsageError(f"cannot read config file {path}: {exc}") from exc
    return values


def _coerce_like(template, text, key):
    try:
        if isinstance(template, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if isinstance(template, int):
            return int(text)
        if isinstance(template, float):
            return float(text)
        return text
    except ValueError as exc:
        raise CliUsageError(f"bad value for {key}: {exc}") from exc


def _merge_config(defaults, args, keys):
    """defaults < config file < explicit flags."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        merged.update(_read_config_file(args.config, defaults))
    for key in keys:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    return merged


def _print_config(cfg):
    for key in sorted(cfg):
        print(f"{key} = {cfg[key]}")


def _parse_scales(cfg):
    try:
        scales = tuple(int(s) for s in str(cfg["scales"]).split(",") if s.strip())
    except ValueError as exc:
        raise CliUsageError(f"bad --scales: {exc}") from exc
    weights_text = str(cfg.get("scale_weights", "")).strip()
    if weights_text:
        try:
            weights = tuple(float(s) for s in weights_text.split(",") if s.strip())
        except ValueError as exc:
            raise CliUsageError(f"bad --scale-weights: {exc}") from exc
    else:
        weights = None
    return scales, weights


def _detect_config(cfg) -> DetectConfig:
    scales, weights = _parse_scales(cfg)
    config = DetectConfig(
        epsilon=cfg["epsilon"], method=cfg["method"], ridge=cfg["ridge"],
        connectivity=cfg["connectivity"], alpha=cfg["alpha"], tau=cfg["tau"],
        scales=scales, scale_weights=weights, one_sided=cfg["one_sided"],
    )
    try:
        config.validate()
    except ValueError as exc:
        raise CliUsageError(str(exc)) from exc
    return config


def _detect_one(task):
    """Worker: run detection on one manifest record."""
    record, config = task
    start = time.perf_counter()
    image = load_image(record.image_path)
    dets = detect(image, config)
    return record.image_id, dets, time.perf_counter() - start


def cmd_detect(args) -> int:
    cfg = _merge_config(DETECT_DEFAULTS, args, DETECT_DEFAULTS)
    if args.print_config:
        _print_config(cfg)
        return 0
    if not args.manifest or not args.out:
        raise CliUsageError("detect requires --manifest and --out")
    config = _detect_config(cfg)
    try:
        records = read_manifest(args.manifest)
    except (OSError, ValueError) as exc:
        raise CliDataError(str(exc)) from exc
    os.makedirs(args.out, exist_ok=True)

    tasks = [(rec, config) for rec in records]
    jobs = int(cfg["jobs"])
    try:
        if jobs > 1 and len(tasks) > 1:
            with multiprocessing.Pool(jobs) as pool:
                results = pool.map(_detect_one, tasks)
        else:
            results = [_detect_one(t) for t in tasks]
    except (OSError, ValueError) as exc:
        raise CliDataError(str(exc)) from exc

    # ordering independent of the worker count
    results.sort(key=lambda r: r[0])
    rows = [(image_id, det) for image_id, dets, _ in results for det in dets]
    csv_path = os.path.join(args.out, "detections.csv")
    write_detections_csv(csv_path, rows)
    with open(csv_path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    report = {
        "config": {k: cfg[k] for k in sorted(cfg)},
        "n_images": len(records),
        "total_detections": len(rows),
        "per_image": [
            {"image_id": image_id, "n_detections": len(dets),
             "seconds": seconds}
            for image_id, dets, seconds in results
        ],
        "detections_csv": "detections.csv",
        "csv_sha256": digest,
    }
    with open(os.path.join(args.out, "run_report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{len(rows)} detections over {len(records)} images -> {csv_path}")
    print(f"csv sha256 {digest}")
    return 0


def cmd_eval(args) -> int:
    cfg = _merge_config(EVAL_DEFAULTS, args, EVAL_DEFAULTS)
    if args.print_config:
        _print_config(cfg)
        return 0
    if not args.detections or not args.gt or not args.out:
        raise CliUsageError("eval requires --detections, --gt and --out")
    if not 0.0 < cfg["iou_min"] <= 1.0:
        raise CliUsageError("iou_min must be in (0, 1]")
    try:
        det_rows = read_detections_csv(args.detections)
        gts = read_gt_csv(args.gt)
    except (OSError, ValueError) as exc:
        raise CliDataError(str(exc)) from exc
    dets = [(image_id, det.box, det.score) for image_id, det in det_rows]
    report = evaluate_detections(dets, gts, iou_min=cfg["iou_min"])
    os.makedirs(args.out, exist_ok=True)
    write_report_json(os.path.join(args.out, "eval_report.json"), report,
                      extra={"iou_min": cfg["iou_min"],
                             "n_detections": len(dets), "n_gts": len(gts)})
    write_pr_csv(os.path.join(args.out, "pr_curve.csv"), report.pr_samples)
    print(f"P {report.precision:.4f}  R {report.recall:.4f}  "
          f"F1 {report.f1:.4f}  AP {report.ap:.4f}")
    return 0


def cmd_synth(args) -> int:
    cfg = _merge_config(SYNTH_DEFAULTS, args, SYNTH_DEFAULTS)
    if args.print_config:
        _print_config(cfg)
        return 0
    if not args.out:
        raise CliUsageError("synth requires --out")
    if cfg["profile"] not in ("point", "gaussian_blob"):
        raise CliUsageError(f"unknown profile {cfg['profile']!r}")
    try:
        scenes = gen_dataset(
            cfg["n_images"], h=cfg["height"], w=cfg["width"], mean=cfg["mean"],
            sigma=cfg["sigma"], targets_per_image=cfg["targets_per_image"],
            amplitude=cfg["amplitude"], radius=cfg["radius"],
            profile=cfg["profile"], seed=cfg["seed"])
    except ValueError as exc:
        raise CliUsageError(str(exc)) from exc
    os.makedirs(args.out, exist_ok=True)
    records, gts, image_meta = [], [], []
    for i, scene in enumerate(scenes):
        image_id = f"img_{i:05d}"
        name = f"{image_id}.png"
        save_image_png(os.path.join(args.out, name), scene.image)
        records.append(DatasetRecord(image_id=image_id, image_path=name,
                                     mask_path=None, split="test"))
        gts.extend(scene.gts)
        image_meta.append({"image_id": image_id, "path": name,
                           "seed": scene.seed})
    write_manifest(os.path.join(args.out, "manifest.tsv"), records)
    write_gt_csv(os.path.join(args.out, "gt.csv"), gts)
    with open(os.path.join(args.out, "params.json"), "w") as fh:
        json.dump({"params": {k: cfg[k] for k in sorted(cfg)},
                   "images": image_meta}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(records)} images, manifest.tsv, gt.csv -> {args.out}")
    return 0


def _calibrate_variant(cfg, known_model: bool):
    h, w = cfg["height"], cfg["width"]
    eta = h * w
    epsilons = [float(s) for s in str(cfg["epsilons"]).split(",") if s.strip()]
    log10_eps = [math.log10(e) for e in epsilons]
    trials = cfg["trials"]
    true_model = make_model([cfg["mean"]], [[cfg["sigma"] ** 2]], eta_test=eta)
    counts = np.zeros((trials, len(epsilons)))
    for t in range(trials):
        img = gen_noise_image(h, w, 1, cfg["mean"], np.eye(1) * cfg["sigma"] ** 2,
                              seed=cfg["seed"] + t)
        model = true_model if known_model else estimate_background(img)
        nfa = nfa_gaussian_map(img, model, eta_test=eta)
        for j, le in enumerate(log10_eps):
            counts[t, j] = np.sum(nfa.log10_values <= le)
    rows = []
    for j, eps in enumerate(epsilons):
        mean = float(counts[:, j].mean())
        se = float(counts[:, j].std(ddof=1) / math.sqrt(trials))
        rows.append({
            "variant": "known" if known_model else "estimated",
            "epsilon": eps,
            "mean_false_alarms": mean,
            "se": se,
            "interval_3se": [mean - 3 * se, mean + 3 * se],
            "pass": mean <= eps + 3 * se,
        })
    return rows


def cmd_calibrate(args) -> int:
    cfg = _merge_config(CALIBRATE_DEFAULTS, args, CALIBRATE_DEFAULTS)
    if args.print_config:
        _print_config(cfg)
        return 0
    if cfg["trials"] < 30:
        raise CliUsageError("calibrate requires trials >= 30")
    if cfg["variant"] not in ("both", "known", "estimated"):
        raise CliUsageError("variant must be both, known or estimated")
    rows = []
    if cfg["variant"] in ("both", "known"):
        rows += _calibrate_variant(cfg, known_model=True)
    if cfg["variant"] in ("both", "estimated"):
        rows += _calibrate_variant(cfg, known_model=False)
    header = f"{'variant':>10} {'epsilon':>8} {'mean_FA':>10} {'3*SE':>8} {'bound':>6}"
    print(header)
    for row in rows:
        print(f"{row['variant']:>10} {row['epsilon']:>8g} "
              f"{row['mean_false_alarms']:>10.4f} {3 * row['se']:>8.4f} "
              f"{'pass' if row['pass'] else 'FAIL':>6}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        payload = {"config": {k: cfg[k] for k in sorted(cfg)}, "table": rows}
        with open(os.path.join(args.out, "calibration.json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="nfadetect",
                     description="A-contrario small-target detection")
    sub = parser.add_subparsers(dest="command", required=True)

    p_detect = sub.add_parser("detect", help="run detection over a manifest")
    p_detect.add_argument("--manifest", help="dataset manifest (TSV)")
    p_detect.add_argument("--out", help="output directory")
    p_detect.add_argument("--config", help="key=value config file")
    p_detect.add_argument("--epsilon", type=float)
    p_detect.add_argument("--method", choices=["empirical", "robust"])
    p_detect.add_argument("--ridge", type=float)
    p_detect.add_argument("--connectivity", type=int, choices=[4, 8])
    p_detect.add_argument("--alpha", type=float)
    p_detect.add_argument("--tau", type=float)
    p_detect.add_argument("--scales", help="comma list of decimation factors")
    p_detect.add_argument("--scale-weights", dest="scale_weights",
                          help="comma list of per-scale weights")
    p_detect.add_argument("--one-sided", dest="one_sided", action="store_const",
                          const=True, default=None)
    p_detect.add_argument("--jobs", type=int)
    p_detect.add_argument("--print-config", action="store_true")
    p_detect.set_defaults(func=cmd_detect)

    p_eval = sub.add_parser("eval", help="score detections against ground truth")
    p_eval.add_argument("--detections", help="detections CSV")
    p_eval.add_argument("--gt", help="ground-truth CSV")
    p_eval.add_argument("--out", help="output directory")
    p_eval.add_argument("--config", help="key=value config file")
    p_eval.add_argument("--iou-min", dest="iou_min", type=float)
    p_eval.add_argument("--print-config", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--out", help="output directory")
    p_synth.add_argument("--config", help="key=value config file")
    p_synth.add_argument("--n-images", dest="n_images", type=int)
    p_synth.add_argument("--height", type=int)
    p_synth.add_argument("--width", type=int)
    p_synth.add_argument("--mean", type=float)
    p_synth.add_argument("--sigma", type=float)
    p_synth.add_argument("--targets-per-image", dest="targets_per_image", type=int)
    p_synth.add_argument("--amplitude", type=float)
    p_synth.add_argument("--radius", type=int)
    p_synth.add_argument("--profile", choices=["point", "gaussian_blob"])
    p_synth.add_argument("--seed", type=int)
    p_synth.add_argument("--print-config", action="store_true")
    p_synth.set_defaults(func=cmd_synth)

    p_cal = sub.add_parser("calibrate",
                           help="audit the false-alarm guarantee on noise")
    p_cal.add_argument("--out", help="output directory (optional)")
    p_cal.add_argument("--config", help="key=value config file")
    p_cal.add_argument("--epsilons", help="comma list of thresholds")
    p_cal.add_argument("--trials", type=int)
    p_cal.add_argument("--height", type=int)
    p_cal.add_argument("--width", type=int)
    p_cal.add_argument("--mean", type=float)
    p_cal.add_argument("--sigma", type=float)
    p_cal.add_argument("--seed", type=int)
    p_cal.add_argument("--variant", choices=["both", "known", "estimated"])
    p_cal.add_argument("--print-config", action="store_true")
    p_cal.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliUsageError as exc:
        print(f"nfadetect: error: {exc}", file=sys.stderr)
        return 1
    except CliDataError as exc:
        print(f"nfadetect: data error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"nfadetect: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
