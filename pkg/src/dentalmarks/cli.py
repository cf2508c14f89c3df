"""Command-line entry point: ``dentalmarks <subcommand> ...``.

Exit codes: 0 success, 2 usage, 3 IO/format error, 4 contract violation.
Errors are reported as a single ``error: <Code>: <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import defaults
from .augment import (
    apply_ffd,
    apply_rigid,
    apply_scale,
    make_ffd,
    random_scale,
    sample_rigid,
)
from .calibrate import calibrate, load_params_json
from .errors import DentalmarksError, EmptyDataset, IoError, MalformedJson, WriteFailure
from .fixtures import grid_patch, icosphere, plant_landmarks
from .labels import (
    load_distance_map,
    load_landmarks,
    make_distance_labels,
    save_distance_map,
    save_landmarks,
)
from .mesh import LandmarkClass, load_mesh, save_heatmap_ply, save_mesh
from .metrics import average_metrics
from .nms import detect
from .predictor import features_to_rgb, load_features, load_predictions, synthetic_predict
from .sampling import farthest_point_sample, stratify_random


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")


def _write_text(path, text: str) -> None:
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as e:
        raise WriteFailure(f"{path}: {e.strerror or e}") from e


def _dump_json(path, doc) -> None:
    _write_text(path, json.dumps(doc, indent=2) + "\n")


def _read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as e:
        raise IoError(f"{path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise MalformedJson(f"{path}: {e}") from e


def _csv_path(out) -> Path:
    return Path(out).with_suffix(".csv")


def _sub_seed(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


# ---------------------------------------------------------------------------
# subcommands


def cmd_make_labels(args):
    mesh = load_mesh(args.mesh)
    gt = load_landmarks(args.landmarks)
    save_distance_map(make_distance_labels(mesh, gt, args.tau, args.sharpened), args.out)


def cmd_augment(args):
    mesh = load_mesh(args.mesh)
    gt = load_landmarks(args.landmarks)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.mesh).stem
    ext = Path(args.mesh).suffix or ".ply"
    centroid = mesh.vertices.mean(axis=0)

    def emit(name, m, lms, sidecar):
        save_mesh(m, out_dir / f"{name}{ext}")
        save_landmarks(lms, out_dir / f"{name}_landmarks.json")
        _dump_json(out_dir / f"{name}_params.json", sidecar)

    for i in range(args.rigid_copies):
        rng = _sub_seed(args.seed, 0, i)
        rigid = sample_rigid(rng, centroid)
        s = random_scale(rng)
        m, lms = apply_rigid(mesh, gt, rigid.transform())
        m, lms = apply_scale(m, lms, s)
        emit(f"{stem}_rigid{i}", m, lms,
             {"kind": "rigid", "seed": args.seed, "index": i, "rigid": rigid.to_json(), "scale": s})
    for i in range(args.ffd_copies):
        rng = _sub_seed(args.seed, 1, i)
        lattice = make_ffd(mesh, args.ffd_grid, args.ffd_range, rng)
        m, lms = apply_ffd(mesh, gt, lattice)
        emit(f"{stem}_ffd{i}", m, lms,
             {"kind": "ffd", "seed": args.seed, "index": i, "lattice": lattice.to_json()})


def cmd_sample(args):
    mesh = load_mesh(args.mesh)
    if args.method == "random":
        sel = stratify_random(mesh, args.size, args.seed)
    else:
        sel = farthest_point_sample(mesh.vertices, args.size, args.seed)
    _dump_json(args.out, sel.to_json())


def cmd_predict_synthetic(args):
    mesh = load_mesh(args.mesh)
    labels = load_distance_map(args.labels, mesh.n_vertices)
    pred = synthetic_predict(labels, mesh, args.blur, args.sigma, args.seed)
    save_distance_map(pred, args.out)


def cmd_detect(args):
    mesh = load_mesh(args.mesh)
    dmap = load_predictions(args.map, mesh)
    params = load_params_json(_read_json(args.params))
    result = detect(mesh, dmap, params, strict=args.strict, collapse_plateaus=args.collapse_plateaus)
    save_landmarks(result.landmarks(), args.out, extras=result.extras())


def _manifest(path, keys) -> tuple[list[dict], Path]:
    records = _read_json(path)
    if not isinstance(records, list) or not all(isinstance(r, dict) for r in records):
        raise MalformedJson(f"{path}: manifest must be a JSON list of objects")
    if not records:
        raise EmptyDataset(f"{path}: manifest lists no samples")
    base = Path(path).parent
    out = []
    for r in records:
        try:
            resolved = {k: base / r[k] for k in keys}
        except KeyError as e:
            raise MalformedJson(f"{path}: manifest record missing {e}") from None
        for k, p in resolved.items():
            if not p.is_file():
                raise IoError(f"manifest entry {k}={r[k]!r} does not exist")
        out.append(resolved)
    return out, base


def cmd_calibrate(args):
    records, _ = _manifest(args.manifest, ("mesh", "map", "landmarks"))
    samples = []
    for r in records:
        mesh = load_mesh(r["mesh"])
        samples.append((mesh, load_predictions(r["map"], mesh), load_landmarks(r["landmarks"])))
    listing = json.dumps(_read_json(args.manifest), sort_keys=True).encode()
    sweep = defaults.threshold_grid(args.t_min, args.t_max, args.t_step)
    res = calibrate(samples, args.k_grid, args.t_grid, sweep, pooling=args.pooling,
                    jobs=args.jobs, fingerprint=hashlib.sha256(listing).hexdigest())
    _dump_json(args.out, res.to_json())
    _write_text(_csv_path(args.out), res.grid_csv())


def cmd_evaluate(args):
    if args.manifest:
        records, _ = _manifest(args.manifest, ("detections", "landmarks"))
        dets = [load_landmarks(r["detections"]) for r in records]
        gts = [load_landmarks(r["landmarks"]) for r in records]
    elif args.detections and args.landmarks:
        dets, gts = [load_landmarks(args.detections)], [load_landmarks(args.landmarks)]
    else:
        raise _Usage("evaluate needs --detections and --landmarks, or --manifest")
    sweep = defaults.threshold_grid(args.t_min, args.t_max, args.t_step)
    curve = average_metrics(dets, gts, sweep, one_to_one=args.one_to_one)
    _dump_json(args.out, curve.summary())
    _write_text(_csv_path(args.out), curve.to_csv())


def cmd_features_rgb(args):
    mesh = load_mesh(args.mesh)
    feats = load_features(args.features, mesh.n_vertices)
    rgb = np.rint(features_to_rgb(feats) * 255).astype(np.uint8)
    save_mesh(mesh, args.out, format="ply", colors=rgb)


def cmd_heatmap(args):
    mesh = load_mesh(args.mesh)
    dmap = load_distance_map(args.map, mesh.n_vertices)
    save_heatmap_ply(mesh, dmap.column(LandmarkClass.parse(args.class_name)), args.out)


def cmd_fixture(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meshes = {
        "sphere": icosphere(args.subdivisions, args.radius),
        "patch": grid_patch(args.patch_size, args.patch_size, args.spacing),
    }
    for k, (name, mesh) in enumerate(meshes.items()):
        lms = plant_landmarks(mesh, args.per_class, 2 * args.tau, _sub_seed(args.seed, k))
        save_mesh(mesh, out_dir / f"{name}.ply")
        save_landmarks(lms, out_dir / f"{name}_landmarks.json")


class _Usage(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dentalmarks", description="Dental landmark detection pipeline tools.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("make-labels", help="geodesic distance-map labels from landmarks")
    s.add_argument("--mesh", required=True)
    s.add_argument("--landmarks", required=True)
    s.add_argument("--tau", type=float, default=defaults.TAU_MM)
    s.add_argument("--sharpened", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_make_labels)

    s = sub.add_parser("augment", help="rigid/scale and FFD variants of a labelled mesh")
    s.add_argument("--mesh", required=True)
    s.add_argument("--landmarks", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--rigid-copies", type=int, default=1)
    s.add_argument("--ffd-copies", type=int, default=defaults.FFD_COPIES)
    s.add_argument("--ffd-grid", type=_int_list, default=list(defaults.FFD_GRID))
    s.add_argument("--ffd-range", type=float, default=defaults.FFD_DISPLACEMENT_MM)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_augment)

    s = sub.add_parser("sample", help="fixed-size vertex selection")
    s.add_argument("--mesh", required=True)
    s.add_argument("--method", choices=("random", "fps"), default="random")
    s.add_argument("--size", type=int, default=defaults.SAMPLE_SIZE)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("predict-synthetic", help="blurred, noisy stand-in predictions")
    s.add_argument("--labels", required=True)
    s.add_argument("--mesh", required=True)
    s.add_argument("--blur", type=int, default=0)
    s.add_argument("--sigma", type=float, default=0.0)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict_synthetic)

    s = sub.add_parser("detect", help="run non-minima suppression on a predicted map")
    s.add_argument("--mesh", required=True)
    s.add_argument("--map", required=True)
    s.add_argument("--params", required=True, help="per-class params JSON or a calibration report")
    s.add_argument("--collapse-plateaus", action="store_true")
    s.add_argument("--strict", action="store_true", help="threshold/variant scale mismatch is an error")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("calibrate", help="grid-search per-class NMS parameters")
    s.add_argument("--manifest", required=True)
    s.add_argument("--k-grid", type=_int_list, default=list(defaults.K_GRID))
    s.add_argument("--t-grid", type=_float_list, default=None,
                   help="defaults to 0.1..0.8 for sharpened maps, 0.25..3.0 for raw maps")
    s.add_argument("--t-min", type=float, default=defaults.SWEEP_MIN)
    s.add_argument("--t-max", type=float, default=defaults.SWEEP_MAX)
    s.add_argument("--t-step", type=float, default=defaults.SWEEP_STEP)
    s.add_argument("--pooling", choices=("micro", "macro"), default="micro")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("evaluate", help="threshold-averaged precision and recall")
    s.add_argument("--detections")
    s.add_argument("--landmarks")
    s.add_argument("--manifest")
    s.add_argument("--t-min", type=float, default=defaults.SWEEP_MIN)
    s.add_argument("--t-max", type=float, default=defaults.SWEEP_MAX)
    s.add_argument("--t-step", type=float, default=defaults.SWEEP_STEP)
    s.add_argument("--one-to-one", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("features-rgb", help="PCA colouring of per-vertex features")
    s.add_argument("--features", required=True)
    s.add_argument("--mesh", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_features_rgb)

    s = sub.add_parser("heatmap", help="colour one map channel onto the mesh")
    s.add_argument("--map", required=True)
    s.add_argument("--mesh", required=True)
    s.add_argument("--class", dest="class_name", required=True, choices=[c.name for c in LandmarkClass])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_heatmap)

    s = sub.add_parser("fixture", help="write synthetic sphere and patch meshes with planted landmarks")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--subdivisions", type=int, default=4)
    s.add_argument("--radius", type=float, default=50.0)
    s.add_argument("--patch-size", type=int, default=61)
    s.add_argument("--spacing", type=float, default=2.0)
    s.add_argument("--per-class", type=int, default=3)
    s.add_argument("--tau", type=float, default=defaults.TAU_MM)
    s.set_defaults(func=cmd_fixture)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except _Usage as e:
        parser.print_usage(sys.stderr)
        print(f"error: Usage: {e}", file=sys.stderr)
        return 2
    except DentalmarksError as e:
        msg = " ".join(str(e).split())
        print(f"error: {e.code}: {msg}", file=sys.stderr)
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
