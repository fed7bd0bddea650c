"""contact-forge: command-line front end for the contact pipeline.

Exit codes: 0 success, 1 internal error, 2 input error. Errors go to stderr
as single lines ``error: <stage>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import annotations as annot
from . import head as head_mod
from . import toydata
from .bvh import build_index
from .checkpoint import load_checkpoint, save_checkpoint
from .contact import ContactThresholds, classify_contact, contact_triangles
from .maps import ContactMap
from .mesh import load_body_mesh, load_scene_mesh
from .metrics import evaluate_corpus
from .pgm import read_pgm
from .render import PinholeCamera, rasterize_contact

DEFAULT_SEED = 0


class StageError(Exception):
    def __init__(self, stage: str, message: str, code: int = 2):
        super().__init__(message)
        self.stage = stage
        self.code = code


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except (OSError, ValueError) as exc:
        raise StageError(name, str(exc)) from exc


def _add_seed(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help="seed for all randomness (default %(default)s)")


# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    with _stage("body-model"):
        body = load_body_mesh(args.body, args.labels)
        body = body.with_normals()
    with _stage("contact-gen"):
        scene = load_scene_mesh(args.scene)
        index = build_index(scene, leaf_size=args.leaf_size)
        thresholds = ContactThresholds(delta_d=args.delta_d, delta_a=args.delta_a)
        cv = classify_contact(body, index, scene, thresholds)
        per_part = contact_triangles(body, cv)
    with _stage("render2d"):
        cam = PinholeCamera.from_json(args.camera)
        cmap = rasterize_contact(cam, body, per_part, scene=scene,
                                 occlude_with_scene=args.scene_occlusion)
    with _stage("output"):
        cv.save(args.out_vertices)
        cmap.save_pgm(args.out)
        if args.out_png:
            cmap.save_png(args.out_png)
    return 0


def cmd_rasterize(args) -> int:
    with _stage("annot-io"):
        records = annot.parse_annotations(args.annotations)
        if args.long_side:
            records = [annot.rescale_record(r, args.long_side) for r in records]
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for rec in records:
            cmap = annot.rasterize_polygons(rec)
            cmap.save_pgm(out_dir / f"{rec.image_id}.pgm")
            if args.png:
                cmap.save_png(out_dir / f"{rec.image_id}.png")
    return 0


def cmd_lift(args) -> int:
    with _stage("body-model"):
        template = load_body_mesh(args.template, args.labels)
    with _stage("annot-io"):
        records = annot.parse_annotations(args.annotations)
        subset = annot.load_palm_sole_subset(args.palm_sole) if args.palm_sole else None
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for rec in records:
            indices = annot.lift_to_3d(rec, template, subset)
            with open(out_dir / f"{rec.image_id}.txt", "w", encoding="utf-8") as fh:
                for vi in indices:
                    fh.write(f"{int(vi)}\n")
    return 0


def cmd_split(args) -> int:
    with _stage("annot-io"):
        records = annot.parse_annotations(args.annotations)
        try:
            ratios = tuple(float(r) for r in args.ratios.split(","))
        except ValueError as exc:
            raise StageError("annot-io", f"bad --ratios value: {exc}") from exc
        group_key = None
        if args.group_delim:
            delim = args.group_delim
            group_key = lambda rec: rec.image_id.split(delim)[0]
        train, val, test = annot.split_dataset(records, ratios, args.seed, group_key)
        for name, recs in (("train", train), ("val", val), ("test", test)):
            annot.save_annotations(recs, f"{args.out_prefix}.{name}.jsonl")
    return 0


def cmd_stats(args) -> int:
    with _stage("annot-io"):
        records = annot.parse_annotations(args.annotations)
        stats = annot.dataset_stats(records)
        text = json.dumps(stats.to_json_dict(), indent=2, sort_keys=True) + "\n"
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    return 0


def cmd_make_toy(args) -> int:
    with _stage("part-attention"):
        toydata.write_toy_dataset(args.out, toydata.make_toy_dataset(seed=args.seed))
    return 0


def cmd_train_toy(args) -> int:
    with _stage("part-attention"):
        dataset = toydata.load_toy_dataset(args.data)
        head_cfg = head_mod.HeadConfig(
            in_channels=1,
            channels=args.channels,
            part_channels=args.part_channels,
            att_channels=args.att_channels,
            stub_layers=args.stub_layers,
            norm=args.norm,
        )
        loss_cfg = head_mod.LossConfig(lambda_a=args.lambda_a, lambda_c=args.lambda_c)
        try:
            params = head_mod.train_toy(
                dataset.as_batch(), epochs=args.epochs, base_lr=args.lr,
                seed=args.seed, loss_cfg=loss_cfg, head_cfg=head_cfg,
                batch_size=args.batch_size or None,
            )
        except head_mod.TrainingDiverged as exc:
            raise StageError("part-attention", str(exc), code=1) from exc
        save_checkpoint(args.out, params)
    return 0


def cmd_predict(args) -> int:
    with _stage("part-attention"):
        params = load_checkpoint(args.checkpoint)
        image = read_pgm(args.input).astype(np.float64) / 255.0
        cmap = head_mod.predict(params, image)
        cmap.save_pgm(args.out)
        if args.out_png:
            cmap.save_png(args.out_png)
    return 0


def cmd_eval(args) -> int:
    with _stage("metrics"):
        gt_dir = Path(args.gt)
        pred_dir = Path(args.pred)
        gt_files = sorted(gt_dir.glob("*.pgm"))
        if not gt_files:
            raise StageError("metrics", f"no .pgm ground-truth maps under {gt_dir}")
        pairs = []
        for gt_path in gt_files:
            pred_path = pred_dir / gt_path.name
            if not pred_path.exists():
                raise StageError("metrics", f"missing prediction for {gt_path.name}")
            pairs.append((ContactMap.load_pgm(pred_path), ContactMap.load_pgm(gt_path)))
        report = evaluate_corpus(pairs, c_acc_all_pixels=args.c_acc_all_pixels)
        report.save_json(args.report)
    return 0


def cmd_gradcheck(args) -> int:
    with _stage("part-attention"):
        cfg = head_mod.HeadConfig(in_channels=1, channels=4, part_channels=2,
                                  att_channels=4, stub_layers=2)
        params, batch = head_mod.gradcheck_setup(cfg, seed=args.seed)
        report = head_mod.gradient_check(params, batch)
        print(json.dumps({
            "parameters": report.num_parameters,
            "max_abs_error": report.max_abs_error,
            "failures": report.failures,
            "worst": report.worst_name,
            "ok": report.ok,
        }))
        return 0 if report.ok else 1


def cmd_agreement(args) -> int:
    with _stage("annot-io"):
        map_a = ContactMap.load_pgm(args.map_a)
        map_b = ContactMap.load_pgm(args.map_b)
        part_agree, pixel_agree = annot.agreement(map_a, map_b)
        print(json.dumps({"part_agreement": part_agree, "pixel_agreement": pixel_agree}))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contact-forge",
        description="Generate, annotate, detect, and evaluate human-object contact maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="contact map from posed body + scene meshes")
    p.add_argument("--body", required=True, help="body mesh (OBJ subset)")
    p.add_argument("--labels", required=True, help="per-vertex part label sidecar")
    p.add_argument("--scene", required=True, help="scene mesh (OBJ subset)")
    p.add_argument("--camera", required=True, help="camera intrinsics JSON")
    p.add_argument("--delta-d", type=float, default=0.07,
                   help="contact distance threshold, meters (default %(default)s)")
    p.add_argument("--delta-a", type=float, default=110.0,
                   help="normal angle threshold, degrees (default %(default)s)")
    p.add_argument("--leaf-size", type=int, default=8)
    p.add_argument("--scene-occlusion", action="store_true",
                   help="let the scene mesh occlude contact areas")
    p.add_argument("--out", required=True, help="contact map PGM path")
    p.add_argument("--out-vertices", required=True, help="contact vertex text path")
    p.add_argument("--out-png", help="optional palette PNG for inspection")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("rasterize", help="rasterize annotation polygons to contact maps")
    p.add_argument("--annotations", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--long-side", type=int, default=0,
                   help="rescale records to this longer side first (0 = keep)")
    p.add_argument("--png", action="store_true", help="also write palette PNGs")
    p.set_defaults(func=cmd_rasterize)

    p = sub.add_parser("lift", help="lift 2D annotations to template vertex sets")
    p.add_argument("--annotations", required=True)
    p.add_argument("--template", required=True, help="template body mesh (OBJ)")
    p.add_argument("--labels", required=True, help="template part label sidecar")
    p.add_argument("--palm-sole", help="JSON part-name -> vertex indices")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("split", help="deterministic train/val/test split")
    p.add_argument("--annotations", required=True)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--group-delim",
                   help="keep records together when image_id shares a prefix up to this delimiter")
    p.add_argument("--out-prefix", required=True)
    _add_seed(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("stats", help="corpus statistics of an annotation file")
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("make-toy", help="write the synthetic 4-image training set")
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=cmd_make_toy)

    p = sub.add_parser("train-toy", help="train the part-attention head on a toy set")
    p.add_argument("--data", required=True, help="directory of PGM triples")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=head_mod.DEFAULT_BASE_LR)
    p.add_argument("--batch-size", type=int, default=0, help="0 = full batch")
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--part-channels", type=int, default=4)
    p.add_argument("--att-channels", type=int, default=8)
    p.add_argument("--stub-layers", type=int, default=2)
    p.add_argument("--norm", choices=["none", "affine"], default="none")
    p.add_argument("--lambda-a", type=float, default=head_mod.LAMBDA_A_INITIAL)
    p.add_argument("--lambda-c", type=float, default=head_mod.LAMBDA_C)
    _add_seed(p)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("predict", help="run a checkpoint on a grayscale PGM image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--out-png")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predicted maps against ground truth")
    p.add_argument("--pred", required=True, help="directory of predicted .pgm maps")
    p.add_argument("--gt", required=True, help="directory of ground-truth .pgm maps")
    p.add_argument("--report", required=True, help="output JSON path")
    p.add_argument("--c-acc-all-pixels", action="store_true",
                   help="binary accuracy over all pixels instead of gt contact pixels")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of the head gradients")
    _add_seed(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("agreement", help="part/pixel agreement between two maps")
    p.add_argument("--map-a", required=True)
    p.add_argument("--map-b", required=True)
    p.set_defaults(func=cmd_agreement)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc.stage}: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # noqa: BLE001 - last-resort catch for exit-code contract
        print(f"error: internal: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
