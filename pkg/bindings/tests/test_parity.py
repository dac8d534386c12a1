"""Randomized parity between the bindings and the CLI.

Every augment case runs ``oforge augment --no-chain`` on a one-image
dataset and requires bind_augment to reproduce the written frame byte for
byte and the annotation records field for field. Every evaluate case runs
``oforge evaluate`` and requires bind_evaluate_om to return exactly the
JSON report the CLI wrote. Twenty randomized cases in total, counted by
the closing summary test.
"""
import json
import subprocess
import sys

import numpy as np
import pytest

import oforge_bindings as ob
from oforge import RleMask, load_dataset, load_image, save_image
from synthdata import write_eval_case, write_single_image_dataset

_PASSES = {"augment": 0, "evaluate": 0}


def _run_cli(args):
    proc = subprocess.run(
        [sys.executable, "-m", "oforge", *args], capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr
    return proc


def _ann_payload(ann):
    seg = ann.segmentation
    seg_json = seg.to_json() if isinstance(seg, RleMask) else [list(ring) for ring in seg]
    return {
        "id": ann.id,
        "image_id": ann.image_id,
        "category_id": ann.category_id,
        "segmentation": seg_json,
        "bbox": list(ann.bbox),
        "area": ann.area,
        "iscrowd": ann.iscrowd,
    }


def _toml_value(value):
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return repr(float(value)) if isinstance(value, float) else repr(int(value))


AUG_CASES = [
    dict(seed=0, size=(80, 112), n=3, mapping={}),
    dict(seed=1, size=(96, 96), n=2, mapping={"paste_probability": 1.0, "max_entities": 6}),
    dict(seed=2, size=(64, 144), n=4, mapping={"occluder_probability": 1.0}),
    dict(seed=3, size=(128, 128), n=3, mapping={"paste_probability": 0.3, "occluder_probability": 0.0}),
    dict(seed=4, size=(72, 88), n=2, mapping={"max_entities": 1}),
    dict(seed=5, size=(112, 80), n=3, mapping={}, use_rle=True),
    dict(seed=6, size=(96, 128), n=3, via_file=True,
         mapping={"rotation_range": (-40.0, 40.0), "scale_range": (0.5, 1.5)}),
    dict(seed=7, size=(88, 120), n=2, via_file=True,
         mapping={"min_visible_fraction": 0.4, "paste_probability": 1.0}),
    dict(seed=8, size=(104, 96), n=3, via_file=True,
         mapping={"hflip_probability": 1.0, "hue_delta": 30.0, "max_entities": 12}),
    dict(seed=9, size=(96, 112), n=3, mapping={}, side="left"),
    dict(seed=10, size=(96, 112), n=3, mapping={}, side="right"),
    dict(seed=11, size=(120, 136), n=4, mapping={"paste_probability": 1.0},
         with_crowd=True, use_dataclass=True),
]

EVAL_CASES = [
    dict(seed=20, connectivity=4, iou=0.5, kwargs={}),
    dict(seed=21, connectivity=8, iou=0.5, kwargs={}),
    dict(seed=22, connectivity=4, iou=0.3, kwargs={"per_image": True}),
    dict(seed=23, connectivity=4, iou=0.5, kwargs={"dpr_aggregation": "macro"}),
    dict(seed=24, connectivity=8, iou=0.75, kwargs={"count_unmatched_in_dpr": True}),
    dict(seed=25, connectivity=4, iou=0.5,
         kwargs={"per_image": True, "count_unmatched_in_dpr": True, "dpr_aggregation": "macro"}),
    dict(seed=26, connectivity=4, iou=0.5, kwargs={}, wrapper=True),
    dict(seed=27, connectivity=8, iou=0.4, kwargs={"per_image": True}, custom_report=True),
]


@pytest.mark.parametrize("case", AUG_CASES, ids=[f"aug{c['seed']}" for c in AUG_CASES])
def test_bind_augment_matches_cli(case, tmp_path):
    rng = np.random.default_rng(1000 + case["seed"])
    ann_path, images_dir = write_single_image_dataset(
        tmp_path,
        rng,
        size=case["size"],
        n_annotations=case["n"],
        use_rle=case.get("use_rle", False),
        with_crowd=case.get("with_crowd", False),
    )
    bank_path = tmp_path / "bank"
    ob.extract_entities(ann_path, images_dir, out_bank=bank_path)

    args = [
        "augment",
        "--annotations", str(ann_path),
        "--images", str(images_dir),
        "--bank", str(bank_path),
        "--out", str(tmp_path / "cli"),
        "--seed", str(case["seed"]),
        "--no-chain",
    ]
    mapping = case["mapping"]
    if case.get("via_file"):
        lines = [f"{key} = {_toml_value(value)}" for key, value in mapping.items()]
        config_path = tmp_path / "conf.toml"
        config_path.write_text("[augmenter]\n" + "\n".join(lines) + "\n")
        args += ["--config", str(config_path)]
    else:
        for key in ("paste_probability", "occluder_probability", "max_entities"):
            if key in mapping:
                args += [f"--{key.replace('_', '-')}", str(mapping[key])]
    side = case.get("side")
    if side is not None:
        side_path = tmp_path / "sides.json"
        side_path.write_text(json.dumps({"1": side}))
        args += ["--side-map", str(side_path)]
    _run_cli(args)

    cli_payload = json.loads((tmp_path / "cli" / "annotations.json").read_text())
    cli_rec = cli_payload["images"][0]
    cli_pixels = load_image(tmp_path / "cli" / "images" / cli_rec["file_name"])

    image = load_image(images_dir / "frame_001.png")
    if case.get("use_dataclass"):
        annotations = load_dataset(ann_path, images_dir).annotations
    else:
        annotations = json.loads(ann_path.read_text())["annotations"]
    bound = ob.bind_augment(image, annotations, bank_path, mapping, case["seed"], side=side)

    assert bound.image.shape[:2] == (cli_rec["height"], cli_rec["width"])
    assert np.array_equal(bound.image, cli_pixels)
    save_image(bound.image, tmp_path / "bound.png")
    assert (tmp_path / "bound.png").read_bytes() == (
        tmp_path / "cli" / "images" / cli_rec["file_name"]
    ).read_bytes()
    assert [_ann_payload(a) for a in bound.annotations] == cli_payload["annotations"]
    assert len(bound.masks) == len(bound.annotations)
    for mask in bound.masks:
        assert mask.shape == bound.image.shape[:2] and mask.dtype == bool
    _PASSES["augment"] += 1


@pytest.mark.parametrize("case", EVAL_CASES, ids=[f"eval{c['seed']}" for c in EVAL_CASES])
def test_bind_evaluate_matches_cli(case, tmp_path):
    rng = np.random.default_rng(2000 + case["seed"])
    gt_path, pred_path = write_eval_case(tmp_path, rng, n_images=int(rng.integers(2, 5)))
    if case.get("wrapper"):
        pred_path.write_text(
            json.dumps({"annotations": json.loads(pred_path.read_text())})
        )

    args = [
        "evaluate",
        "--gt", str(gt_path),
        "--pred", str(pred_path),
        "--connectivity", str(case["connectivity"]),
        "--iou-threshold", str(case["iou"]),
    ]
    kwargs = case["kwargs"]
    if kwargs.get("per_image"):
        args.append("--per-image")
    if kwargs.get("count_unmatched_in_dpr"):
        args.append("--count-unmatched")
    if "dpr_aggregation" in kwargs:
        args += ["--dpr-aggregation", kwargs["dpr_aggregation"]]
    report_path = pred_path.with_suffix(".report.json")
    if case.get("custom_report"):
        report_path = tmp_path / "out" / "scores.json"
        args += ["--report", str(report_path)]
    _run_cli(args)

    got = ob.bind_evaluate_om(
        gt_path, pred_path, connectivity=case["connectivity"], iou_threshold=case["iou"], **kwargs
    )
    want = json.loads(report_path.read_text())
    assert got == want
    assert 0.0 <= got["om"] <= 1.0
    assert got["split_instance_count"] >= 1
    _PASSES["evaluate"] += 1


def test_parity_criterion_summary(capsys):
    ok = _PASSES["augment"] == len(AUG_CASES) and _PASSES["evaluate"] == len(EVAL_CASES)
    total = _PASSES["augment"] + _PASSES["evaluate"]
    with capsys.disabled():
        print(f"[acceptance] bindings parity vs CLI: {'PASS' if ok else 'FAIL'} ({total}/20 cases)")
    assert ok
