import numpy as np
import pytest

from oforge.coco import Category, DatasetBundle, ImageRecord, InstanceAnnotation
from oforge.errors import (
    DanglingReference,
    DimensionMismatch,
    EmptyGroundTruth,
    MalformedAnnotation,
)
from oforge.masks import rle_encode
from oforge.metric import (
    evaluate_om,
    find_split_instances,
    match_split_instances,
    predictions_from_json,
)

from oracles import om_oracle
from synth import random_blob_mask


def _ann(ann_id, image_id, mask, iscrowd=0):
    return InstanceAnnotation(
        id=ann_id,
        image_id=image_id,
        category_id=1,
        segmentation=rle_encode(mask),
        bbox=(0.0, 0.0, 0.0, 0.0),
        area=float(mask.sum()),
        iscrowd=iscrowd,
    )


def _bundle(size_by_image, annotations):
    images = [
        ImageRecord(id=i, file_name=f"{i}.png", width=w, height=h)
        for i, (h, w) in sorted(size_by_image.items())
    ]
    return DatasetBundle(images=images, annotations=annotations,
                         categories=[Category(1, "player")])


def _blank(h=16, w=16):
    return np.zeros((h, w), dtype=bool)


def _hand_scene():
    """16x16 image, two split instances, one unsplit, two predictions.

    ann 1: main 3x4 block (12 px) + 2x2 satellite (4 px)
    ann 2: main 3x3 block (9 px) + 1x3 satellite (3 px)
    ann 3: single 2x2 block, not split
    pred 10: ann 1's main plus half its satellite -> IoU 14/16, recalls 2/4
    pred 11: 2 px sliver of ann 2's main -> IoU 2/12 < 0.5, no match
    """
    m1 = _blank()
    m1[2:5, 2:6] = True
    m1[2:4, 10:12] = True
    m2 = _blank()
    m2[9:12, 2:5] = True
    m2[9, 10:13] = True
    m3 = _blank()
    m3[13:15, 13:15] = True
    p10 = _blank()
    p10[2:5, 2:6] = True
    p10[2, 10:12] = True
    p11 = _blank()
    p11[9, 2:4] = True
    gt = _bundle({1: (16, 16)}, [_ann(1, 1, m1), _ann(2, 1, m2), _ann(3, 1, m3)])
    preds = [_ann(10, 1, p10), _ann(11, 1, p11)]
    return gt, preds


class TestFindSplits:
    def test_single_component_not_split(self):
        mask = _blank()
        mask[3:6, 3:6] = True
        splits = find_split_instances([_ann(1, 1, mask)], 16, 16)
        assert splits == []

    def test_two_components_split(self):
        mask = _blank()
        mask[0:2, 0:3] = True  # 6 px, label 1
        mask[10:12, 10:12] = True  # 4 px, label 2
        (split,) = find_split_instances([_ann(1, 1, mask)], 16, 16)
        assert split.main_component_label == 1
        assert split.disconnected_total == 4
        expected = _blank()
        expected[10:12, 10:12] = True
        assert np.array_equal(split.disconnected_pixels, expected)

    def test_main_is_largest_not_first(self):
        mask = _blank()
        mask[0, 0] = True  # label 1, 1 px
        mask[5:9, 5:9] = True  # label 2, 16 px
        (split,) = find_split_instances([_ann(1, 1, mask)], 16, 16)
        assert split.main_component_label == 2
        assert split.disconnected_total == 1
        assert split.disconnected_pixels[0, 0]

    def test_size_tie_goes_to_first_in_scan_order(self):
        mask = _blank()
        mask[0:2, 6:8] = True  # scan order reaches (0, 6) first
        mask[3:5, 0:2] = True
        (split,) = find_split_instances([_ann(1, 1, mask)], 16, 16)
        assert split.main_component_label == 1
        assert split.disconnected_pixels[3, 0]
        assert not split.disconnected_pixels[0, 6]

    def test_connectivity_changes_verdict(self):
        mask = _blank()
        mask[0, 0] = True
        mask[1, 1] = True
        assert len(find_split_instances([_ann(1, 1, mask)], 16, 16, connectivity=4)) == 1
        assert find_split_instances([_ann(1, 1, mask)], 16, 16, connectivity=8) == []


class TestMatching:
    def test_exact_tie_breaks_on_ids(self):
        mask = _blank()
        mask[2:6, 2:6] = True
        mask[2:4, 10:12] = True
        splits = find_split_instances([_ann(1, 1, mask), _ann(2, 1, mask)], 16, 16)
        preds = [_ann(6, 1, mask), _ann(5, 1, mask)]
        matched = match_split_instances(splits, preds, 16, 16)
        assert matched[1][0] == 5
        assert matched[2][0] == 6

    def test_one_pred_matches_once(self):
        shared = _blank(20, 20)
        shared[2:6, 2:6] = True  # 16 px main
        shared[2:4, 10:12] = True  # 4 px satellite
        partial = shared.copy()
        partial[3, 10:12] = False  # 18 px subset
        splits = find_split_instances([_ann(1, 1, partial), _ann(2, 1, shared)], 20, 20)
        matched = match_split_instances(splits, [_ann(5, 1, shared)], 20, 20)
        assert set(matched) == {2}  # higher-IoU split wins the only prediction
        assert matched[2][0] == 5
        assert np.array_equal(matched[2][1], shared)

    def test_threshold_excludes_weak_pairs(self):
        mask = _blank()
        mask[2:6, 2:6] = True
        mask[10, 10] = True
        splits = find_split_instances([_ann(1, 1, mask)], 16, 16)
        pred = _blank()
        pred[2:6, 2:4] = True  # IoU 8/17
        assert match_split_instances(splits, [_ann(5, 1, pred)], 16, 16) == {}
        matched = match_split_instances(splits, [_ann(5, 1, pred)], 16, 16,
                                        iou_threshold=8 / 17)  # threshold is inclusive
        assert matched[1][0] == 5


class TestEvaluate:
    def test_hand_scene_micro(self):
        gt, preds = _hand_scene()
        report = evaluate_om(gt, preds)
        assert report.oir == 0.5
        assert report.dpr == 0.5
        assert report.om == 0.25
        assert report.split_instance_count == 2
        assert report.recalled_count == 1
        by_id = {r.annotation_id: r for r in report.per_instance}
        assert by_id[1].matched_prediction_id == 10
        assert by_id[1].disconnected_total == 4
        assert by_id[1].disconnected_recalled == 2
        assert by_id[2].matched_prediction_id is None
        assert by_id[2].disconnected_total == 3
        assert by_id[2].disconnected_recalled == 0
        assert 3 not in by_id  # unsplit instance is out of scope

    def test_hand_scene_count_unmatched(self):
        gt, preds = _hand_scene()
        report = evaluate_om(gt, preds, count_unmatched_in_dpr=True)
        assert report.oir == 0.5
        assert report.dpr == pytest.approx(2 / 7)
        assert report.om == pytest.approx(0.5 * 2 / 7)

    def test_micro_macro_disagree(self):
        a = _blank(24, 24)
        a[2:4, 2:7] = True  # main 10 px
        a[10:12, 2:6] = True  # disconnected 8 px
        b = _blank(24, 24)
        b[2:6, 14:17] = True  # main 12 px
        b[14, 14:16] = True  # disconnected 2 px
        pa = a.copy()
        pb = b.copy()
        pb[14, 14:16] = False  # misses all of b's disconnected area
        gt = _bundle({1: (24, 24)}, [_ann(1, 1, a), _ann(2, 1, b)])
        preds = [_ann(10, 1, pa), _ann(11, 1, pb)]
        micro = evaluate_om(gt, preds)
        macro = evaluate_om(gt, preds, dpr_aggregation="macro")
        assert micro.oir == 1.0 and macro.oir == 1.0
        assert micro.dpr == pytest.approx(8 / 10)
        assert macro.dpr == pytest.approx(0.5)
        assert micro.om == pytest.approx(8 / 10)
        assert macro.om == pytest.approx(0.5)

    def test_no_splits_is_vacuously_perfect(self):
        mask = _blank()
        mask[2:6, 2:6] = True
        gt = _bundle({1: (16, 16)}, [_ann(1, 1, mask)])
        report = evaluate_om(gt, [])
        assert (report.oir, report.dpr, report.om) == (1.0, 1.0, 1.0)
        assert report.split_instance_count == 0

    def test_splits_with_no_predictions(self):
        gt, _ = _hand_scene()
        report = evaluate_om(gt, [])
        assert report.oir == 0.0
        assert report.dpr == 1.0  # empty matched pool
        assert report.om == 0.0

    def test_perfect_predictions_score_one(self):
        gt, _ = _hand_scene()
        mirror = [
            InstanceAnnotation(100 + a.id, a.image_id, a.category_id, a.segmentation,
                               a.bbox, a.area, 0)
            for a in gt.annotations
        ]
        report = evaluate_om(gt, mirror)
        assert (report.oir, report.dpr, report.om) == (1.0, 1.0, 1.0)

    def test_empty_ground_truth_raises(self):
        gt = DatasetBundle(images=[], annotations=[], categories=[])
        with pytest.raises(EmptyGroundTruth):
            evaluate_om(gt, [])

    def test_crowd_gt_still_counts(self):
        gt, preds = _hand_scene()
        report = evaluate_om(gt, preds, iou_threshold=0.9)
        assert report.oir == 0.0  # 14/16 < 0.9 kills the ann 1 match

    def test_bundle_predictions_accepted(self):
        gt, preds = _hand_scene()
        pred_bundle = _bundle({1: (16, 16)}, preds)
        a = evaluate_om(gt, preds)
        b = evaluate_om(gt, pred_bundle)
        assert (a.oir, a.dpr, a.om) == (b.oir, b.dpr, b.om)

    def test_pred_size_mismatch_raises(self):
        gt, _ = _hand_scene()
        bad = _ann(50, 1, np.zeros((8, 8), dtype=bool))
        with pytest.raises(DimensionMismatch):
            evaluate_om(gt, [bad])

    def test_per_image_breakdown(self):
        m1 = _blank()
        m1[0:2, 0:2] = True
        m1[0:2, 8:10] = True
        m2 = _blank()
        m2[4:8, 4:8] = True
        m2[12, 12] = True
        gt = _bundle({1: (16, 16), 2: (16, 16)}, [_ann(1, 1, m1), _ann(2, 2, m2)])
        report = evaluate_om(gt, [_ann(10, 1, m1)], per_image=True)
        assert report.per_image[1] == (1.0, 1.0, 1.0)
        assert report.per_image[2] == (0.0, 1.0, 0.0)
        assert report.oir == 0.5
        payload = report.to_json()
        assert payload["per_image"]["2"]["om"] == 0.0
        assert payload["per_instance"][0]["annotation_id"] == 1

    def test_agrees_with_brute_force_oracle(self):
        rng = np.random.default_rng(130)
        for scene in range(40):
            h = w = int(rng.integers(16, 33))
            gt_scenes, pred_scenes = {}, {}
            gt_anns, pred_anns = [], []
            sizes = {}
            next_gt, next_pred = 1, 1
            for image_id in (1, 2):
                sizes[image_id] = (h, w)
                gt_scenes[image_id] = {}
                pred_scenes[image_id] = {}
                for _ in range(int(rng.integers(1, 4))):
                    mask = random_blob_mask(rng, h, w)
                    if not mask.any():
                        continue
                    gt_scenes[image_id][next_gt] = mask
                    gt_anns.append(_ann(next_gt, image_id, mask))
                    next_gt += 1
                    if rng.random() < 0.7:
                        pred = mask.copy()
                        noise = random_blob_mask(rng, h, w)
                        if rng.random() < 0.5:
                            pred &= ~noise
                        else:
                            pred |= noise
                        if pred.any():
                            pred_scenes[image_id][next_pred] = pred
                            pred_anns.append(_ann(next_pred, image_id, pred))
                            next_pred += 1
                for _ in range(int(rng.integers(0, 2))):
                    blob = random_blob_mask(rng, h, w)
                    if blob.any():
                        pred_scenes[image_id][next_pred] = blob
                        pred_anns.append(_ann(next_pred, image_id, blob))
                        next_pred += 1
            connectivity = 4 if rng.random() < 0.5 else 8
            gt = _bundle(sizes, gt_anns)
            report = evaluate_om(gt, pred_anns, connectivity=connectivity)
            oir, dpr, om, matches = om_oracle(
                gt_scenes, pred_scenes, connectivity=connectivity
            )
            assert report.oir == pytest.approx(oir), f"scene {scene}"
            assert report.dpr == pytest.approx(dpr), f"scene {scene}"
            assert report.om == pytest.approx(om), f"scene {scene}"
            got = {
                (r.image_id, r.annotation_id): r.matched_prediction_id
                for r in report.per_instance
                if r.matched_prediction_id is not None
            }
            assert got == matches, f"scene {scene}"

    def test_better_recall_never_hurts(self):
        gt, _ = _hand_scene()
        weak = _blank()
        weak[2:5, 2:6] = True  # main only, IoU 12/16
        strong = weak.copy()
        strong[2:4, 10:12] = True  # adds the satellite back
        low = evaluate_om(gt, [_ann(10, 1, weak)])
        high = evaluate_om(gt, [_ann(10, 1, strong)])
        assert high.om >= low.om
        assert low.om == 0.0 and high.om == 0.5


class TestPredictionsFromJson:
    def test_bare_list_and_default_ids(self):
        gt, _ = _hand_scene()
        payload = [
            {"image_id": 1, "segmentation": [[2.0, 2.0, 6.0, 2.0, 6.0, 5.0, 2.0, 5.0]]},
            {"image_id": 1, "segmentation": {"size": [16, 16], "counts": [0, 2, 254]}},
        ]
        preds = predictions_from_json(payload, gt)
        assert [p.id for p in preds] == [1, 2]
        assert preds[0].image_id == 1

    def test_object_with_annotations_key(self):
        gt, _ = _hand_scene()
        payload = {
            "annotations": [
                {"id": 9, "image_id": 1,
                 "segmentation": {"size": [16, 16], "counts": [0, 3, 253]}}
            ]
        }
        (pred,) = predictions_from_json(payload, gt)
        assert pred.id == 9

    def test_unknown_image_rejected(self):
        gt, _ = _hand_scene()
        payload = [{"image_id": 4, "segmentation": {"size": [16, 16], "counts": [256]}}]
        with pytest.raises(DanglingReference):
            predictions_from_json(payload, gt)

    @pytest.mark.parametrize(
        "payload",
        ["nope", {"images": []}, [{"segmentation": {"size": [16, 16], "counts": [256]}}], [5]],
    )
    def test_malformed_payloads(self, payload):
        gt, _ = _hand_scene()
        with pytest.raises(MalformedAnnotation):
            predictions_from_json(payload, gt)
