import json

import numpy as np
import pytest

from oforge.bank import (
    EntityBank,
    extract_entities,
    load_bank,
    sample_entities,
    save_bank,
)
from oforge.coco import (
    Category,
    DatasetBundle,
    ImageRecord,
    InstanceAnnotation,
)
from oforge.errors import CorruptBank, EmptyBank
from oforge.masks import rle_encode

from synth import make_bank, make_bundle


def _bundle_with_pixels(rng, **kw):
    bundle, pixels = make_bundle(rng, **kw)
    return bundle, pixels


class TestExtract:
    def test_crops_match_source(self):
        rng = np.random.default_rng(60)
        bundle, pixels = _bundle_with_pixels(rng, n_images=2, n_annotations=3)
        bank = extract_entities(bundle, images=pixels)
        assert len(bank) == len(bundle.annotations)
        for rec in bank.entries:
            ann = next(a for a in bundle.annotations if a.id == rec.source_annotation_id)
            x, y = rec.crop_origin
            h, w = rec.mask.shape
            src = pixels[ann.image_id][y : y + h, x : x + w]
            assert np.array_equal(rec.crop, src)
            assert rec.mask.any()
            assert rec.mask[0].any() or rec.mask[:, 0].any()  # tight crop
            assert rec.category_id == ann.category_id

    def test_entities_read_from_disk_root(self, tmp_path):
        rng = np.random.default_rng(61)
        bundle, _path, _images_dir, pixels = make_bundle(rng, n_images=2, write_to=tmp_path)
        bank = extract_entities(bundle)
        in_memory = extract_entities(bundle, images=pixels)
        assert bank == in_memory

    def test_crowd_and_empty_skipped(self):
        height, width = 16, 16
        mask = np.zeros((height, width), bool)
        mask[4:8, 4:8] = True
        anns = [
            InstanceAnnotation(1, 1, 1, rle_encode(mask), (4.0, 4.0, 4.0, 4.0), 16.0, 0),
            InstanceAnnotation(2, 1, 1, rle_encode(mask), (4.0, 4.0, 4.0, 4.0), 16.0, 1),
            InstanceAnnotation(
                3, 1, 1, rle_encode(np.zeros((height, width), bool)), (0.0, 0.0, 0.0, 0.0), 0.0, 0
            ),
        ]
        bundle = DatasetBundle(
            images=[ImageRecord(1, "a.png", width, height)],
            annotations=anns,
            categories=[Category(1, "player")],
        )
        pixels = {1: np.zeros((height, width, 3), np.uint8)}
        bank = extract_entities(bundle, images=pixels)
        assert len(bank) == 1
        assert bank.entries[0].source_annotation_id == 1
        assert bank.skip_report == {"crowd": 1, "empty": 1}

    def test_no_pixels_available(self):
        rng = np.random.default_rng(62)
        bundle, _pixels = _bundle_with_pixels(rng, n_images=1)
        with pytest.raises(ValueError):
            extract_entities(bundle)


class TestPersistence:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(63)
        bank = make_bank(rng, n=7)
        save_bank(bank, tmp_path / "bank")
        loaded = load_bank(tmp_path / "bank")
        assert loaded == bank
        for a, b in zip(loaded.entries, bank.entries):
            assert a.crop.dtype == np.uint8 and a.mask.dtype == bool
            assert np.array_equal(a.crop, b.crop)
            assert np.array_equal(a.mask, b.mask)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(CorruptBank):
            load_bank(tmp_path)

    def test_missing_crop_file(self, tmp_path):
        rng = np.random.default_rng(64)
        save_bank(make_bank(rng, n=3), tmp_path / "bank")
        (tmp_path / "bank" / "crops" / "1.png").unlink()
        with pytest.raises(CorruptBank, match="1.png"):
            load_bank(tmp_path / "bank")

    def test_manifest_size_mismatch(self, tmp_path):
        rng = np.random.default_rng(65)
        save_bank(make_bank(rng, n=2), tmp_path / "bank")
        manifest_path = tmp_path / "bank" / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest[0]["width"] += 1
        manifest_path.write_text(json.dumps(manifest))
        with pytest.raises(CorruptBank, match="entry 0"):
            load_bank(tmp_path / "bank")

    def test_manifest_bad_index(self, tmp_path):
        rng = np.random.default_rng(66)
        save_bank(make_bank(rng, n=2), tmp_path / "bank")
        manifest_path = tmp_path / "bank" / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest[1]["index"] = 5
        manifest_path.write_text(json.dumps(manifest))
        with pytest.raises(CorruptBank):
            load_bank(tmp_path / "bank")

    def test_manifest_not_json(self, tmp_path):
        rng = np.random.default_rng(67)
        save_bank(make_bank(rng, n=1), tmp_path / "bank")
        (tmp_path / "bank" / "manifest.json").write_text("][")
        with pytest.raises(CorruptBank):
            load_bank(tmp_path / "bank")


class TestSampling:
    def test_zero_count(self):
        bank = make_bank(np.random.default_rng(68), n=3)
        assert sample_entities(bank, 0, np.random.default_rng(1)) == []

    def test_negative_count(self):
        bank = make_bank(np.random.default_rng(68), n=3)
        with pytest.raises(ValueError):
            sample_entities(bank, -1, np.random.default_rng(1))

    def test_empty_bank(self):
        with pytest.raises(EmptyBank):
            sample_entities(EntityBank(entries=[]), 2, np.random.default_rng(1))

    def test_with_replacement_and_uniform(self):
        bank = make_bank(np.random.default_rng(69), n=4)
        rng = np.random.default_rng(70)
        picks = sample_entities(bank, 4000, rng)
        assert len(picks) == 4000
        counts = {}
        for rec in picks:
            counts[id(rec)] = counts.get(id(rec), 0) + 1
        assert len(counts) == 4  # all entries hit
        assert all(800 < c < 1200 for c in counts.values())

    def test_deterministic(self):
        bank = make_bank(np.random.default_rng(71), n=5)
        a = sample_entities(bank, 50, np.random.default_rng(9))
        b = sample_entities(bank, 50, np.random.default_rng(9))
        assert all(x is y for x, y in zip(a, b))
