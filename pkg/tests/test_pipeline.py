import json
import os

import numpy as np
import pytest

from evcam import eventgen, imaging, pipeline
from evcam.errors import ConfigError, LayoutError
from evcam.flow import FlowConfig

from conftest import random_image


def write_images(root, names, rng, size=(12, 10)):
    root.mkdir(parents=True, exist_ok=True)
    for name in names:
        imaging.save_png(random_image(rng, *size), root / name)


@pytest.fixture
def flat_root(tmp_path, rng):
    root = tmp_path / "flat"
    write_images(root, ["b.png", "a.png", "c.jpg"], rng)
    return root


def make_job(input_root, output_root, **kw):
    defaults = dict(
        alphas=(0.2, 5.0),
        event_cfg=eventgen.EventGenConfig(threshold_c=0.1,
                                          flow=FlowConfig(mode="random", seed=0)),
        layout="flat",
        global_seed=42,
        workers=1,
        size=(16, 16),
    )
    defaults.update(kw)
    return pipeline.DatasetJob(input_root=input_root, output_root=output_root, **defaults)


class TestDiscover:
    def test_flat_sorted(self, flat_root):
        assert pipeline.discover(flat_root, "flat") == ["a.png", "b.png", "c.jpg"]

    def test_flat_recursive(self, flat_root, rng):
        write_images(flat_root / "sub", ["d.png"], rng)
        assert pipeline.discover(flat_root, "flat") == [
            "a.png", "b.png", "c.jpg", "sub/d.png"]

    def test_extension_filter_matches_listing(self, tmp_path, rng):
        root = tmp_path / "mixed"
        write_images(root, ["x.png", "y.jpeg", "z.jpg"], rng)
        (root / "notes.txt").write_text("not an image")
        (root / "data.npy").write_bytes(b"\x00")
        byhand = sorted(n for n in os.listdir(root)
                        if os.path.splitext(n)[1].lower() in (".png", ".jpg", ".jpeg"))
        assert pipeline.discover(root, "flat") == byhand

    def test_voc_layout(self, tmp_path, rng):
        root = tmp_path / "voc"
        write_images(root / "JPEGImages", ["1.jpg", "0.jpg"], rng)
        write_images(root, ["stray.png"], rng)  # outside JPEGImages: ignored
        assert pipeline.discover(root, "voc") == ["JPEGImages/0.jpg", "JPEGImages/1.jpg"]

    def test_voc_missing_jpegimages(self, tmp_path):
        root = tmp_path / "voc"
        root.mkdir()
        with pytest.raises(LayoutError, match="JPEGImages"):
            pipeline.discover(root, "voc")

    def test_coco_layout(self, tmp_path, rng):
        root = tmp_path / "coco"
        write_images(root / "train2017", ["t.jpg"], rng)
        write_images(root / "val2017", ["v.jpg"], rng)
        assert pipeline.discover(root, "coco") == ["train2017/t.jpg", "val2017/v.jpg"]

    def test_coco_without_splits(self, tmp_path):
        root = tmp_path / "coco"
        root.mkdir()
        with pytest.raises(LayoutError):
            pipeline.discover(root, "coco")

    def test_missing_root(self, tmp_path):
        with pytest.raises(LayoutError):
            pipeline.discover(tmp_path / "nope", "flat")


class TestPerImageSeed:
    def test_deterministic(self):
        assert pipeline.per_image_seed(1, "a/b.png") == pipeline.per_image_seed(1, "a/b.png")

    def test_collision_scan(self):
        seeds = {pipeline.per_image_seed(7, f"dir{i % 13}/img_{i}.png")
                 for i in range(10_000)}
        assert len(seeds) == 10_000

    def test_global_seed_sensitivity(self):
        assert pipeline.per_image_seed(1, "x.png") != pipeline.per_image_seed(2, "x.png")

    def test_separator_normalization(self):
        assert (pipeline.per_image_seed(3, "a/b.png")
                == pipeline.per_image_seed(3, "a" + os.sep + "b.png"))

    def test_fits_in_u64(self):
        for i in range(100):
            assert 0 <= pipeline.per_image_seed(i, f"{i}.png") < 2**64


class TestDatasetJobValidation:
    def test_alpha_validation(self, tmp_path):
        with pytest.raises(ConfigError):
            make_job(tmp_path, tmp_path / "out", alphas=(0.0,))
        with pytest.raises(ConfigError):
            make_job(tmp_path, tmp_path / "out", alphas=((5.0, 0.2),))
        with pytest.raises(ConfigError):
            make_job(tmp_path, tmp_path / "out", alphas=())

    def test_duplicate_alpha_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="duplicate"):
            make_job(tmp_path, tmp_path / "out", alphas=(0.2, 0.2))

    def test_layout_and_workers_validation(self, tmp_path):
        with pytest.raises(ConfigError):
            make_job(tmp_path, tmp_path / "out", layout="tar")
        with pytest.raises(ConfigError):
            make_job(tmp_path, tmp_path / "out", workers=0)


class TestRunJob:
    def test_two_alphas_two_entries_per_image(self, flat_root, tmp_path):
        job = make_job(flat_root, tmp_path / "out")
        result = pipeline.run_job(job)
        assert len(result.entries) == 2 * 3
        assert result.failed_count == 0
        for entry in result.entries:
            assert entry["status"] == "ok"
            assert (tmp_path / "out" / entry["out_exposed"]).is_file()
            assert (tmp_path / "out" / entry["out_event"]).is_file()
            assert entry["alpha"] in (0.2, 5.0)
            assert entry["threshold_c"] == 0.1
            assert entry["flow_mode"] == "random"

    def test_manifest_written_and_readable(self, flat_root, tmp_path):
        result = pipeline.run_job(make_job(flat_root, tmp_path / "out"))
        loaded = pipeline.read_manifest(result.manifest_path)
        assert loaded == result.entries

    def test_empty_input_dir(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        result = pipeline.run_job(make_job(empty, tmp_path / "out"))
        assert result.entries == []
        assert result.manifest_path.is_file()

    def test_rerun_is_byte_identical(self, flat_root, tmp_path):
        job_a = make_job(flat_root, tmp_path / "out_a")
        job_b = make_job(flat_root, tmp_path / "out_b")
        res_a = pipeline.run_job(job_a)
        res_b = pipeline.run_job(job_b)
        assert res_a.manifest_path.read_bytes() == res_b.manifest_path.read_bytes()
        for entry in res_a.entries:
            a = (tmp_path / "out_a" / entry["out_event"]).read_bytes()
            b = (tmp_path / "out_b" / entry["out_event"]).read_bytes()
            assert a == b

    @pytest.mark.parametrize("workers", [4, 8])
    def test_worker_count_independence(self, flat_root, tmp_path, workers):
        serial = pipeline.run_job(make_job(flat_root, tmp_path / "w1", workers=1))
        parallel = pipeline.run_job(
            make_job(flat_root, tmp_path / f"w{workers}", workers=workers))
        assert serial.manifest_path.read_bytes() == parallel.manifest_path.read_bytes()
        for entry in serial.entries:
            a = (tmp_path / "w1" / entry["out_event"]).read_bytes()
            b = (tmp_path / f"w{workers}" / entry["out_event"]).read_bytes()
            assert a == b

    def test_unreadable_image_marked_failed(self, flat_root, tmp_path):
        (flat_root / "broken.png").write_bytes(b"not a png at all")
        result = pipeline.run_job(make_job(flat_root, tmp_path / "out"))
        failed = [e for e in result.entries if e["status"] == "failed"]
        assert len(failed) == 2  # one per alpha
        assert all(e["src"] == "broken.png" for e in failed)
        assert all(e["out_event"] is None for e in failed)
        assert all("error" in e for e in failed)
        assert result.ok_count == 6

    def test_every_file_referenced_exactly_once(self, flat_root, tmp_path):
        out = tmp_path / "out"
        result = pipeline.run_job(make_job(flat_root, out))
        on_disk = {p.relative_to(out).as_posix()
                   for p in out.rglob("*") if p.is_file()} - {pipeline.MANIFEST_NAME}
        referenced = []
        for e in result.entries:
            referenced += [e["out_exposed"], e["out_event"]]
        assert sorted(on_disk) == sorted(referenced)
        assert len(referenced) == len(set(referenced))

    def test_random_alpha_range_independent_of_other_images(self, tmp_path, rng):
        root_small = tmp_path / "small"
        root_large = tmp_path / "large"
        write_images(root_small, ["a.png"], np.random.Generator(np.random.PCG64(0)))
        write_images(root_large, ["a.png"], np.random.Generator(np.random.PCG64(0)))
        write_images(root_large, ["b.png", "c.png"], rng)
        job_small = make_job(root_small, tmp_path / "out_s", alphas=((0.2, 5.0),))
        job_large = make_job(root_large, tmp_path / "out_l", alphas=((0.2, 5.0),))
        res_small = pipeline.run_job(job_small)
        res_large = pipeline.run_job(job_large)
        entry_small = next(e for e in res_small.entries if e["src"] == "a.png")
        entry_large = next(e for e in res_large.entries if e["src"] == "a.png")
        assert entry_small["alpha"] == entry_large["alpha"]
        assert 0.2 <= entry_small["alpha"] <= 5.0
        assert entry_small["checksum"] == entry_large["checksum"]

    def test_checksum_matches_payload(self, flat_root, tmp_path):
        import hashlib
        out = tmp_path / "out"
        result = pipeline.run_job(make_job(flat_root, out))
        entry = result.entries[0]
        payload = (out / entry["out_event"]).read_bytes()
        assert entry["checksum"] == hashlib.blake2b(payload, digest_size=8).hexdigest()

    def test_events_derive_from_exposed_image(self, flat_root, tmp_path):
        # a dark alpha crushes V and with it the gradients: far fewer events
        # than the bright version of the same image at a fixed threshold
        cfg = eventgen.EventGenConfig(threshold_c=0.05,
                                      flow=FlowConfig(mode="fixed", theta=0.3))
        dark = pipeline.run_job(make_job(flat_root, tmp_path / "dark",
                                         alphas=(0.05,), event_cfg=cfg))
        bright = pipeline.run_job(make_job(flat_root, tmp_path / "bright",
                                           alphas=(1.0,), event_cfg=cfg))
        def total(res, out):
            n = 0
            for e in res.entries:
                n += eventgen.load_evtf(out / e["out_event"]).total_events()
            return n
        assert total(dark, tmp_path / "dark") < total(bright, tmp_path / "bright")


class TestBenchmark:
    def test_small_run_reports_throughput(self):
        report = pipeline.benchmark(images=4, width=64, height=64, workers=2, seed=1)
        assert report["images"] == 4
        assert report["images_per_sec"] > 0
        assert report["workers"] == 2
        assert report["compute_seconds_slowest_worker"] > 0
