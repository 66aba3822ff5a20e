"""HTTP service: generation, annotations, task pool, health."""

import base64
import concurrent.futures
import io

import numpy as np
import pytest
import torch
from fastapi.testclient import TestClient
from PIL import Image

from lots.checkpoint import save_checkpoint
from lots.conditioning import ConditioningConfig
from lots.dataset import write_synthetic_dataset
from lots.diffusion import DenoiserConfig, LotsModel, ModelConfig
from lots.encoders import EncoderConfig
from lots.service import create_app


SERVICE_MODEL = ModelConfig(
    encoder=EncoderConfig(sketch_patch=16, sketch_dim=32, sketch_blocks=1,
                          text_dim=32, text_blocks=1, seed=5),
    conditioning=ConditioningConfig(latent_dim=32, pool_tokens=4, seed=5),
    denoiser=DenoiserConfig(image_size=64, base_width=8, blocks_per_level=1,
                            attn_resolutions=(16,), text_ctx_dim=32, cond_dim=32, seed=5),
    timesteps=50,
)


def white_canvas_b64(size=512, strokes=None) -> str:
    arr = np.full((size, size), 255, dtype=np.uint8)
    if strokes:
        for (y0, y1, x0, x1) in strokes:
            arr[y0:y1, x0:x1] = 0
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


@pytest.fixture(scope="module")
def service(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("service")
    data_dir = tmp / "data"
    write_synthetic_dataset(data_dir, n_train=0, n_test=3, seed=0)
    ckpt = tmp / "model.ckpt"
    save_checkpoint(LotsModel(SERVICE_MODEL), ckpt)
    app = create_app(ckpt_path=str(ckpt), data_dir=str(data_dir))
    with TestClient(app) as client:
        yield client


def generation_payload(seed=7, n_pairs=2, steps=3, alpha=1.0):
    pairs = []
    for i in range(n_pairs):
        pairs.append({
            "sketch": white_canvas_b64(strokes=[(100 * (i + 1), 100 * (i + 1) + 50,
                                                 100, 400)]),
            "text": f"a red top {i}",
            "layer_id": f"layer{i}",
        })
    return {"pairs": pairs, "alpha": alpha, "seed": seed, "steps": steps}


def session_payload(image_id="test_synth01_00000", device="mouse", layers=1):
    return {
        "reference_image_id": image_id,
        "layers": [
            {
                "garment_category": f"top{i}",
                "sketch": white_canvas_b64(strokes=[(10, 60, 10, 400)]),
                "stroke_log": [
                    {"pointer_type": device, "started_at": 1.0, "ended_at": 2.0,
                     "points": [[10.0, 10.0, 1.0], [50.0, 50.0, 2.0]]}
                ],
            }
            for i in range(layers)
        ],
        "device": device,
        "started_at": 0.0,
        "ended_at": 5.0,
        "status": "completed",
    }


class TestHealth:
    def test_health_reports_checkpoint_and_queue(self, service):
        resp = service.get("/health")
        assert resp.status_code == 200
        body = resp.json()
        assert body["model_loaded"] is True
        assert body["checkpoint"]
        assert body["queue_depth"] == 0


class TestGenerate:
    def test_zero_pairs_rejected_400(self, service):
        payload = generation_payload()
        payload["pairs"] = []
        resp = service.post("/v1/generate", json=payload)
        assert resp.status_code == 400
        assert "pairs" in resp.json()["field"]

    def test_alpha_out_of_range_names_field(self, service):
        payload = generation_payload(alpha=1.5)
        resp = service.post("/v1/generate", json=payload)
        assert resp.status_code == 400
        assert "alpha" in resp.json()["field"]

    def test_seven_pairs_rejected(self, service):
        payload = generation_payload(n_pairs=7)
        resp = service.post("/v1/generate", json=payload)
        assert resp.status_code == 400

    def test_wrong_canvas_size_rejected(self, service):
        payload = generation_payload()
        payload["pairs"][0]["sketch"] = white_canvas_b64(size=256)
        resp = service.post("/v1/generate", json=payload)
        assert resp.status_code == 400

    def test_fixed_seed_byte_identical(self, service):
        payload = generation_payload(seed=7)
        a = service.post("/v1/generate", json=payload)
        b = service.post("/v1/generate", json=payload)
        assert a.status_code == b.status_code == 200
        assert a.json()["image"] == b.json()["image"]
        img = Image.open(io.BytesIO(base64.b64decode(a.json()["image"])))
        assert img.size == (64, 64)

    def test_different_seeds_differ(self, service):
        a = service.post("/v1/generate", json=generation_payload(seed=1))
        b = service.post("/v1/generate", json=generation_payload(seed=2))
        assert a.json()["image"] != b.json()["image"]

    def test_model_not_loaded_409(self, tmp_path):
        app = create_app(ckpt_path=None, data_dir=str(tmp_path))
        with TestClient(app) as client:
            resp = client.post("/v1/generate", json=generation_payload())
            assert resp.status_code == 409


class TestAnnotations:
    def test_empty_layers_rejected(self, service):
        payload = session_payload()
        payload["layers"] = []
        resp = service.post("/v1/annotations", json=payload)
        assert resp.status_code == 400

    def test_bad_device_rejected(self, service):
        resp = service.post("/v1/annotations", json=session_payload(device="tablet"))
        assert resp.status_code == 400

    def test_non_monotone_timestamps_rejected(self, service):
        payload = session_payload()
        payload["ended_at"] = -1.0
        resp = service.post("/v1/annotations", json=payload)
        assert resp.status_code == 400

    def test_store_fetch_roundtrip(self, service):
        payload = session_payload(device="stylus", layers=2)
        resp = service.post("/v1/annotations", json=payload)
        assert resp.status_code == 200
        session_id = resp.json()["session_id"]
        got = service.get(f"/v1/annotations/{session_id}")
        assert got.status_code == 200
        body = got.json()
        assert body["device"] == "stylus"
        assert len(body["layers"]) == 2
        assert body["layers"][0]["sketch"] == payload["layers"][0]["sketch"]

    def test_unknown_session_404(self, service):
        assert service.get("/v1/annotations/doesnotexist").status_code == 404


class TestTasks:
    def test_tasks_then_204(self, tmp_path):
        data_dir = tmp_path / "data"
        write_synthetic_dataset(data_dir, n_train=0, n_test=3, seed=1)
        app = create_app(ckpt_path=None, data_dir=str(data_dir))
        with TestClient(app) as client:
            seen = set()
            for _ in range(3):
                resp = client.get("/v1/tasks/next")
                assert resp.status_code == 200
                body = resp.json()
                seen.add(body["image_id"])
                assert len(body["regions"]) >= 2
            assert len(seen) == 3
            assert client.get("/v1/tasks/next").status_code == 204

    def test_region_count_matches_records(self, tmp_path):
        from lots.dataset import read_manifest

        data_dir = tmp_path / "data"
        manifest = write_synthetic_dataset(data_dir, n_train=0, n_test=1, seed=2)
        entries = read_manifest(manifest)
        app = create_app(ckpt_path=None, data_dir=str(data_dir))
        with TestClient(app) as client:
            body = client.get("/v1/tasks/next").json()
            assert len(body["regions"]) == len(entries[0].records)

    def test_no_double_assignment_under_concurrency(self, tmp_path):
        data_dir = tmp_path / "data"
        write_synthetic_dataset(data_dir, n_train=0, n_test=8, seed=3)
        app = create_app(ckpt_path=None, data_dir=str(data_dir))
        with TestClient(app) as client:
            def fetch(_):
                resp = client.get("/v1/tasks/next")
                return resp.json()["image_id"] if resp.status_code == 200 else None

            with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
                ids = list(pool.map(fetch, range(8)))
            claimed = [i for i in ids if i]
            assert len(claimed) == len(set(claimed)) == 8

    def test_lease_expiry_reissues_task(self, tmp_path):
        data_dir = tmp_path / "data"
        write_synthetic_dataset(data_dir, n_train=0, n_test=1, seed=4)
        app = create_app(ckpt_path=None, data_dir=str(data_dir), lease_seconds=0.05)
        with TestClient(app) as client:
            first = client.get("/v1/tasks/next").json()["image_id"]
            import time

            time.sleep(0.1)
            again = client.get("/v1/tasks/next").json()["image_id"]
            assert first == again

    def test_completed_task_not_reissued(self, tmp_path):
        data_dir = tmp_path / "data"
        write_synthetic_dataset(data_dir, n_train=0, n_test=1, seed=5)
        app = create_app(ckpt_path=None, data_dir=str(data_dir), lease_seconds=0.01)
        with TestClient(app) as client:
            image_id = client.get("/v1/tasks/next").json()["image_id"]
            client.post("/v1/annotations", json=session_payload(image_id=image_id))
            import time

            time.sleep(0.05)
            assert client.get("/v1/tasks/next").status_code == 204


class TestWildExport:
    def test_exported_sessions_reach_dataset_stats(self, tmp_path):
        from lots.dataset import dataset_stats, read_manifest
        from lots.service.state import AnnotationStore, export_wild_entries
        from lots.service.schemas import AnnotationSession

        data_dir = tmp_path / "data"
        manifest = write_synthetic_dataset(data_dir, n_train=0, n_test=2, seed=6)
        entries = read_manifest(manifest)
        store = AnnotationStore(tmp_path / "sessions")
        ref = entries[0]
        session = AnnotationSession.model_validate(session_payload(
            image_id=ref.image_id, device="stylus"))
        # use a category the reference actually has so captions are inherited
        session.layers[0].garment_category = ref.records[0].category
        store.save(session)
        wild = export_wild_entries(store, entries)
        assert len(wild) == 1
        assert wild[0].split == "wild"
        assert wild[0].records[0].caption == ref.records[0].caption
        report = dataset_stats(entries + wild)
        assert report["device_split"] == {"stylus": 1}

    def test_stored_sessions_revalidate_on_read(self, tmp_path):
        from lots.service.state import AnnotationStore
        from lots.service.schemas import AnnotationSession

        store = AnnotationStore(tmp_path / "sessions")
        session = AnnotationSession.model_validate(session_payload())
        sid = store.save(session)
        loaded = store.load(sid)
        assert loaded.reference_image_id == session.reference_image_id
        assert loaded.layers[0].stroke_log == session.layers[0].stroke_log
