"""Tensor files, checkpoints, and manifest records."""

import io as _io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssavd.config import ModelConfig
from ssavd.io import (
    FORGERY_TYPES,
    FormatError,
    ManifestRecord,
    checkpoint_to_bytes,
    labels_for_type,
    load_checkpoint,
    read_manifest,
    read_tensor,
    restore_model,
    save_checkpoint,
    tensor_from_stream,
    tensor_to_bytes,
    write_manifest,
    write_tensor,
)
from ssavd.model import SSAVDModel
from ssavd.rng import RngState


class TestTensorFiles:
    @pytest.mark.parametrize("rank", [1, 2, 3, 4])
    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    def test_roundtrip_bit_exact(self, tmp_path, rank, dtype):
        shape = tuple(range(2, 2 + rank))
        arr = np.random.default_rng(rank).normal(size=shape).astype(dtype)
        path = tmp_path / "t.sstn"
        write_tensor(path, arr)
        back = read_tensor(path)
        assert back.dtype == arr.dtype
        assert back.shape == arr.shape
        assert np.array_equal(back, arr)
        assert arr.tobytes() == back.tobytes()

    def test_file_size_formula(self, tmp_path):
        # header 16 bytes, 4 bytes per extent, then the raw payload
        arr = np.zeros((10, 3, 64, 64), dtype=np.float32)
        path = tmp_path / "t.sstn"
        write_tensor(path, arr)
        assert path.stat().st_size == 16 + 4 * 4 + 10 * 3 * 64 * 64 * 4

    def test_bad_magic_raises(self):
        blob = bytearray(tensor_to_bytes(np.zeros(3, np.float32)))
        blob[:4] = b"XXXX"
        with pytest.raises(FormatError):
            tensor_from_stream(_io.BytesIO(bytes(blob)))

    def test_bad_version_raises(self):
        blob = bytearray(tensor_to_bytes(np.zeros(3, np.float32)))
        blob[4] = 99
        with pytest.raises(FormatError):
            tensor_from_stream(_io.BytesIO(bytes(blob)))

    def test_bad_dtype_code_raises(self):
        blob = bytearray(tensor_to_bytes(np.zeros(3, np.float32)))
        blob[6] = 7
        with pytest.raises(FormatError):
            tensor_from_stream(_io.BytesIO(bytes(blob)))

    def test_truncated_payload_raises(self):
        blob = tensor_to_bytes(np.zeros((4, 4), np.float32))
        with pytest.raises(FormatError):
            tensor_from_stream(_io.BytesIO(blob[:-5]))

    def test_truncated_extents_raises(self):
        blob = tensor_to_bytes(np.zeros((4, 4), np.float32))
        with pytest.raises(FormatError):
            tensor_from_stream(_io.BytesIO(blob[:18]))

    def test_unsupported_dtype_raises(self):
        with pytest.raises(FormatError):
            tensor_to_bytes(np.zeros(3, np.int32))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_roundtrip_random_payloads(self, seed):
        arr = np.random.default_rng(seed).normal(size=(3, 5)).astype(np.float32)
        back = tensor_from_stream(_io.BytesIO(tensor_to_bytes(arr)))
        assert np.array_equal(back, arr)


class TestCheckpoints:
    def test_save_restore_roundtrip(self, tmp_path):
        model = SSAVDModel(ModelConfig.preset("tiny"), seed=5)
        path = tmp_path / "m.ssck"
        save_checkpoint(path, model)
        restored = restore_model(path)
        a, b = model.named_params(), restored.named_params()
        assert set(a) == set(b)
        for name in a:
            assert np.array_equal(a[name].data, b[name].data)

    def test_restored_model_same_predictions(self, tmp_path):
        cfg = ModelConfig.preset("tiny")
        model = SSAVDModel(cfg, seed=6)
        rng = RngState(0)
        v = rng.normal(0, 1, (2,) + cfg.visual_input_shape()).astype(np.float32)
        a = rng.normal(0, 1, (2,) + cfg.audio_input_shape()).astype(np.float32)
        path = tmp_path / "m.ssck"
        save_checkpoint(path, model)
        restored = restore_model(path)
        assert np.array_equal(
            model.predict(v, a)["p_w"].numpy(), restored.predict(v, a)["p_w"].numpy()
        )

    def test_checkpoint_bytes_deterministic(self):
        m1 = SSAVDModel(ModelConfig.preset("tiny"), seed=7)
        m2 = SSAVDModel(ModelConfig.preset("tiny"), seed=7)
        assert checkpoint_to_bytes(m1) == checkpoint_to_bytes(m2)

    def test_config_stored_in_checkpoint(self, tmp_path):
        cfg = ModelConfig.preset("tiny")
        path = tmp_path / "m.ssck"
        save_checkpoint(path, SSAVDModel(cfg, seed=0))
        loaded_cfg, params = load_checkpoint(path)
        assert loaded_cfg.to_dict() == cfg.to_dict()
        assert len(params) > 0

    def test_config_mismatch_rejected(self, tmp_path):
        path = tmp_path / "m.ssck"
        save_checkpoint(path, SSAVDModel(ModelConfig.preset("tiny"), seed=0))
        with pytest.raises(FormatError):
            load_checkpoint(path, expected_cfg=ModelConfig.preset("desk"))

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "m.ssck"
        path.write_bytes(b"JUNKJUNKJUNK")
        with pytest.raises(FormatError):
            load_checkpoint(path)


class TestManifest:
    def test_type_label_table(self):
        assert labels_for_type("FakeV-FakeA") == (0, 0)
        assert labels_for_type("FakeV-RealA") == (0, 1)
        assert labels_for_type("RealV-FakeA") == (1, 0)
        assert labels_for_type("RealV-RealA") == (1, 1)

    def test_whole_label_is_conjunction(self):
        for ftype in FORGERY_TYPES:
            y_v, y_a = labels_for_type(ftype)
            rec = ManifestRecord("c0", "v", "a", y_v, y_a, ftype)
            assert rec.y_w == (y_v & y_a)

    def test_only_real_real_is_whole_real(self):
        reals = [ManifestRecord("c", "v", "a", *labels_for_type(t), t).y_w
                 for t in FORGERY_TYPES]
        assert sum(reals) == 1

    def test_inconsistent_labels_rejected(self):
        with pytest.raises(ValueError):
            ManifestRecord("c0", "v", "a", 1, 1, "FakeV-FakeA")

    def test_unknown_type_rejected(self):
        with pytest.raises(ValueError):
            ManifestRecord("c0", "v", "a", 0, 0, "Mystery")

    def test_jsonl_roundtrip(self, tmp_path):
        records = [
            ManifestRecord(f"c{i}", f"v{i}", f"a{i}", *labels_for_type(t), t)
            for i, t in enumerate(FORGERY_TYPES)
        ]
        path = tmp_path / "manifest.jsonl"
        write_manifest(path, records)
        back = read_manifest(path)
        assert back == records

    def test_jsonl_one_object_per_line(self, tmp_path):
        records = [ManifestRecord("c0", "v", "a", 1, 1, "RealV-RealA")]
        path = tmp_path / "manifest.jsonl"
        write_manifest(path, records)
        lines = [l for l in path.read_text().splitlines() if l]
        assert len(lines) == 1
        assert json.loads(lines[0])["forgery_type"] == "RealV-RealA"
