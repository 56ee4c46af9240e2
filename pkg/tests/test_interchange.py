import json

import numpy as np
import pytest

from saukit.core import LatentBatch, LatentTensor
from saukit.interchange import (
    config_from_dict,
    load_profile,
    read_array,
    read_config,
    read_report,
    save_profile,
    write_array,
    write_report,
)
from saukit.masks import SauConfig
from saukit.metrics import EvalItem, EvalReport
from saukit.profile import estimate_trigger


def _random_batch(rng, n=3, shape=(2, 4, 4)):
    return LatentBatch(rng.uniform(-2, 2, size=(n, *shape)).astype(np.float32))


# ----------------------------------------------------------------- array files


def test_minimal_tensor_layout(tmp_path):
    path = tmp_path / "one.npy"
    write_array(path, LatentTensor(np.zeros((1, 1, 1), dtype=np.float32)))
    blob = path.read_bytes()
    assert blob[:6] == b"\x93NUMPY"
    assert blob[6:8] == bytes((1, 0))
    header_len = int.from_bytes(blob[8:10], "little")
    assert (10 + header_len) % 64 == 0
    header = blob[10 : 10 + header_len].decode("latin1")
    assert "'descr': '<f4'" in header
    assert "'fortran_order': False" in header
    assert "(1, 1, 1)" in header
    assert blob[10 + header_len :] == b"\x00\x00\x00\x00"


def test_round_trip_bit_identity(tmp_path):
    rng = np.random.default_rng(81)
    for i in range(20):
        batch = _random_batch(rng, n=int(rng.integers(1, 5)))
        path = tmp_path / f"batch_{i}.npy"
        write_array(path, batch)
        loaded = read_array(path)
        assert isinstance(loaded, LatentBatch)
        assert loaded.data.tobytes() == batch.data.tobytes()


def test_single_tensor_round_trip(tmp_path):
    rng = np.random.default_rng(82)
    tensor = LatentTensor(rng.normal(size=(3, 5, 7)).astype(np.float32))
    path = tmp_path / "t.npy"
    write_array(path, tensor)
    loaded = read_array(path)
    assert isinstance(loaded, LatentTensor)
    assert np.array_equal(loaded.data, tensor.data)


def test_reference_reader_parses_our_files(tmp_path):
    # numpy's own loader acts as the independent reference reader.
    rng = np.random.default_rng(83)
    batch = _random_batch(rng, n=4)
    path = tmp_path / "ours.npy"
    write_array(path, batch)
    external = np.load(path)
    assert external.dtype == np.dtype("<f4")
    assert external.shape == batch.data.shape
    assert np.array_equal(external, batch.data)


def test_we_parse_reference_writer_files(tmp_path):
    rng = np.random.default_rng(84)
    arr = rng.normal(size=(2, 3, 4, 4)).astype("<f4")
    path = tmp_path / "theirs.npy"
    np.save(path, arr)
    loaded = read_array(path)
    assert isinstance(loaded, LatentBatch)
    assert np.array_equal(loaded.data, arr)


def test_corrupted_magic_rejected(tmp_path):
    path = tmp_path / "bad.npy"
    write_array(path, LatentTensor(np.zeros((1, 2, 2), dtype=np.float32)))
    blob = bytearray(path.read_bytes())
    blob[0] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(ValueError, match="not an array container"):
        read_array(path)


def test_float64_file_rejected(tmp_path):
    path = tmp_path / "f8.npy"
    np.save(path, np.zeros((1, 2, 2), dtype="<f8"))
    with pytest.raises(ValueError, match="unsupported dtype"):
        read_array(path)


def test_fortran_order_rejected(tmp_path):
    path = tmp_path / "fortran.npy"
    np.save(path, np.asfortranarray(np.zeros((2, 2, 2), dtype="<f4")))
    with pytest.raises(ValueError, match="unsupported order"):
        read_array(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "short.npy"
    write_array(path, LatentTensor(np.zeros((2, 3, 3), dtype=np.float32)))
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(ValueError, match="payload length mismatch"):
        read_array(path)


def test_non_finite_payload_rejected(tmp_path):
    path = tmp_path / "nan.npy"
    arr = np.zeros((1, 2, 2), dtype="<f4")
    arr[0, 0, 0] = np.nan
    np.save(path, arr)
    with pytest.raises(ValueError, match="non-finite data"):
        read_array(path)


def test_unsupported_rank_rejected(tmp_path):
    path = tmp_path / "rank2.npy"
    np.save(path, np.zeros((4, 4), dtype="<f4"))
    with pytest.raises(ValueError, match="unsupported shape"):
        read_array(path)


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_array(tmp_path / "absent.npy")


# -------------------------------------------------------------- profile bundle


def test_profile_bundle_round_trip(tmp_path):
    rng = np.random.default_rng(85)
    clean = _random_batch(rng, n=4, shape=(3, 6, 6))
    poisoned = _random_batch(rng, n=4, shape=(3, 6, 6))
    profile = estimate_trigger(clean, poisoned)
    bundle = tmp_path / "profile"
    save_profile(bundle, profile)
    loaded = load_profile(bundle)
    assert np.array_equal(loaded.trigger_latent.data, profile.trigger_latent.data)
    assert np.array_equal(loaded.activation_map.values, profile.activation_map.values)
    assert loaded.sample_count == profile.sample_count
    assert loaded.shape == profile.shape


def test_profile_bundle_detects_tampered_activation(tmp_path):
    rng = np.random.default_rng(86)
    clean = _random_batch(rng, n=4, shape=(2, 5, 5))
    poisoned = _random_batch(rng, n=4, shape=(2, 5, 5))
    profile = estimate_trigger(clean, poisoned)
    bundle = tmp_path / "profile"
    save_profile(bundle, profile)
    corrupted = profile.activation_map.values + np.float32(0.5)
    write_array(bundle / "activation_map.npy", corrupted[None, :, :])
    with pytest.raises(ValueError, match="revalidate"):
        load_profile(bundle)


# --------------------------------------------------------------------- config


def test_empty_config_gives_defaults(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("{}")
    config = read_config(path)
    assert config == SauConfig(
        tau1=0.5, tau2=0.3, sigma_mask=2.0, beta=10.0, alpha=1.0, sigma_final=1.0
    )


def test_partial_config_overrides(tmp_path):
    path = tmp_path / "partial.json"
    path.write_text('{"alpha": 0.25, "tau1": 0.7}')
    config = read_config(path)
    assert config.alpha == 0.25
    assert config.tau1 == 0.7
    assert config.tau2 == 0.3


def test_out_of_range_value_names_key(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"alpha": 1.5}')
    with pytest.raises(ValueError, match="alpha"):
        read_config(path)


def test_unknown_keys_rejected():
    with pytest.raises(ValueError, match="unknown config keys: gamma"):
        config_from_dict({"gamma": 1.0})


def test_non_numeric_value_rejected():
    with pytest.raises(ValueError, match="beta"):
        config_from_dict({"beta": "ten"})
    with pytest.raises(ValueError, match="beta"):
        config_from_dict({"beta": True})


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"alpha": }')
    with pytest.raises(json.JSONDecodeError) as excinfo:
        read_config(path)
    assert "line 1" in str(excinfo.value)
    assert "column" in str(excinfo.value)


# --------------------------------------------------------------------- report


def _sample_report() -> EvalReport:
    items = [
        EvalItem(id="item-0000", detected_trigger=False, score=0.01, psnr_vs_reference=30.5),
        EvalItem(id="item-0001", detected_trigger=True, score=0.91, psnr_vs_reference=float("inf")),
    ]
    return EvalReport(items=items, removal_accuracy=0.5, config={"k": 3.0})


def test_report_round_trip_structure(tmp_path):
    path = tmp_path / "report.json"
    write_report(path, _sample_report())
    loaded = read_report(path)
    assert loaded["removal_accuracy"] == 0.5
    assert loaded["items"][0]["id"] == "item-0000"
    assert loaded["items"][1]["psnr_db"] == 99.0  # infinity capped in reports
    assert loaded["config"] == {"k": 3.0}
    write_report(tmp_path / "again.json", _sample_report())
    assert read_report(tmp_path / "again.json") == loaded


def test_report_bytes_stable_across_writes(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    write_report(a, _sample_report())
    write_report(b, _sample_report())
    assert a.read_bytes() == b.read_bytes()
