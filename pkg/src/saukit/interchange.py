"""Bit-exact persistence for latents, profiles, configs, and reports.

Arrays are stored in the NPY v1.0 container layout: ``\\x93NUMPY`` magic,
version (1, 0), a literal header dict declaring little-endian float32 and
C order, padded so the payload starts on a 64-byte boundary. Only (C,H,W)
tensors and (N,C,H,W) batches are accepted. Reports and manifests are
pretty-printed JSON with sorted keys and no wall-clock content, so reruns
on identical inputs are byte-identical.
"""

from __future__ import annotations

import ast
import json
import math
import struct
from pathlib import Path

import numpy as np

from .core import LatentBatch, LatentTensor, SpatialMap, channel_l2_map
from .masks import SauConfig
from .metrics import REPORT_PSNR_CAP_DB, EvalReport
from .profile import TriggerProfile

__all__ = [
    "write_array",
    "read_array",
    "save_profile",
    "load_profile",
    "read_config",
    "config_from_dict",
    "write_report",
    "read_report",
]

MAGIC = b"\x93NUMPY"
TOOL_VERSION = "0.1.0"
FORMAT_VERSION = 1

PROFILE_MANIFEST = "manifest.json"
PROFILE_TRIGGER_FILE = "trigger_latent.npy"
PROFILE_ACTIVATION_FILE = "activation_map.npy"

# Tolerance for revalidating the stored activation map against the trigger
# latent on load.
_ACTIVATION_TOL = 1e-5

_CONFIG_KEYS = ("tau1", "tau2", "sigma_mask", "beta", "alpha", "sigma_final")


def _coerce_array(data) -> np.ndarray:
    if isinstance(data, LatentTensor):
        arr = data.data
    elif isinstance(data, LatentBatch):
        arr = data.data
    elif isinstance(data, np.ndarray):
        arr = data.astype(np.float32)
    else:
        raise ValueError(f"cannot serialize {type(data).__name__} as an array file")
    if arr.ndim not in (3, 4):
        raise ValueError(f"array rank must be 3 (C,H,W) or 4 (N,C,H,W), got {arr.ndim}")
    return np.ascontiguousarray(arr, dtype=np.float32)


def write_array(path: str | Path, data) -> None:
    """Write a tensor or batch as little-endian float32, C order, NPY v1.0."""
    arr = _coerce_array(data)
    shape_repr = "(" + ", ".join(str(int(d)) for d in arr.shape) + ")"
    header = f"{{'descr': '<f4', 'fortran_order': False, 'shape': {shape_repr}, }}"
    # magic(6) + version(2) + header-length(2) + header + pad + '\n', total a
    # multiple of 64 so the payload starts aligned.
    base = len(MAGIC) + 2 + 2 + len(header) + 1
    pad = (64 - base % 64) % 64
    header_bytes = (header + " " * pad + "\n").encode("latin1")
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(bytes((1, 0)))
            fh.write(struct.pack("<H", len(header_bytes)))
            fh.write(header_bytes)
            fh.write(arr.astype("<f4").tobytes(order="C"))
    except OSError as exc:
        raise OSError(f"failed to write array file {path}: {exc}") from exc


def read_array(path: str | Path) -> LatentTensor | LatentBatch:
    """Read an array container; returns a tensor for rank 3, a batch for rank 4."""
    path = Path(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 10 or blob[:6] != MAGIC:
        raise ValueError(f"{path}: not an array container")
    major, minor = blob[6], blob[7]
    if (major, minor) != (1, 0):
        raise ValueError(f"{path}: unsupported container version {(major, minor)}")
    (header_len,) = struct.unpack("<H", blob[8:10])
    header_end = 10 + header_len
    if len(blob) < header_end:
        raise ValueError(f"{path}: truncated header")
    try:
        header = ast.literal_eval(blob[10:header_end].decode("latin1").strip())
    except (ValueError, SyntaxError) as exc:
        raise ValueError(f"{path}: malformed header: {exc}") from exc
    if not isinstance(header, dict):
        raise ValueError(f"{path}: malformed header")
    descr = header.get("descr")
    if descr != "<f4":
        raise ValueError(f"{path}: unsupported dtype {descr!r}")
    if header.get("fortran_order") is not False:
        raise ValueError(f"{path}: unsupported order (fortran_order must be False)")
    shape = header.get("shape")
    if (
        not isinstance(shape, tuple)
        or not all(isinstance(d, int) and d > 0 for d in shape)
        or len(shape) not in (3, 4)
    ):
        raise ValueError(f"{path}: unsupported shape {shape!r}")
    expected = 4 * int(np.prod(shape))
    payload = blob[header_end:]
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload length mismatch (expected {expected} bytes, got {len(payload)})"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(shape)
    if not np.isfinite(values).all():
        raise ValueError(f"{path}: non-finite data")
    values = values.astype(np.float32, copy=True)
    if len(shape) == 3:
        return LatentTensor(values)
    return LatentBatch(values)


def save_profile(directory: str | Path, profile: TriggerProfile) -> None:
    """Persist a trigger profile as a bundle directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_array(directory / PROFILE_TRIGGER_FILE, profile.trigger_latent)
    write_array(
        directory / PROFILE_ACTIVATION_FILE,
        profile.activation_map.values[None, :, :],
    )
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "trigger-profile",
        "shape": list(profile.shape),
        "sample_count": profile.sample_count,
        "metadata": {"tool": "saukit", "version": TOOL_VERSION},
    }
    _write_json(directory / PROFILE_MANIFEST, manifest)


def load_profile(directory: str | Path) -> TriggerProfile:
    """Load a profile bundle, revalidating the stored activation map."""
    directory = Path(directory)
    with open(directory / PROFILE_MANIFEST, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    trigger = read_array(directory / PROFILE_TRIGGER_FILE)
    if not isinstance(trigger, LatentTensor):
        raise ValueError(f"{directory}: trigger latent must be a single tensor")
    stored = read_array(directory / PROFILE_ACTIVATION_FILE)
    if not isinstance(stored, LatentTensor) or stored.channels != 1:
        raise ValueError(f"{directory}: activation map must have shape (1,H,W)")
    if tuple(manifest.get("shape", ())) != trigger.shape:
        raise ValueError(f"{directory}: manifest shape does not match trigger latent")
    recomputed = channel_l2_map(trigger)
    if stored.data[0].shape != recomputed.values.shape or not np.allclose(
        stored.data[0], recomputed.values, atol=_ACTIVATION_TOL
    ):
        raise ValueError(
            f"{directory}: activation map does not revalidate against the trigger latent"
        )
    return TriggerProfile(
        trigger_latent=trigger,
        activation_map=SpatialMap(stored.data[0]),
        sample_count=int(manifest.get("sample_count", 1)),
        shape=trigger.shape,
    )


def config_from_dict(raw: dict) -> SauConfig:
    """Build a config from a JSON object, applying defaults for absent keys."""
    unknown = sorted(set(raw) - set(_CONFIG_KEYS))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = {}
    for key in _CONFIG_KEYS:
        if key not in raw:
            continue
        value = raw[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"config key '{key}' must be a number")
        kwargs[key] = float(value)
    return SauConfig(**kwargs)


def read_config(path: str | Path) -> SauConfig:
    """Parse a JSON config file; absent keys fall back to defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)  # JSONDecodeError carries line/column context
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return config_from_dict(raw)


def report_to_dict(report: EvalReport) -> dict:
    items = []
    for item in report.items:
        value = item.psnr_vs_reference
        capped = REPORT_PSNR_CAP_DB if math.isinf(value) else min(value, REPORT_PSNR_CAP_DB)
        items.append(
            {
                "id": item.id,
                "detected_trigger": item.detected_trigger,
                "score": item.score,
                "psnr_db": capped,
            }
        )
    return {
        "removal_accuracy": report.removal_accuracy,
        "items": items,
        "config": report.config,
        "metadata": {
            "tool": "saukit",
            "version": TOOL_VERSION,
            "format_version": FORMAT_VERSION,
        },
    }


def write_report(path: str | Path, report: EvalReport) -> None:
    """Write an evaluation report as pretty-printed JSON with stable ordering."""
    _write_json(path, report_to_dict(report))


def read_report(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _write_json(path: str | Path, payload: dict) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"failed to write {path}: {exc}") from exc
