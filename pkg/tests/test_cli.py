import json
import math
import subprocess
import sys

import numpy as np
import pytest

from saukit import cli
from saukit.core import LatentBatch
from saukit.interchange import load_profile, read_array, read_report, write_array
from saukit.masks import SauConfig
from saukit.purify import finalize
from saukit.core import LatentTensor


SHAPE = "4,16,16"


def run(argv):
    return cli.main(argv)


def simulate(tmp_path, name, count=8, attack="pixel", seed=0, shape=SHAPE):
    out = tmp_path / name
    code = run(
        [
            "simulate",
            "--out", str(out),
            "--count", str(count),
            "--attack", attack,
            "--seed", str(seed),
            "--shape", shape,
        ]
    )
    assert code == 0
    return out


def fit(tmp_path, sim_dir, name="profile"):
    out = tmp_path / name
    code = run(
        [
            "fit",
            "--clean", str(sim_dir / "clean.npy"),
            "--poisoned", str(sim_dir / "poisoned.npy"),
            "--out", str(out),
        ]
    )
    assert code == 0
    return out


def test_simulate_writes_expected_artifacts(tmp_path):
    out = simulate(tmp_path, "sim")
    assert (out / "clean.npy").exists()
    assert (out / "poisoned.npy").exists()
    manifest = json.loads((out / "attack.json").read_text())
    assert manifest["kind"] == "pixel"
    assert manifest["shape"] == [4, 16, 16]
    assert manifest["count"] == 8
    clean = read_array(out / "clean.npy")
    assert isinstance(clean, LatentBatch) and clean.count == 8


def test_simulate_deterministic_reruns(tmp_path):
    a = simulate(tmp_path, "a", seed=7)
    b = simulate(tmp_path, "b", seed=7)
    for name in ("clean.npy", "poisoned.npy", "attack.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_simulate_rejects_bad_attack_kind(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        run(["simulate", "--out", str(tmp_path / "x"), "--count", "1",
             "--attack", "object", "--seed", "0"])
    assert excinfo.value.code == 1


def test_fit_and_reload(tmp_path):
    sim_dir = simulate(tmp_path, "sim")
    profile_dir = fit(tmp_path, sim_dir)
    profile = load_profile(profile_dir)
    assert profile.shape == (4, 16, 16)
    assert profile.sample_count == 8


def test_fit_identical_batches_warns(tmp_path, capsys):
    sim_dir = simulate(tmp_path, "sim")
    code = run(
        [
            "fit",
            "--clean", str(sim_dir / "clean.npy"),
            "--poisoned", str(sim_dir / "clean.npy"),
            "--out", str(tmp_path / "zero_profile"),
        ]
    )
    assert code == 0
    captured = capsys.readouterr()
    assert "warning" in captured.out.lower()
    assert load_profile(tmp_path / "zero_profile").is_zero


def test_fit_missing_file_exits_2(tmp_path, capsys):
    code = run(
        [
            "fit",
            "--clean", str(tmp_path / "nope.npy"),
            "--poisoned", str(tmp_path / "nope.npy"),
            "--out", str(tmp_path / "p"),
        ]
    )
    assert code == 2


def test_fit_shape_mismatch_exits_1(tmp_path):
    a = simulate(tmp_path, "a", shape="4,16,16")
    b = simulate(tmp_path, "b", shape="4,20,20")
    code = run(
        [
            "fit",
            "--clean", str(a / "clean.npy"),
            "--poisoned", str(b / "poisoned.npy"),
            "--out", str(tmp_path / "p"),
        ]
    )
    assert code == 1


def test_purify_requires_clean_ref(tmp_path):
    sim_dir = simulate(tmp_path, "sim")
    profile_dir = fit(tmp_path, sim_dir)
    with pytest.raises(SystemExit) as excinfo:
        run(
            [
                "purify",
                "--input", str(sim_dir / "poisoned.npy"),
                "--profile", str(profile_dir),
                "--out", str(tmp_path / "purified.npy"),
            ]
        )
    assert excinfo.value.code == 1


def test_purify_writes_batch_and_mask_dumps(tmp_path):
    sim_dir = simulate(tmp_path, "sim")
    profile_dir = fit(tmp_path, sim_dir)
    out_file = tmp_path / "purified.npy"
    dumps = tmp_path / "masks"
    code = run(
        [
            "purify",
            "--input", str(sim_dir / "poisoned.npy"),
            "--clean-ref", str(sim_dir / "clean.npy"),
            "--profile", str(profile_dir),
            "--out", str(out_file),
            "--dump-masks", str(dumps),
        ]
    )
    assert code == 0
    purified = read_array(out_file)
    assert isinstance(purified, LatentBatch) and purified.count == 8
    for name in (
        "similarity",
        "primary_raw",
        "secondary_raw",
        "primary_smooth",
        "secondary_smooth",
    ):
        stack = read_array(dumps / f"{name}.npy")
        assert stack.data.shape == (8, 1, 16, 16)
    smooth = read_array(dumps / "primary_smooth.npy").data
    assert (smooth > 0).all() and (smooth < 1).all()


def test_purify_alpha_zero_is_blurred_floor_scaling(tmp_path):
    sim_dir = simulate(tmp_path, "sim")
    profile_dir = fit(tmp_path, sim_dir)
    config_path = tmp_path / "alpha0.json"
    config_path.write_text('{"alpha": 0.0}')
    out_file = tmp_path / "purified.npy"
    code = run(
        [
            "purify",
            "--input", str(sim_dir / "clean.npy"),
            "--clean-ref", str(sim_dir / "clean.npy"),
            "--profile", str(profile_dir),
            "--config", str(config_path),
            "--out", str(out_file),
        ]
    )
    assert code == 0
    # With alpha 0 nothing is blended in; each element is scaled by the
    # squared sigmoid floor wherever the masks stay empty, then blurred.
    clean = read_array(sim_dir / "clean.npy")
    purified = read_array(out_file)
    profile = load_profile(profile_dir)
    config = SauConfig(alpha=0.0)
    floor = 1.0 / (1.0 + math.exp(0.5 * config.beta))
    from saukit.masks import build_masks, similarity_map
    from saukit.purify import blend_latents

    for i in range(clean.count):
        sim = similarity_map(clean[i], profile)
        masks = build_masks(sim, config)
        expected = finalize(
            blend_latents(clean[i], clean[i], masks, 0.0), config.sigma_final
        )
        assert np.array_equal(purified.data[i], expected.data)
        if not masks.primary_raw.values.any() and not masks.secondary_raw.values.any():
            scaled = (clean.data[i].astype(np.float64) * (1.0 - floor) ** 2).astype(np.float32)
            alt = finalize(LatentTensor(scaled), config.sigma_final)
            assert np.allclose(purified.data[i], alt.data, rtol=0, atol=1e-6)


def test_purify_env_config_fallback_and_override(tmp_path, monkeypatch):
    sim_dir = simulate(tmp_path, "sim")
    profile_dir = fit(tmp_path, sim_dir)
    env_cfg = tmp_path / "env.json"
    env_cfg.write_text('{"alpha": 0.0}')
    cli_cfg = tmp_path / "cli.json"
    cli_cfg.write_text('{"alpha": 0.0}')

    monkeypatch.setenv(cli.CONFIG_ENV_VAR, str(env_cfg))
    out_env = tmp_path / "out_env.npy"
    assert run(
        [
            "purify",
            "--input", str(sim_dir / "poisoned.npy"),
            "--clean-ref", str(sim_dir / "clean.npy"),
            "--profile", str(profile_dir),
            "--out", str(out_env),
        ]
    ) == 0

    out_cli = tmp_path / "out_cli.npy"
    assert run(
        [
            "purify",
            "--input", str(sim_dir / "poisoned.npy"),
            "--clean-ref", str(sim_dir / "clean.npy"),
            "--profile", str(profile_dir),
            "--config", str(cli_cfg),
            "--out", str(out_cli),
        ]
    ) == 0
    assert out_env.read_bytes() == out_cli.read_bytes()

    monkeypatch.delenv(cli.CONFIG_ENV_VAR)
    out_default = tmp_path / "out_default.npy"
    assert run(
        [
            "purify",
            "--input", str(sim_dir / "poisoned.npy"),
            "--clean-ref", str(sim_dir / "clean.npy"),
            "--profile", str(profile_dir),
            "--out", str(out_default),
        ]
    ) == 0
    assert out_default.read_bytes() != out_env.read_bytes()


def _eval_args(sim_dir, profile_dir, purified, report, extra=()):
    return [
        "eval",
        "--purified", str(purified),
        "--reference", str(sim_dir / "clean.npy"),
        "--profile", str(profile_dir),
        "--attack-manifest", str(sim_dir / "attack.json"),
        "--report", str(report),
        *extra,
    ]


def test_eval_reference_as_purified_is_perfect(tmp_path):
    sim_dir = simulate(tmp_path, "sim")
    profile_dir = fit(tmp_path, sim_dir)
    report_path = tmp_path / "report.json"
    code = run(
        _eval_args(sim_dir, profile_dir, sim_dir / "clean.npy", report_path,
                   extra=["--expect-accuracy", "1.0"])
    )
    assert code == 0
    report = read_report(report_path)
    assert report["removal_accuracy"] == 1.0
    assert all(item["psnr_db"] == 99.0 for item in report["items"])
    assert (tmp_path / "report.csv").exists()
    for suffix in ("_scores.png", "_psnr.png", "_activation.png"):
        assert (tmp_path / f"report{suffix}").read_bytes()[:4] == b"\x89PNG"


def test_eval_unpurified_poisoned_scores_zero(tmp_path):
    sim_dir = simulate(tmp_path, "sim", count=16)
    profile_dir = fit(tmp_path, sim_dir)
    report_path = tmp_path / "poisoned_report.json"
    code = run(
        _eval_args(sim_dir, profile_dir, sim_dir / "poisoned.npy", report_path,
                   extra=["--no-figures"])
    )
    assert code == 0
    assert read_report(report_path)["removal_accuracy"] == 0.0


def test_eval_expect_accuracy_failure_exits_3(tmp_path):
    sim_dir = simulate(tmp_path, "sim", count=16)
    profile_dir = fit(tmp_path, sim_dir)
    report_path = tmp_path / "report.json"
    code = run(
        _eval_args(sim_dir, profile_dir, sim_dir / "poisoned.npy", report_path,
                   extra=["--no-figures", "--expect-accuracy", "1.0"])
    )
    assert code == 3


def test_eval_misaligned_counts_exit_1(tmp_path):
    sim_dir = simulate(tmp_path, "sim", count=8)
    other = simulate(tmp_path, "other", count=12)
    profile_dir = fit(tmp_path, sim_dir)
    code = run(
        [
            "eval",
            "--purified", str(other / "poisoned.npy"),
            "--reference", str(sim_dir / "clean.npy"),
            "--profile", str(profile_dir),
            "--attack-manifest", str(sim_dir / "attack.json"),
            "--report", str(tmp_path / "r.json"),
        ]
    )
    assert code == 1


def test_eval_reruns_are_byte_identical(tmp_path):
    sim_dir = simulate(tmp_path, "sim", count=8)
    profile_dir = fit(tmp_path, sim_dir)
    purified = tmp_path / "purified.npy"
    assert run(
        [
            "purify",
            "--input", str(sim_dir / "poisoned.npy"),
            "--clean-ref", str(sim_dir / "clean.npy"),
            "--profile", str(profile_dir),
            "--out", str(purified),
        ]
    ) == 0

    first = tmp_path / "run1" / "report.json"
    second = tmp_path / "run2" / "report.json"
    for path in (first, second):
        assert run(_eval_args(sim_dir, profile_dir, purified, path)) == 0
    assert first.read_bytes() == second.read_bytes()
    assert first.with_suffix(".csv").read_bytes() == second.with_suffix(".csv").read_bytes()
    for suffix in ("_scores.png", "_psnr.png", "_activation.png"):
        a = first.parent / f"report{suffix}"
        b = second.parent / f"report{suffix}"
        assert a.read_bytes() == b.read_bytes()


def test_single_tensor_input_is_accepted(tmp_path):
    sim_dir = simulate(tmp_path, "sim")
    profile_dir = fit(tmp_path, sim_dir)
    batch = read_array(sim_dir / "poisoned.npy")
    single = tmp_path / "single.npy"
    write_array(single, batch[0])
    ref = tmp_path / "ref.npy"
    write_array(ref, read_array(sim_dir / "clean.npy")[0])
    out = tmp_path / "single_purified.npy"
    code = run(
        [
            "purify",
            "--input", str(single),
            "--clean-ref", str(ref),
            "--profile", str(profile_dir),
            "--out", str(out),
        ]
    )
    assert code == 0
    assert read_array(out).data.shape == (1, 4, 16, 16)


def test_module_invocation_smoke():
    result = subprocess.run(
        [sys.executable, "-m", "saukit", "--help"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert result.returncode == 0
    for sub in ("simulate", "fit", "purify", "eval"):
        assert sub in result.stdout
