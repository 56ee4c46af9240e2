"""Command-line front end: simulate -> fit -> purify -> eval.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error, 3 expected
accuracy not met in ``eval``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import interchange, report as report_mod
from .core import LatentBatch, LatentTensor
from .masks import SauConfig
from .metrics import (
    EvalItem,
    EvalReport,
    calibrate_detector,
    detect_trigger,
    psnr,
    removal_accuracy,
    trigger_score,
)
from .profile import estimate_trigger
from .purify import purify
from .simulate import AttackSpec, PromptSpec, SyntheticGenerator, generate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_THRESHOLD = 3

CONFIG_ENV_VAR = "SAU_DEFAULT_CONFIG"

ATTACK_MANIFEST = "attack.json"
CLEAN_FILE = "clean.npy"
POISONED_FILE = "poisoned.npy"


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the CLI contract wants 1.
    def error(self, message):  # noqa: D102
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_shape(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"shape must be C,H,W, got {text!r}")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"shape must be integers, got {text!r}")
    if min(dims) < 1:
        raise argparse.ArgumentTypeError("shape dimensions must be positive")
    return dims  # type: ignore[return-value]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="saukit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate paired clean/poisoned latent batches")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--count", type=int, required=True, help="number of prompts")
    p_sim.add_argument("--attack", choices=("pixel", "style"), required=True)
    p_sim.add_argument("--seed", type=int, required=True, help="base seed; prompts use seed..seed+count-1")
    p_sim.add_argument("--shape", type=_parse_shape, default=None, metavar="C,H,W")
    p_sim.add_argument("--amplitude", type=float, default=None)
    p_sim.add_argument("--smoothness", type=float, default=None)
    p_sim.add_argument("--noise-std", type=float, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="estimate a trigger profile from paired batches")
    p_fit.add_argument("--clean", required=True)
    p_fit.add_argument("--poisoned", required=True)
    p_fit.add_argument("--out", required=True, help="profile bundle directory")
    p_fit.set_defaults(func=cmd_fit)

    p_pur = sub.add_parser("purify", help="purify a batch against a trigger profile")
    p_pur.add_argument("--input", required=True, help="suspect batch file")
    p_pur.add_argument("--clean-ref", required=True, help="clean reference batch file")
    p_pur.add_argument("--profile", required=True, help="profile bundle directory")
    p_pur.add_argument("--config", default=None, help="JSON config ($%s as fallback)" % CONFIG_ENV_VAR)
    p_pur.add_argument("--out", required=True, help="purified batch file")
    p_pur.add_argument("--dump-masks", default=None, metavar="DIR")
    p_pur.set_defaults(func=cmd_purify)

    p_eval = sub.add_parser("eval", help="score a batch and write the evaluation report")
    p_eval.add_argument("--purified", required=True)
    p_eval.add_argument("--reference", required=True, help="clean calibration/reference batch")
    p_eval.add_argument("--profile", required=True)
    p_eval.add_argument("--attack-manifest", required=True)
    p_eval.add_argument("--report", required=True, help="report JSON path")
    p_eval.add_argument("--expect-accuracy", type=float, default=None)
    p_eval.add_argument("--k", type=float, default=3.0, help="detector std multiplier")
    p_eval.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p_eval.set_defaults(func=cmd_eval)

    return parser


def _read_batch(path: str) -> LatentBatch:
    data = interchange.read_array(path)
    if isinstance(data, LatentTensor):
        return LatentBatch(data.data[None, ...])
    return data


def cmd_simulate(args) -> int:
    shape = args.shape
    attack_kwargs = {}
    if args.amplitude is not None:
        attack_kwargs["amplitude"] = args.amplitude
    attack = AttackSpec(kind=args.attack, **attack_kwargs)
    gen_kwargs = {"attack": attack}
    if shape is not None:
        gen_kwargs["shape"] = shape
    if args.smoothness is not None:
        gen_kwargs["smoothness"] = args.smoothness
    if args.noise_std is not None:
        gen_kwargs["noise_std"] = args.noise_std
    gen = SyntheticGenerator(**gen_kwargs)
    if args.count < 1:
        raise ValueError("count must be positive")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = [args.seed + i for i in range(args.count)]
    clean = np.stack(
        [generate(gen, PromptSpec(s, trigger_present=False)).data for s in seeds]
    )
    poisoned = np.stack(
        [generate(gen, PromptSpec(s, trigger_present=True)).data for s in seeds]
    )
    interchange.write_array(out_dir / CLEAN_FILE, LatentBatch(clean))
    interchange.write_array(out_dir / POISONED_FILE, LatentBatch(poisoned))
    manifest = {
        "kind": gen.attack.kind,
        "patch_origin": list(gen.attack.patch_origin),
        "patch_size": list(gen.attack.patch_size),
        "amplitude": gen.attack.amplitude,
        "shape": list(gen.shape),
        "smoothness": gen.smoothness,
        "noise_std": gen.noise_std,
        "seed_base": args.seed,
        "count": args.count,
        "metadata": {"tool": "saukit", "version": interchange.TOOL_VERSION},
    }
    with open(out_dir / ATTACK_MANIFEST, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"simulate: wrote {args.count} {gen.attack.kind} pairs "
        f"(shape {gen.shape}) to {out_dir}"
    )
    return EXIT_OK


def cmd_fit(args) -> int:
    clean = _read_batch(args.clean)
    poisoned = _read_batch(args.poisoned)
    profile = estimate_trigger(clean, poisoned)
    interchange.save_profile(args.out, profile)
    if profile.is_zero:
        print("warning: fitted trigger latent is identically zero "
              "(clean and poisoned batches agree)")
    peak = float(np.abs(profile.activation_map.values).max())
    print(
        f"fit: profile over {profile.sample_count} pairs, shape {profile.shape}, "
        f"peak activation {peak:.4f} -> {args.out}"
    )
    return EXIT_OK


def _resolve_config(path_arg: str | None) -> SauConfig:
    path = path_arg or os.environ.get(CONFIG_ENV_VAR)
    if path:
        return interchange.read_config(path)
    return SauConfig()


def cmd_purify(args) -> int:
    suspect = _read_batch(args.input)
    reference = _read_batch(args.clean_ref)
    if suspect.count != reference.count:
        raise ValueError(
            f"batch count mismatch: input has {suspect.count}, clean-ref has {reference.count}"
        )
    profile = interchange.load_profile(args.profile)
    config = _resolve_config(args.config)

    purified = np.empty_like(suspect.data)
    mask_stacks: dict[str, list[np.ndarray]] = {
        "similarity": [],
        "primary_raw": [],
        "secondary_raw": [],
        "primary_smooth": [],
        "secondary_smooth": [],
    }
    for i in range(suspect.count):
        result = purify(
            suspect[i], reference[i], profile, config, provenance={"item": i}
        )
        purified[i] = result.purified.data
        if args.dump_masks:
            m = result.masks
            mask_stacks["similarity"].append(m.similarity.values)
            mask_stacks["primary_raw"].append(m.primary_raw.values.astype(np.float32))
            mask_stacks["secondary_raw"].append(m.secondary_raw.values.astype(np.float32))
            mask_stacks["primary_smooth"].append(m.primary_smooth.values)
            mask_stacks["secondary_smooth"].append(m.secondary_smooth.values)

    interchange.write_array(args.out, LatentBatch(purified))
    if args.dump_masks:
        dump_dir = Path(args.dump_masks)
        dump_dir.mkdir(parents=True, exist_ok=True)
        for name, planes in mask_stacks.items():
            stacked = np.stack(planes)[:, None, :, :]
            interchange.write_array(dump_dir / f"{name}.npy", stacked)
    print(f"purify: {suspect.count} items -> {args.out} (alpha={config.alpha})")
    return EXIT_OK


def cmd_eval(args) -> int:
    purified = _read_batch(args.purified)
    reference = _read_batch(args.reference)
    if purified.count != reference.count:
        raise ValueError(
            f"batch count mismatch: purified has {purified.count}, "
            f"reference has {reference.count}"
        )
    profile = interchange.load_profile(args.profile)
    with open(args.attack_manifest, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("kind") == "pixel":
        r0, c0 = manifest["patch_origin"]
        ph, pw = manifest["patch_size"]
        region = (int(r0), int(c0), int(ph), int(pw))
    else:
        region = None  # global attacks score the full frame

    calibration_scores = [
        trigger_score(reference[i], profile, region) for i in range(reference.count)
    ]
    cal = calibrate_detector(calibration_scores, k=args.k, region=region)

    peak = float(np.abs(reference.data).max())
    if peak <= 0:
        peak = 1.0
    items = []
    for i in range(purified.count):
        detected, score = detect_trigger(purified[i], profile, cal)
        quality = psnr(purified[i], reference[i], peak)
        items.append(
            EvalItem(
                id=f"item-{i:04d}",
                detected_trigger=detected,
                score=score,
                psnr_vs_reference=quality,
            )
        )
    accuracy = removal_accuracy([it.detected_trigger for it in items])
    eval_report = EvalReport(
        items=items,
        removal_accuracy=accuracy,
        config={
            "detector": cal.to_dict(),
            "psnr_peak": peak,
            "attack_kind": manifest.get("kind"),
            "item_count": purified.count,
        },
    )
    report_path = Path(args.report)
    if report_path.parent != Path(""):
        report_path.parent.mkdir(parents=True, exist_ok=True)
    interchange.write_report(report_path, eval_report)
    report_mod.write_items_csv(report_path.with_suffix(".csv"), items)
    if not args.no_figures:
        stem = report_path.with_suffix("")
        report_mod.render_score_figure(
            f"{stem}_scores.png",
            calibration_scores,
            [it.score for it in items],
            cal.threshold,
        )
        report_mod.render_psnr_figure(
            f"{stem}_psnr.png", [it.psnr_vs_reference for it in items]
        )
        report_mod.render_activation_figure(f"{stem}_activation.png", profile.activation_map)

    capped = [min(it.psnr_vs_reference, 99.0) for it in items]
    print(
        f"eval: removal_accuracy={accuracy:.4f} over {len(items)} items, "
        f"mean PSNR {sum(capped) / len(capped):.2f} dB -> {report_path}"
    )
    if args.expect_accuracy is not None and accuracy < args.expect_accuracy:
        print(
            f"eval: accuracy {accuracy:.4f} below expected {args.expect_accuracy:.4f}",
            file=sys.stderr,
        )
        return EXIT_THRESHOLD
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"saukit: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_IO
    except IsADirectoryError as exc:
        print(f"saukit: expected a file: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"saukit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"saukit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
