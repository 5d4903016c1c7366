"""``uerw`` command-line interface.

Subcommands: ``score``, ``compare``, ``fit``, ``synth`` and ``report``. Every
command writes into ``--out-dir`` and finishes with a ``manifest.json`` that
lists inputs, outputs (with sha256) and the hash of the resolved config.

Exit codes: 0 success, 2 usage error, 3 invalid input data, 4 numerical
failure during fitting.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .agreement import (
    AXES,
    OctantSequence,
    bland_altman_reports,
    bland_altman_rows,
    compare_sequences,
    octant_sequence,
    write_tidy_csv,
)
from .camera import load_cameras, save_cameras, study_pose
from .exceptions import NumericalError, ValidationError
from .plotting import grouped_bar_svg, save_svg
from .torso_frame import TorsoFrameTransformer, resolve_landmark_map
from .trajectory_io import KeypointTrajectory, align_nearest, load_trajectory, save_trajectory
from .workspace import ANALYZED_OCTANTS, Octant, WorkspaceReport, WorkspaceScorer

logger = logging.getLogger("uerw")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
BUNDLE_FILE = "bundle.json"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# shared plumbing


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    return data


class _Run:
    """Collects outputs and writes the manifest for one command."""

    def __init__(self, command: str, out_dir: str, config: dict, seed: Optional[int], inputs: Sequence[str]):
        self.command = command
        self.out_dir = out_dir
        self.config = config
        self.seed = seed
        self.inputs = [p for p in inputs if p]
        self.outputs: List[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        self.outputs.append(name)
        return os.path.join(self.out_dir, name)

    def write_text(self, name: str, text: str) -> str:
        p = self.path(name)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        return p

    def write_json(self, name: str, data) -> str:
        return self.write_text(name, json.dumps(data, indent=2, sort_keys=True) + "\n")

    def finish(self) -> dict:
        manifest = {
            "command": self.command,
            "tool_version": __version__,
            "seed": self.seed,
            "config": self.config,
            "config_sha256": config_hash(self.config),
            "inputs": [{"path": p, "sha256": _sha256_file(p)} for p in self.inputs if os.path.isfile(p)],
            "outputs": [
                {"path": name, "sha256": _sha256_file(os.path.join(self.out_dir, name))} for name in self.outputs
            ],
        }
        with open(os.path.join(self.out_dir, "manifest.json"), "w", encoding="utf-8", newline="") as fh:
            fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return manifest


def _score(traj: KeypointTrajectory, landmarks, options: dict, seed: int):
    tf = TorsoFrameTransformer(landmarks)
    wrist = tf.fit(traj).transform(traj)
    scorer = WorkspaceScorer(
        n_targets=int(options.get("n_targets", 800)),
        capture_radius=float(options.get("capture_radius", 0.05)),
        radius=options.get("radius"),
        seed=seed,
    ).fit(wrist)
    return wrist, scorer


def _scores_svg(reports: Dict[str, WorkspaceReport], title: str) -> str:
    cats = [o.label for o in ANALYZED_OCTANTS]
    series = {name: [rep.percent(o) for o in ANALYZED_OCTANTS] for name, rep in reports.items()}
    return grouped_bar_svg(cats, series, title=title, ylabel="% reachable workspace", ymax=100.0)


def _poses_csv(skeleton, timestamps, poses) -> str:
    rows = ["time," + ",".join(skeleton.dof_names)]
    for t, th in zip(timestamps, poses):
        rows.append(",".join([repr(float(t))] + [repr(float(x)) for x in th]))
    return "\n".join(rows) + "\n"


def _wrist_csv(timestamps, wrist) -> str:
    rows = ["time,ml,ap,v"]
    for t, w in zip(timestamps, wrist):
        rows.append(",".join([repr(float(t))] + ["" if math.isnan(x) else repr(float(x)) for x in w]))
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_score(args) -> int:
    cfg = _load_config(args.config)
    landmarks = args.landmarks or cfg.get("landmarks", "keypoint")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    system = args.system or cfg.get("system", "test")
    resolved = {
        "landmarks": landmarks if isinstance(landmarks, (str, dict)) else str(landmarks),
        "n_targets": int(cfg.get("n_targets", 800)),
        "capture_radius": float(cfg.get("capture_radius", 0.05)),
        "radius": cfg.get("radius"),
        "system": system,
    }
    run = _Run("score", args.out_dir, resolved, seed, [args.trajectory, args.config])
    traj = load_trajectory(args.trajectory)
    wrist, scorer = _score(traj, landmarks, resolved, seed)
    report = scorer.report_
    write_tidy_csv(report.rows(system), run.path("scores.csv"), ["octant", "system", "available", "reached", "percent"])
    run.write_text("wrist_local.csv", _wrist_csv(traj.timestamps, wrist))
    save_svg(_scores_svg({system: report}, "Reachable workspace per octant"), run.path("scores.svg"))
    run.write_json("summary.json", {"peak_reach_m": report.peak_reach, "percent": _percent_dict(report)})
    run.finish()
    for o in ANALYZED_OCTANTS:
        p = report.percent(o)
        print(f"{o.label:<20} {'n/a' if p is None else f'{p:6.2f}%'}")
    return EXIT_OK


def _percent_dict(report: WorkspaceReport) -> dict:
    return {o.label: (None if report.percent(o) is None else round(report.percent(o), 6)) for o in ANALYZED_OCTANTS}


def cmd_compare(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    ref_lm = args.reference_landmarks or cfg.get("reference_landmarks", "keypoint")
    test_lm = args.test_landmarks or cfg.get("test_landmarks", "keypoint")
    pairs = [(args.reference, args.test)] + [tuple(p) for p in (args.pair or [])]
    resolved = {
        "reference_landmarks": ref_lm,
        "test_landmarks": test_lm,
        "n_targets": int(cfg.get("n_targets", 800)),
        "capture_radius": float(cfg.get("capture_radius", 0.05)),
        "reference_system": args.reference_name or cfg.get("reference_system", "reference"),
        "test_system": args.test_name or cfg.get("test_system", "test"),
    }
    inputs = [p for pair in pairs for p in pair] + [args.config]
    run = _Run("compare", args.out_dir, resolved, seed, inputs)
    ref_codes, test_codes, ref_reports, test_reports = [], [], [], []
    score_rows = []
    for i, (ref_path, test_path) in enumerate(pairs):
        ref = load_trajectory(ref_path)
        test = load_trajectory(test_path)
        ri, ti = align_nearest(ref, test)
        w_ref, s_ref = _score(ref, ref_lm, resolved, seed)
        w_test, s_test = _score(test, test_lm, resolved, seed)
        ref_codes.append(octant_sequence(w_ref[ri]).codes)
        test_codes.append(octant_sequence(w_test[ti]).codes)
        ref_reports.append(s_ref.report_)
        test_reports.append(s_test.report_)
        for row in s_ref.report_.rows(resolved["reference_system"]) + s_test.report_.rows(resolved["test_system"]):
            score_rows.append({"trial": str(i), **row})
    ref_seq = OctantSequence(np.arange(sum(c.size for c in ref_codes)), np.concatenate(ref_codes))
    test_seq = OctantSequence(ref_seq.timestamps, np.concatenate(test_codes))
    agreement = compare_sequences(ref_seq, test_seq)
    write_tidy_csv(agreement.rows(ANALYZED_OCTANTS), run.path("agreement.csv"), ["octant", "metric", "value"])
    write_tidy_csv(
        score_rows, run.path("scores.csv"), ["trial", "octant", "system", "available", "reached", "percent"]
    )
    ba = bland_altman_reports(test_reports, ref_reports)
    write_tidy_csv(
        bland_altman_rows(ba, resolved["test_system"]),
        run.path("bland_altman.csv"),
        ["octant", "system", "metric", "value"],
    )
    cats = [o.label for o in ANALYZED_OCTANTS]
    series = {"agreement": [agreement.agreement(o) for o in ANALYZED_OCTANTS]}
    series.update({f"{a} error": [agreement.directional(o, a) for o in ANALYZED_OCTANTS] for a in AXES})
    save_svg(grouped_bar_svg(cats, series, title="Octant agreement", ylabel="% of frames", ymax=100.0),
             run.path("agreement.svg"))
    save_svg(
        _scores_svg(
            {resolved["reference_system"]: ref_reports[0], resolved["test_system"]: test_reports[0]},
            "Reachable workspace per octant",
        ),
        run.path("scores.svg"),
    )
    lines = [r.format_row(g, resolved["test_system"]) for g, r in ba.items()]
    run.write_text("bland_altman.txt", "\n".join(lines) + ("\n" if lines else ""))
    run.finish()
    for o in ANALYZED_OCTANTS:
        a = agreement.agreement(o)
        print(f"{o.label:<20} agreement {'n/a' if a is None else f'{a:6.2f}%'}")
    for line in lines:
        print(line)
    return EXIT_OK


def _read_bundle(path: str) -> dict:
    bundle_path = os.path.join(path, BUNDLE_FILE) if os.path.isdir(path) else path
    try:
        with open(bundle_path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"no trial bundle at {path}") from None
    base = os.path.dirname(os.path.abspath(bundle_path))
    resolve = lambda p: None if p is None else os.path.join(base, p)
    return {
        "path": bundle_path,
        "observations": resolve(data.get("observations")),
        "pixels": {cam: resolve(p) for cam, p in sorted(data.get("pixels", {}).items())},
        "cameras": resolve(data.get("cameras")),
        "truth": resolve(data.get("truth")),
        "poses": resolve(data.get("poses")),
    }


def cmd_fit(args) -> int:
    from .fitter import FitConfig, Trial, fit
    from .kinematics import load_skeleton

    if not args.bundles:
        raise UsageError("fit needs at least one trial bundle")
    cfg = _load_config(args.config)
    fit_cfg = dict(cfg.get("fit", {}))
    if args.seed is not None:
        fit_cfg["seed"] = args.seed
    if args.iterations is not None:
        fit_cfg["n_iter"] = args.iterations
    config = FitConfig.from_dict(fit_cfg)
    skeleton_path = args.skeleton or cfg.get("skeleton")
    skeleton = load_skeleton(skeleton_path)
    bundles = [_read_bundle(b) for b in args.bundles]
    cameras = {}
    cam_files = [args.cameras] if args.cameras else sorted({b["cameras"] for b in bundles if b["cameras"]})
    for path in cam_files:
        for name, cam in load_cameras(path).items():
            cameras.setdefault(name, cam)
    trials = []
    for b in bundles:
        obs = load_trajectory(b["observations"]) if b["observations"] else None
        pixels = {}
        if not args.no_pixels:
            pixels = {cam: load_trajectory(p, kind="2d") for cam, p in b["pixels"].items()}
        trials.append(Trial(obs, pixels))
    resolved = {"fit": config.to_dict(), "skeleton": skeleton.name, "cameras": sorted(cameras), "use_pixels": not args.no_pixels}
    inputs = [b["path"] for b in bundles] + [args.config, skeleton_path] + cam_files
    run = _Run("fit", args.out_dir, resolved, config.seed, inputs)
    result = fit(trials, skeleton, cameras, config)

    trace_rows = [{"iteration": str(i), "loss": repr(float(v))} for i, v in enumerate(result.loss_trace)]
    write_tidy_csv(trace_rows, run.path("loss_trace.csv"), ["iteration", "loss"])
    final = float(result.loss_trace[-1]) if result.loss_trace.size else None
    summary = {"final_loss": final, "iterations": int(result.loss_trace.size), "trials": []}
    for i, b in enumerate(bundles):
        name = "reconstructed.csv" if len(bundles) == 1 else f"reconstructed_{i}.csv"
        traj = result.trajectory(i)
        save_trajectory(traj, run.path(name))
        run.write_text(name.replace("reconstructed", "poses"), _poses_csv(skeleton, result.timestamps[i], result.poses[i]))
        entry = {"bundle": os.path.relpath(b["path"]), "reconstruction": name}
        if b["truth"]:
            truth = load_trajectory(b["truth"]).select(list(traj.names))
            if truth.n_frames == traj.n_frames:
                err = np.linalg.norm(traj.positions - truth.positions, axis=-1)
                entry["keypoint_rmse_m"] = float(np.sqrt(np.nanmean(err**2)))
                entry["keypoint_mean_error_m"] = float(np.nanmean(err))
        summary["trials"].append(entry)
    run.write_json(
        "body.json",
        {"scale_groups": list(skeleton.scale_groups), "scales": result.body.scales.tolist(),
         "keypoints": list(skeleton.keypoint_names), "offsets": result.body.offsets.tolist()},
    )
    run.write_json("summary.json", summary)
    run.finish()
    if final is not None:
        print(f"final loss {final:.6g}")
    for entry in summary["trials"]:
        if "keypoint_rmse_m" in entry:
            print(f"{entry['reconstruction']}: keypoint RMSE {100 * entry['keypoint_rmse_m']:.3f} cm")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .kinematics import load_skeleton
    from .synthetic import TrialScript, default_script, generate_trial

    cfg = _load_config(args.config)
    if args.script:
        script_data = _load_config(args.script)
    elif "script" in cfg:
        script_data = dict(cfg["script"])
    else:
        script_data = default_script(args.kind or cfg.get("kind", "uerw"), mode=args.mode or cfg.get("mode", "arm")).to_dict()
    if args.seed is not None:
        script_data["seed"] = args.seed
    script = TrialScript.from_dict(script_data)
    skeleton_path = args.skeleton or cfg.get("skeleton")
    skeleton = load_skeleton(skeleton_path)
    if args.cameras:
        cameras = load_cameras(args.cameras)
    else:
        origin = cfg.get("subject_origin", [0.0, 0.0, 1.4])
        cameras = {k: study_pose(k, origin) for k in cfg.get("study_cameras", ["frontal", "offset"])}
    resolved = {"script": script.to_dict(), "skeleton": skeleton.name, "cameras": [c.to_dict() for c in cameras.values()]}
    run = _Run("synth", args.out_dir, resolved, script.seed, [args.config, args.script, skeleton_path, args.cameras])
    trial = generate_trial(skeleton, script, cameras)

    save_trajectory(trial.clean, run.path("truth.csv"))
    save_trajectory(trial.noisy, run.path("observations.csv"))
    pixel_files = {}
    for cam, px in sorted(trial.noisy_pixels.items()):
        pixel_files[cam] = f"pixels_{cam}.csv"
        save_trajectory(px, run.path(pixel_files[cam]))
    save_cameras(cameras, run.path("cameras.json"))
    if trial.poses is not None:
        run.write_text("poses.csv", _poses_csv(skeleton, trial.timestamps, trial.poses))
    run.write_json("script.json", script.to_dict())
    run.write_json(
        BUNDLE_FILE,
        {"observations": "observations.csv", "pixels": pixel_files, "cameras": "cameras.json",
         "truth": "truth.csv", "poses": None if trial.poses is None else "poses.csv"},
    )
    run.finish()
    print(f"wrote {trial.clean.n_frames} frames to {args.out_dir}")
    return EXIT_OK


def _read_scores(path: str) -> Dict[str, Dict[str, Dict[Octant, Optional[float]]]]:
    """scores.csv -> {system: {trial: {octant: percent}}}."""
    out: Dict[str, Dict[str, Dict[Octant, Optional[float]]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"octant", "system", "percent"}
        if not reader.fieldnames or not need <= set(reader.fieldnames):
            raise ValidationError(f"{path}: expected columns {sorted(need)}")
        for n, row in enumerate(reader, start=1):
            try:
                o = Octant.from_label(row["octant"])
                p = None if row["percent"] in ("", "n/a") else float(row["percent"])
            except ValueError as exc:
                raise ValidationError(f"{path}: row {n}: {exc}") from None
            trial = f"{path}#{row.get('trial', '0')}"
            out.setdefault(row["system"], {}).setdefault(trial, {})[o] = p
    return out


class _Pct:
    """Minimal stand-in exposing ``percent(o)`` for Bland-Altman pairing."""

    def __init__(self, d):
        self._d = d

    def percent(self, o):
        return self._d.get(Octant(o))


def cmd_report(args) -> int:
    cfg = _load_config(args.config)
    reference = args.reference or cfg.get("reference_system")
    run = _Run("report", args.out_dir, {"reference_system": reference}, args.seed, list(args.scores) + [args.config])
    table: Dict[str, Dict[str, Dict[Octant, Optional[float]]]] = {}
    for path in args.scores:
        for system, trials in _read_scores(path).items():
            table.setdefault(system, {}).update(trials)
    if not table:
        raise ValidationError("no score rows found")
    systems = sorted(table)
    if reference is not None and reference not in table:
        raise ValidationError(f"reference system {reference!r} not present; have {systems}")
    rows = []
    means: Dict[str, List[Optional[float]]] = {}
    for system in systems:
        means[system] = []
        for o in ANALYZED_OCTANTS:
            vals = [t[o] for t in table[system].values() if t.get(o) is not None]
            m = float(np.mean(vals)) if vals else None
            sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else None
            means[system].append(m)
            for metric, v in (("n", str(len(vals))), ("mean", _f6(m)), ("sd", _f6(sd))):
                rows.append({"octant": o.label, "system": system, "metric": metric, "value": v})
    write_tidy_csv(rows, run.path("summary.csv"), ["octant", "system", "metric", "value"])
    cats = [o.label for o in ANALYZED_OCTANTS]
    save_svg(grouped_bar_svg(cats, means, title="Mean reachable workspace", ylabel="%", ymax=100.0),
             run.path("summary.svg"))
    if reference is not None:
        ba_rows, lines = [], []
        ref_trials = table[reference]
        for system in systems:
            if system == reference:
                continue
            shared = sorted(set(ref_trials) & set(table[system]))
            res = bland_altman_reports([_Pct(table[system][k]) for k in shared], [_Pct(ref_trials[k]) for k in shared])
            ba_rows += bland_altman_rows(res, system)
            lines += [r.format_row(g, system) for g, r in res.items()]
        write_tidy_csv(ba_rows, run.path("bland_altman.csv"), ["octant", "system", "metric", "value"])
        run.write_text("bland_altman.txt", "\n".join(lines) + ("\n" if lines else ""))
        for line in lines:
            print(line)
    run.finish()
    return EXIT_OK


def _f6(x: Optional[float]) -> str:
    return "n/a" if x is None else f"{x:.6f}"


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uerw", description="Upper-extremity reachable workspace toolkit.")
    p.add_argument("--version", action="version", version=f"uerw {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int, help="random seed (overrides config)")
        sp.add_argument("--out-dir", default=".", help="output directory (default: current)")

    sp = sub.add_parser("score", help="score one trajectory per octant")
    sp.add_argument("trajectory")
    sp.add_argument("--landmarks", help="landmark preset (keypoint, marker, markerless) or JSON map")
    sp.add_argument("--system", help="system name written to the score table")
    common(sp)
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("compare", help="agreement and Bland-Altman between two systems")
    sp.add_argument("reference")
    sp.add_argument("test")
    sp.add_argument("--pair", nargs=2, action="append", metavar=("REF", "TEST"), help="additional trial pair")
    sp.add_argument("--reference-landmarks")
    sp.add_argument("--test-landmarks")
    sp.add_argument("--reference-name")
    sp.add_argument("--test-name")
    common(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("fit", help="fit implicit trajectories to trial bundles")
    sp.add_argument("bundles", nargs="*", help="bundle directories or bundle.json files")
    sp.add_argument("--skeleton", help="skeleton JSON (default: bundled torso + right arm)")
    sp.add_argument("--cameras", help="camera JSON (default: each bundle's cameras)")
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--no-pixels", action="store_true", help="ignore 2D streams")
    common(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("synth", help="generate a synthetic trial bundle")
    sp.add_argument("--script", help="trial script JSON")
    sp.add_argument("--kind", choices=["uerw", "anterior", "posterior"])
    sp.add_argument("--mode", choices=["arm", "shell"])
    sp.add_argument("--skeleton")
    sp.add_argument("--cameras")
    common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("report", help="summarize score tables across trials and systems")
    sp.add_argument("scores", nargs="+", help="scores.csv files")
    sp.add_argument("--reference", help="reference system for Bland-Altman")
    common(sp)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"uerw: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"uerw: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"uerw: invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
