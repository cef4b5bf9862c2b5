"""Command-line pipeline: simulate -> validate -> featurize -> run -> report.

Every command reads one TOML config (``--config``); ``--seed`` overrides the
global seed, from which all per-stage seeds are derived (see
``experiments.derive_seed``).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import experiments as ex
from .features import KINDS, SessionFeaturizer, WindowSpec, read_archive, stack_inputs, write_archive
from .gridworld.layout import LAYOUT_NAMES
from .gridworld.planner import POLICY_KINDS
from .labels import MASKED, detect_subtasks, intents_from_sidecar, label_sidecar, write_label_sidecar
from .sessions import SessionError, atomic_write_text, read_session, validate_gaze_coverage, write_session

log = logging.getLogger("gazeplay")

MANIFEST = "manifest.json"


@dataclass
class RunConfig:
    seed: int = 0
    sessions_dir: Path = Path("out/sessions")
    features_dir: Path = Path("out/features")
    reports_dir: Path = Path("out/reports")
    participants: int = 10
    agents: tuple = POLICY_KINDS
    layouts: tuple = LAYOUT_NAMES
    repeats: int = ex.ROUNDS_PER_COMBINATION
    skills: tuple = ex.SKILL_LEVELS
    kinds: tuple = KINDS
    windows: tuple = (WindowSpec(0, 20), WindowSpec(200, 20))
    ratios: tuple = ex.DEFAULT_RATIOS
    experiments: list = field(default_factory=list)  # raw [[experiments]] tables

    @classmethod
    def load(cls, path: Optional[str], seed: Optional[int] = None) -> "RunConfig":
        raw = {}
        if path is not None:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        base = Path(path).parent if path else Path(".")
        cfg = cls()
        cfg.seed = int(raw.get("seed", cfg.seed))
        paths = raw.get("paths", {})
        cfg.sessions_dir = base / paths.get("sessions", str(cfg.sessions_dir))
        cfg.features_dir = base / paths.get("features", str(cfg.features_dir))
        cfg.reports_dir = base / paths.get("reports", str(cfg.reports_dir))
        ds = raw.get("dataset", {})
        cfg.participants = int(ds.get("participants", cfg.participants))
        cfg.agents = tuple(ds.get("agents", cfg.agents))
        cfg.layouts = tuple(ds.get("layouts", cfg.layouts))
        cfg.repeats = int(ds.get("repeats", cfg.repeats))
        cfg.skills = tuple(float(s) for s in ds.get("skills", cfg.skills))
        fz = raw.get("featurize", {})
        cfg.kinds = tuple(fz.get("kinds", cfg.kinds))
        if "windows" in fz:
            cfg.windows = tuple(WindowSpec(int(a), int(b)) for a, b in fz["windows"])
        cfg.ratios = tuple(raw.get("split", {}).get("ratios", cfg.ratios))
        cfg.experiments = list(raw.get("experiments", []))
        if seed is not None:
            cfg.seed = int(seed)
        unknown = set(cfg.kinds) - set(KINDS)
        if unknown:
            raise ValueError(f"unknown representation kinds {sorted(unknown)}")
        return cfg


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


# ----------------------------------------------------------------- simulate

def _simulate_one(job) -> list[str]:
    pid, cfg = job
    out = []
    for s in ex.simulate_participant(pid, cfg.seed, cfg.agents, cfg.layouts, cfg.repeats, cfg.skills):
        path = cfg.sessions_dir / f"{s.session_id}.jsonl"
        write_session(s, path)
        out.append(path.name)
    return out


def cmd_simulate(cfg: RunConfig, jobs: int = 1, dry_run: bool = False) -> int:
    pids = ex.participant_ids(cfg.participants)
    n = len(pids) * len(cfg.agents) * len(cfg.layouts) * cfg.repeats
    if dry_run:
        print(f"would simulate {n} sessions for {len(pids)} participants into {cfg.sessions_dir}")
        return 0
    cfg.sessions_dir.mkdir(parents=True, exist_ok=True)
    names = [x for chunk in _map(_simulate_one, [(p, cfg) for p in pids], jobs) for x in chunk]
    print(f"simulated {len(names)} sessions into {cfg.sessions_dir}")
    return 0


# ----------------------------------------------------------------- validate

def _validate_one(path: Path) -> dict:
    try:
        session = read_session(path)
    except (SessionError, OSError) as exc:
        return {"file": path.name, "ok": False, "reason": str(exc)}
    cov = validate_gaze_coverage(session)
    entry = {"file": path.name, "session_id": session.session_id,
             "participant": session.meta.participant_id, "group": ex.group_of(session),
             "missing_fraction": round(cov["missing_fraction"], 6)}
    if not cov["acceptable"]:
        return {**entry, "ok": False, "reason": f"missing gaze fraction {cov['missing_fraction']:.4f} > 0.40"}
    return {**entry, "ok": True}


def session_files(directory: Path) -> list[Path]:
    return sorted(p for p in Path(directory).glob("*.jsonl"))


def cmd_validate(cfg: RunConfig, jobs: int = 1, dry_run: bool = False) -> int:
    files = session_files(cfg.sessions_dir)
    if dry_run:
        print(f"would validate {len(files)} session files in {cfg.sessions_dir}")
        return 0
    results = _map(_validate_one, files, jobs)
    manifest = {"accepted": [{k: r[k] for k in ("file", "session_id", "participant", "group")}
                             for r in results if r["ok"]],
                "rejected": [{"file": r["file"], "reason": r["reason"]} for r in results if not r["ok"]]}
    atomic_write_text(cfg.sessions_dir / MANIFEST, _dump(manifest))
    print(f"accepted {len(manifest['accepted'])}, rejected {len(manifest['rejected'])}")
    for r in manifest["rejected"]:
        print(f"  reject {r['file']}: {r['reason']}")
    return 0


def load_manifest(cfg: RunConfig) -> dict:
    path = cfg.sessions_dir / MANIFEST
    if not path.exists():
        raise FileNotFoundError(f"{path} missing; run `gazeplay validate` first")
    return json.loads(path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------- featurize

def _archive_path(cfg: RunConfig, sid: str, kind: str, window: WindowSpec) -> Path:
    return cfg.features_dir / sid / f"{kind}.{window.tag}.bin"


def _featurize_one(job) -> Optional[str]:
    entry, proficiency, cfg = job
    try:
        session = read_session(cfg.sessions_dir / entry["file"])
    except (SessionError, OSError) as exc:
        return f"{entry['file']}: {exc}"
    fz = SessionFeaturizer(session)
    for w in cfg.windows:
        for kind in cfg.kinds:
            rep = fz.build(w, kind)
            write_archive(_archive_path(cfg, session.session_id, kind, w), rep.data,
                          {"session_id": session.session_id, "participant": session.meta.participant_id,
                           "group": ex.group_of(session), "kind": kind,
                           "window": [w.start_t, w.length], "shape": list(rep.data.shape)})
    sidecar = label_sidecar(session, proficiency, detect_subtasks(session))
    sidecar.update(participant=session.meta.participant_id, group=ex.group_of(session))
    write_label_sidecar(cfg.features_dir / session.session_id / "labels.json", sidecar)
    return None


def _scores(cfg: RunConfig, accepted: list) -> dict:
    """Final score per session, read from the last game record of each file."""
    out = {}
    for e in accepted:
        with open(cfg.sessions_dir / e["file"], encoding="utf-8") as fh:
            last = None
            for line in fh:
                if line.startswith('{"k":"game"'):
                    last = line
        rec = json.loads(last)
        out[e["session_id"]] = rec["state"]["score"] + rec["reward"]
    return out


def cmd_featurize(cfg: RunConfig, jobs: int = 1, dry_run: bool = False) -> int:
    manifest = load_manifest(cfg)
    accepted = manifest["accepted"]
    if dry_run:
        print(f"would featurize {len(accepted)} sessions x {len(cfg.kinds)} kinds x "
              f"{len(cfg.windows)} windows into {cfg.features_dir}")
        return 0
    try:
        scores = _scores(cfg, accepted)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: cannot read final scores: {exc}", file=sys.stderr)
        return 1
    by_group: dict = {}
    for e in accepted:
        by_group.setdefault(e["group"], []).append((e["session_id"], scores[e["session_id"]]))
    bins = {}
    for g, sc in sorted(by_group.items()):
        bins.update(ex.proficiency_bins(sc, g))
    errors = [e for e in _map(_featurize_one, [(e, bins[e["session_id"]], cfg) for e in accepted], jobs) if e]
    for err in errors:
        print(f"error: {err}", file=sys.stderr)
    print(f"featurized {len(accepted) - len(errors)} sessions into {cfg.features_dir}")
    return 1 if errors else 0


def load_feature_data(cfg: RunConfig, keys: set) -> ex.ExperimentData:
    """Stack archives and label sidecars for the accepted sessions. ``keys`` holds (kind, WindowSpec)."""
    accepted = load_manifest(cfg)["accepted"]
    data = ex.ExperimentData([e["session_id"] for e in accepted], [e["participant"] for e in accepted],
                             [e["group"] for e in accepted])
    feats = {(k, w.tag): [] for k, w in keys}
    windows = {w for _, w in keys}
    labs = {(t, w.tag): [] for t in ex.TASKS for w in windows}
    for e in accepted:
        sid = e["session_id"]
        for kind, w in keys:
            arr, _ = read_archive(_archive_path(cfg, sid, kind, w))
            feats[(kind, w.tag)].append(arr)
        side = json.loads((cfg.features_dir / sid / "labels.json").read_text(encoding="utf-8"))
        intents = intents_from_sidecar(side)
        for w in windows:
            labs[("trust", w.tag)].append(np.full(w.length, side["trust"], dtype=np.int64))
            labs[("proficiency", w.tag)].append(np.full(w.length, side["proficiency"], dtype=np.int64))
            labs[("intent", w.tag)].append(intents[w.start_t:w.stop_t])
    data.features = {k: stack_inputs(k[0], v) for k, v in feats.items()}
    data.labels = {k: np.stack(v) for k, v in labs.items()}
    return data


# ---------------------------------------------------------------------- run

def parse_specs(tables: list, groups: list) -> list:
    """ExperimentSpecs from [[experiments]] tables; group = "each" expands over ``groups``."""
    specs = []
    for t in tables:
        w = WindowSpec(*[int(v) for v in t.get("window", (0, 20))])
        train = ex.TrainConfig(**t.get("train", {}))
        opts = tuple(sorted(t.get("model_options", {}).items()))
        group = t.get("group", "each")
        for g in (groups if group == "each" else [None if group == "all" else group]):
            specs.append(ex.ExperimentSpec(t["task"], t["kind"], w, g, t.get("model", "transformer"),
                                           train, opts))
    return specs


def cmd_run(cfg: RunConfig, jobs: int = 1, dry_run: bool = False) -> int:
    groups = [f"{a}@{l}" for l in cfg.layouts for a in cfg.agents]
    try:
        specs = parse_specs(cfg.experiments, groups)
    except (ex.ExperimentError, TypeError, KeyError, ValueError) as exc:
        print(f"error: bad experiment table: {exc}", file=sys.stderr)
        return 1
    if dry_run:
        for s in specs:
            print(f"would run {s.spec_id}")
        return 0
    if not specs:
        print("no experiments configured")
        return 0
    data = load_feature_data(cfg, {(s.kind, s.window) for s in specs})
    split = ex.split_participants(sorted(set(data.participants)), cfg.ratios,
                                  ex.derive_seed(cfg.seed, "split") % 2**32)
    cfg.reports_dir.mkdir(parents=True, exist_ok=True)
    failed = 0
    for spec in specs:
        try:
            report = ex.run_experiment(spec, data, split)
        except Exception as exc:  # one bad spec must not stop the others
            failed += 1
            print(f"error: {spec.spec_id}: {exc}", file=sys.stderr)
            continue
        atomic_write_text(cfg.reports_dir / f"{spec.spec_id}.json", ex.report_bytes(report).decode())
        atomic_write_text(cfg.reports_dir / f"{spec.spec_id}.csv", ex.report_csv(report))
        print(f"{spec.spec_id}: final F1 {report['final_f1']}, baseline {report['baseline']['final_f1']}")
    return 1 if failed else 0


def cmd_train(cfg: RunConfig, args, jobs: int = 1, dry_run: bool = False) -> int:
    table = {"task": args.task, "kind": args.kind, "model": args.model,
             "window": [args.window_start, args.window_length], "group": args.group}
    cfg.experiments = [table]
    return cmd_run(cfg, jobs, dry_run)


# ------------------------------------------------------------------- report

def cmd_report(cfg: RunConfig, jobs: int = 1, dry_run: bool = False) -> int:
    files = sorted(p for p in cfg.reports_dir.glob("*.json") if p.name != "summary.json")
    if dry_run:
        print(f"would summarise {len(files)} reports in {cfg.reports_dir}")
        return 0
    reports = [json.loads(p.read_text(encoding="utf-8")) for p in files]
    by_setting: dict = {}
    for r in reports:
        s = r["spec"]
        key = f"{s['task']}.{s['kind']}.{s['model']}.{WindowSpec(s['window']['start_t'], s['window']['length']).tag}"
        by_setting.setdefault(key, []).append(r)
    summary = {"reports": [{"id": r["spec"]["id"], "final_f1": r["final_f1"],
                            "baseline_final_f1": r["baseline"]["final_f1"]} for r in reports],
               "settings": {k: {"groups": len(v), "mean_cumulative": ex.group_mean_curve(v),
                                "mean_per_timestep": ex.group_mean_curve(v, "per_timestep")}
                            for k, v in sorted(by_setting.items())}}
    cfg.reports_dir.mkdir(parents=True, exist_ok=True)
    atomic_write_text(cfg.reports_dir / "summary.json", _dump(summary))
    rows = ["id,final_f1,baseline_final_f1"]
    rows += [f"{r['id']},{r['final_f1']},{r['baseline_final_f1']}" for r in summary["reports"]]
    atomic_write_text(cfg.reports_dir / "summary.csv", "\n".join(rows) + "\n")
    print(f"summarised {len(reports)} reports")
    return 0


def directory_digest(directory) -> str:
    """blake2b over sorted relative paths and file bytes."""
    h = hashlib.blake2b(digest_size=16)
    root = Path(directory)
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode() + b"\0" + p.read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gazeplay", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="override the global seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--dry-run", action="store_true", help="print the plan without doing work")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [("simulate", "generate synthetic sessions"),
                            ("validate", "check sessions and write the manifest"),
                            ("featurize", "write feature archives and label sidecars"),
                            ("run", "train and evaluate every configured experiment"),
                            ("report", "summarise reports")]:
        sub.add_parser(name, parents=[common], help=help_text)
    train = sub.add_parser("train", parents=[common], help="run a single experiment")
    train.add_argument("--task", choices=ex.TASKS, required=True)
    train.add_argument("--kind", choices=KINDS, required=True)
    train.add_argument("--model", choices=ex.MODEL_KINDS, default="transformer")
    train.add_argument("--window-start", type=int, default=0)
    train.add_argument("--window-length", type=int, default=20)
    train.add_argument("--group", default="each", help='"agent@layout", "each" or "all"')
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        cfg = RunConfig.load(args.config, args.seed)
    except (OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    commands = {"simulate": cmd_simulate, "validate": cmd_validate, "featurize": cmd_featurize,
                "run": cmd_run, "report": cmd_report}
    try:
        if args.command == "train":
            return cmd_train(cfg, args, args.jobs, args.dry_run)
        return commands[args.command](cfg, args.jobs, args.dry_run)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
