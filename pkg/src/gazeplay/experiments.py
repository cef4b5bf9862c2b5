"""Participant splits, metrics, training loops and the F1-over-time evaluation."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .features import (
    AGGREGATE_KINDS, KINDS, SEQUENCE_KINDS, SessionFeaturizer, WindowSpec, modality_blocks, stack_inputs,
)
from .gridworld.gaze import GazeProfile
from .gridworld.layout import LAYOUT_NAMES, load_layout
from .gridworld.planner import POLICY_KINDS, PolicyKind
from .gridworld.simulate import HumanProxy, simulate_session
from .labels import (
    MASKED, N_PROFICIENCY, N_TRUST, detect_subtasks, intent_labels, proficiency_bins, trust_label,
)
from .gridworld.state import N_SUBTASKS
from .neural.core import cross_entropy
from .neural.models import MLP, MLPConfig, ModelConfig, Transformer
from .neural.optim import RAdamState, lr_schedule, radam_step
from .sessions import SessionLog

DEFAULT_RATIOS = (59, 5, 10)
TASKS = ("trust", "proficiency", "intent")
N_CLASSES = {"trust": N_TRUST, "proficiency": N_PROFICIENCY, "intent": N_SUBTASKS}
MODEL_KINDS = ("transformer", "mlp", "majority")
SKILL_LEVELS = (0.1, 0.5, 0.9)
ROUNDS_PER_COMBINATION = 2


class ExperimentError(ValueError):
    pass


def derive_seed(global_seed: int, stage: str, entity="") -> int:
    """64-bit seed = blake2b(global seed / stage / entity); stable across partial reruns."""
    text = f"{int(global_seed)}/{stage}/{entity}".encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


# ------------------------------------------------------------------ splits

@dataclass(frozen=True)
class SplitSpec:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    seed: int

    def partition_of(self, pid: str) -> str:
        for name in ("train", "val", "test"):
            if pid in getattr(self, name):
                return name
        raise KeyError(pid)

    def to_json(self) -> dict:
        return {"train": list(self.train), "val": list(self.val), "test": list(self.test),
                "seed": self.seed}


def _largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    total = float(sum(ratios))
    quotas = [n * r / total for r in ratios]
    sizes = [int(np.floor(q)) for q in quotas]
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    # every partition keeps at least one participant
    for i in range(len(sizes)):
        while sizes[i] == 0:
            donor = max(range(len(sizes)), key=lambda j: (sizes[j], -j))
            sizes[donor] -= 1
            sizes[i] += 1
    return sizes


def split_participants(ids: Iterable[str], ratios=DEFAULT_RATIOS, seed: int = 0) -> SplitSpec:
    """Seeded shuffle of the participants, cut into train/val/test by largest remainder."""
    ids = sorted(set(ids))
    if len(ids) < 3:
        raise ExperimentError(f"need at least 3 participants, got {len(ids)}")
    if len(ratios) != 3 or min(ratios) <= 0:
        raise ExperimentError("ratios must be three positive numbers")
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    a, b, _ = _largest_remainder(len(ids), ratios)
    return SplitSpec(tuple(sorted(shuffled[:a])), tuple(sorted(shuffled[a:a + b])),
                     tuple(sorted(shuffled[a + b:])), int(seed))


# ----------------------------------------------------------------- metrics

def f1_macro(predictions, labels, n_classes: Optional[int] = None) -> float:
    """Unweighted mean of per-class F1 over the classes present in ``labels``."""
    pred = np.asarray(predictions).ravel()
    true = np.asarray(labels).ravel()
    if pred.shape != true.shape:
        raise ExperimentError("predictions and labels differ in length")
    if true.size == 0:
        raise ExperimentError("empty input")
    scores = []
    for c in np.unique(true):
        tp = np.sum((pred == c) & (true == c))
        fp = np.sum((pred == c) & (true != c))
        fn = np.sum((pred != c) & (true == c))
        denom = 2 * tp + fp + fn
        scores.append(0.0 if denom == 0 else 2.0 * tp / denom)
    return float(np.mean(scores))


@dataclass
class EvalCurve:
    start_t: int
    per_timestep: list  # F1 per window position, None where no position is labelled
    cumulative: list
    support: list  # per position: {class id: count}

    @property
    def final(self) -> Optional[float]:
        return self.cumulative[-1]

    def to_json(self) -> dict:
        return {"start_t": self.start_t, "positions": list(range(self.start_t, self.start_t + len(self.per_timestep))),
                "per_timestep": self.per_timestep, "cumulative": self.cumulative, "support": self.support}


def _curve(preds: np.ndarray, labels: np.ndarray) -> tuple[list, list]:
    """F1 across rounds at each position; (N, L) arrays, MASKED labels ignored."""
    f1s, support = [], []
    for t in range(labels.shape[1]):
        ok = labels[:, t] != MASKED
        if not ok.any():
            f1s.append(None)
            support.append({})
            continue
        f1s.append(f1_macro(preds[ok, t], labels[ok, t]))
        cls, cnt = np.unique(labels[ok, t], return_counts=True)
        support.append({str(int(c)): int(n) for c, n in zip(cls, cnt)})
    return f1s, support


def per_timestep_eval(probs: np.ndarray, labels: np.ndarray) -> tuple[list, list]:
    """Position-t argmax prediction per round, scored across rounds for each t."""
    return _curve(np.argmax(probs, axis=-1), labels)


def cumulative_probs(probs: np.ndarray) -> np.ndarray:
    """Running mean of the probability vectors over positions 0..t."""
    return np.cumsum(probs, axis=1) / np.arange(1, probs.shape[1] + 1)[None, :, None]


def cumulative_eval(probs: np.ndarray, labels: np.ndarray) -> tuple[list, list]:
    return _curve(np.argmax(cumulative_probs(probs), axis=-1), labels)


def evaluate_probs(probs: np.ndarray, labels: np.ndarray, start_t: int) -> EvalCurve:
    per, support = per_timestep_eval(probs, labels)
    cum, _ = cumulative_eval(probs, labels)
    return EvalCurve(start_t, per, cum, support)


class MajorityModel:
    kind = "majority"

    def __init__(self, label: int, n_classes: int):
        self.label, self.n_classes = int(label), int(n_classes)

    def predict_proba(self, x) -> np.ndarray:
        """One-hot on the majority class for every input row (or position)."""
        return self.probs(np.asarray(x).shape[:-1])

    def probs(self, shape) -> np.ndarray:
        out = np.zeros(tuple(shape) + (self.n_classes,))
        out[..., self.label] = 1.0
        return out


def majority_baseline(labels, n_classes: Optional[int] = None) -> MajorityModel:
    """Constant predictor of the most frequent label; ties go to the lowest id."""
    labels = np.asarray(labels).ravel()
    labels = labels[labels != MASKED]
    if labels.size == 0:
        raise ExperimentError("no labels to take a majority over")
    counts = np.bincount(labels, minlength=n_classes or 0)
    return MajorityModel(int(np.argmax(counts)), n_classes or len(counts))


# --------------------------------------------------------------- synthetic data

@dataclass(frozen=True)
class ParticipantProfile:
    participant_id: str
    skill: float
    gaze: GazeProfile

    def proxy(self) -> HumanProxy:
        return HumanProxy(PolicyKind("adaptive", self.skill), self.gaze)


def sample_participant(participant_id: str, rng: np.random.Generator,
                       skills: Sequence[float] = SKILL_LEVELS) -> ParticipantProfile:
    """Skill uniform over ``skills``; the gaze profile follows skill.

    Skilled players look at their goal tile more and scan at random less,
    and settle on their own agent sooner after the round starts.
    """
    skill = float(skills[int(rng.integers(len(skills)))])
    goal = 0.15 + 0.6 * skill
    mix = (0.15, 0.05, goal, 1.0 - 0.2 - goal)
    latency = int(round(12 - 10 * skill)) + int(rng.integers(-1, 2))
    profile = GazeProfile(mix, saccade_latency=max(0, latency),
                          dropout_rate=float(rng.uniform(0.02, 0.15)),
                          jitter_px=float(rng.uniform(5.0, 25.0)),
                          pupil_mm=float(rng.uniform(3.0, 4.5)))
    return ParticipantProfile(participant_id, skill, profile)


def combinations(agents=POLICY_KINDS, layouts=LAYOUT_NAMES) -> list[tuple[str, str]]:
    return [(a, l) for l in layouts for a in agents]


def participant_schedule(rng: np.random.Generator, agents=POLICY_KINDS, layouts=LAYOUT_NAMES,
                         repeats: int = ROUNDS_PER_COMBINATION) -> list[tuple[str, str]]:
    """Every agent-layout pair ``repeats`` times, in a shuffled order."""
    rounds = combinations(agents, layouts) * repeats
    return [rounds[i] for i in rng.permutation(len(rounds))]


def participant_ids(n: int) -> list[str]:
    return [f"p{i:03d}" for i in range(n)]


def simulate_participant(pid: str, seed: int, agents=POLICY_KINDS, layouts=LAYOUT_NAMES,
                         repeats: int = ROUNDS_PER_COMBINATION,
                         skills: Sequence[float] = SKILL_LEVELS) -> list[SessionLog]:
    rng = np.random.default_rng(derive_seed(seed, "participant", pid))
    profile = sample_participant(pid, rng, skills)
    out = []
    for trial, (agent, layout) in enumerate(participant_schedule(rng, agents, layouts, repeats)):
        out.append(simulate_session(load_layout(layout), PolicyKind(agent), profile.proxy(),
                                    derive_seed(seed, "session", f"{pid}/{trial}"), pid, trial))
    return out


def group_of(session: SessionLog) -> str:
    return f"{session.meta.agent}@{session.meta.layout}"


# ----------------------------------------------------------------- dataset

@dataclass
class ExperimentData:
    """Stacked model inputs and labels for a set of sessions.

    ``features[(kind, tag)]`` is (N, L, D) for sequence kinds and (N, D) for
    aggregated kinds; ``labels[(task, tag)]`` is (N, L) with MASKED entries.
    """
    session_ids: list
    participants: list
    groups: list
    features: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.session_ids)

    def subset(self, idx: np.ndarray) -> "ExperimentData":
        idx = np.asarray(idx, dtype=np.int64)
        pick = lambda xs: [xs[i] for i in idx]
        return ExperimentData(pick(self.session_ids), pick(self.participants), pick(self.groups),
                              {k: v[idx] for k, v in self.features.items()},
                              {k: v[idx] for k, v in self.labels.items()})

    def where(self, participants=None, group=None) -> np.ndarray:
        keep = np.ones(len(self), dtype=bool)
        if participants is not None:
            allowed = set(participants)
            keep &= np.array([p in allowed for p in self.participants], dtype=bool)
        if group is not None:
            keep &= np.array([g == group for g in self.groups], dtype=bool)
        return np.flatnonzero(keep)


def proficiency_table(sessions: Iterable[SessionLog]) -> dict[str, int]:
    return _bins_from_scores((s.session_id, group_of(s), s.final_score) for s in sessions)


def _bins_from_scores(rows) -> dict[str, int]:
    by_group: dict[str, list] = {}
    for sid, group, score in rows:
        by_group.setdefault(group, []).append((sid, score))
    out = {}
    for g, scores in sorted(by_group.items()):
        out.update(proficiency_bins(scores, g))
    return out


def build_dataset(sessions: Iterable[SessionLog], kinds: Sequence[str] = KINDS,
                  windows: Sequence[WindowSpec] = (WindowSpec(0, 20),)) -> ExperimentData:
    """Featurize and label sessions; proficiency tertiles are taken per agent-layout group.

    ``sessions`` may be a generator: each session is reduced to its features
    as it arrives, so the raw logs never need to be held together.
    """
    data = ExperimentData([], [], [])
    feats = {(k, w.tag): [] for k in kinds for w in windows}
    labs = {(t, w.tag): [] for t in ("trust", "intent") for w in windows}
    scores = []
    for s in sessions:
        data.session_ids.append(s.session_id)
        data.participants.append(s.meta.participant_id)
        data.groups.append(group_of(s))
        scores.append((s.session_id, group_of(s), s.final_score))
        fz = SessionFeaturizer(s)
        completions = detect_subtasks(s, layout=fz.layout)
        trust = trust_label(s)
        for w in windows:
            for k in kinds:
                feats[(k, w.tag)].append(fz.build(w, k).data)
            labs[("trust", w.tag)].append(np.full(w.length, trust, dtype=np.int64))
            labs[("intent", w.tag)].append(intent_labels(s, w, completions))
    bins = _bins_from_scores(scores)
    prof = np.array([bins[sid] for sid in data.session_ids], dtype=np.int64)
    for w in windows:
        labs[("proficiency", w.tag)] = list(np.repeat(prof[:, None], w.length, axis=1))
    data.features = {key: stack_inputs(key[0], v) for key, v in feats.items()}
    data.labels = {key: np.stack(v) for key, v in labs.items()}
    return data


def simulate_dataset(n_participants: int, seed: int, **kwargs):
    """Generator over every session of ``n_participants`` synthetic participants."""
    for pid in participant_ids(n_participants):
        yield from simulate_participant(pid, seed, **kwargs)


# ---------------------------------------------------------------- training

@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    bs: int = 8
    ws: int = 50
    epochs: int = 200
    patience: int = 10
    seed: int = 0
    label_smoothing: float = 0.0

    def __post_init__(self):
        if self.lr <= 0 or self.bs < 1 or self.ws < 0 or self.epochs < 1:
            raise ExperimentError("need lr > 0, bs >= 1, ws >= 0, epochs >= 1")


@dataclass(frozen=True)
class ExperimentSpec:
    task: str
    kind: str
    window: WindowSpec = WindowSpec(0, 20)
    group: Optional[str] = None  # "agent@layout"; None pools every group
    model: str = "transformer"
    train: TrainConfig = TrainConfig()
    model_options: tuple = ()  # (name, value) overrides for the model config

    def __post_init__(self):
        if self.task not in TASKS:
            raise ExperimentError(f"unknown task {self.task!r}")
        if self.kind not in KINDS:
            raise ExperimentError(f"unknown representation {self.kind!r}")
        if self.model not in MODEL_KINDS:
            raise ExperimentError(f"unknown model {self.model!r}")
        if self.model == "mlp" and self.kind not in AGGREGATE_KINDS:
            raise ExperimentError("mlp models take aggregated representations only")
        if self.model == "transformer" and self.kind not in SEQUENCE_KINDS:
            raise ExperimentError("transformer models take per-timestep representations only")

    @property
    def spec_id(self) -> str:
        group = (self.group or "all").replace("@", "-")
        return f"{self.task}.{self.kind}.{self.model}.{group}.{self.window.tag}"

    def to_json(self) -> dict:
        d = asdict(self)
        d["model_options"] = dict(self.model_options)
        d["id"] = self.spec_id
        return d


def default_model(spec: ExperimentSpec, input_dim: int, rng):
    n = N_CLASSES[spec.task]
    opts = dict(spec.model_options)
    if spec.model == "transformer":
        opts.setdefault("max_seq_len", spec.window.length)
        return Transformer(ModelConfig(input_dim, n, **opts), rng)
    return MLP(MLPConfig(input_dim, n, **opts), rng)


def standardizer(x: np.ndarray, blocks: Optional[np.ndarray] = None):
    """Per-feature mean and scale from training inputs; constant features keep scale 1.

    With ``blocks`` (a modality id per column), each modality is further scaled so
    its varying columns carry the same total variance as the smallest modality's.
    Without this the wide game block swamps the few gaze columns.
    """
    flat = x.reshape(-1, x.shape[-1]).astype(np.float64)
    mu = flat.mean(axis=0)
    sd = flat.std(axis=0)
    live = sd >= 1e-6
    sd[~live] = 1.0
    if blocks is not None:
        ids = np.unique(blocks)
        counts = {b: int(np.sum(live & (blocks == b))) for b in ids}
        smallest = min(c for c in counts.values() if c) if any(counts.values()) else 0
        for b, c in counts.items():
            if c and smallest:
                sd[blocks == b] *= np.sqrt(c / smallest)
    return mu.astype(np.float32), sd.astype(np.float32)


def _targets(model, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels and mask in the model's output layout."""
    if model.kind == "mlp":
        final = labels[:, -1]
        return final, final != MASKED
    return labels, labels != MASKED


def model_probs(model, x: np.ndarray, length: int) -> np.ndarray:
    """(N, L, K) probabilities; aggregated models repeat their one output over the window."""
    p = model.predict_proba(x)
    if p.ndim == 2:
        p = np.repeat(p[:, None, :], length, axis=1)
    return p


def pooled_f1(model, x, labels) -> float:
    probs = model_probs(model, x, labels.shape[1])
    y, m = _targets(model, labels)
    pred = np.argmax(probs, axis=-1)
    if model.kind == "mlp":
        pred = pred[:, -1]
    if not m.any():
        return 0.0
    return f1_macro(pred[m], y[m])


def train_model(model, x: np.ndarray, labels: np.ndarray, cfg: TrainConfig,
                x_val: Optional[np.ndarray] = None, y_val: Optional[np.ndarray] = None,
                target_f1: Optional[float] = None) -> dict:
    """Minibatch RAdam with warmup. Early-stops on validation F1 when a validation set is given,
    or once training F1 reaches ``target_f1``. Returns a small training log."""
    rng = np.random.default_rng(cfg.seed)
    y, mask = _targets(model, labels)
    keep = mask.reshape(len(mask), -1).any(axis=1)
    x, y, mask, labels = x[keep], y[keep], mask[keep], labels[keep]
    if len(x) == 0:
        raise ExperimentError("no labelled training examples")
    state = RAdamState()
    best, best_f1, since, epochs = None, -1.0, 0, 0
    history = []
    for epoch in range(cfg.epochs):
        epochs = epoch + 1
        order = rng.permutation(len(x))
        losses = []
        for i in range(0, len(x), cfg.bs):
            b = order[i:i + cfg.bs]
            if not mask[b].any():
                continue
            logits, cache = model.forward(x[b], train=True, rng=rng)
            loss, dlogits = cross_entropy(logits, y[b], mask[b], cfg.label_smoothing)
            grads = model.backward(cache, dlogits)
            radam_step(model.params, grads, state, lr_schedule(state.t + 1, cfg.ws, cfg.lr))
            losses.append(loss)
        entry = {"epoch": epochs, "loss": float(np.mean(losses))}
        if x_val is not None:
            f1 = pooled_f1(model, x_val, y_val)
            entry["val_f1"] = f1
            if f1 > best_f1:
                best, best_f1, since = copy.deepcopy(model.params), f1, 0
            else:
                since += 1
        history.append(entry)
        if target_f1 is not None:
            probs = model_probs(model, x, labels.shape[1])
            train_f1 = final_f1(probs, labels)
            entry["train_f1"] = train_f1
            if train_f1 >= target_f1:
                break
        if x_val is not None and since >= cfg.patience:
            break
    if best is not None:
        model.params = best
    return {"epochs": epochs, "best_val_f1": best_f1 if x_val is not None else None,
            "history": history}


def final_f1(probs: np.ndarray, labels: np.ndarray) -> Optional[float]:
    """Cumulative macro F1 at the last window position."""
    return cumulative_eval(probs, labels)[0][-1]


# -------------------------------------------------------------- experiments

def _clean(x):
    if isinstance(x, float):
        return None if not np.isfinite(x) else round(x, 12)
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def run_experiment(spec: ExperimentSpec, data: ExperimentData, split: SplitSpec) -> dict:
    """Train per ``spec`` on the split's train participants, evaluate on its test participants."""
    key = (spec.kind, spec.window.tag)
    lkey = (spec.task, spec.window.tag)
    if key not in data.features or lkey not in data.labels:
        raise ExperimentError(f"{spec.spec_id}: features or labels for {spec.window.tag} missing")
    tr = data.where(split.train, spec.group)
    va = data.where(split.val, spec.group)
    te = data.where(split.test, spec.group)
    if len(tr) == 0 or len(te) == 0:
        raise ExperimentError(f"{spec.spec_id}: empty train or test set")
    x, labels = data.features[key], data.labels[lkey]
    n_classes = N_CLASSES[spec.task]
    L = spec.window.length

    baseline = majority_baseline(labels[tr], n_classes)
    base_curve = evaluate_probs(baseline.probs(labels[te].shape), labels[te], spec.window.start_t)
    log = {}
    if spec.model == "majority":
        model = baseline
    else:
        mu, sd = standardizer(x[tr], modality_blocks(spec.kind, x.shape[-1]))
        xs = (x - mu) / sd
        rng = np.random.default_rng(spec.train.seed)
        model = default_model(spec, x.shape[-1], rng)
        log = train_model(model, xs[tr], labels[tr], spec.train,
                          xs[va] if len(va) else None, labels[va] if len(va) else None)
        x = xs
    probs = baseline.probs(labels[te].shape) if spec.model == "majority" else model_probs(model, x[te], L)
    curve = evaluate_probs(probs, labels[te], spec.window.start_t)
    if spec.model == "mlp":
        # aggregated models yield one point, placed at the final window position
        curve.per_timestep = [None] * (L - 1) + [curve.per_timestep[-1]]
        curve.cumulative = [None] * (L - 1) + [curve.per_timestep[-1]]

    test_ids = set(split.test)
    train_sessions = [data.session_ids[i] for i in tr]
    audit = {
        "train_participants": sorted({data.participants[i] for i in tr}),
        "val_participants": sorted({data.participants[i] for i in va}),
        "test_participants": sorted({data.participants[i] for i in te}),
        "n_train_sessions": len(tr), "n_val_sessions": len(va), "n_test_sessions": len(te),
        "test_rounds_in_train": sum(data.participants[i] in test_ids for i in tr),
    }
    assert audit["test_rounds_in_train"] == 0, "test participant leaked into training"
    report = {
        "spec": spec.to_json(),
        "split": {**split.to_json(), "audit": audit},
        **curve.to_json(),
        "final_f1": curve.final,
        "baseline": {"label": baseline.label, **{k: v for k, v in base_curve.to_json().items()
                                                  if k in ("per_timestep", "cumulative")},
                     "final_f1": base_curve.final},
        "training": {"epochs": log.get("epochs", 0), "best_val_f1": log.get("best_val_f1")},
        "train_sessions_digest": hashlib.blake2b("\n".join(train_sessions).encode(),
                                                 digest_size=8).hexdigest(),
    }
    return _clean(report)


def report_bytes(report: dict) -> bytes:
    return (json.dumps(report, sort_keys=True, indent=1) + "\n").encode()


def report_csv(report: dict) -> str:
    rows = ["position,per_timestep,cumulative,baseline_per_timestep,baseline_cumulative"]
    fmt = lambda v: "" if v is None else repr(v)
    b = report["baseline"]
    for i, t in enumerate(report["positions"]):
        rows.append(",".join([str(t), fmt(report["per_timestep"][i]), fmt(report["cumulative"][i]),
                              fmt(b["per_timestep"][i]), fmt(b["cumulative"][i])]))
    return "\n".join(rows) + "\n"


def group_mean_curve(reports: Sequence[dict], field_name: str = "cumulative") -> list:
    """Across-group mean of a curve, ignoring positions a report leaves empty."""
    if not reports:
        return []
    out = []
    for i in range(len(reports[0][field_name])):
        vals = [r[field_name][i] for r in reports if r[field_name][i] is not None]
        out.append(float(np.mean(vals)) if vals else None)
    return out


def run_grouped(task: str, kind: str, model: str, data: ExperimentData, split: SplitSpec,
                window: WindowSpec = WindowSpec(0, 20), train: TrainConfig = TrainConfig(),
                groups: Optional[Sequence[str]] = None) -> dict:
    """One model per agent-layout group plus the across-group mean curve."""
    groups = sorted(set(data.groups)) if groups is None else list(groups)
    reports = [run_experiment(ExperimentSpec(task, kind, window, g, model, train), data, split)
               for g in groups]
    finals = [r["final_f1"] for r in reports if r["final_f1"] is not None]
    base = [r["baseline"]["final_f1"] for r in reports if r["baseline"]["final_f1"] is not None]
    return {"reports": reports, "mean_cumulative": group_mean_curve(reports),
            "mean_final_f1": float(np.mean(finals)) if finals else None,
            "mean_baseline_final_f1": float(np.mean(base)) if base else None}
