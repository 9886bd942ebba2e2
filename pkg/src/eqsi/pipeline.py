"""End-to-end experiment orchestration.

Stages: synthesize and label data, train the latent scorer, pick the
anchor, train the actor-critic, infer per-segment equalizer settings on
held-out segments, and score the eye-window improvement.  Every stage
writes its artifact under the run's output directory and is resumable:
a stage whose artifact already carries the current config hash is
loaded instead of recomputed.

Wall-clock measurements never enter the deterministic artifacts; each
command writes them to a separate *.timing.json sidecar.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .a2c import Agent, create_agent, infer_action
from .a2c import train as train_a2c
from .baselines import (
    DDPGConfig,
    GAConfig,
    QLearningConfig,
    SwarmConfig,
    compute_ber,
    decode_levels,
    run_ddpg,
    run_ga,
    run_grid,
    run_pso,
    run_qlearning,
)
from .channel import ChannelConfig, LabeledDataset, perturbed_unit, synthesize_pair
from .config import EQUALIZER_KINDS, RunConfig
from .equalizer import ParamRanges, apply_chain, map_action, params_from_action
from .errors import ConfigError, DataError, EqsiError
from .eye import fold_eye, largest_window, window_improvement
from .io import (
    read_json,
    stamp,
    waveform_to_csv,
    write_csv,
    write_json,
    write_timing,
)
from .latent import (
    AnchorPoint,
    AutoencoderBundle,
    compute_anchor,
    encode_matrix,
    equalized_variants,
    latent_si,
    train_autoencoder,
)
from .signal import Segment, extract_segments, label_validity


def _stage(name: str, fn):
    """Run one stage; failures carry the stage name and the module error."""
    try:
        return fn()
    except EqsiError as exc:
        raise type(exc)(f"stage {name}: {exc}") from exc


def _path(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.outdir, name)


def _stamp_matches(doc: dict, cfg: RunConfig) -> bool:
    got = doc.get("stamp", doc.get("extra", {}).get("stamp", {}))
    return isinstance(got, dict) and got == stamp(cfg.hash, cfg.seed)


# ------------------------------------------------------------------ stages


def stage_data(cfg: RunConfig, resume: bool = True) -> LabeledDataset:
    """Synthesize the pair, segment both sides, label, and cap the count.

    Labels are the expensive part; they are cached in the manifest and
    reused whenever the config hash still matches.
    """
    mask = cfg.mask()
    pair = synthesize_pair(cfg.channel)
    segments = extract_segments(pair.output, n_x=cfg.data.n_x, stride=cfg.data.stride)
    inputs = extract_segments(pair.input, n_x=cfg.data.n_x, stride=cfg.data.stride)
    cap = cfg.data.n_segments
    if cap is not None:
        segments, inputs = segments[:cap], inputs[:cap]

    manifest_path = _path(cfg, "manifest.json")
    labels = None
    if resume and os.path.exists(manifest_path):
        doc = read_json(manifest_path)
        if _stamp_matches(doc, cfg) and len(doc.get("labels", ())) == len(segments):
            labels = np.asarray(doc["labels"], dtype=np.int8)
    if labels is None:
        labels = np.array([label_validity(s, mask, swing=cfg.channel.swing) for s in segments], dtype=np.int8)
        waveform_to_csv(_path(cfg, "waveform.csv"), pair.output)
        waveform_to_csv(_path(cfg, "waveform_input.csv"), pair.input)
        config_doc = cfg.to_dict()
        del config_doc["outdir"]  # keep the manifest location-independent
        manifest = {
            "stamp": stamp(cfg.hash, cfg.seed),
            "seed": cfg.channel.seed,
            "config": config_doc,
            "n_segments": len(segments),
            "label_counts": {
                "valid": int(np.sum(labels == 1)),
                "invalid": int(np.sum(labels == 0)),
            },
            "labels": [int(v) for v in labels],
        }
        write_json(manifest_path, manifest)
    return LabeledDataset(segments=segments, inputs=inputs, labels=labels, mask=mask, config=cfg.channel)


def split_indices(cfg: RunConfig, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint held-out test set and actor-critic training pool."""
    need = cfg.data.test_segments + cfg.data.a2c_segments
    if n < need:
        raise DataError(f"need {need} segments for the test/train split, dataset has {n}")
    perm = np.random.default_rng(cfg.data.split_seed).permutation(n)
    test = np.sort(perm[: cfg.data.test_segments])
    train = np.sort(perm[cfg.data.test_segments : need])
    return test, train


def subset_dataset(ds: LabeledDataset, idx: np.ndarray) -> LabeledDataset:
    return LabeledDataset(
        segments=[ds.segments[i] for i in idx],
        inputs=[ds.inputs[i] for i in idx],
        labels=ds.labels[idx],
        mask=ds.mask,
        config=ds.config,
    )


def stage_ae(cfg: RunConfig, ds: LabeledDataset, resume: bool = True) -> AutoencoderBundle:
    path = _path(cfg, "ae.json")
    if resume and os.path.exists(path):
        doc = read_json(path)
        if _stamp_matches(doc.get("extra", {}), cfg):
            return AutoencoderBundle.load(path)
    ae_cfg = cfg.ae
    if ae_cfg.require_both_classes and ds.labels.size and np.all(ds.labels == 1):
        # Degenerate channel: every segment valid.  The loss is still well
        # defined (the classification term covers every row), so train
        # instead of refusing; the strict contract stays the default.
        ae_cfg = replace(ae_cfg, require_both_classes=False)
    bundle = train_autoencoder(ds, ae_cfg)
    bundle.save(path, extra={"stamp": stamp(cfg.hash, cfg.seed)})
    rows = (
        (epoch, train_loss, val_loss)
        for epoch, (train_loss, val_loss) in enumerate(zip(bundle.loss_trace, bundle.val_loss_trace))
    )
    write_csv(_path(cfg, "ae_trace.csv"), ["epoch", "train_loss", "val_loss"], rows)
    return bundle


def stage_anchor(cfg: RunConfig, bundle: AutoencoderBundle, ds: LabeledDataset, resume: bool = True) -> AnchorPoint:
    path = _path(cfg, "anchor.json")
    if resume and os.path.exists(path):
        doc = read_json(path)
        if _stamp_matches(doc, cfg):
            return AnchorPoint(c=np.asarray(doc["c"], dtype=np.float64), source_index=int(doc["source_index"]))
    x, y = ds.matrix, ds.labels
    if cfg.ae.eq_augment > 0:
        # The anchor is drawn from the same corpus the encoder saw, so the
        # valid set includes the equalized variants; without them the medoid
        # sits amid raw channel output and well-equalized waveforms score as
        # outliers.
        x_aug, y_aug = equalized_variants(ds, cfg.ae.eq_augment, cfg.ae.seed)
        x = np.vstack([x, x_aug])
        y = np.concatenate([y, y_aug])
    valid_rows = x[y == 1]
    if valid_rows.shape[0] == 0:
        raise DataError("no valid segments; anchor undefined")
    latents = encode_matrix(bundle, valid_rows)
    anchor = compute_anchor(latents, seed=cfg.seed)
    write_json(
        path,
        {
            "stamp": stamp(cfg.hash, cfg.seed),
            "c": [float(v) for v in anchor.c],
            "source_index": int(anchor.source_index),
        },
    )
    return anchor


def stage_a2c(
    cfg: RunConfig,
    bundle: AutoencoderBundle,
    anchor: AnchorPoint,
    ds: LabeledDataset,
    train_idx: np.ndarray,
    resume: bool = True,
) -> tuple[Agent, dict]:
    """Train the policy on the training pool; returns (agent, counters)."""
    path = _path(cfg, "agent.json")
    if resume and os.path.exists(path):
        doc = read_json(path)
        extra = doc.get("extra", {})
        if _stamp_matches(extra, cfg):
            return Agent.load(path), dict(extra["counters"])
    ranges = cfg.ranges()
    agent = create_agent(bundle.latent_dim, ranges.d, cfg.a2c)
    result = train_a2c(agent, subset_dataset(ds, train_idx), bundle, anchor, cfg.a2c, ranges)
    counters = {
        "env_steps": int(result.rollouts),
        "updates": int(result.updates),
        "stopped_early": bool(result.stopped_early),
    }
    agent.save(path, extra={"stamp": stamp(cfg.hash, cfg.seed), "counters": counters})
    rows = (
        (epoch, r, l, p, v, h)
        for epoch, (r, l, p, v, h) in enumerate(
            zip(
                result.reward_trace,
                result.loss_trace,
                result.policy_trace,
                result.value_trace,
                result.entropy_trace,
            )
        )
    )
    write_csv(
        _path(cfg, "a2c_trace.csv"),
        ["epoch", "mean_reward", "loss", "policy_term", "value_term", "entropy"],
        rows,
    )
    return agent, counters


def stage_optimize(
    cfg: RunConfig,
    agent: Agent,
    bundle: AutoencoderBundle,
    ds: LabeledDataset,
    test_idx: np.ndarray,
) -> np.ndarray:
    """Deterministic mean action for every held-out segment; writes actions.csv."""
    ranges = cfg.ranges()
    states = encode_matrix(bundle, np.stack([ds.segments[i].data for i in test_idx]))
    actions = np.vstack([infer_action(agent, s).a for s in states])
    header = (
        ["origin"]
        + [f"a{j + 1}" for j in range(ranges.d)]
        + [f"p{j + 1}" for j in range(ranges.d)]
    )
    rows = (
        (ds.segments[i].origin, *map(float, a), *map(float, map_action(a, ranges)))
        for i, a in zip(test_idx, actions)
    )
    write_csv(_path(cfg, "actions.csv"), header, rows)
    return actions


def window_area(segment: Segment, swing: float) -> float:
    return largest_window(fold_eye(segment, swing=swing)).area


def _equalized(segment: Segment, action, ranges: ParamRanges) -> Segment:
    ctle, dfe = params_from_action(action, ranges)
    return apply_chain(segment, ctle, dfe)


@dataclass
class ExperimentReport:
    """Held-out improvement summary plus bookkeeping counters."""

    kind: str
    seed: int
    config_hash: str
    origins: list[int]
    before_areas: list[float]
    after_areas: list[float]
    improvements: list  # float where before > 0, else None
    mean_improvement: float | None
    positive_fraction: float | None
    n_defined: int
    evaluations: dict = field(default_factory=dict)
    wall_times: dict = field(default_factory=dict)  # sidecar only, never in report.json

    def to_doc(self) -> dict:
        return {
            "stamp": stamp(self.config_hash, self.seed),
            "kind": self.kind,
            "origins": self.origins,
            "before_areas": self.before_areas,
            "after_areas": self.after_areas,
            "improvements": self.improvements,
            "mean_improvement": self.mean_improvement,
            "positive_fraction": self.positive_fraction,
            "n_defined": self.n_defined,
            "evaluations": self.evaluations,
        }


def summarize_improvements(before: list[float], after: list[float]) -> tuple[list, float | None, float | None, int]:
    improvements = [
        window_improvement(b, a) if b > 0 else None for b, a in zip(before, after)
    ]
    defined = [v for v in improvements if v is not None]
    if not defined:
        return improvements, None, None, 0
    mean = float(np.mean(defined))
    positive = float(np.mean([v > 0 for v in defined]))
    return improvements, mean, positive, len(defined)


def stage_evaluate(
    cfg: RunConfig,
    ds: LabeledDataset,
    test_idx: np.ndarray,
    actions: np.ndarray,
    evaluations: dict,
) -> ExperimentReport:
    ranges = cfg.ranges()
    swing = cfg.channel.swing
    before, after, origins = [], [], []
    for i, a in zip(test_idx, actions):
        seg = ds.segments[i]
        origins.append(int(seg.origin))
        before.append(window_area(seg, swing))
        after.append(window_area(_equalized(seg, a, ranges), swing))
    improvements, mean, positive, n_defined = summarize_improvements(before, after)
    report = ExperimentReport(
        kind=cfg.kind,
        seed=cfg.seed,
        config_hash=cfg.hash,
        origins=origins,
        before_areas=before,
        after_areas=after,
        improvements=improvements,
        mean_improvement=mean,
        positive_fraction=positive,
        n_defined=n_defined,
        evaluations=dict(evaluations),
    )
    write_json(_path(cfg, "report.json"), report.to_doc())
    rows = (
        (o, b, a, "" if imp is None else imp)
        for o, b, a, imp in zip(origins, before, after, improvements)
    )
    write_csv(_path(cfg, "improvement.csv"), ["origin", "before_area", "after_area", "improvement_pct"], rows)
    return report


# ---------------------------------------------------------------- commands


def run_pipeline(cfg: RunConfig, resume: bool = True) -> ExperimentReport:
    """gen-data -> train-ae -> anchor -> train-a2c -> optimize -> evaluate."""
    walls = {}
    t0 = time.perf_counter()
    ds = _stage("gen-data", lambda: stage_data(cfg, resume))
    walls["gen_data_s"] = time.perf_counter() - t0

    test_idx, train_idx = _stage("split", lambda: split_indices(cfg, len(ds)))

    t0 = time.perf_counter()
    bundle = _stage("train-ae", lambda: stage_ae(cfg, ds, resume))
    walls["train_ae_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    anchor = _stage("anchor", lambda: stage_anchor(cfg, bundle, ds, resume))
    walls["anchor_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    agent, counters = _stage("train-a2c", lambda: stage_a2c(cfg, bundle, anchor, ds, train_idx, resume))
    walls["train_a2c_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    actions = _stage("optimize", lambda: stage_optimize(cfg, agent, bundle, ds, test_idx))
    walls["optimize_s"] = time.perf_counter() - t0

    evaluations = {
        "a2c_env_steps": counters["env_steps"],
        "a2c_updates": counters["updates"],
        "test_segments": int(test_idx.size),
    }
    t0 = time.perf_counter()
    report = _stage("evaluate", lambda: stage_evaluate(cfg, ds, test_idx, actions, evaluations))
    walls["evaluate_s"] = time.perf_counter() - t0

    report.wall_times = walls
    write_timing(_path(cfg, "pipeline.timing.json"), walls)
    return report


def _objective_indices(cfg: RunConfig, pool: np.ndarray, size: int, salt: int) -> np.ndarray:
    if size > pool.size:
        raise DataError(f"objective wants {size} segments, pool has {pool.size}")
    rng = np.random.default_rng([cfg.data.split_seed, salt])
    return np.sort(rng.choice(pool, size=size, replace=False))


def make_objectives(cfg, ds, bundle, anchor, idx):
    """(latent, eye) objective pair over a fixed segment subset.

    Both map a normalized action in [0,1]^d to the mean score across the
    subset: latent SI for one, eye-window area for the other.
    """
    ranges = cfg.ranges()
    segments = [ds.segments[i] for i in idx]
    swing = cfg.channel.swing

    def latent_objective(a) -> float:
        return float(np.mean([latent_si(bundle, anchor, _equalized(s, a, ranges)) for s in segments]))

    def eye_objective(a) -> float:
        return float(np.mean([window_area(_equalized(s, a, ranges), swing) for s in segments]))

    return latent_objective, eye_objective


def _timed(fn):
    """Wrap an objective, accumulating call count and wall time."""
    box = {"calls": 0, "seconds": 0.0}

    def wrapped(a):
        t0 = time.perf_counter()
        value = fn(a)
        box["seconds"] += time.perf_counter() - t0
        box["calls"] += 1
        return value

    return wrapped, box


def improvement_of_action(cfg: RunConfig, ds: LabeledDataset, test_idx: np.ndarray, action, before: list[float]) -> float | None:
    """Mean held-out window improvement of one fixed action vector."""
    ranges = cfg.ranges()
    swing = cfg.channel.swing
    after = [window_area(_equalized(ds.segments[i], action, ranges), swing) for i in test_idx]
    _, mean, _, _ = summarize_improvements(before, after)
    return mean


def test_before_areas(cfg: RunConfig, ds: LabeledDataset, test_idx: np.ndarray) -> list[float]:
    swing = cfg.channel.swing
    return [window_area(ds.segments[i], swing) for i in test_idx]


def run_compare_si(cfg: RunConfig, trials: int | None = None, resume: bool = True) -> dict:
    """Repeated swarm runs under the latent and the eye objective.

    Reports the mean and spread of the held-out improvement per
    objective; per-evaluation wall times go to the timing sidecar.
    """
    trials = cfg.compare.trials if trials is None else int(trials)
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    ds = _stage("gen-data", lambda: stage_data(cfg, resume))
    test_idx, train_idx = split_indices(cfg, len(ds))
    bundle = _stage("train-ae", lambda: stage_ae(cfg, ds, resume))
    anchor = _stage("anchor", lambda: stage_anchor(cfg, bundle, ds, resume))
    obj_idx = _objective_indices(cfg, train_idx, cfg.compare.objective_segments, salt=23)
    latent_obj, eye_obj = make_objectives(cfg, ds, bundle, anchor, obj_idx)
    before = test_before_areas(cfg, ds, test_idx)
    swarm = SwarmConfig(size=cfg.compare.swarm_size, iterations=cfg.compare.iterations)
    d = cfg.ranges().d

    sections = {}
    timing = {}
    for name, objective in (("latent", latent_obj), ("eye", eye_obj)):
        timed, box = _timed(objective)
        improvements, scores = [], []
        for t in range(trials):
            result = run_pso(timed, d=d, cfg=swarm, seed=cfg.seed + t)
            scores.append(float(result.best_score))
            improvements.append(improvement_of_action(cfg, ds, test_idx, result.best, before))
        defined = [v for v in improvements if v is not None]
        sections[name] = {
            "improvements": improvements,
            "mean_improvement": float(np.mean(defined)) if defined else None,
            "std_improvement": float(np.std(defined)) if defined else None,
            "best_scores": scores,
            "evaluations_per_trial": int(box["calls"] // trials),
        }
        timing[f"{name}_per_eval_s"] = box["seconds"] / box["calls"]
        timing[f"{name}_total_s"] = box["seconds"]
    report = {
        "stamp": stamp(cfg.hash, cfg.seed),
        "kind": cfg.kind,
        "trials": trials,
        "latent": sections["latent"],
        "eye": sections["eye"],
    }
    write_json(_path(cfg, "compare_report.json"), report)
    write_timing(_path(cfg, "compare.timing.json"), timing)
    report["timing"] = timing
    return report


BASELINE_METHODS = ("ga", "pso", "grid", "qlearn", "ddpg")
OBJECTIVES = ("latent", "eye")


def run_baseline(
    cfg: RunConfig,
    method: str,
    objective: str = "latent",
    budget: int | None = None,
    resume: bool = True,
) -> dict:
    """One reference optimizer on the shared objective; see BASELINE_METHODS.

    The DDPG protocol carries its own error-rate reward, so it ignores
    the objective flag; every other method maximizes the chosen score
    over the fixed objective-segment subset.
    """
    if method not in BASELINE_METHODS:
        raise ConfigError(f"method must be one of {BASELINE_METHODS}, got {method!r}")
    if objective not in OBJECTIVES:
        raise ConfigError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    ds = _stage("gen-data", lambda: stage_data(cfg, resume))
    test_idx, train_idx = split_indices(cfg, len(ds))
    bundle = _stage("train-ae", lambda: stage_ae(cfg, ds, resume))
    anchor = _stage("anchor", lambda: stage_anchor(cfg, bundle, ds, resume))
    obj_idx = _objective_indices(cfg, train_idx, cfg.grid.objective_segments, salt=23)
    latent_obj, eye_obj = make_objectives(cfg, ds, bundle, anchor, obj_idx)
    chosen = latent_obj if objective == "latent" else eye_obj
    ranges = cfg.ranges()
    d = ranges.d

    t0 = time.perf_counter()
    trace: list[float] = []
    if method == "ga":
        ga_cfg = GAConfig() if budget is None else GAConfig(max_generations=int(budget))
        res = run_ga(chosen, d=d, cfg=ga_cfg, seed=cfg.seed)
        best, score, evals, trace = res.best, res.best_fitness, res.evaluations, res.trace
        eq_applications = evals * obj_idx.size
    elif method == "pso":
        pso_cfg = SwarmConfig() if budget is None else SwarmConfig(iterations=int(budget))
        res = run_pso(chosen, d=d, cfg=pso_cfg, seed=cfg.seed)
        best, score, evals, trace = res.best, res.best_score, res.evaluations, res.trace
        eq_applications = evals * obj_idx.size
    elif method == "grid":
        levels = cfg.grid.levels if budget is None else int(budget)
        res = run_grid(chosen, d=d, levels=levels)
        best, score, evals = res.best, res.best_score, res.evaluations
        eq_applications = evals * obj_idx.size
    elif method == "qlearn":
        q_cfg = QLearningConfig() if budget is None else QLearningConfig(max_epochs=int(budget))
        states = encode_matrix(bundle, np.stack([ds.segments[i].data for i in obj_idx]))
        segments = [ds.segments[i] for i in obj_idx]
        chosen_single = _single_segment_objective(cfg, bundle, anchor, objective)

        def q_env(i: int, levels) -> float:
            action = decode_levels(levels, q_cfg.k)
            return chosen_single(segments[i], action)

        res = run_qlearning(q_env, states, d=d, cfg=q_cfg, seed=cfg.seed)
        best, score, evals, trace = res.params, res.reward_trace[-1], res.evaluations, res.reward_trace
        eq_applications = evals
    else:  # ddpg
        ddpg_cfg = DDPGConfig() if budget is None else DDPGConfig(episodes=int(budget))
        pair = synthesize_pair(cfg.channel)

        def ber_env(params: np.ndarray) -> float:
            ctle, dfe = params_from_action(params, ranges)
            return compute_ber(apply_chain(pair.output, ctle, dfe), pair.bits)

        res = run_ddpg(ber_env, d=d, cfg=ddpg_cfg, seed=cfg.seed)
        best, score, evals, trace = res.params, res.best_reward, res.evaluations, res.reward_trace
        eq_applications = evals
        objective = "ber"
    wall = time.perf_counter() - t0

    before = test_before_areas(cfg, ds, test_idx)
    improvement = improvement_of_action(cfg, ds, test_idx, best, before)
    result = {
        "stamp": stamp(cfg.hash, cfg.seed),
        "method": method,
        "objective": objective,
        "kind": cfg.kind,
        "best_action": [float(v) for v in np.asarray(best)],
        "best_params": [float(v) for v in map_action(np.asarray(best), ranges)],
        "score": float(score),
        "evaluations": int(evals),
        "eq_applications": int(eq_applications),
        "mean_improvement": improvement,
    }
    tag = f"baseline_{method}_{objective}"
    write_json(_path(cfg, f"{tag}.json"), result)
    if trace:
        write_csv(_path(cfg, f"{tag}_trace.csv"), ["step", "score"], ((i, v) for i, v in enumerate(trace)))
    write_timing(_path(cfg, f"{tag}.timing.json"), {"wall_s": wall, "per_eval_s": wall / max(evals, 1)})
    result["wall_s"] = wall
    return result


def _single_segment_objective(cfg: RunConfig, bundle, anchor, objective: str):
    ranges = cfg.ranges()
    swing = cfg.channel.swing
    if objective == "latent":
        return lambda seg, a: latent_si(bundle, anchor, _equalized(seg, a, ranges))
    return lambda seg, a: window_area(_equalized(seg, a, ranges), swing)


def _unit_channel(cfg: RunConfig, unit: int) -> ChannelConfig:
    base = replace(cfg.channel, n_bits=cfg.generalize.unit_bits)
    return perturbed_unit(base, unit)


def _unit_dataset(cfg: RunConfig, unit: int) -> LabeledDataset:
    from .channel import build_dataset

    return build_dataset(_unit_channel(cfg, unit), n_x=cfg.data.n_x, stride=cfg.data.stride, mask=cfg.mask())


def _concat_datasets(parts: list[LabeledDataset], cfg: RunConfig) -> LabeledDataset:
    return LabeledDataset(
        segments=[s for p in parts for s in p.segments],
        inputs=[s for p in parts for s in p.inputs],
        labels=np.concatenate([p.labels for p in parts]),
        mask=cfg.mask(),
        config=cfg.channel,
    )


def run_generalize(cfg: RunConfig, resume: bool = True) -> dict:
    """Train on one set of channel units, evaluate on held-out units.

    Both equalizer kinds are run against the same trained latent scorer;
    the report carries one improvement cell per (kind, unit set) plus
    the train-to-held-out gap.
    """
    gen = cfg.generalize
    walls = {}
    t0 = time.perf_counter()
    train_sets = {u: _stage("gen-data", lambda u=u: _unit_dataset(cfg, u)) for u in gen.train_units}
    heldout_sets = {u: _stage("gen-data", lambda u=u: _unit_dataset(cfg, u)) for u in gen.heldout_units}
    walls["gen_data_s"] = time.perf_counter() - t0

    combined = _concat_datasets(list(train_sets.values()), cfg)
    t0 = time.perf_counter()
    bundle = _stage("train-ae", lambda: train_autoencoder(combined, cfg.ae))
    walls["train_ae_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    valid_latents = encode_matrix(bundle, combined.matrix[combined.labels == 1])
    anchor = _stage("anchor", lambda: compute_anchor(valid_latents, seed=cfg.seed))
    walls["anchor_s"] = time.perf_counter() - t0

    rng = np.random.default_rng([cfg.data.split_seed, 31])
    pool = rng.choice(len(combined), size=min(gen.a2c_segments, len(combined)), replace=False)
    a2c_train = subset_dataset(combined, np.sort(pool))

    cells: dict[str, dict] = {}
    units_detail: dict[str, dict] = {}
    for kind in EQUALIZER_KINDS:
        kind_cfg = replace(cfg, kind=kind)
        ranges = kind_cfg.ranges()
        t0 = time.perf_counter()
        agent = create_agent(bundle.latent_dim, ranges.d, cfg.a2c)
        _stage("train-a2c", lambda: train_a2c(agent, a2c_train, bundle, anchor, cfg.a2c, ranges))
        walls[f"train_a2c_{kind}_s"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        set_improvements = {"train": [], "heldout": []}
        for set_name, unit_sets in (("train", train_sets), ("heldout", heldout_sets)):
            for u, uds in unit_sets.items():
                urng = np.random.default_rng([cfg.data.split_seed, 41, u])
                eval_idx = np.sort(urng.choice(len(uds), size=min(gen.eval_segments, len(uds)), replace=False))
                before, after = [], []
                for i in eval_idx:
                    seg = uds.segments[i]
                    state = encode_matrix(bundle, seg.data[None, :])[0]
                    action = infer_action(agent, state)
                    before.append(window_area(seg, cfg.channel.swing))
                    after.append(window_area(_equalized(seg, action, ranges), cfg.channel.swing))
                _, unit_mean, _, n_defined = summarize_improvements(before, after)
                units_detail.setdefault(kind, {})[f"{set_name}_unit_{u}"] = {
                    "mean_improvement": unit_mean,
                    "n_defined": n_defined,
                }
                if unit_mean is not None:
                    set_improvements[set_name].append(unit_mean)
        walls[f"evaluate_{kind}_s"] = time.perf_counter() - t0
        train_mean = float(np.mean(set_improvements["train"])) if set_improvements["train"] else None
        heldout_mean = float(np.mean(set_improvements["heldout"])) if set_improvements["heldout"] else None
        cells[kind] = {"train": train_mean, "heldout": heldout_mean}

    gaps = {
        kind: (None if None in (v["train"], v["heldout"]) else v["train"] - v["heldout"])
        for kind, v in cells.items()
    }
    report = {
        "stamp": stamp(cfg.hash, cfg.seed),
        "train_units": list(gen.train_units),
        "heldout_units": list(gen.heldout_units),
        "cells": cells,
        "gaps": gaps,
        "units": units_detail,
    }
    write_json(_path(cfg, "generalize_report.json"), report)
    write_timing(_path(cfg, "generalize.timing.json"), walls)
    return report
