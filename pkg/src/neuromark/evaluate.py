"""Evaluation protocols: subject-dependent runs with augmentation, plus the
gender/ad/product subject-independent analyses, metric computation and
report rendering.

Every protocol follows the same hygiene rules: test partitions hold
original recordings only, train and test are disjoint, the MinMax
scaler and all hyperparameter tuning see the training partition only,
and every random draw is derived from the run seed, so reports are
bitwise reproducible.
"""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import classify, deepnet
from .augment import DEFAULT_NOISE_FRACTIONS, augment
from .core import (
    ADS_PER_SUBJECT,
    AD_TYPES,
    Dataset,
    FormatError,
    ORIGINAL,
    ParameterError,
    Reaction,
    Recording,
    ShapeError,
    validate_recording,
)
from .features import apply_scaler, extract, fit_scaler
from .preprocess import preprocess_chain

MODEL_CHOICES = ("knn", "svm", "dt", "nb", "dl")
MODEL_TITLES = {"knn": "KNN", "svm": "SVM", "dt": "DT", "nb": "NB", "dl": "DL"}
PROTOCOLS = ("subject_dependent", "gender", "ad_based", "product_based")

_ROW_LABELS = (("Acc.", "accuracy"), ("F1", "f1"), ("P", "precision"), ("R", "recall"))


# --- metrics -----------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: tuple[str, ...] = ()


def _as_int_label(value) -> int:
    if isinstance(value, Reaction):
        return 1 if value is Reaction.POSITIVE else 0
    return int(value)


def compute_metrics(predictions, truths) -> Metrics:
    """Binary metrics with the positive reaction as the positive class.

    Zero-denominator precision/recall/F1 come back as 0 and are listed
    in the ``degenerate`` flags.
    """
    pred = np.array([_as_int_label(p) for p in predictions])
    true = np.array([_as_int_label(t) for t in truths])
    if len(pred) != len(true):
        raise ShapeError(f"{len(pred)} predictions but {len(true)} truths")
    if len(pred) == 0:
        raise ShapeError("metrics need at least one prediction")
    tp = int(np.sum((pred == 1) & (true == 1)))
    fp = int(np.sum((pred == 1) & (true == 0)))
    fn = int(np.sum((pred == 0) & (true == 1)))
    tn = int(np.sum((pred == 0) & (true == 0)))
    degenerate = []
    accuracy = (tp + tn) / len(pred)
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision, degenerate = 0.0, degenerate + ["precision"]
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall, degenerate = 0.0, degenerate + ["recall"]
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1, degenerate = 0.0, degenerate + ["f1"]
    return Metrics(accuracy=accuracy, precision=precision, recall=recall, f1=f1,
                   degenerate=tuple(degenerate))


def mean_metrics(items) -> Metrics:
    items = list(items)
    if not items:
        raise ShapeError("cannot average an empty metrics list")
    flags = sorted({flag for m in items for flag in m.degenerate})
    return Metrics(
        accuracy=float(np.mean([m.accuracy for m in items])),
        precision=float(np.mean([m.precision for m in items])),
        recall=float(np.mean([m.recall for m in items])),
        f1=float(np.mean([m.f1 for m in items])),
        degenerate=tuple(flags),
    )


def reaction_distribution(ds: Dataset) -> dict[int, float | None]:
    """Fraction of positive ground-truth labels per ad type (originals only).

    Ad types with no recordings are flagged by a None entry.
    """
    counts = {ad: [0, 0] for ad in AD_TYPES}
    for i in ds.originals():
        meta = ds.recordings[i].meta
        counts[meta.ad_type][0] += 1
        if meta.reaction is Reaction.POSITIVE:
            counts[meta.ad_type][1] += 1
    return {ad: (pos / total if total else None) for ad, (total, pos) in counts.items()}


# --- split planning ----------------------------------------------------------

@dataclass(frozen=True)
class SplitPlan:
    protocol: str
    trials: int = 5
    seed: int = 0
    sd_test_size: int = 20
    group_test_size: int = 60
    pooled_gender: bool = False

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ParameterError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")
        if self.sd_test_size < 1 or self.group_test_size < 1:
            raise ParameterError("test sizes must be >= 1")


@dataclass(frozen=True)
class TrialSplit:
    group: str
    unit: str
    trial: int
    train_idx: tuple[int, ...]
    test_idx: tuple[int, ...]


def _subject_originals(ds: Dataset) -> dict[str, list[int]]:
    by_subject: dict[str, list[int]] = {}
    for i in ds.originals():
        by_subject.setdefault(ds.recordings[i].meta.subject_id, []).append(i)
    return dict(sorted(by_subject.items()))


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _sample_split(indices: list[int], test_size: int, rng) -> tuple[tuple, tuple]:
    indices = np.asarray(indices)
    test = rng.choice(len(indices), size=test_size, replace=False)
    mask = np.zeros(len(indices), dtype=bool)
    mask[test] = True
    return tuple(int(v) for v in indices[~mask]), tuple(int(v) for v in indices[mask])


def plan_splits(ds: Dataset, plan: SplitPlan) -> list[TrialSplit]:
    """Materialize every trial's train/test partition for a protocol.

    All partitions are drawn from original recordings only, so no
    augmented entry can ever reach a test set.
    """
    splits: list[TrialSplit] = []
    if plan.protocol in ("subject_dependent", "gender") and not plan.pooled_gender:
        by_subject = _subject_originals(ds)
        if not by_subject:
            raise ShapeError("dataset contains no original recordings")
        for subj_idx, (subject, indices) in enumerate(by_subject.items()):
            if len(indices) != ADS_PER_SUBJECT:
                raise ShapeError(
                    f"subject {subject} has {len(indices)} original recordings, "
                    f"expected {ADS_PER_SUBJECT}")
            if plan.sd_test_size >= len(indices):
                raise ShapeError(
                    f"test size {plan.sd_test_size} leaves no training data")
            for trial in range(plan.trials):
                rng = np.random.default_rng(
                    np.random.SeedSequence([plan.seed, subj_idx, trial, 0x51]))
                train, test = _sample_split(indices, plan.sd_test_size, rng)
                splits.append(TrialSplit(group=subject, unit="subject", trial=trial,
                                         train_idx=train, test_idx=test))
        return splits

    if plan.protocol == "gender":  # pooled variant
        pools: dict[str, list[int]] = {}
        for i in ds.originals():
            pools.setdefault(ds.recordings[i].meta.gender, []).append(i)
        groups = sorted(pools.items())
        unit = "pool"
        test_size = plan.group_test_size
    elif plan.protocol == "ad_based":
        pools = {}
        for i in ds.originals():
            pools.setdefault(str(ds.recordings[i].meta.ad_type), []).append(i)
        groups = sorted(pools.items())
        unit = "ad_type"
        test_size = plan.group_test_size
    elif plan.protocol == "product_based":
        pools = {}
        for i in ds.originals():
            pools.setdefault(ds.recordings[i].meta.product, []).append(i)
        groups = sorted(pools.items())
        unit = "product"
        test_size = plan.group_test_size
    else:
        raise ParameterError(f"unsupported protocol {plan.protocol!r}")

    for group_idx, (group, indices) in enumerate(groups):
        if test_size + 4 > len(indices):
            raise ShapeError(
                f"group {group} has {len(indices)} recordings; too few for a "
                f"test partition of {test_size}")
        for trial in range(plan.trials):
            rng = np.random.default_rng(
                np.random.SeedSequence([plan.seed, group_idx, trial, 0x52]))
            train, test = _sample_split(indices, test_size, rng)
            splits.append(TrialSplit(group=group, unit=unit, trial=trial,
                                     train_idx=train, test_idx=test))
    return splits


# --- feature pipeline ---------------------------------------------------------

def pipeline_one(rec: Recording) -> tuple[np.ndarray, np.ndarray]:
    """Preprocess one recording and extract (feature vector, cleaned samples)."""
    validate_recording(rec, min_samples=256)
    cleaned = preprocess_chain(rec)
    return extract(cleaned).as_array(), np.asarray(cleaned.samples)


def _compute_batch(recordings, jobs: int):
    if jobs > 1 and len(recordings) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(pipeline_one, recordings, chunksize=8))
    return [pipeline_one(rec) for rec in recordings]


class _FeatureCache:
    """Lazily computed features/cleaned signals for original recordings."""

    def __init__(self, ds: Dataset, jobs: int = 1):
        self.ds = ds
        self.jobs = jobs
        self._store: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def fetch(self, indices) -> tuple[np.ndarray, np.ndarray]:
        missing = [i for i in indices if i not in self._store]
        if missing:
            results = _compute_batch([self.ds.recordings[i] for i in missing], self.jobs)
            self._store.update(zip(missing, results))
        feats = np.stack([self._store[i][0] for i in indices])
        signals = np.stack([self._store[i][1] for i in indices])
        return feats, signals

    def fresh(self, recordings) -> tuple[np.ndarray, np.ndarray]:
        results = _compute_batch(recordings, self.jobs)
        return np.stack([r[0] for r in results]), np.stack([r[1] for r in results])


def _labels_of(recs) -> np.ndarray:
    return classify.labels_to_ints([rec.meta.reaction for rec in recs])


# --- model evaluation over one trial -------------------------------------------

def _evaluate_trial(models, X_train, y_train, sig_train, X_test, y_test, sig_test,
                    seed_parts: tuple[int, ...], grids, dl_spec: deepnet.NetSpec):
    scaler = fit_scaler(X_train)
    X_tr = apply_scaler(scaler, X_train)
    X_te = apply_scaler(scaler, X_test)
    results: dict[str, Metrics] = {}
    for model_idx, kind in enumerate(models):
        seed = _derive_seed(*seed_parts, model_idx)
        if kind == "dl":
            spec = replace(dl_spec, feature_dim=X_tr.shape[1],
                           signal_len=sig_train.shape[1], seed=seed)
            params, _ = deepnet.train(spec, X_tr, deepnet.standardize_signals(sig_train),
                                      y_train)
            pred, _ = deepnet.predict(spec, params, X_te,
                                      deepnet.standardize_signals(sig_test))
        else:
            grid = (grids or {}).get(kind)
            best = classify.grid_search(kind, X_tr, y_train, grid, seed=seed)
            model = classify.fit(kind, X_tr, y_train, best, seed=_derive_seed(seed, 1))
            pred, _ = classify.predict_many(model, X_te)
        results[kind] = compute_metrics(pred, y_test)
    return results


def _check_hygiene(ds: Dataset, split: TrialSplit):
    overlap = set(split.train_idx) & set(split.test_idx)
    assert not overlap, f"train/test overlap in {split.group} trial {split.trial}"
    for i in split.test_idx:
        assert ds.recordings[i].provenance == ORIGINAL, \
            f"augmented recording {i} leaked into a test partition"


def _validate_models(models) -> tuple[str, ...]:
    models = tuple(models)
    if not models:
        raise ParameterError("at least one model is required")
    for kind in models:
        if kind not in MODEL_CHOICES:
            raise ParameterError(f"unknown model {kind!r}; expected one of {MODEL_CHOICES}")
    return models


# --- reports -------------------------------------------------------------------

@dataclass(frozen=True)
class GroupResult:
    name: str
    unit: str
    n_units: int
    metrics: dict[str, Metrics]
    detail: dict[str, dict[str, list[Metrics]]] = field(default_factory=dict)


@dataclass(frozen=True)
class EvalReport:
    protocol: str
    models: tuple[str, ...]
    trials: int
    seed: int
    groups: tuple[GroupResult, ...]
    reaction_fractions: dict[int, float | None] | None = None


def _sd_per_subject(ds, models, trials, seed, *, test_size, noise_fractions,
                    grids, dl_spec, jobs, permute_train_labels):
    """Run the augmented per-subject procedure; returns per-subject trial metrics."""
    plan = SplitPlan("subject_dependent", trials=trials, seed=seed,
                     sd_test_size=test_size)
    splits = plan_splits(ds, plan)
    cache = _FeatureCache(ds, jobs)
    copies = len(noise_fractions)
    results: dict[str, dict[str, list[Metrics]]] = {}
    subjects = sorted({s.group for s in splits})
    subject_index = {s: i for i, s in enumerate(subjects)}
    for split in splits:
        _check_hygiene(ds, split)
        subj_idx = subject_index[split.group]
        train_recs = [ds.recordings[i] for i in split.train_idx]
        augmented = augment(train_recs, copies, noise_fractions,
                            seed=_derive_seed(seed, subj_idx, split.trial, 0xA6))
        new_copies = augmented[len(train_recs):]
        feats_orig, sig_orig = cache.fetch(split.train_idx)
        feats_copy, sig_copy = cache.fresh(new_copies)
        X_train = np.concatenate([feats_orig, feats_copy])
        sig_train = np.concatenate([sig_orig, sig_copy])
        y_train = np.concatenate([_labels_of(train_recs), _labels_of(new_copies)])
        if permute_train_labels:
            rng = np.random.default_rng(
                np.random.SeedSequence([seed, subj_idx, split.trial, 0x9E]))
            y_train = y_train[rng.permutation(len(y_train))]
        X_test, sig_test = cache.fetch(split.test_idx)
        y_test = _labels_of([ds.recordings[i] for i in split.test_idx])
        trial_metrics = _evaluate_trial(
            models, X_train, y_train, sig_train, X_test, y_test, sig_test,
            seed_parts=(seed, subj_idx, split.trial), grids=grids, dl_spec=dl_spec)
        bucket = results.setdefault(split.group, {kind: [] for kind in models})
        for kind, metrics in trial_metrics.items():
            bucket[kind].append(metrics)
    return results


def _default_dl_spec() -> deepnet.NetSpec:
    return deepnet.NetSpec()


def run_subject_dependent(ds: Dataset, models, trials: int = 5, seed: int = 0, *,
                          test_size: int = 20,
                          noise_fractions=DEFAULT_NOISE_FRACTIONS,
                          grids: dict | None = None,
                          dl_spec: deepnet.NetSpec | None = None,
                          jobs: int = 1,
                          permute_train_labels: bool = False) -> EvalReport:
    """Per subject and trial: hold out ``test_size`` originals, augment the
    rest six-fold, tune and fit each model, score the held-out originals.
    Metrics are averaged over trials, then over subjects."""
    models = _validate_models(models)
    per_subject = _sd_per_subject(
        ds, models, trials, seed, test_size=test_size,
        noise_fractions=noise_fractions, grids=grids,
        dl_spec=dl_spec or _default_dl_spec(), jobs=jobs,
        permute_train_labels=permute_train_labels)
    subject_means = {
        subject: {kind: mean_metrics(per_trial) for kind, per_trial in by_model.items()}
        for subject, by_model in per_subject.items()
    }
    overall = {kind: mean_metrics([subject_means[s][kind] for s in subject_means])
               for kind in models}
    group = GroupResult(name="all", unit="subject", n_units=len(subject_means),
                        metrics=overall, detail=per_subject)
    return EvalReport(protocol="subject_dependent", models=models, trials=trials,
                      seed=seed, groups=(group,))


def run_gender(ds: Dataset, models, trials: int = 5, seed: int = 0, *,
               test_size: int = 20, noise_fractions=DEFAULT_NOISE_FRACTIONS,
               grids: dict | None = None, dl_spec: deepnet.NetSpec | None = None,
               jobs: int = 1, permute_train_labels: bool = False,
               pooled: bool = False) -> EvalReport:
    """Subject-dependent runs regrouped by gender (default), or pooled
    per-gender partitions when ``pooled`` is set."""
    models = _validate_models(models)
    if pooled:
        return _run_pooled(ds, models, trials, seed, protocol="gender",
                           test_size=test_size, grids=grids,
                           dl_spec=dl_spec or _default_dl_spec(), jobs=jobs,
                           permute_train_labels=permute_train_labels,
                           noise_fractions=noise_fractions)
    per_subject = _sd_per_subject(
        ds, models, trials, seed, test_size=test_size,
        noise_fractions=noise_fractions, grids=grids,
        dl_spec=dl_spec or _default_dl_spec(), jobs=jobs,
        permute_train_labels=permute_train_labels)
    gender_of = {}
    for i in ds.originals():
        meta = ds.recordings[i].meta
        gender_of[meta.subject_id] = meta.gender
    groups = []
    for gender in ("male", "female"):
        members = sorted(s for s in per_subject if gender_of[s] == gender)
        if not members:
            continue
        subject_means = {
            s: {kind: mean_metrics(per_subject[s][kind]) for kind in models}
            for s in members
        }
        overall = {kind: mean_metrics([subject_means[s][kind] for s in members])
                   for kind in models}
        groups.append(GroupResult(
            name=gender, unit="subject", n_units=len(members), metrics=overall,
            detail={s: per_subject[s] for s in members}))
    return EvalReport(protocol="gender", models=models, trials=trials, seed=seed,
                      groups=tuple(groups))


def _run_pooled(ds, models, trials, seed, *, protocol, test_size, grids, dl_spec,
                jobs, permute_train_labels, noise_fractions=None):
    """Shared driver for the pooled protocols (gender pools, ad, product)."""
    plan = SplitPlan(protocol, trials=trials, seed=seed,
                     group_test_size=test_size, pooled_gender=(protocol == "gender"))
    splits = plan_splits(ds, plan)
    cache = _FeatureCache(ds, jobs)
    by_group: dict[str, dict[str, list[Metrics]]] = {}
    group_names = sorted({s.group for s in splits})
    group_index = {g: i for i, g in enumerate(group_names)}
    unit = splits[0].unit if splits else "pool"
    for split in splits:
        _check_hygiene(ds, split)
        gi = group_index[split.group]
        X_train, sig_train = cache.fetch(split.train_idx)
        y_train = _labels_of([ds.recordings[i] for i in split.train_idx])
        if noise_fractions is not None and plan.pooled_gender:
            train_recs = [ds.recordings[i] for i in split.train_idx]
            augmented = augment(train_recs, len(noise_fractions), noise_fractions,
                                seed=_derive_seed(seed, gi, split.trial, 0xA7))
            new_copies = augmented[len(train_recs):]
            feats_copy, sig_copy = cache.fresh(new_copies)
            X_train = np.concatenate([X_train, feats_copy])
            sig_train = np.concatenate([sig_train, sig_copy])
            y_train = np.concatenate([y_train, _labels_of(new_copies)])
        if permute_train_labels:
            rng = np.random.default_rng(
                np.random.SeedSequence([seed, gi, split.trial, 0x9E]))
            y_train = y_train[rng.permutation(len(y_train))]
        X_test, sig_test = cache.fetch(split.test_idx)
        y_test = _labels_of([ds.recordings[i] for i in split.test_idx])
        trial_metrics = _evaluate_trial(
            models, X_train, y_train, sig_train, X_test, y_test, sig_test,
            seed_parts=(seed, gi, split.trial), grids=grids, dl_spec=dl_spec)
        bucket = by_group.setdefault(split.group, {kind: [] for kind in models})
        for kind, metrics in trial_metrics.items():
            bucket[kind].append(metrics)
    groups = tuple(
        GroupResult(name=name, unit=unit, n_units=1,
                    metrics={kind: mean_metrics(per_trial)
                             for kind, per_trial in by_group[name].items()},
                    detail={"pool": by_group[name]})
        for name in group_names
    )
    fractions = reaction_distribution(ds) if protocol == "ad_based" else None
    return EvalReport(protocol=protocol, models=models, trials=trials, seed=seed,
                      groups=groups, reaction_fractions=fractions)


def run_ad_based(ds: Dataset, models, trials: int = 5, seed: int = 0, *,
                 test_size: int = 60, grids: dict | None = None,
                 dl_spec: deepnet.NetSpec | None = None, jobs: int = 1,
                 permute_train_labels: bool = False) -> EvalReport:
    """Per ad type and trial: hold out ``test_size`` recordings from the ad
    type's pool, train on the rest without augmentation."""
    models = _validate_models(models)
    return _run_pooled(ds, models, trials, seed, protocol="ad_based",
                       test_size=test_size, grids=grids,
                       dl_spec=dl_spec or _default_dl_spec(), jobs=jobs,
                       permute_train_labels=permute_train_labels)


def run_product_based(ds: Dataset, models, trials: int = 5, seed: int = 0, *,
                      test_size: int = 60, grids: dict | None = None,
                      dl_spec: deepnet.NetSpec | None = None, jobs: int = 1,
                      permute_train_labels: bool = False) -> EvalReport:
    """Per product and trial: hold out ``test_size`` recordings from the
    product's pool, train on the rest without augmentation."""
    models = _validate_models(models)
    return _run_pooled(ds, models, trials, seed, protocol="product_based",
                       test_size=test_size, grids=grids,
                       dl_spec=dl_spec or _default_dl_spec(), jobs=jobs,
                       permute_train_labels=permute_train_labels)


# --- serialization --------------------------------------------------------------

def _metrics_to_dict(m: Metrics) -> dict:
    return {"accuracy": m.accuracy, "precision": m.precision, "recall": m.recall,
            "f1": m.f1, "degenerate": list(m.degenerate)}


def _metrics_from_dict(d: dict) -> Metrics:
    return Metrics(accuracy=d["accuracy"], precision=d["precision"],
                   recall=d["recall"], f1=d["f1"],
                   degenerate=tuple(d["degenerate"]))


def report_to_json(report: EvalReport) -> str:
    doc = {
        "protocol": report.protocol,
        "models": list(report.models),
        "trials": report.trials,
        "seed": report.seed,
        "groups": [
            {
                "name": g.name,
                "unit": g.unit,
                "n_units": g.n_units,
                "metrics": {k: _metrics_to_dict(m) for k, m in g.metrics.items()},
                "detail": {
                    unit: {k: [_metrics_to_dict(m) for m in per_trial]
                           for k, per_trial in by_model.items()}
                    for unit, by_model in g.detail.items()
                },
            }
            for g in report.groups
        ],
        "reaction_fractions": (
            None if report.reaction_fractions is None
            else {str(k): v for k, v in report.reaction_fractions.items()}),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> EvalReport:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"report is not valid JSON ({exc})") from None
    groups = tuple(
        GroupResult(
            name=g["name"],
            unit=g["unit"],
            n_units=g["n_units"],
            metrics={k: _metrics_from_dict(m) for k, m in g["metrics"].items()},
            detail={
                unit: {k: [_metrics_from_dict(m) for m in per_trial]
                       for k, per_trial in by_model.items()}
                for unit, by_model in g["detail"].items()
            },
        )
        for g in doc["groups"]
    )
    fractions = doc.get("reaction_fractions")
    if fractions is not None:
        fractions = {int(k): v for k, v in fractions.items()}
    return EvalReport(protocol=doc["protocol"], models=tuple(doc["models"]),
                      trials=doc["trials"], seed=doc["seed"], groups=groups,
                      reaction_fractions=fractions)


def _ordered_models(report: EvalReport) -> list[str]:
    return [kind for kind in MODEL_CHOICES if kind in report.models]


def render_csv(report: EvalReport) -> str:
    lines = []
    models = _ordered_models(report)
    for group in report.groups:
        lines.append(f"# {report.protocol} group={group.name} "
                     f"({group.n_units} {group.unit}s, {report.trials} trials)")
        lines.append("Models," + ",".join(MODEL_TITLES[m] for m in models))
        for label, attr in _ROW_LABELS:
            cells = [repr(getattr(group.metrics[m], attr)) for m in models]
            lines.append(f"{label}," + ",".join(cells))
    if report.reaction_fractions is not None:
        lines.append("# positive reaction fraction per ad type")
        lines.append("AdType,PositiveFraction")
        for ad, fraction in sorted(report.reaction_fractions.items()):
            lines.append(f"{ad},{'' if fraction is None else repr(fraction)}")
    return "\n".join(lines) + "\n"


def render_table(report: EvalReport) -> str:
    models = _ordered_models(report)
    lines = []
    width = 8
    for group in report.groups:
        lines.append(f"{report.protocol} | group {group.name} "
                     f"({group.n_units} {group.unit}s, {report.trials} trials)")
        header = "Models".ljust(8) + "".join(MODEL_TITLES[m].rjust(width) for m in models)
        lines.append(header)
        for label, attr in _ROW_LABELS:
            row = label.ljust(8)
            for m in models:
                row += f"{getattr(group.metrics[m], attr):.3f}".rjust(width)
            lines.append(row)
        lines.append("")
    if report.reaction_fractions is not None:
        lines.append("positive reaction fraction per ad type")
        for ad, fraction in sorted(report.reaction_fractions.items()):
            shown = "n/a" if fraction is None else f"{fraction:.3f}"
            lines.append(f"  ad type {ad}: {shown}")
        lines.append("")
    return "\n".join(lines)
