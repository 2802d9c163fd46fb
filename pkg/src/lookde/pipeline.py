"""Two-step Monte-Carlo model comparison.

Step one collects distributions of sample-test scores: baseline scores from
train/test subsample pairs, and model scores from model-sample/test
subsample pairs. Step two compares each model's score distribution with
the baseline using the one-dimensional model tests. Lower is better.

Every random draw takes its seed from ``(master_seed, tag, index)``, so any
part of a run can be repeated exactly.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import asdict, dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from .data import Dataset
from .density import as_matrix
from .stats import ENERGY, MMD, ModelTest, SampleTestKind, model_test

MODEL_TESTS = (ModelTest.KS, ModelTest.CVM, ModelTest.DELTA_MEAN)
SAMPLE_TESTS = (MMD, ENERGY)


class Samplable(Protocol):
    def sample(self, n: int, seed: int) -> np.ndarray: ...


class EmpiricalModel:
    """Resamples rows of a fixed matrix with replacement."""

    def __init__(self, values):
        self.values = as_matrix(values)

    def sample(self, n: int, seed: int) -> np.ndarray:
        idx = np.random.default_rng(seed).integers(self.values.shape[0], size=n)
        return self.values[idx]


@dataclass(frozen=True)
class PipelineConfig:
    n_mc: int = 1000
    subsample_ratio: float = 0.5
    n_model_samples: int | None = None
    master_seed: int = 0

    def __post_init__(self):
        if self.n_mc < 1:
            raise ValueError("n_mc must be at least 1")
        if not 0.0 < self.subsample_ratio < 1.0:
            raise ValueError("subsample_ratio must lie in (0, 1)")
        if self.n_model_samples is not None and self.n_model_samples < 1:
            raise ValueError("n_model_samples must be positive")

    def subsample_size(self, n_test: int) -> int:
        n = math.floor(self.subsample_ratio * n_test)
        if n < 2:
            raise ValueError(f"subsample size {n} < 2 for a test set of {n_test} rows")
        return n


def derive_seed(master_seed: int, tag: str, index: int = 0) -> int:
    """Deterministic 64-bit seed for one draw of one purpose."""
    ss = np.random.SeedSequence([master_seed, zlib.crc32(tag.encode()), index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def subsample(data, n: int, seed: int) -> np.ndarray:
    """``n`` rows drawn uniformly without replacement."""
    x = data.values if isinstance(data, Dataset) else as_matrix(data)
    if n > x.shape[0]:
        raise ValueError(f"cannot draw {n} rows without replacement from {x.shape[0]}")
    idx = np.random.default_rng(seed).choice(x.shape[0], size=n, replace=False)
    return x[idx]


@dataclass
class ScoreSample:
    model_id: str
    test: str
    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, float)
        if not np.all(np.isfinite(self.scores)):
            raise ValueError(f"non-finite scores for {self.model_id}/{self.test}")


def _values(d):
    return d.values if isinstance(d, Dataset) else as_matrix(d)


def baseline_scores(train, test, t: SampleTestKind, cfg: PipelineConfig) -> ScoreSample:
    """Sample-test scores between test and train subsamples of equal size."""
    xtr, xte = _values(train), _values(test)
    n = cfg.subsample_size(xte.shape[0])
    if n > xtr.shape[0]:
        raise ValueError(f"subsample size {n} exceeds the {xtr.shape[0]} training rows")
    scores = np.empty(cfg.n_mc)
    for i in range(cfg.n_mc):
        d_test = subsample(xte, n, derive_seed(cfg.master_seed, f"baseline/{t.name}/test", i))
        d_base = subsample(xtr, n, derive_seed(cfg.master_seed, f"baseline/{t.name}/train", i))
        scores[i] = t(d_test, d_base)
    return ScoreSample("baseline", t.name, scores)


def draw_model_sample(model: Samplable, model_id: str, n_model: int, cfg: PipelineConfig) -> np.ndarray:
    return as_matrix(model.sample(n_model, derive_seed(cfg.master_seed, f"model/{model_id}/draw")))


def model_scores(
    model: Samplable,
    test,
    t: SampleTestKind,
    cfg: PipelineConfig,
    model_id: str = "model",
    n_train: int | None = None,
    model_sample: np.ndarray | None = None,
) -> ScoreSample:
    """Sample-test scores between model-sample and test subsamples.

    The model is sampled once (``n_model_samples`` points, defaulting to
    ``n_train``) and then subsampled in every Monte-Carlo iteration.
    """
    xte = _values(test)
    n = cfg.subsample_size(xte.shape[0])
    if model_sample is None:
        n_model = cfg.n_model_samples or n_train
        if n_model is None:
            raise ValueError("set n_model_samples or pass n_train")
        model_sample = draw_model_sample(model, model_id, n_model, cfg)
    if n > model_sample.shape[0]:
        raise ValueError(f"subsample size {n} exceeds the {model_sample.shape[0]} model samples")
    scores = np.empty(cfg.n_mc)
    for i in range(cfg.n_mc):
        d_test = subsample(xte, n, derive_seed(cfg.master_seed, f"model/{model_id}/{t.name}/test", i))
        d_model = subsample(model_sample, n, derive_seed(cfg.master_seed, f"model/{model_id}/{t.name}/model", i))
        scores[i] = t(d_test, d_model)
    return ScoreSample(model_id, t.name, scores)


def ecdf(scores) -> tuple[np.ndarray, np.ndarray]:
    """Sorted values and cumulative fractions ``k/n``; ties are kept."""
    v = np.sort(np.asarray(scores, float).ravel())
    if v.size == 0:
        raise ValueError("empty score list")
    return v, np.arange(1, v.size + 1) / v.size


def compare_scores(base: ScoreSample, other: ScoreSample) -> dict[str, float]:
    return {mt.value: model_test(mt, base.scores, other.scores) for mt in MODEL_TESTS}


@dataclass
class ComparisonReport:
    config: dict
    baseline: dict[str, ScoreSample]
    models: dict[str, dict[str, ScoreSample]]
    comparison: dict[str, dict[str, dict[str, float]]] = field(default_factory=dict)

    def entries(self):
        """Flat ``(model, sample_test, model_test, score)`` tuples."""
        for m, by_test in self.comparison.items():
            for ts, by_mt in by_test.items():
                for tm, v in by_mt.items():
                    yield m, ts, tm, v

    def ecdf_table(self):
        """``(series, sample_test, value, fraction)`` rows for every score sample."""
        series = [("baseline", s) for s in self.baseline.values()]
        series += [(m, s) for m, by in self.models.items() for s in by.values()]
        for name, s in series:
            for v, f in zip(*ecdf(s.scores)):
                yield name, s.test, float(v), float(f)

    def to_dict(self) -> dict:
        ecd = {}
        for name, ts, v, f in self.ecdf_table():
            e = ecd.setdefault(name, {}).setdefault(ts, {"values": [], "fractions": []})
            e["values"].append(v)
            e["fractions"].append(f)
        return {
            "config": self.config,
            "baseline": {t: s.scores.tolist() for t, s in self.baseline.items()},
            "models": {m: {t: s.scores.tolist() for t, s in by.items()} for m, by in self.models.items()},
            "comparison": self.comparison,
            "ecdf": ecd,
        }


def compare_models(
    models: Mapping[str, Samplable] | Sequence[tuple[str, Samplable]],
    train,
    test,
    cfg: PipelineConfig,
    sample_tests: Sequence[SampleTestKind] = SAMPLE_TESTS,
) -> ComparisonReport:
    """Run the full two-step comparison for every model."""
    items = list(models.items()) if isinstance(models, Mapping) else list(models)
    names = [m for m, _ in items]
    if len(set(names)) != len(names) or "baseline" in names:
        raise ValueError("model names must be unique and not 'baseline'")
    xtr, xte = _values(train), _values(test)
    n_model = cfg.n_model_samples or xtr.shape[0]

    baseline = {t.name: baseline_scores(xtr, xte, t, cfg) for t in sample_tests}
    per_model = {}
    for name, model in items:
        drawn = draw_model_sample(model, name, n_model, cfg)
        per_model[name] = {
            t.name: model_scores(model, xte, t, cfg, name, model_sample=drawn) for t in sample_tests
        }
    comparison = {
        name: {t: compare_scores(baseline[t], s) for t, s in by.items()}
        for name, by in per_model.items()
    }
    config = {**asdict(cfg), "n_model_samples": n_model,
              "subsample_size": cfg.subsample_size(xte.shape[0]),
              "sample_tests": [t.name for t in sample_tests],
              "model_tests": [m.value for m in MODEL_TESTS]}
    return ComparisonReport(config, baseline, per_model, comparison)
