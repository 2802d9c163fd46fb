"""Model JSON files and byte-stable JSON output.

Floats are written with 17 significant digits and keys in insertion
order, so identical runs give identical files.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .data import NormStats, zscore_invert
from .density import KernelDensityModel
from .gmm import GmmModel


class ModelFileError(ValueError):
    pass


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def dumps(obj: Any, indent: int = 1) -> str:
    """JSON text with fixed float formatting; numpy values are accepted."""
    pad = " " * indent

    def enc(o, level):
        if isinstance(o, np.ndarray):
            o = o.tolist()
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if o is None:
            return "null"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _fmt_float(float(o))
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            inner = ",\n".join(
                pad * (level + 1) + json.dumps(str(k)) + ": " + enc(v, level + 1) for k, v in o.items()
            )
            return "{\n" + inner + "\n" + pad * level + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in o):
                return "[" + ", ".join(enc(v, level) for v in o) + "]"
            inner = ",\n".join(pad * (level + 1) + enc(v, level + 1) for v in o)
            return "[\n" + inner + "\n" + pad * level + "]"
        raise TypeError(f"cannot serialise {type(o).__name__}")

    return enc(obj, 0) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))


@dataclass
class StoredModel:
    """A fitted model with what is needed to sample in original units."""

    model: KernelDensityModel | GmmModel
    norm_stats: NormStats
    feature_names: tuple[str, ...]
    n_train: int
    provenance: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return "gmm" if isinstance(self.model, GmmModel) else self.model.kind

    def sample(self, n: int, seed: int) -> np.ndarray:
        """Draws in normalised units."""
        return self.model.sample(n, seed)

    def sample_original(self, n: int, seed: int) -> np.ndarray:
        from .data import Dataset

        z = self.sample(n, seed)
        if z.shape[0] == 0:
            return z
        return zscore_invert(Dataset(z, self.feature_names), self.norm_stats).values

    def to_dict(self) -> dict:
        head = {"kind": self.kind, "feature_names": list(self.feature_names), "n_train": self.n_train}
        m = self.model
        if isinstance(m, GmmModel):
            body = {"weights": m.weights, "means": m.means, "covariances": m.covariances}
        else:
            body = {"centers": m.centers, "bandwidths": m.bandwidths, "weights": m.weights}
        return {**head, **body, "norm_stats": self.norm_stats.to_dict(), "seed_provenance": self.provenance}


def save_model(path, stored: StoredModel):
    write_json(path, stored.to_dict())


def _require(d, *keys):
    missing = [k for k in keys if k not in d]
    if missing:
        raise ModelFileError(f"model file lacks field(s): {', '.join(missing)}")


def load_model(path) -> StoredModel:
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(d, dict):
        raise ModelFileError(f"{path}: top level must be an object")
    _require(d, "kind", "weights", "norm_stats")
    kind = d["kind"]
    try:
        if kind == "gmm":
            _require(d, "means", "covariances")
            model = GmmModel(d["weights"], d["means"], d["covariances"])
        elif kind in ("a-kde", "pi-kde"):
            _require(d, "centers", "bandwidths")
            if kind == "a-kde":
                model = KernelDensityModel.a_kde(d["centers"], d["bandwidths"])
            else:
                model = KernelDensityModel.pi_kde(d["centers"], d["bandwidths"], d["weights"])
        else:
            raise ModelFileError(f"unknown model kind {kind!r}")
        stats = NormStats.from_dict(d["norm_stats"])
    except ModelFileError:
        raise
    except (ValueError, TypeError, KeyError, ArithmeticError) as exc:
        raise ModelFileError(f"{path}: invalid model ({exc})") from None
    names = tuple(d.get("feature_names") or [f"x{k}" for k in range(model.n_dims)])
    if len(names) != model.n_dims or stats.means.shape[0] != model.n_dims:
        raise ModelFileError(f"{path}: dimension fields disagree")
    n_train = int(d.get("n_train") or getattr(model, "n_kernels", 1))
    return StoredModel(model, stats, names, n_train, d.get("seed_provenance", {}))
