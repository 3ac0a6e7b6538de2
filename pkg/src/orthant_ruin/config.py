"""Run configuration: one closed-schema JSON document."""

import json
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from .exceptions import DimensionMismatch, InvalidConfig
from .models import ModelConfig
from .report import DEFAULT_THRESHOLDS, Settings
from .skorokhod import STRICT_TOL

DEFAULTS = {
    "horizon": 2000,
    "n_paths": 100_000,
    "seed": 0,
    "step_cap": 100_000,
    "strict_tol": STRICT_TOL,
    "kmax": 10,
    "identity_horizon": 10,
    "n_jobs": 1,
}


def schema():
    return json.loads(resources.files(__package__).joinpath("config_schema.json").read_text())


@dataclass(frozen=True)
class RunConfig:
    P: np.ndarray
    model: ModelConfig
    initial_capital: np.ndarray
    settings: Settings
    output_dir: str
    formats: tuple

    @property
    def d(self):
        return self.P.shape[0]


def parse_config(doc):
    """Validate a configuration mapping and fill in defaults.

    Raises
    ------
    InvalidConfig
        Schema violation (unknown keys included) or inconsistent dimensions.
    """
    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InvalidConfig(f"config invalid at {where}: {exc.message}") from None
    P = np.asarray(doc["matrix"]["P"], dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionMismatch("matrix.P must be square")
    model = ModelConfig.from_dict(doc["model"])
    d = P.shape[0]
    if model.d != d:
        raise DimensionMismatch(f"model.d = {model.d} but matrix.P is {d}x{d}")
    a = np.asarray(doc.get("initial_capital", [0.0] * d), dtype=np.float64)
    if a.shape != (d,):
        raise DimensionMismatch(f"initial_capital must have {d} entries")
    vals = {k: doc.get(k, v) for k, v in DEFAULTS.items()}
    thresholds = {**DEFAULT_THRESHOLDS, **doc.get("verdict_thresholds", {})}
    if thresholds["consistent"] > thresholds["inconsistent"]:
        raise InvalidConfig("verdict_thresholds: consistent must not exceed inconsistent")
    settings = Settings(horizon=vals["horizon"], n_paths=vals["n_paths"], seed=vals["seed"],
                        step_cap=vals["step_cap"], strict_tol=float(vals["strict_tol"]), kmax=vals["kmax"],
                        identity_horizon=vals["identity_horizon"], n_jobs=vals["n_jobs"], thresholds=thresholds)
    out = doc.get("output", {})
    return RunConfig(P=P, model=model, initial_capital=a, settings=settings,
                     output_dir=out.get("dir", "."), formats=tuple(out.get("formats", ["json", "csv"])))


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InvalidConfig(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config is not valid JSON: {exc}") from None
    return parse_config(doc)
