"""Run configuration: a YAML key-value document validated against a JSON schema."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field, fields
from pathlib import Path

import jsonschema
import yaml

from .kernel_ct import DriftSpec
from .kernel_dt import RateSpec

DEFAULT_THRESHOLDS = {
    "biorthogonality": 1e-7,
    "convolution": 1e-6,
    "m_below_diagonal": 1e-8,
    "m_diagonal": 1e-9,
    "density_identity": 1e-6,
    "discrete_biorthogonality": 1e-8,
    "boundary": 1e-6,
    "fp_ratio_low": 30.0,
    "fp_ratio_high": 300.0,
    # null: 3 binomial standard errors summed over bins
    "mc_matrix": 0.03,
    "mc_warren": 0.05,
    "scaling": 0.05,
    "slack": 0.1,
}

_number = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_opt = lambda schema: {"anyOf": [schema, {"type": "null"}]}  # noqa: E731

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "N": {"type": "integer", "minimum": 1, "maximum": 12},
        "t": _pos,
        "tau": _pos,
        "T": _opt(_pos),
        "T_ladder": {"type": "array", "items": _pos, "minItems": 1},
        "drifts": _opt({"type": "array", "items": _number, "minItems": 1}),
        "rates": _opt({"type": "array", "items": _pos, "minItems": 1}),
        "dt": _pos,
        "dt_ladder": {"type": "array", "items": _pos, "minItems": 1},
        "replicas": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "workers": _opt({"type": "integer", "minimum": 1}),
        "tol": _pos,
        "bin_width": _opt(_pos),
        "output": _opt({"type": "string"}),
        "thresholds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: _opt(_number) for k in DEFAULT_THRESHOLDS},
        },
    },
}


class ConfigError(ValueError):
    """Schema violation; ``path`` names the offending key."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


@dataclass
class SimConfig:
    N: int = 3
    t: float = 1.0
    tau: float = 1.0
    T: float | None = None
    T_ladder: list = field(default_factory=lambda: [100.0, 400.0, 1600.0])
    drifts: list | None = None
    rates: list | None = None
    dt: float = 1e-4
    dt_ladder: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])
    replicas: int = 100_000
    seed: int = 42
    workers: int | None = None
    tol: float = 1e-10
    bin_width: float | None = None
    output: str | None = None
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))

    def drift_spec(self) -> DriftSpec:
        drifts = self.drifts if self.drifts is not None else [float(i) - (self.N - 1) / 2 for i in range(self.N)]
        if len(drifts) != self.N:
            raise ConfigError("drifts", f"expected {self.N} values, got {len(drifts)}")
        return DriftSpec(tuple(float(x) for x in drifts))

    def rate_spec(self) -> RateSpec:
        """Rates from ``rates`` if given, else from ``drifts`` and ``T``, else all ones."""
        if self.rates is not None:
            if len(self.rates) != self.N:
                raise ConfigError("rates", f"expected {self.N} values, got {len(self.rates)}")
            return RateSpec(tuple(float(x) for x in self.rates))
        if self.T is not None:
            return RateSpec.from_drifts(self.drift_spec(), self.T)
        return RateSpec(tuple([1.0] * self.N))

    def to_dict(self) -> dict:
        return {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}


def validate(doc: dict) -> None:
    """Raise :class:`ConfigError` with a dotted key path for the first schema violation."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    # best_match descends into anyOf branches, so nested paths survive
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        path = ".".join(str(p) for p in err.absolute_path)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            path = ".".join([path, extra[0]] if path else [extra[0]])
            raise ConfigError(path, "unknown key")
        raise ConfigError(path, err.message)


def from_dict(doc: dict | None) -> SimConfig:
    doc = dict(doc or {})
    validate(doc)
    thresholds = dict(DEFAULT_THRESHOLDS)
    thresholds.update(doc.pop("thresholds", {}) or {})
    return SimConfig(**doc, thresholds=thresholds)


def load(path: str | Path | None) -> SimConfig:
    """Read a YAML config; ``None`` gives the defaults."""
    if path is None:
        return SimConfig()
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError("", "top level must be a mapping")
    return from_dict(doc)


def override(cfg: SimConfig, **values) -> SimConfig:
    """Copy of ``cfg`` with every non-``None`` value replaced, re-validated."""
    doc = cfg.to_dict()
    doc.update({k: v for k, v in values.items() if v is not None})
    return from_dict(doc)
