"""Run configuration stored as a one-section INI file."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields

from .errors import ValidationError

SECTION = "skillspace"


@dataclass
class RunConfig:
    input: str = ""
    model: str = ""
    out: str = "skillspace-out"
    missing_policy: str = "error"
    factors: str = "auto"
    cum_var_threshold: float = 0.85
    tol: float = 1e-4
    max_iter: int = 200
    gamma: float = 1.0
    kaiser_normalize: bool = True
    seed: int = 0
    jobs: int = 1
    # stability
    sweep_ks: str = "6,7,9,10"
    holdout_frac: float = 0.3
    runs: int = 5
    # reliability and outliers
    z_threshold: float = 0.8
    min_items: int = 4
    uniqueness_threshold: float = 0.40
    outlier_quantile: float = 0.995
    shrinkage: str = "auto"
    # novelty
    max_r: float = 0.90
    r2: float = 0.80
    variance_delta: float = 0.01
    mse: float = 0.10
    low_loading: float = 0.3
    angle_deg: float = 15.0
    cosine: float = 0.9
    residual_corr: float = 0.2
    # profiling and selection
    k: str = "auto"
    # labeling
    z_min: float = 1.0
    endpoint_url: str = ""
    token_env: str = ""
    timeout: float = 30.0
    retries: int = 2

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, _coerce(f, getattr(self, f.name)))
        if self.factors != "auto":
            self.n_factors_fixed()
        if self.k != "auto":
            self.k_fixed()
        if self.missing_policy not in ("error", "mean_impute"):
            raise ValidationError("missing_policy must be 'error' or 'mean_impute'")

    def n_factors_fixed(self) -> int | None:
        if self.factors == "auto":
            return None
        return _positive_int("factors", self.factors)

    def k_fixed(self) -> int | None:
        if self.k == "auto":
            return None
        return _positive_int("k", self.k)

    def ks(self) -> list[int]:
        try:
            return [int(v) for v in self.sweep_ks.split(",") if v.strip()]
        except ValueError:
            raise ValidationError(f"sweep_ks must be comma-separated integers, got {self.sweep_ks!r}") from None

    def shrinkage_value(self):
        if self.shrinkage in ("", "none"):
            return None
        if self.shrinkage == "auto":
            return "auto"
        try:
            return float(self.shrinkage)
        except ValueError:
            raise ValidationError(f"shrinkage must be none, auto or a number, got {self.shrinkage!r}") from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def dumps(self) -> str:
        lines = [f"[{SECTION}]"]
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {repr(v) if isinstance(v, float) else v}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str, source: str = "<config>") -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text, source=source)
        except configparser.Error as exc:
            raise ValidationError(f"{source}: {exc}") from None
        if not cp.has_section(SECTION):
            raise ValidationError(f"{source}: missing [{SECTION}] section")
        known = {f.name for f in fields(cls)}
        values = dict(cp.items(SECTION))
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValidationError(f"{source}: unknown key(s): {', '.join(unknown)}")
        return cls(**values)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read(), str(path))


def _positive_int(name, text):
    try:
        v = int(text)
    except ValueError:
        raise ValidationError(f"{name} must be 'auto' or a positive integer, got {text!r}") from None
    if v < 1:
        raise ValidationError(f"{name} must be positive, got {v}")
    return v


def _coerce(f, value):
    kind = f.type if isinstance(f.type, str) else f.type.__name__
    try:
        if kind == "bool":
            if isinstance(value, str):
                low = value.strip().lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                return low in ("true", "1", "yes")
            return bool(value)
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ValidationError(f"config key {f.name!r}: cannot read {value!r} as {kind}") from None
