"""Model parameters, validation and the homophily acceptance convention.

Everything here is immutable. The simulator and the analytic engine both read
link-acceptance probabilities through :func:`acceptance_probability` so the
two sides cannot drift apart on the off-diagonal convention (a cross-colour
link is accepted with ``1 - rho`` of the *follower's* colour).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import ConfigError, ConstraintError, NotAnalytic, ParamValidationError, RangeError


class Color(enum.IntEnum):
    BLUE = 0
    RED = 1

    @property
    def other(self) -> "Color":
        return Color.RED if self is Color.BLUE else Color.BLUE

    @property
    def letter(self) -> str:
        return "R" if self is Color.RED else "B"

    @classmethod
    def from_letter(cls, s: str) -> "Color":
        try:
            return {"R": cls.RED, "B": cls.BLUE}[s.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown colour {s!r}") from None


@dataclass(frozen=True)
class HomophilyMatrix:
    """One event's homophily pair; the 2x2 matrix is derived on demand."""

    rho_blue: float
    rho_red: float

    def as_matrix(self):
        """``[[rho_B, 1-rho_R], [1-rho_B, rho_R]]``, rows/cols ordered (blue, red)."""
        return [
            [self.rho_blue, 1.0 - self.rho_red],
            [1.0 - self.rho_blue, self.rho_red],
        ]

    def diagonal(self, color: Color) -> float:
        return self.rho_red if color is Color.RED else self.rho_blue


@dataclass(frozen=True)
class ModelParams:
    r: float
    p: float
    q: float
    E1: HomophilyMatrix
    E2: HomophilyMatrix
    E3: HomophilyMatrix
    delta_in: float
    delta_out: float

    @classmethod
    def shared(cls, r, p, q, rho_blue, rho_red, delta, delta_out=None) -> "ModelParams":
        """One homophily matrix for all three events (the analytically tractable regime)."""
        E = HomophilyMatrix(float(rho_blue), float(rho_red))
        d_out = delta if delta_out is None else delta_out
        return cls(float(r), float(p), float(q), E, E, E, float(delta), float(d_out))

    def matrix(self, event: int) -> HomophilyMatrix:
        if event == 1:
            return self.E1
        if event == 2:
            return self.E2
        if event == 3:
            return self.E3
        raise ValueError(f"event must be 1, 2 or 3, got {event!r}")

    def to_mapping(self) -> dict:
        out = {"r": self.r, "p": self.p, "q": self.q,
               "delta_in": self.delta_in, "delta_out": self.delta_out}
        for i, E in enumerate((self.E1, self.E2, self.E3), start=1):
            out[f"rho_blue_e{i}"] = E.rho_blue
            out[f"rho_red_e{i}"] = E.rho_red
        return out


@dataclass(frozen=True)
class AnalyticParams:
    """Single shared homophily matrix and single delta.

    ``r_blue`` is stored rather than recomputed as ``1 - r`` so that
    :func:`color_swap` is an exact (bitwise) involution.
    """

    r: float
    p: float
    q: float
    rho_blue: float
    rho_red: float
    delta: float
    r_blue: float = field(default=None)

    def __post_init__(self):
        if self.r_blue is None:
            object.__setattr__(self, "r_blue", 1.0 - self.r)

    @property
    def s(self) -> float:
        """Probability that a step adds a node (events 1 or 2)."""
        return self.p + self.q

    def to_model(self) -> ModelParams:
        return ModelParams.shared(self.r, self.p, self.q, self.rho_blue, self.rho_red, self.delta)


@dataclass(frozen=True)
class ThetaPair:
    """Red share of the total in-degree and out-degree mass.

    Complements are stored for the same reason as ``AnalyticParams.r_blue``.
    """

    theta_in: float
    theta_out: float
    blue_in: float = field(default=None)
    blue_out: float = field(default=None)

    def __post_init__(self):
        if self.blue_in is None:
            object.__setattr__(self, "blue_in", 1.0 - self.theta_in)
        if self.blue_out is None:
            object.__setattr__(self, "blue_out", 1.0 - self.theta_out)

    def __iter__(self):
        yield self.theta_in
        yield self.theta_out


def _check_prob(name, value, out):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and 0.0 <= value <= 1.0):
        out.append(RangeError(name, value, "[0, 1]"))


def _check_positive(name, value, out):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0.0):
        out.append(RangeError(name, value, "(0, inf)"))


def validate_params(raw: ModelParams) -> ModelParams:
    """Return ``raw`` unchanged if valid, else raise with every violation."""
    violations = []
    for name in ("r", "p", "q"):
        _check_prob(name, getattr(raw, name), violations)
    for i, E in enumerate((raw.E1, raw.E2, raw.E3), start=1):
        _check_prob(f"rho_blue_e{i}", E.rho_blue, violations)
        _check_prob(f"rho_red_e{i}", E.rho_red, violations)
    _check_positive("delta_in", raw.delta_in, violations)
    _check_positive("delta_out", raw.delta_out, violations)
    try:
        if raw.p + raw.q > 1.0:
            violations.append(ConstraintError("p+q <= 1", f"p+q={raw.p + raw.q!r}"))
    except TypeError:
        pass
    if violations:
        raise ParamValidationError(violations)
    return raw


def analysis_view(params: ModelParams) -> AnalyticParams:
    """Restrict to the shared-matrix, shared-delta regime or raise :class:`NotAnalytic`."""
    reasons = []
    if not (params.E1 == params.E2 == params.E3):
        reasons.append("per-event homophily matrices differ")
    if params.delta_in != params.delta_out:
        reasons.append(f"delta_in={params.delta_in} != delta_out={params.delta_out}")
    if reasons:
        raise NotAnalytic(
            "; ".join(reasons)
            + " -- closed-form analytics need E1=E2=E3 and delta_in=delta_out "
            "(use `simulate` for this parameter set)"
        )
    E = params.E1
    return AnalyticParams(params.r, params.p, params.q, E.rho_blue, E.rho_red, params.delta_in)


def acceptance_probability(event: int, follower: Color, followee: Color, params: ModelParams) -> float:
    """Probability that a sampled candidate link ``followee -> follower`` is kept."""
    E = params.matrix(event)
    rho = E.diagonal(Color(follower))
    return rho if follower == followee else 1.0 - rho


def acceptance_table(params: ModelParams):
    """Flat table ``acc[(event-1)*4 + follower*2 + followee]`` used by the kernels."""
    table = []
    for event in (1, 2, 3):
        for follower in (Color.BLUE, Color.RED):
            for followee in (Color.BLUE, Color.RED):
                table.append(acceptance_probability(event, follower, followee, params))
    return table


def color_swap(ap: AnalyticParams, theta: ThetaPair | None = None):
    """Relabel red <-> blue. Returns ``(ap', theta')``; an exact involution."""
    swapped = AnalyticParams(
        r=ap.r_blue, p=ap.p, q=ap.q,
        rho_blue=ap.rho_red, rho_red=ap.rho_blue,
        delta=ap.delta, r_blue=ap.r,
    )
    if theta is None:
        return swapped, None
    th = ThetaPair(theta.blue_in, theta.blue_out, theta.theta_in, theta.theta_out)
    return swapped, th


# -- config files -------------------------------------------------------------

MODEL_KEYS = (
    "r", "p", "q", "delta", "delta_in", "delta_out", "rho_blue", "rho_red",
    *(f"rho_{c}_e{i}" for i in (1, 2, 3) for c in ("blue", "red")),
)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines (``:`` also accepted, ``#`` starts a comment)."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split(sep, 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def apply_overrides(mapping: dict, overrides) -> dict:
    """Apply ``k=v`` strings (as given to ``--set``) on top of ``mapping``."""
    merged = dict(mapping)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        k, v = (s.strip() for s in item.split("=", 1))
        merged[k] = v
    return merged


def _num(mapping, key):
    try:
        return float(mapping[key])
    except ValueError:
        raise ConfigError(f"{key}: not a number: {mapping[key]!r}") from None


def params_from_mapping(mapping: dict) -> ModelParams:
    """Build :class:`ModelParams` from flat keys; per-event rho keys default to ``rho_blue``/``rho_red``."""
    for key in ("r", "p", "q"):
        if key not in mapping:
            raise ConfigError(f"missing required key {key!r}")
    delta = _num(mapping, "delta") if "delta" in mapping else None
    d_in = _num(mapping, "delta_in") if "delta_in" in mapping else delta
    d_out = _num(mapping, "delta_out") if "delta_out" in mapping else delta
    if d_in is None or d_out is None:
        raise ConfigError("missing delta_in/delta_out (or shared 'delta')")
    mats = []
    for i in (1, 2, 3):
        pair = []
        for c in ("blue", "red"):
            k = f"rho_{c}_e{i}"
            if k in mapping:
                pair.append(_num(mapping, k))
            elif f"rho_{c}" in mapping:
                pair.append(_num(mapping, f"rho_{c}"))
            else:
                raise ConfigError(f"missing {k} (and no shared rho_{c})")
        mats.append(HomophilyMatrix(*pair))
    return ModelParams(
        _num(mapping, "r"), _num(mapping, "p"), _num(mapping, "q"),
        mats[0], mats[1], mats[2], d_in, d_out,
    )


def load_config(path, overrides=()) -> dict:
    with open(path, encoding="utf-8") as fh:
        mapping = parse_config_text(fh.read())
    return apply_overrides(mapping, overrides)


def replace_param(params: ModelParams, name: str, value: float) -> ModelParams:
    """Return a copy with one flat config key changed (used by sweeps)."""
    mapping = params.to_mapping()
    if name in ("rho_blue", "rho_red"):
        for i in (1, 2, 3):
            mapping[f"{name}_e{i}"] = value
    elif name == "delta":
        mapping["delta_in"] = mapping["delta_out"] = value
    elif name in mapping:
        mapping[name] = value
    else:
        raise ConfigError(f"unknown parameter {name!r}")
    return params_from_mapping(mapping)


__all__ = [
    "Color", "HomophilyMatrix", "ModelParams", "AnalyticParams", "ThetaPair",
    "validate_params", "analysis_view", "acceptance_probability", "acceptance_table",
    "color_swap", "parse_config_text", "apply_overrides", "params_from_mapping",
    "load_config", "replace_param", "MODEL_KEYS",
]
