"""Strict YAML experiment configuration.

Every field has a default; unknown keys raise :class:`ConfigError` naming
the offending key. ``to_dict`` gives the fully resolved configuration, which
re-parses to an equal object.
"""
import dataclasses
import typing
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError

DRIVERS = ("solve", "rate", "ldp-verify", "mollify-report", "check-hyp-h")
U0_SHAPES = ("bump", "constant", "sine")
CONTROL_KINDS = ("zero", "constant", "random")


@dataclass
class ModeConfig:
    kind: str = "sinusoidal"
    amp: float = 0.3
    freq: int = 1
    phase: float = 0.0
    cap: float = 1.0
    axis: int = 0


@dataclass
class InitialConfig:
    shape: str = "bump"
    amplitude: float = 1.0
    center: float = 0.5
    width: float = 0.25
    value: float = 0.0
    freq: int = 1


@dataclass
class ControlConfig:
    kind: str = "zero"
    levels: typing.List[float] = field(default_factory=list)
    intervals: int = 10
    energy: float = 0.5
    seed: int = 0


@dataclass
class ProblemConfig:
    m: float = 2.0
    K: float = 2.0
    dim: int = 1
    cells: int = 128
    T: float = 0.5
    modes: typing.List[ModeConfig] = field(default_factory=lambda: [ModeConfig()])
    u0: InitialConfig = field(default_factory=InitialConfig)
    control: ControlConfig = field(default_factory=ControlConfig)


@dataclass
class SolverSection:
    dt: float = 1e-3
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    regularization_n: typing.Optional[int] = None


@dataclass
class ExperimentSection:
    driver: str = "solve"
    seed: int = 0
    eps_list: typing.List[float] = field(default_factory=lambda: [0.1, 0.01, 0.001])
    n_list: typing.List[int] = field(default_factory=lambda: [4, 16, 64])
    samples: int = 32
    seeds: typing.List[int] = field(default_factory=list)
    common_random_numbers: bool = True
    # ldp-verify
    weak_eps_list: typing.List[float] = field(default_factory=lambda: [0.1, 0.02, 0.004])
    amplitude: float = 1.0
    # rate
    target: str = "control"
    penalty_weight: float = 100.0
    intervals: int = 16
    max_iter: int = 100
    misfit_tol: float = 1e-2
    rounds: int = 3
    gradient: str = "auto"
    # mollify-report / check-hyp-h
    points: int = 10000
    r_max: float = 12.0


@dataclass
class OutputConfig:
    directory: str = "spmlab-out"
    field_format: str = "csv"
    keep_trajectory: bool = False


@dataclass
class ExperimentConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    solver: SolverSection = field(default_factory=SolverSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def validate(self):
        p, s, e, o = self.problem, self.solver, self.experiment, self.output
        checks = [
            (p.dim in (1, 2), "problem.dim must be 1 or 2"),
            (p.cells >= 3, "problem.cells must be >= 3"),
            (p.T > 0, "problem.T must be positive"),
            (p.m > 1, "problem.m must exceed 1"),
            (p.K >= 1, "problem.K must be >= 1"),
            (p.u0.shape in U0_SHAPES, f"problem.u0.shape must be one of {U0_SHAPES}"),
            (p.control.kind in CONTROL_KINDS,
             f"problem.control.kind must be one of {CONTROL_KINDS}"),
            (p.control.intervals >= 1, "problem.control.intervals must be >= 1"),
            (s.dt > 0, "solver.dt must be positive"),
            (s.newton_tol > 0, "solver.newton_tol must be positive"),
            (s.regularization_n is None or s.regularization_n >= 1,
             "solver.regularization_n must be a positive integer or null"),
            (e.driver in DRIVERS, f"experiment.driver must be one of {DRIVERS}"),
            (e.target in ("control", "uncontrolled"),
             "experiment.target must be 'control' or 'uncontrolled'"),
            (o.field_format in ("csv", "bin"), "output.field_format must be csv or bin"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self


def _coerce(tp, value, path):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a mapping")
        return _build(tp, value, path)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(args[0], value, path)
    if origin is list:
        (item,) = typing.get_args(tp)
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list")
        return [_coerce(item, v, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, str):
            # YAML 1.1 reads "1e-3" (no dot) as a string
            try:
                value = float(value)
            except ValueError:
                pass
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported type")


def _build(cls, data, prefix=""):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            where = f"{prefix}.{key}" if prefix else str(key)
            raise ConfigError(f"unknown configuration key {where!r}")
    kw = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            path = f"{prefix}.{f.name}" if prefix else f.name
            kw[f.name] = _coerce(hints[f.name], data[f.name], path)
    return cls(**kw)


def from_dict(data):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping")
    return _build(ExperimentConfig, data).validate()


def apply_override(data, assignment):
    """Apply one ``a.b.c=value`` override (value parsed as YAML) to a raw dict."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, raw = assignment.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {key!r}: {exc}") from None
    parts = key.strip().split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} descends into a non-mapping")
    node[parts[-1]] = value
    return data


def load(path=None, overrides=()):
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping")
    for item in overrides:
        apply_override(data, item)
    return from_dict(data)


def parse(text):
    try:
        return from_dict(yaml.safe_load(text))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
