"""
Experiment configuration.

An experiment is described by an INI file:

    [experiment]  application, trials, output_dir, record_wall_time
    [data]        seed, m, n, l, rho, sparsity, per_column_sparsity,
                  outlier_lo, outlier_hi, snr_db, nu, common_support, square
    [sweep]       up to two of snr_db, rho, n, l, sparsity = comma separated values
    [solver]      tol, max_iters, restarts, h_init
    [prior]       epsilon, eta, theta, phi, alpha_init, learn_sparsity
    [uamp]        variant, tol, max_iters
    [full]        optional overrides "section.key = value", applied with --full

The file is read with configparser and validated by pydantic; every error is
reported with its section, key and line number.
"""

import configparser
import io
import math
import re
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.applications.specs import (
    CsmuSpec,
    DlSpec,
    NmfSpec,
    RpcaSpec,
    SparseMfSpec,
    SparseNmfSpec,
)
from app.core.config import get_settings
from app.core.exceptions import ConfigValidationError
from app.datagen.generators import GenSpec
from app.solvers.problem import SolverOptions

SWEEP_AXES = ("snr_db", "rho", "n", "l", "sparsity")
_INTEGER_AXES = ("n", "l")
MAX_SWEEP_AXES = 2


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ExperimentSection(_Section):
    application: Literal["rpca", "dl", "csmu", "nmf", "sparse_mf", "sparse_nmf", "uamp"]
    trials: int = Field(default=1, ge=1)
    output_dir: str = Field(default_factory=lambda: get_settings().OUTPUT_DIR)
    record_wall_time: bool = True


class DataSection(_Section):
    seed: int = 0
    m: int = Field(default=20, ge=1)
    n: int = Field(default=5, ge=1)
    l: int = Field(default=20, ge=1)
    rho: float = Field(default=0.0, ge=0.0, le=1.0)
    sparsity: float = Field(default=0.1, ge=0.0, le=1.0)
    per_column_sparsity: Optional[int] = Field(default=None, ge=0)
    outlier_lo: float = Field(default_factory=lambda: get_settings().OUTLIER_LOW)
    outlier_hi: float = Field(default_factory=lambda: get_settings().OUTLIER_HIGH)
    snr_db: float = 60.0
    nu: float = Field(default=0.01, ge=0.0)
    common_support: bool = False
    square: bool = False


class SolverSection(_Section):
    tol: float = Field(default_factory=lambda: get_settings().SOLVER_TOL, gt=0.0)
    max_iters: int = Field(default_factory=lambda: get_settings().SOLVER_MAX_ITERS, ge=1)
    restarts: int = Field(default_factory=lambda: get_settings().SOLVER_RESTARTS, ge=0)
    h_init: Literal["ones", "random"] = "ones"


class PriorSection(_Section):
    epsilon: float = Field(default_factory=lambda: get_settings().GAMMA_EPSILON, ge=0.0)
    eta: float = Field(default_factory=lambda: get_settings().GAMMA_ETA, ge=0.0)
    theta: float = 0.0
    phi: float = Field(default=1.0, gt=0.0)
    alpha_init: float = Field(default_factory=lambda: get_settings().ALPHA_INIT, gt=0.0)
    learn_sparsity: bool = False


class UampSection(_Section):
    variant: Literal["v1", "v2"] = "v1"
    tol: float = Field(default_factory=lambda: get_settings().UAMP_TOL, gt=0.0)
    max_iters: int = Field(default_factory=lambda: get_settings().UAMP_MAX_ITERS, ge=1)


class ExperimentConfig(_Section):
    """Validated experiment description."""

    experiment: ExperimentSection
    data: DataSection = Field(default_factory=DataSection)
    sweep: Dict[str, List[float]] = Field(default_factory=dict)
    solver: SolverSection = Field(default_factory=SolverSection)
    prior: PriorSection = Field(default_factory=PriorSection)
    uamp: UampSection = Field(default_factory=UampSection)

    @field_validator("sweep")
    @classmethod
    def _check_sweep(cls, sweep: Dict[str, List[float]]) -> Dict[str, List[float]]:
        if len(sweep) > MAX_SWEEP_AXES:
            raise ValueError(f"at most {MAX_SWEEP_AXES} sweep axes are supported, got {len(sweep)}")
        for axis, values in sweep.items():
            if axis not in SWEEP_AXES:
                raise ValueError(f"unknown sweep axis '{axis}', expected one of {list(SWEEP_AXES)}")
            if not values:
                raise ValueError(f"sweep axis '{axis}' has no values")
            if axis in _INTEGER_AXES and any(v != int(v) or v < 1 for v in values):
                raise ValueError(f"sweep axis '{axis}' needs positive integers")
        return sweep

    @model_validator(mode="after")
    def _check_points(self) -> "ExperimentConfig":
        for point in self.points():
            try:
                self.gen_spec(point, self.data.seed)
            except ValidationError as e:
                raise ValueError(f"sweep point {point}: {e.errors()[0]['msg']}") from e
        return self

    @property
    def axes(self) -> Tuple[str, ...]:
        return tuple(self.sweep)

    def points(self) -> List[Tuple[Optional[float], Optional[float]]]:
        """Sweep coordinates in row-major order; a single (None, None) without sweep."""
        axes = self.axes
        if not axes:
            return [(None, None)]
        if len(axes) == 1:
            return [(v, None) for v in self.sweep[axes[0]]]
        return [(a, b) for a in self.sweep[axes[0]] for b in self.sweep[axes[1]]]

    def gen_spec(self, point: Tuple[Optional[float], Optional[float]], seed: int) -> GenSpec:
        values = self.data.model_dump(exclude={"square"})
        for axis, value in zip(self.axes, point):
            values[axis] = int(value) if axis in _INTEGER_AXES else value
        # square dictionaries: M follows N
        if self.data.square:
            values["m"] = values["n"]
        values["seed"] = seed
        return GenSpec(**values)

    def solver_options(self, seed: int) -> SolverOptions:
        return SolverOptions(seed=seed, **self.solver.model_dump())

    def application_spec(self, gen: GenSpec, h_bar=None):
        """Application spec matching ``gen``; the known H̄ is needed for csmu."""
        prior = self.prior
        gamma = dict(epsilon=prior.epsilon, eta=prior.eta)
        match self.experiment.application:
            case "rpca":
                return RpcaSpec(
                    m=gen.m, l=gen.l, rank=gen.n, outlier_rate=gen.sparsity, alpha_init=prior.alpha_init, **gamma
                )
            case "dl":
                return DlSpec(m=gen.m, n=gen.n, l=gen.l, per_column_sparsity=gen.per_column_sparsity, **gamma)
            case "csmu":
                return CsmuSpec(
                    m=gen.m, n=gen.n, l=gen.l, nu=gen.nu, common_support=gen.common_support, h_bar=h_bar, **gamma
                )
            case "nmf":
                return NmfSpec(m=gen.m, n=gen.n, l=gen.l, theta=prior.theta, phi=prior.phi)
            case "sparse_mf":
                return SparseMfSpec(m=gen.m, n=gen.n, l=gen.l, sparsity=gen.sparsity, **gamma)
            case "sparse_nmf":
                return SparseNmfSpec(
                    m=gen.m,
                    n=gen.n,
                    l=gen.l,
                    sparsity=gen.sparsity,
                    theta=prior.theta,
                    phi=prior.phi,
                    learn_sparsity=prior.learn_sparsity,
                )
        return None

    def to_ini(self) -> str:
        """Resolved configuration (defaults filled in) in the INI format it was read from."""
        parser = configparser.ConfigParser(interpolation=None)
        for name in ("experiment", "data", "solver", "prior", "uamp"):
            section = getattr(self, name).model_dump()
            parser[name] = {key: _render(value) for key, value in section.items() if value is not None}
        if self.sweep:
            parser["sweep"] = {axis: ", ".join(_render(v) for v in values) for axis, values in self.sweep.items()}
        buffer = io.StringIO()
        parser.write(buffer)
        return buffer.getvalue()


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def _locate(text: str, section: str, key: Optional[str]) -> Optional[int]:
    # 1-based line of "key" inside [section], or of the section header
    current = None
    header_line = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        header = re.match(r"^\[([^\]]+)\]$", stripped)
        if header:
            current = header.group(1).strip()
            if current == section and header_line is None:
                header_line = number
            continue
        if current == section and key is not None:
            name = re.split(r"[=:]", stripped, maxsplit=1)[0].strip()
            if name == key:
                return number
    return header_line


def _diagnostic(path: str, text: str, section: str, key: Optional[str], message: str) -> ConfigValidationError:
    line = _locate(text, section, key)
    where = f"[{section}]" + (f" {key}" if key else "")
    if line is not None:
        where += f" (line {line})"
    return ConfigValidationError(path, f"{where}: {message}")


def _parse_sweep(path: str, text: str, raw: Dict[str, str]) -> Dict[str, List[float]]:
    sweep: Dict[str, List[float]] = {}
    for axis, value in raw.items():
        try:
            sweep[axis] = [float(token) for token in value.split(",") if token.strip()]
        except ValueError as e:
            raise _diagnostic(path, text, "sweep", axis, f"cannot parse values: {e}") from e
    return sweep


def _apply_full(path: str, text: str, sections: Dict[str, Dict[str, str]], overrides: Dict[str, str]) -> None:
    for dotted, value in overrides.items():
        if "." not in dotted:
            raise _diagnostic(path, text, "full", dotted, "override keys take the form section.key")
        section, key = dotted.split(".", 1)
        sections.setdefault(section, {})[key] = value


def parse_experiment_config(text: str, path: str = "<string>", full: bool = False) -> ExperimentConfig:
    """
    Parse and validate an experiment INI document.

    Args:
        text: INI content
        path: Source name used in diagnostics
        full: Apply the ``[full]`` overrides

    Returns:
        ExperimentConfig: Validated configuration

    Raises:
        ConfigValidationError: On syntax or validation errors
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=path)
    except configparser.Error as e:
        line = getattr(e, "lineno", None)
        suffix = f" (line {line})" if line else ""
        raise ConfigValidationError(path, f"syntax error{suffix}: {e}") from e

    sections: Dict[str, Dict[str, str]] = {name: dict(parser[name]) for name in parser.sections()}
    known = {"experiment", "data", "sweep", "solver", "prior", "uamp", "full"}
    for name in sections:
        if name not in known:
            raise _diagnostic(path, text, name, None, f"unknown section, expected one of {sorted(known)}")
    if "experiment" not in sections:
        raise ConfigValidationError(path, "missing [experiment] section")

    overrides = sections.pop("full", {})
    if full:
        _apply_full(path, text, sections, overrides)

    payload: Dict[str, object] = {name: values for name, values in sections.items() if name != "sweep"}
    payload["sweep"] = _parse_sweep(path, text, sections.get("sweep", {}))

    try:
        return ExperimentConfig(**payload)
    except ValidationError as e:
        error = e.errors()[0]
        location = [str(part) for part in error["loc"]]
        section = location[0] if location else "experiment"
        key = location[1] if len(location) > 1 else None
        if section == "sweep":
            key = None
        raise _diagnostic(path, text, section, key, error["msg"]) from e


def load_experiment_config(path: Path, full: bool = False) -> ExperimentConfig:
    """Read ``path`` and validate it; a missing file is a configuration error."""
    path = Path(path)
    if not path.is_file():
        raise ConfigValidationError(str(path), "file not found")
    return parse_experiment_config(path.read_text(encoding="utf-8"), str(path), full=full)

