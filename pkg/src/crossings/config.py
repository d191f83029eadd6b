"""Run configuration loaded from an INI file.

Recognised keys (all optional unless noted)::

    [covariance]      exactly one of:
    model = gaussian(1)            builtin: gaussian, cosine, matern32, matern52, dyadic
    expression = exp(-tau^2/2)     correlation as an expression in tau
    synthetic_theta2 = 1/(-log(tau))   theta''(tau) for a diagnostics-only model
    spectral_density = exp(-lambda^2/2)  one-sided density in lambda
    spectral_table = 0 1; 1 0.5; 2 0   "lambda f" pairs separated by ';'
    delta_max = inf   r2_0 = -1 (synthetic only)

    [target]
    level = 0          or  levels = 0, 1
    curve_psi = sin(s)   curve_psi_dot = cos(s)   curve_gamma = h   curve_name = sin

    [run]
    t = 1   delta = (default min(1, delta_max/4))   dt = 0.001   n_paths = 10000
    seed = 12345   dt_sequence = 0.01, 0.001, 0.0001

    [tolerances]
    quad_tol = 1e-9   series_tol = 1e-12   margin = 0.05

    [output]
    dir = results      format = json
"""
from __future__ import annotations

import configparser
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

from . import covariance as cov
from .curves import CurveSpec, constant_curve, curve_from_expressions

COVARIANCE_KEYS = ("model", "expression", "synthetic_theta2", "spectral_density", "spectral_table")
FORMATS = ("json", "table", "csv")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    covariance_kind: str = "model"
    covariance_text: str = "gaussian(1)"
    delta_max: float = math.inf
    r2_0: float = -1.0
    levels: list = field(default_factory=lambda: [0.0])
    curve_psi: Optional[str] = None
    curve_psi_dot: Optional[str] = None
    curve_gamma: Optional[str] = None
    curve_name: Optional[str] = None
    t: float = 1.0
    delta: Optional[float] = None
    dt: float = 1e-3
    n_paths: int = 10000
    seed: int = 12345
    dt_sequence: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])
    quad_tol: float = 1e-9
    series_tol: float = 1e-12
    margin: float = 0.05
    out_dir: Optional[str] = None
    format: str = "json"

    def __post_init__(self):
        for name in ("quad_tol", "series_tol", "margin"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"tolerance {name} must be > 0")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be >= 1")
        if not (self.t >= 0 and self.dt > 0):
            raise ConfigError("need t >= 0 and dt > 0")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.covariance_kind not in COVARIANCE_KEYS:
            raise ConfigError(f"unknown covariance kind {self.covariance_kind!r}")
        if (self.curve_psi is None) != (self.curve_psi_dot is None):
            raise ConfigError("curve_psi and curve_psi_dot must be given together")

    def check_output_dir(self) -> None:
        if self.out_dir is None:
            return
        try:
            os.makedirs(self.out_dir, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {self.out_dir!r}: {exc}") from None
        if not os.access(self.out_dir, os.W_OK):
            raise ConfigError(f"output directory {self.out_dir!r} is not writable")

    def to_dict(self) -> dict:
        return asdict(self)

    # -- builders ------------------------------------------------------------
    def build_model(self) -> cov.CovarianceModel:
        kind, text = self.covariance_kind, self.covariance_text
        if kind in ("model", "expression"):
            return cov.parse_covariance(text, delta_max=self.delta_max)
        if kind == "synthetic_theta2":
            dm = self.delta_max if math.isfinite(self.delta_max) else 0.5
            return cov.synthetic(text, self.r2_0, dm)
        if kind == "spectral_density":
            return cov.SpectralModel(density=text, delta_max=self.delta_max).validate()
        pairs = [p.split() for p in text.replace("\n", ";").split(";") if p.strip()]
        try:
            table = [(float(a), float(b)) for a, b in pairs]
        except ValueError as exc:
            raise ConfigError(f"spectral_table needs 'lambda f' pairs: {exc}") from None
        return cov.SpectralModel(table=table, delta_max=self.delta_max).validate()

    def build_curve(self) -> Optional[CurveSpec]:
        if self.curve_psi is None:
            return None
        return curve_from_expressions(self.curve_psi, self.curve_psi_dot, self.curve_gamma,
                                      self.curve_name or self.curve_psi)

    def targets(self) -> list:
        curve = self.build_curve()
        if curve is not None:
            return [curve]
        return [constant_curve(x) for x in self.levels]


def _floats(text: str) -> list:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def load_config(path: Optional[str] = None, overrides: Optional[list] = None) -> RunConfig:
    """Read an INI file; ``overrides`` are ``section.key=value`` strings."""
    parser = configparser.ConfigParser(interpolation=None)
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file {path!r} not found")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
    for item in overrides or []:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not (sep and dot):
            raise ConfigError(f"override {item!r} must look like section.key=value")
        if not parser.has_section(section):
            parser.add_section(section)
        if section == "covariance" and name in COVARIANCE_KEYS:
            for other in COVARIANCE_KEYS:
                parser.remove_option("covariance", other)
        parser.set(section, name, value.strip())
    kw = {}
    try:
        if parser.has_section("covariance"):
            c = parser["covariance"]
            given = [k for k in COVARIANCE_KEYS if k in c]
            if len(given) > 1:
                raise ConfigError(f"give one covariance source, got {given}")
            if given:
                kw["covariance_kind"], kw["covariance_text"] = given[0], c[given[0]]
            if "delta_max" in c:
                kw["delta_max"] = float(c["delta_max"])
            if "r2_0" in c:
                kw["r2_0"] = float(c["r2_0"])
        if parser.has_section("target"):
            g = parser["target"]
            if "levels" in g:
                kw["levels"] = _floats(g["levels"])
            elif "level" in g:
                kw["levels"] = [float(g["level"])]
            for k in ("curve_psi", "curve_psi_dot", "curve_gamma", "curve_name"):
                if k in g:
                    kw[k] = g[k]
        if parser.has_section("run"):
            r = parser["run"]
            for k in ("t", "dt"):
                if k in r:
                    kw[k] = float(r[k])
            if "delta" in r:
                kw["delta"] = float(r["delta"])
            if "n_paths" in r:
                kw["n_paths"] = int(r["n_paths"])
            if "seed" in r:
                kw["seed"] = int(r["seed"])
            if "dt_sequence" in r:
                kw["dt_sequence"] = _floats(r["dt_sequence"])
        if parser.has_section("tolerances"):
            for k in ("quad_tol", "series_tol", "margin"):
                if k in parser["tolerances"]:
                    kw[k] = float(parser["tolerances"][k])
        if parser.has_section("output"):
            o = parser["output"]
            if "dir" in o:
                kw["out_dir"] = o["dir"] or None
            if "format" in o:
                kw["format"] = o["format"]
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value in config: {exc}") from None
    return RunConfig(**kw)
