"""Experiment configuration files and command-line value parsing.

An experiment file (TOML, or JSON with the same layout) holds one model
and one table per command::

    id = "fig4"
    commands = ["params"]

    [model]
    type = "kernel"          # "kernel", "cosine" or "scale_space"
    kernel = "gaussian"      # "gaussian", "sech" or "custom" (+ kernel_expr)
    nu = [0.1, 0.5]          # number, coefficients by increasing degree,
                             # or {kind = "const"|"linear"|"poly", coeffs = [...]}
    sigma = [6.0, -10.0, 8.0]  # optional standard deviation profile

    [params]
    t = {start = 0.0, stop = 1.0, num = 201}

Ranges are written either as explicit lists or as ``{start, stop, num}``
tables (endpoints included).
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .covmodel import Cosine, Kernel, PolyProfile, ProcessModel, ScaledVariance, VaryingBandwidth
from .errors import ConfigError
from .fieldsim import GridSpec

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

COMMANDS = ("params", "density", "kacrice", "simulate", "benchmark")
MODEL_TYPES = ("kernel", "cosine", "scale_space")


@dataclass(frozen=True)
class ScaleSpaceModel:
    """Scale space field in ``N`` spatial dimensions."""

    N: int
    kernel: Kernel


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings of one command run.

    Attributes
    ----------
    command : str
    model : ProcessModel or ScaleSpaceModel or None
    out : Path
    u : ndarray or None
        Thresholds, ascending; only the first may be ``-inf``.
    niters, nsims, seed : int
    grid : GridSpec or None
    algorithm : int
    section : dict
        The raw command table from the experiment file.
    """

    command: str
    model: object
    out: Path
    u: np.ndarray | None = None
    niters: int = 100_000
    nsims: int = 1000
    seed: int = 0
    grid: GridSpec | None = None
    algorithm: int = 1
    section: dict | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if int(self.niters) < 1:
            raise ConfigError("niters must be >= 1")
        if int(self.nsims) < 1:
            raise ConfigError("nsims must be >= 1")
        if self.algorithm not in (1, 2):
            raise ConfigError("algorithm must be 1 or 2")
        if self.u is not None:
            check_thresholds(self.u)


def check_thresholds(u) -> np.ndarray:
    """Validate thresholds: ascending, finite except a leading ``-inf``."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise ConfigError("thresholds must be a non-empty list")
    if np.any(np.isnan(u)) or np.any(u[1:] == -np.inf) or np.any(u == np.inf):
        raise ConfigError("thresholds must be finite (a leading -inf is allowed)")
    if np.any(np.diff(u) <= 0):
        raise ConfigError("thresholds must be strictly ascending")
    return u


# ---------------------------------------------------------------------------
# value parsing


def as_range(value, name: str = "range") -> np.ndarray:
    """A list, a scalar, or a ``{start, stop, num}`` table as a float array."""
    if isinstance(value, dict):
        try:
            start, stop, num = float(value["start"]), float(value["stop"]), int(value["num"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: expected start, stop, num") from exc
        if num < 1:
            raise ConfigError(f"{name}: num must be >= 1")
        return np.linspace(start, stop, num)
    try:
        return np.atleast_1d(np.asarray(value, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: not a list of numbers") from exc


def parse_floats(text: str) -> np.ndarray:
    """``"a,b,c"`` or ``"start:stop:num"`` as a float array; ``-inf`` accepted.

    Examples
    --------
    >>> parse_floats("0:1:3")
    array([0. , 0.5, 1. ])
    >>> parse_floats("-inf,1,2")
    array([-inf,   1.,   2.])
    """
    text = text.strip()
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return np.linspace(float(a), float(b), int(n))
        return np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError as exc:
        raise ConfigError(f"cannot parse numbers from {text!r}") from exc


def parse_grid(text: str) -> GridSpec:
    """``"start:stop:num[,start:stop:num...]"``, one triple per axis."""
    axes = []
    for part in text.split(","):
        bits = part.strip().split(":")
        if len(bits) != 3:
            raise ConfigError(f"grid axis {part!r} is not start:stop:num")
        try:
            axes.append((float(bits[0]), float(bits[1]), int(bits[2])))
        except ValueError as exc:
            raise ConfigError(f"grid axis {part!r} is not numeric") from exc
    return grid_from_axes(axes)


def grid_from_axes(axes) -> GridSpec:
    """GridSpec from ``(start, stop, num)`` triples or ``{start, stop, num}`` tables."""
    triples = []
    for ax in axes:
        if isinstance(ax, dict):
            ax = (ax.get("start"), ax.get("stop"), ax.get("num"))
        try:
            a, b, n = float(ax[0]), float(ax[1]), int(ax[2])
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"bad grid axis {ax!r}") from exc
        if n < 3 or not b > a:
            raise ConfigError(f"grid axis {ax!r} needs stop > start and num >= 3")
        triples.append((a, b, n))
    return GridSpec.linspace(*triples)


# ---------------------------------------------------------------------------
# files


def load_file(path) -> dict:
    """Read a TOML or JSON experiment file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw.decode())
        else:
            data = tomllib.loads(raw.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a table")
    return data


def builtin_ids() -> list[str]:
    """Names of the bundled experiment files."""
    root = resources.files("peakheight") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_builtin(exp_id: str) -> dict:
    """Load a bundled experiment (``fig1`` ... ``fig10``, ``table1``, ``table2``)."""
    if exp_id not in builtin_ids():
        raise ConfigError(f"unknown experiment {exp_id!r}; choose from {', '.join(builtin_ids())}")
    with resources.as_file(resources.files("peakheight") / "configs" / f"{exp_id}.toml") as p:
        return load_file(p)


def _profile(value, name: str) -> PolyProfile:
    if isinstance(value, dict):
        kind = value.get("kind", "poly")
        want = {"const": 1, "linear": 2, "poly": None}
        if kind not in want:
            raise ConfigError(f"{name}: kind must be const, linear or poly")
        value = value.get("coeffs")
        if want[kind] is not None and np.size(value) != want[kind]:
            raise ConfigError(f"{name}: a {kind} profile takes {want[kind]} coefficient(s)")
    try:
        return PolyProfile(tuple(np.atleast_1d(np.asarray(value, dtype=float))))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: expected a number or a coefficient list") from exc


def build_model(table: dict):
    """Model object described by a ``[model]`` table."""
    kind = table.get("type", "kernel")
    if kind not in MODEL_TYPES:
        raise ConfigError(f"model type must be one of {MODEL_TYPES}, got {kind!r}")
    if kind == "cosine":
        params = table.get("cosine", table)
        try:
            return Cosine(float(params["c1"]), float(params["c2"]), float(params["omega"]))
        except KeyError as exc:
            raise ConfigError(f"cosine model needs {exc.args[0]}") from exc
    kernel = Kernel.from_name(table.get("kernel", "gaussian"), table.get("kernel_expr"))
    if kind == "scale_space":
        N = int(table.get("N", 1))
        if N < 1:
            raise ConfigError("N must be >= 1")
        return ScaleSpaceModel(N, kernel)
    if "nu" not in table:
        raise ConfigError("kernel model needs nu")
    model: ProcessModel = VaryingBandwidth(kernel, _profile(table["nu"], "nu"))
    if "sigma" in table:
        model = ScaledVariance(model, _profile(table["sigma"], "sigma"))
    return model


def section_int(section: dict, key: str, default: int) -> int:
    try:
        return int(section.get(key, default))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be an integer") from exc


def thresholds(section: dict, default=None) -> np.ndarray | None:
    """Thresholds from a command table; strings ``"-inf"`` are accepted."""
    if "u" not in section:
        return None if default is None else check_thresholds(default)
    raw = section["u"]
    if isinstance(raw, list):
        raw = [(-math.inf if isinstance(x, str) and x.strip() == "-inf" else x) for x in raw]
    return check_thresholds(as_range(raw, "u"))
