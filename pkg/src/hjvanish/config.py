"""TOML experiment configs.

Grammar (all tables optional unless the command needs them)::

    [hamiltonian]
    kind = "eikonal"          # eikonal | tilted | quadratic | power
    potential = "exp_abs"     # potential id, or
    potential_table = "v.csv" # two columns x,V relative to the config file
    tilt = 1.0                # tilted: H = |p| - tilt * x
    exponent = 2.0            # power: |p|^q / q + W
    jointly_convex = false    # quadratic only
    dim = 1

    [domain]
    kind = "interval"         # interval | disk | radial
    a = 1.0                   # interval (-a, b); b defaults to a
    radius = 1.0              # disk
    base = 1.0                # radial rho = base + amplitude cos(frequency t)

    [grid]
    nodes = 2001
    velocities = 21

plus one table per command (``[solve]``, ``[eigenvalue]``, ...). Rates are
inline tables ``{kind = "power", coef = -1.0, exponent = 1.0}``. Unknown keys
are rejected so typos fail before any solve.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .asymptotics import DEFAULT_LAMBDAS, Rate
from .domains import StarDomain, disk, interval, radial
from .ergodic import DEFAULT_DELTAS
from .errors import ValidationError
from .hamiltonians import HamiltonianSpec, eikonal, potential_from_id, potential_from_table, power_hamiltonian, quadratic, tilted
from .hj_solver import SolveConfig

__all__ = ["ExperimentConfig", "load_config", "parse_config", "COMMANDS"]

COMMANDS = ("solve", "eigenvalue", "mather", "expansion", "family", "ccurve", "counterexample", "checkdomain")

_KEYS = {
    "hamiltonian": {"kind", "potential", "potential_table", "tilt", "exponent", "jointly_convex", "dim", "ambient_radius"},
    "domain": {"kind", "a", "b", "radius", "base", "amplitude", "frequency"},
    "grid": {"nodes", "spacing", "velocities", "dt", "tol", "max_iter"},
    "solve": {"delta", "r", "phi", "rate", "lambdas"},
    "eigenvalue": {"deltas", "x_ref", "degree", "r"},
    "mather": {"nodes", "velocities", "K", "dump_lp", "stage2"},
    "expansion": {"rate", "lambdas", "tol", "lp", "lp_nodes", "lp_velocities", "lp_K", "two_sided"},
    "family": {"phi", "rate", "lambdas", "which", "groups", "cluster_tol"},
    "ccurve": {"lambdas", "start", "stop", "num", "kink_tol"},
    "counterexample": {"K", "control", "tol", "tau_min", "tau_max"},
    "checkdomain": {"r_samples"},
}
_TOP = set(_KEYS) | {"title"}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    raw: dict
    source: Path | None
    hamiltonian: HamiltonianSpec | None
    domain: StarDomain | None
    solver: SolveConfig
    sections: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return self.sections.get(name, {})


def _num(tab: dict, key: str, default=None, positive: bool = False, integer: bool = False):
    v = tab.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{key} must be a number, got {v!r}")
    if integer and int(v) != v:
        raise ValidationError(f"{key} must be an integer")
    if not math.isfinite(v):
        raise ValidationError(f"{key} must be finite")
    if positive and not v > 0:
        raise ValidationError(f"{key} must be positive, got {v}")
    return int(v) if integer else float(v)


def ladder(values, name: str) -> tuple[float, ...]:
    """Strictly decreasing positive ladder with >= 3 entries."""
    if not isinstance(values, list) or len(values) < 3:
        raise ValidationError(f"{name} must be a list of at least 3 numbers")
    arr = np.array([_num({"v": v}, "v") for v in values])
    if np.any(arr <= 0) or np.any(np.diff(arr) >= 0):
        raise ValidationError(f"{name} must be positive and strictly decreasing")
    return tuple(arr.tolist())


def rate(spec, name: str) -> Rate:
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return Rate("power", float(spec), 1.0)
    if not isinstance(spec, dict):
        raise ValidationError(f"{name} must be an inline table {{kind, coef, exponent}}")
    extra = set(spec) - {"kind", "coef", "exponent"}
    if extra:
        raise ValidationError(f"unknown keys in {name}: {sorted(extra)}")
    return Rate(str(spec.get("kind", "power")), _num(spec, "coef", 1.0), _num(spec, "exponent", 1.0))


def _potential(tab: dict, base: Path | None):
    if "potential_table" in tab:
        p = Path(tab["potential_table"])
        if not p.is_absolute() and base is not None:
            p = base / p
        if not p.is_file():
            raise ValidationError(f"potential table {p} does not exist")
        try:
            data = np.loadtxt(p, delimiter=",", skiprows=1, ndmin=2)
        except ValueError as exc:
            raise ValidationError(f"malformed potential table {p}: {exc}") from None
        if data.shape[1] != 2:
            raise ValidationError(f"potential table {p} needs exactly two columns")
        return potential_from_table(data[:, 0], data[:, 1], name=p.stem)
    return potential_from_id(str(tab.get("potential", "zero")))


def _hamiltonian(tab: dict, base: Path | None) -> HamiltonianSpec:
    kind = tab.get("kind", "eikonal")
    dim = _num(tab, "dim", 1, integer=True)
    if dim not in (1, 2):
        raise ValidationError("dim must be 1 or 2")
    R = _num(tab, "ambient_radius", 2.0, positive=True)
    if kind == "eikonal":
        return eikonal(_potential(tab, base), dim, R)
    if kind == "tilted":
        return tilted(_num(tab, "tilt", 1.0), dim, R)
    if kind == "quadratic":
        jc = tab.get("jointly_convex", False)
        if not isinstance(jc, bool):
            raise ValidationError("jointly_convex must be a boolean")
        return quadratic(_potential(tab, base), dim, R, jointly_convex=jc)
    if kind == "power":
        return power_hamiltonian(_num(tab, "exponent", 2.0), _potential(tab, base), dim, R)
    raise ValidationError(f"unknown hamiltonian kind {kind!r}")


def _domain(tab: dict) -> StarDomain:
    kind = tab.get("kind", "interval")
    if kind == "interval":
        a = _num(tab, "a", 1.0, positive=True)
        return interval(a, _num(tab, "b", a, positive=True))
    if kind == "disk":
        return disk(_num(tab, "radius", 1.0, positive=True))
    if kind == "radial":
        return radial(_num(tab, "base", 1.0), _num(tab, "amplitude", 0.3), _num(tab, "frequency", 3, integer=True))
    raise ValidationError(f"unknown domain kind {kind!r}")


def _solver(tab: dict) -> SolveConfig:
    return SolveConfig(
        nodes=_num(tab, "nodes", 2001, positive=True, integer=True),
        spacing=_num(tab, "spacing", None, positive=True),
        velocities=_num(tab, "velocities", 21, positive=True, integer=True),
        dt=_num(tab, "dt", None, positive=True),
        tol=_num(tab, "tol", None, positive=True),
        max_iter=_num(tab, "max_iter", 20000, positive=True, integer=True),
    )


def parse_config(raw: dict, source: Path | None = None, command: str | None = None) -> ExperimentConfig:
    """Validate a parsed TOML document.

    Raises:
        ValidationError: unknown tables or keys, bad values, missing files.
    """
    unknown = set(raw) - _TOP
    if unknown:
        raise ValidationError(f"unknown top-level keys: {sorted(unknown)}")
    for name, keys in _KEYS.items():
        tab = raw.get(name, {})
        if not isinstance(tab, dict):
            raise ValidationError(f"[{name}] must be a table")
        extra = set(tab) - keys
        if extra:
            raise ValidationError(f"unknown keys in [{name}]: {sorted(extra)}")
    base = source.parent if source is not None else None
    needs_h = command not in ("checkdomain", "counterexample")
    H = _hamiltonian(raw.get("hamiltonian", {}), base) if needs_h else None
    dom = _domain(raw.get("domain", {})) if command != "counterexample" else None
    if H is not None and dom is not None and H.dim != dom.dim:
        raise ValidationError(f"hamiltonian dim {H.dim} does not match domain dim {dom.dim}")
    cfg = _solver(raw.get("grid", {}))
    sections = {k: dict(raw.get(k, {})) for k in _KEYS if k not in ("hamiltonian", "domain", "grid")}
    _validate_section(command, sections.get(command, {}) if command else {})
    return ExperimentConfig(raw, source, H, dom, cfg, sections)


def _validate_section(command: str | None, tab: dict) -> None:
    if command == "solve":
        if "lambdas" in tab:
            ladder(tab["lambdas"], "solve.lambdas")
            rate(tab.get("phi", {}), "solve.phi")
            rate(tab.get("rate", {"kind": "zero"}), "solve.rate")
        else:
            _num(tab, "delta", 0.1, positive=True)
            _num(tab, "r", 0.0)
    elif command == "eigenvalue":
        ladder(tab.get("deltas", list(DEFAULT_DELTAS)), "eigenvalue.deltas")
        _num(tab, "degree", 2, positive=True, integer=True)
    elif command == "mather":
        K = _num(tab, "K", 12, integer=True)
        if K < 1:
            raise ValidationError("mather.K must be >= 1")
        _num(tab, "nodes", 101, positive=True, integer=True)
        _num(tab, "velocities", 21, positive=True, integer=True)
    elif command == "expansion":
        if "rate" not in tab:
            raise ValidationError("expansion needs a rate r")
        rate(tab["rate"], "expansion.rate")
        ladder(tab.get("lambdas", list(DEFAULT_LAMBDAS)), "expansion.lambdas")
        _num(tab, "tol", 2e-2, positive=True)
    elif command == "family":
        rate(tab.get("phi", {}), "family.phi")
        rate(tab.get("rate", {"kind": "zero"}), "family.rate")
        ladder(tab.get("lambdas", list(DEFAULT_LAMBDAS)), "family.lambdas")
        if tab.get("which", "both") not in ("first", "second", "both"):
            raise ValidationError("family.which must be first, second or both")
    elif command == "ccurve":
        if "lambdas" not in tab and "num" not in tab:
            raise ValidationError("ccurve needs lambdas or start/stop/num")
    elif command == "counterexample":
        K = tab.get("K", 4)
        if isinstance(K, bool) or not isinstance(K, int) or K < 3 or K > 20:
            raise ValidationError("counterexample.K must be an integer in [3, 20]")
        ctl = tab.get("control")
        if ctl is not None:
            potential_from_id(str(ctl))


def load_config(path: str | Path, command: str | None = None) -> ExperimentConfig:
    """Read and validate a TOML config file.

    Raises:
        ValidationError: missing file, TOML syntax error, or invalid content.
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file {path} does not exist")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return parse_config(raw, path, command)
