"""Simulation configuration: physical and numerical parameters plus seeding.

A :class:`SimConfig` is immutable and serializes to a canonical byte string
(sorted ``key=value`` lines with shortest-roundtrip float formatting).  The
SHA-256 of that string identifies a run and is embedded in every output
file, so any two byte-identical clicks files are guaranteed to describe the
same physics.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass

from .errors import ConfigError
from .grid import Grid

__all__ = ["SimConfig", "parse_config_text", "DEFAULT_SIGMA"]

DEFAULT_SIGMA = math.sqrt(0.5)

_INT_FIELDS = {"n_points", "n_traj", "master_seed", "k0"}
_OPTIONAL_INT_FIELDS = {"j0"}
_OPTIONAL_FLOAT_FIELDS = {"lattice_radius"}


@dataclass(frozen=True)
class SimConfig:
    """All knobs of a trajectory-ensemble run.

    ``j0`` and ``lattice_radius`` default to ``None`` meaning "auto": the
    initial detector column is chosen so that x0 = j0·d_x is close to 20,
    and the lattice is sized from the run duration (see
    :func:`phasemc.detectors.build_lattice`).
    """

    gamma: float = 1.0
    d_x: float = 2.16
    d_p: float = 2.16
    sigma: float = DEFAULT_SIGMA
    x_min: float = -40.0
    x_max: float = 40.0
    n_points: int = 2048
    dt: float = 0.005
    t_final: float = 50.0
    n_traj: int = 500
    master_seed: int = 20260810
    j0: int | None = None
    k0: int = 0
    bin_width: float = 0.1
    fit_t_min: float = 2.0 * math.pi
    lattice_radius: float | None = None

    def __post_init__(self):
        for name in ("d_x", "d_p", "sigma", "dt", "t_final", "bin_width"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be a positive finite number, got {value!r}")
        # gamma = 0 is allowed: it switches measurement off (propagator checks)
        if not (isinstance(self.gamma, (int, float)) and self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be a nonnegative finite number, got {self.gamma!r}")
        if self.n_traj < 1:
            raise ConfigError(f"n_traj must be >= 1, got {self.n_traj}")
        if self.fit_t_min < 0:
            raise ConfigError(f"fit_t_min must be >= 0, got {self.fit_t_min}")
        if self.lattice_radius is not None and self.lattice_radius <= 0:
            raise ConfigError(f"lattice_radius must be positive, got {self.lattice_radius}")
        if self.n_steps < 1:
            raise ConfigError("t_final shorter than one time step")
        # grid constructor validates the power-of-two and ordering invariants
        self.grid()

    # ----- derived quantities -------------------------------------------

    def grid(self) -> Grid:
        return Grid(self.x_min, self.x_max, self.n_points)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def j0_effective(self) -> int:
        """Initial detector column: explicit, or the one nearest x = 20."""
        return self.j0 if self.j0 is not None else int(round(20.0 / self.d_x))

    @property
    def x0(self) -> float:
        return self.j0_effective * self.d_x

    @property
    def p0(self) -> float:
        return self.k0 * self.d_p

    @property
    def initial_energy(self) -> float:
        """Classical energy of the initial phase-space point."""
        return 0.5 * (self.x0**2 + self.p0**2)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    # ----- canonical form -----------------------------------------------

    def canonical_text(self) -> str:
        """Sorted key=value lines; the identity of the run."""
        lines = []
        for f in sorted(dataclasses.fields(self), key=lambda f: f.name):
            value = getattr(self, f.name)
            if value is None:
                text = "auto"
            elif isinstance(value, bool):
                raise ConfigError("boolean config fields are not supported")
            elif isinstance(value, int):
                text = str(value)
            else:
                text = repr(float(value))
            lines.append(f"{f.name}={text}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("ascii")).hexdigest()


def parse_config_text(text: str) -> SimConfig:
    """Parse a flat ``key=value`` config file.

    Blank lines and ``#`` comments are ignored.  Unknown keys are errors:
    a typo must not silently fall back to a default.
    """
    known = {f.name for f in dataclasses.fields(SimConfig)}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
        values[key] = _parse_value(key, val, lineno)
    return SimConfig(**values)


def _parse_value(key: str, val: str, lineno: int):
    optional = key in _OPTIONAL_INT_FIELDS or key in _OPTIONAL_FLOAT_FIELDS
    if optional and val.lower() in ("auto", "none"):
        return None
    try:
        if key in _INT_FIELDS or key in _OPTIONAL_INT_FIELDS:
            return int(val)
        return float(val)
    except ValueError:
        kind = "integer" if key in _INT_FIELDS or key in _OPTIONAL_INT_FIELDS else "number"
        raise ConfigError(f"line {lineno}: {key} expects a {kind}, got {val!r}") from None
