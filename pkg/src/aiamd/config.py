"""Run configuration: flat ``key = value`` files with optional system sections.

The file format deliberately mirrors classic MD preprocessing inputs::

    method                = HMC        # HMC / No
    integrator            = two-s-AIA  # md-vv / two-s / two-s-AIA / two-s-minE
    nr_MD_steps           = 1000
    canonical_temperature = 1.0
    momentum_flip         = no

Comments run from ``#`` to end of line.  Unknown keys are errors.  The system
comes either from a named fixture (harmonic-chain, constrained-dumbbell,
lj-cluster) or inline via [particles], [bonds], [constraints], [nonbonded]
sections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .integrators import IntegratorSpec
from .system import Bond, Constraint, LennardJones, System

_METHODS = ("HMC", "No")
_INTEGRATORS = ("md-vv", "two-s", "two-s-AIA", "two-s-minE")
_FIXTURES = ("harmonic-chain", "constrained-dumbbell", "lj-cluster", "inline")

# fixture name -> parameter keys it consumes
_FIXTURE_KEYS = {
    "harmonic-chain": ("n_particles", "mass", "k_spring", "r0"),
    "constrained-dumbbell": ("mass", "constraint_length"),
    "lj-cluster": ("n_particles", "epsilon", "sigma", "cutoff"),
    "inline": (),
}

_SECTIONS = ("particles", "bonds", "constraints", "nonbonded")


@dataclass(frozen=True)
class SystemConfig:
    """System definition as plain data (fixture name + params, or inline).

    Inline particles carry their initial positions; fixtures get a canonical
    placement (chain along the first axis, dumbbell at constraint length,
    cluster on a cubic lattice at the pair-potential minimum spacing).
    """

    kind: str
    dimension: int = 3
    params: tuple[tuple[str, float], ...] = ()
    masses: tuple[float, ...] = ()
    positions: tuple[float, ...] = ()
    bonds: tuple[tuple[int, int, float, float], ...] = ()
    constraints: tuple[tuple[int, int, float], ...] = ()
    nonbonded: tuple[float, float, float, bool] | None = None

    def build(self) -> System:
        from . import system as sysmod
        p = dict(self.params)
        if self.kind == "harmonic-chain":
            return sysmod.build_harmonic_chain(int(p["n_particles"]), p["mass"],
                                               p["k_spring"], p["r0"], self.dimension)
        if self.kind == "constrained-dumbbell":
            return sysmod.build_constrained_dumbbell(p["mass"], p["constraint_length"],
                                                     self.dimension)
        if self.kind == "lj-cluster":
            return sysmod.build_lj_cluster(int(p["n_particles"]), p["epsilon"],
                                           p["sigma"], p["cutoff"], self.dimension)
        lj = None
        if self.nonbonded is not None:
            eps, sig, cut, shift = self.nonbonded
            lj = LennardJones(eps, sig, cut, shift)
        return System(masses=np.array(self.masses), dimension=self.dimension,
                      bonds=tuple(Bond(*b) for b in self.bonds),
                      nonbonded=lj,
                      constraints=tuple(Constraint(*c) for c in self.constraints))

    def initial_positions(self) -> np.ndarray:
        """Flat starting coordinates matching the built system."""
        dim = self.dimension
        p = dict(self.params)
        if self.kind == "inline":
            return np.asarray(self.positions, dtype=float)
        if self.kind == "harmonic-chain":
            n, r0 = int(p["n_particles"]), p["r0"]
            pts = np.zeros((n, dim))
            pts[:, 0] = np.arange(n) * r0
            return pts.ravel()
        if self.kind == "constrained-dumbbell":
            pts = np.zeros((2, dim))
            pts[1, 0] = p["constraint_length"]
            return pts.ravel()
        n, sigma = int(p["n_particles"]), p["sigma"]
        spacing = 2.0 ** (1.0 / 6.0) * sigma
        side = math.ceil(n ** (1.0 / dim))
        pts = np.zeros((n, dim))
        for idx in range(n):
            rem = idx
            for axis in range(dim):
                pts[idx, axis] = rem % side
                rem //= side
        return (pts * spacing).ravel()


@dataclass(frozen=True)
class RunConfig:
    """Validated contents of a run configuration file."""

    system: SystemConfig
    method: str
    integrator: str
    dt: float
    b: float | None = None
    n_steps: int | None = None
    nr_md_steps: int | None = None
    n_proposals: int | None = None
    canonical_temperature: float | None = None
    momentum_flip: bool = False
    seed: int = 0
    safety_factor: float = math.sqrt(2.0)
    boltzmann_constant: float = 1.0
    output_stride: int = 10
    rescale_interval: int = 0
    constraint_tolerance: float = 1e-10
    constraint_max_iterations: int = 500
    trajectory_output: str = "trajectory.jsonl"
    observables_output: str = "observables.csv"

    def integrator_spec(self) -> IntegratorSpec | None:
        """Concrete spec, or None for two-s-AIA (resolved against the system)."""
        if self.integrator == "two-s-AIA":
            return None
        return IntegratorSpec.from_name(self.integrator, self.b)


_TOP_KEYS = {
    "system": str,
    "dimension": int,
    "method": str,
    "integrator": str,
    "b": float,
    "dt": float,
    "n_steps": int,
    "nr_MD_steps": int,
    "n_proposals": int,
    "canonical_temperature": float,
    "momentum_flip": bool,
    "seed": int,
    "safety_factor": float,
    "boltzmann_constant": float,
    "output_stride": int,
    "rescale_interval": int,
    "constraint_tolerance": float,
    "constraint_max_iterations": int,
    "trajectory_output": str,
    "observables_output": str,
    "n_particles": int,
    "mass": float,
    "k_spring": float,
    "r0": float,
    "constraint_length": float,
    "epsilon": float,
    "sigma": float,
    "cutoff": float,
}


def _parse_bool(raw: str, key: str) -> bool:
    if raw == "yes":
        return True
    if raw == "no":
        return False
    raise ConfigError(f"{key}: expected yes or no, got {raw!r}")


def _convert(raw: str, kind, key: str):
    if kind is bool:
        return _parse_bool(raw, key)
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None


def _tokenize(text: str):
    """Yield (line_number, section_or_None, key, raw_value)."""
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = line.partition("=")
        yield lineno, section, key.strip(), raw.strip()


def parse_config(text: str) -> RunConfig:
    top: dict[str, str] = {}
    masses: list[float] = []
    bonds: list[tuple] = []
    constraints: list[tuple] = []
    nonbonded: dict[str, str] = {}

    for lineno, section, key, raw in _tokenize(text):
        if section is None:
            if key not in _TOP_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in top:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            top[key] = raw
        elif section == "particles":
            if key != "particle":
                raise ConfigError(
                    f"line {lineno}: [particles] takes 'particle = mass x [y z]' entries")
            parts = raw.split()
            if len(parts) < 2:
                raise ConfigError(f"line {lineno}: particle = mass x [y z]")
            masses.append((float(parts[0]), tuple(float(v) for v in parts[1:])))
        elif section == "bonds":
            if key != "bond":
                raise ConfigError(f"line {lineno}: [bonds] takes only 'bond' entries")
            parts = raw.split()
            if len(parts) != 4:
                raise ConfigError(f"line {lineno}: bond = i j k_spring r0")
            bonds.append((int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3])))
        elif section == "constraints":
            if key != "constraint":
                raise ConfigError(f"line {lineno}: [constraints] takes only 'constraint' entries")
            parts = raw.split()
            if len(parts) != 3:
                raise ConfigError(f"line {lineno}: constraint = i j length")
            constraints.append((int(parts[0]), int(parts[1]), float(parts[2])))
        elif section == "nonbonded":
            if key not in ("epsilon", "sigma", "cutoff", "shift_to_zero_at_cutoff"):
                raise ConfigError(f"line {lineno}: unknown [nonbonded] key {key!r}")
            if key in nonbonded:
                raise ConfigError(f"line {lineno}: duplicate [nonbonded] key {key!r}")
            nonbonded[key] = raw

    return _validate(top, masses, bonds, constraints, nonbonded)


def _validate(top, masses, bonds, constraints, nonbonded) -> RunConfig:
    def take(key, default=None):
        if key not in top:
            return default
        return _convert(top.pop(key), _TOP_KEYS[key], key)

    kind = take("system")
    if kind is None:
        raise ConfigError("missing required key 'system'")
    if kind not in _FIXTURES:
        raise ConfigError(f"system must be one of {_FIXTURES}, got {kind!r}")
    dimension = take("dimension", 3)

    if kind == "inline":
        if not masses:
            raise ConfigError("inline system needs a [particles] section")
        positions = []
        for mass, coords in masses:
            if len(coords) != dimension:
                raise ConfigError(
                    f"particle with {len(coords)} coordinates in a {dimension}-d system")
            positions.extend(coords)
        lj = None
        if nonbonded:
            for want in ("epsilon", "sigma", "cutoff"):
                if want not in nonbonded:
                    raise ConfigError(f"[nonbonded] is missing {want!r}")
            lj = (float(nonbonded["epsilon"]), float(nonbonded["sigma"]),
                  float(nonbonded["cutoff"]),
                  _parse_bool(nonbonded.get("shift_to_zero_at_cutoff", "yes"),
                              "shift_to_zero_at_cutoff"))
        system = SystemConfig(kind="inline", dimension=dimension,
                              masses=tuple(m for m, _ in masses),
                              positions=tuple(positions), bonds=tuple(bonds),
                              constraints=tuple(constraints), nonbonded=lj)
    else:
        if masses or bonds or constraints or nonbonded:
            raise ConfigError(f"system = {kind}: inline sections are not allowed with a fixture")
        params = []
        for pkey in _FIXTURE_KEYS[kind]:
            value = take(pkey)
            if value is None:
                raise ConfigError(f"system = {kind} requires key {pkey!r}")
            params.append((pkey, float(value)))
        system = SystemConfig(kind=kind, dimension=dimension, params=tuple(params))

    leftover_fixture = [k for k in top
                        if k in {"n_particles", "mass", "k_spring", "r0",
                                 "constraint_length", "epsilon", "sigma", "cutoff"}]
    if leftover_fixture:
        raise ConfigError(f"keys {leftover_fixture} do not belong to system = {kind}")

    method = take("method", "No")
    if method not in _METHODS:
        raise ConfigError(f"method must be one of {_METHODS}, got {method!r}")
    integrator = take("integrator")
    if integrator is None:
        raise ConfigError("missing required key 'integrator'")
    if integrator not in _INTEGRATORS:
        raise ConfigError(f"integrator must be one of {_INTEGRATORS}, got {integrator!r}")
    b = take("b")
    if b is not None and integrator != "two-s":
        raise ConfigError(f"key 'b' is only valid with integrator = two-s, not {integrator}")
    dt = take("dt")
    if dt is None:
        raise ConfigError("missing required key 'dt'")
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")

    n_steps = take("n_steps")
    nr_md_steps = take("nr_MD_steps")
    n_proposals = take("n_proposals")
    canonical_temperature = take("canonical_temperature")
    momentum_flip = take("momentum_flip", False)
    rescale_interval = take("rescale_interval", 0)

    if method == "HMC":
        if n_steps is not None:
            raise ConfigError("n_steps belongs to MD runs; HMC uses nr_MD_steps")
        if rescale_interval:
            raise ConfigError("rescale_interval belongs to MD runs (HMC needs no thermostat)")
        if nr_md_steps is None or n_proposals is None:
            raise ConfigError("HMC needs nr_MD_steps and n_proposals")
        if canonical_temperature is None:
            raise ConfigError("HMC needs canonical_temperature")
    else:
        if nr_md_steps is not None or n_proposals is not None:
            raise ConfigError("nr_MD_steps/n_proposals belong to HMC runs; MD uses n_steps")
        if momentum_flip:
            raise ConfigError("momentum_flip belongs to HMC runs")
        if n_steps is None:
            raise ConfigError("MD needs n_steps")
        if rescale_interval and canonical_temperature is None:
            raise ConfigError("rescaling needs canonical_temperature as the target")

    for key, value in (("n_steps", n_steps), ("nr_MD_steps", nr_md_steps),
                       ("n_proposals", n_proposals)):
        if value is not None and value < 1:
            raise ConfigError(f"{key} must be at least 1, got {value}")
    if canonical_temperature is not None and canonical_temperature <= 0:
        raise ConfigError("canonical_temperature must be positive")

    cfg = RunConfig(
        system=system,
        method=method,
        integrator=integrator,
        b=b,
        dt=dt,
        n_steps=n_steps,
        nr_md_steps=nr_md_steps,
        n_proposals=n_proposals,
        canonical_temperature=canonical_temperature,
        momentum_flip=momentum_flip,
        seed=take("seed", 0),
        safety_factor=take("safety_factor", math.sqrt(2.0)),
        boltzmann_constant=take("boltzmann_constant", 1.0),
        output_stride=take("output_stride", 10),
        rescale_interval=rescale_interval,
        constraint_tolerance=take("constraint_tolerance", 1e-10),
        constraint_max_iterations=take("constraint_max_iterations", 500),
        trajectory_output=take("trajectory_output", "trajectory.jsonl"),
        observables_output=take("observables_output", "observables.csv"),
    )
    if top:
        raise ConfigError(f"unconsumed keys: {sorted(top)}")
    if cfg.safety_factor <= 0 or cfg.boltzmann_constant <= 0:
        raise ConfigError("safety_factor and boltzmann_constant must be positive")
    if cfg.output_stride < 0 or cfg.rescale_interval < 0:
        raise ConfigError("strides and intervals must be nonnegative")
    # constructing the spec validates b ranges early
    cfg.integrator_spec()
    return cfg


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(cfg: RunConfig) -> str:
    """Canonical text form; parse_config(format_config(cfg)) == cfg."""
    lines = []
    sysc = cfg.system
    lines.append(f"system = {sysc.kind}")
    lines.append(f"dimension = {sysc.dimension}")
    for key, value in sysc.params:
        kind = _TOP_KEYS[key]
        value = kind(value) if kind is int else value
        lines.append(f"{key} = {_format_value(value)}")
    lines.append(f"method = {cfg.method}")
    lines.append(f"integrator = {cfg.integrator}")
    for key, attr in (("b", "b"), ("dt", "dt"), ("n_steps", "n_steps"),
                      ("nr_MD_steps", "nr_md_steps"), ("n_proposals", "n_proposals"),
                      ("canonical_temperature", "canonical_temperature")):
        value = getattr(cfg, attr)
        if value is not None:
            lines.append(f"{key} = {_format_value(value)}")
    if cfg.method == "HMC":
        lines.append(f"momentum_flip = {_format_value(cfg.momentum_flip)}")
    lines.append(f"seed = {cfg.seed}")
    lines.append(f"safety_factor = {_format_value(cfg.safety_factor)}")
    lines.append(f"boltzmann_constant = {_format_value(cfg.boltzmann_constant)}")
    lines.append(f"output_stride = {cfg.output_stride}")
    if cfg.method == "No":
        lines.append(f"rescale_interval = {cfg.rescale_interval}")
    lines.append(f"constraint_tolerance = {_format_value(cfg.constraint_tolerance)}")
    lines.append(f"constraint_max_iterations = {cfg.constraint_max_iterations}")
    lines.append(f"trajectory_output = {cfg.trajectory_output}")
    lines.append(f"observables_output = {cfg.observables_output}")
    if sysc.kind == "inline":
        lines.append("")
        lines.append("[particles]")
        dim = sysc.dimension
        for idx, m in enumerate(sysc.masses):
            coords = sysc.positions[dim * idx:dim * idx + dim]
            coord_text = " ".join(_format_value(c) for c in coords)
            lines.append(f"particle = {_format_value(m)} {coord_text}")
        if sysc.bonds:
            lines.append("")
            lines.append("[bonds]")
            for (i, j, k, r0) in sysc.bonds:
                lines.append(f"bond = {i} {j} {_format_value(k)} {_format_value(r0)}")
        if sysc.constraints:
            lines.append("")
            lines.append("[constraints]")
            for (i, j, length) in sysc.constraints:
                lines.append(f"constraint = {i} {j} {_format_value(length)}")
        if sysc.nonbonded is not None:
            eps, sig, cut, shift = sysc.nonbonded
            lines.append("")
            lines.append("[nonbonded]")
            lines.append(f"epsilon = {_format_value(eps)}")
            lines.append(f"sigma = {_format_value(sig)}")
            lines.append(f"cutoff = {_format_value(cut)}")
            lines.append(f"shift_to_zero_at_cutoff = {_format_value(shift)}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
