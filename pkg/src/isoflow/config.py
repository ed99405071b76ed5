"""Run configuration: parsing, validation and canonical emission.

The file format is INI-like: ``[section]`` headers followed by
``key = value`` lines; lines starting with ``#`` are comments. Sections are
``domain``, ``background``, ``initial``, ``params``, ``time``, ``output`` and
``study``; every section and key is optional, unknown ones are rejected.

Initial fields are mode lists, entries separated by ``;``::

    h_modes = 1 0.1 cosine; 2 0.02 constant sin

Each entry is ``wavenumber amplitude profile [cos|sin]``. The wavenumber is
an integer mode number (``kx,ky`` when ``d = 2``); the physical wavenumber
is ``2 pi n / L``. The density profile of the mode, with
``s = (rho - rho0) / (rho1 - rho0)``, is ``1`` (constant), ``s`` (linear)
or ``cos(pi s)`` (cosine).
"""
import configparser
import dataclasses
import hashlib
import re
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import Grid
from .state import BackgroundProfile, HydroState, NonHydroState, Params, init_w

__all__ = [
    "ConfigMissingError",
    "ConfigParseError",
    "ConfigValidationError",
    "Mode",
    "RunConfig",
    "parse_config",
    "parse_config_text",
    "emit_config",
    "config_hash",
]


class ConfigMissingError(ConfigError):
    """The configuration file does not exist."""


class ConfigParseError(ConfigError):
    """The configuration file is not syntactically valid."""


class ConfigValidationError(ConfigError):
    """A configuration value violates a type or invariant rule."""


PROFILES = ("constant", "linear", "cosine")
SHAPES = ("cos", "sin")


@dataclass(frozen=True)
class Mode:
    """One initial Fourier mode ``amplitude * shape(2 pi n . x / L) * profile(rho)``."""

    n: tuple
    amplitude: float
    profile: str = "constant"
    shape: str = "cos"

    def emit(self):
        n = ",".join(str(i) for i in self.n)
        tail = "" if self.shape == "cos" else " sin"
        return f"{n} {self.amplitude!r} {self.profile}{tail}"

    def evaluate(self, grid):
        phase = sum(2 * np.pi * n / L * x for n, L, x in zip(self.n, grid.lengths, grid.x))
        s = (grid.rho_b - grid.rho0) / (grid.rho1 - grid.rho0)
        prof = {"constant": np.ones_like(s), "linear": s, "cosine": np.cos(np.pi * s)}[self.profile]
        trig = np.cos(phase) if self.shape == "cos" else np.sin(phase)
        return self.amplitude * trig * prof


def _parse_modes(text, d):
    out = []
    for item in (t.strip() for t in text.split(";")):
        if not item:
            continue
        parts = item.split()
        if len(parts) not in (3, 4):
            raise ValueError(f"mode '{item}' needs 'wavenumber amplitude profile [cos|sin]'")
        n = tuple(int(v) for v in parts[0].split(","))
        if len(n) != d:
            raise ValueError(f"mode '{item}' needs {d} wavenumber component(s)")
        amp = float(parts[1])
        if not np.isfinite(amp):
            raise ValueError("mode amplitude must be finite")
        if parts[2] not in PROFILES:
            raise ValueError(f"profile must be one of {', '.join(PROFILES)}")
        shape = parts[3] if len(parts) == 4 else "cos"
        if shape not in SHAPES:
            raise ValueError("mode shape must be cos or sin")
        out.append(Mode(n, amp, parts[2], shape))
    return tuple(out)


def _emit_modes(modes):
    return "; ".join(m.emit() for m in modes)


def _parse_list(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _emit_list(values):
    return ", ".join(repr(float(v)) for v in values)


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected a boolean")


def _parse_int(text):
    if not re.fullmatch(r"[+-]?\d+", text.strip()):
        raise ValueError("expected an integer")
    return int(text)


def _parse_float(text):
    v = float(text)
    if not np.isfinite(v):
        raise ValueError("expected a finite number")
    return v


# field kinds: (parser, emitter)
_KINDS = {
    "int": (_parse_int, str),
    "float": (_parse_float, repr),
    "bool": (_parse_bool, lambda v: "true" if v else "false"),
    "list": (_parse_list, _emit_list),
    "modes": (None, _emit_modes),
    "str": (str.strip, str),
}


def _f(default, kind):
    return field(default=default, metadata={"kind": kind})


@dataclass(frozen=True)
class DomainConfig:
    d: int = _f(1, "int")
    nx: int = _f(64, "int")
    ny: int = _f(64, "int")
    lx: float = _f(2 * np.pi, "float")
    ly: float = _f(2 * np.pi, "float")
    nrho: int = _f(32, "int")
    rho0: float = _f(1.0, "float")
    rho1: float = _f(2.0, "float")
    dealias_fraction: float = _f(2.0 / 3.0, "float")


@dataclass(frozen=True)
class BackgroundConfig:
    hbar: float = _f(1.0, "float")
    hbar_slope: float = _f(0.0, "float")
    ubar: float = _f(0.0, "float")
    ubar_shear: float = _f(0.0, "float")
    vbar: float = _f(0.0, "float")
    vbar_shear: float = _f(0.0, "float")


@dataclass(frozen=True)
class InitialConfig:
    h_modes: tuple = _f((), "modes")
    u_modes: tuple = _f((), "modes")
    v_modes: tuple = _f((), "modes")
    noise: float = _f(0.0, "float")
    w: str = _f("balanced", "str")


@dataclass(frozen=True)
class ParamsConfig:
    mu: float = _f(1e-3, "float")
    kappa: float = _f(0.1, "float")
    nu: float = _f(0.0, "float")
    h_floor: float = _f(0.1, "float")
    cfl_limit: float = _f(0.8, "float")
    solver_tol: float = _f(1e-10, "float")
    max_iters: int = _f(0, "int")


@dataclass(frozen=True)
class TimeConfig:
    dt: float = _f(0.01, "float")
    steps: int = _f(100, "int")


@dataclass(frozen=True)
class OutputConfig:
    stride: int = _f(10, "int")
    norm_s: float = _f(0.0, "float")
    norm_k: int = _f(0, "int")
    snapshots: bool = _f(False, "bool")
    checkpoint: bool = _f(True, "bool")


@dataclass(frozen=True)
class StudyConfig:
    mu_list: tuple = _f((4e-3, 2e-3, 1e-3, 5e-4), "list")
    nu_list: tuple = _f((1e-2, 1e-3, 1e-4), "list")
    kappa_list: tuple = _f((0.05, 0.1, 0.2, 0.4), "list")
    t_max: float = _f(5.0, "float")
    dt_check: bool = _f(True, "bool")


SECTIONS = {
    "domain": DomainConfig,
    "background": BackgroundConfig,
    "initial": InitialConfig,
    "params": ParamsConfig,
    "time": TimeConfig,
    "output": OutputConfig,
    "study": StudyConfig,
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; one attribute per section."""

    domain: DomainConfig = field(default_factory=DomainConfig)
    background: BackgroundConfig = field(default_factory=BackgroundConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    params: ParamsConfig = field(default_factory=ParamsConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    study: StudyConfig = field(default_factory=StudyConfig)

    # ------------------------------------------------------------- builders
    def grid(self):
        c = self.domain
        return Grid(c.nx, c.nrho, c.d, c.ny if c.d == 2 else 1, c.lx, c.ly, c.rho0, c.rho1,
                    c.dealias_fraction)

    def profile(self, grid=None):
        grid = grid or self.grid()
        b = self.background
        return BackgroundProfile.uniform(
            grid, b.hbar, (b.ubar, b.vbar)[: grid.d], (b.ubar_shear, b.vbar_shear)[: grid.d],
            b.hbar_slope,
        )

    def make_params(self, **overrides):
        p = self.params
        values = dict(
            mu=p.mu, kappa=p.kappa, nu=p.nu, rho0=self.domain.rho0, rho1=self.domain.rho1,
            h_floor=p.h_floor, cfl_limit=p.cfl_limit, solver_tol=p.solver_tol,
            max_iters=p.max_iters or None,
        )
        values.update(overrides)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return Params(**values)

    def initial_fields(self, grid=None, seed=None):
        """Initial ``(h, u)`` from the mode lists plus optional seeded noise."""
        grid = grid or self.grid()
        c = self.initial
        h = grid.zeros()
        u = grid.zeros(grid.d)
        for m in c.h_modes:
            h = h + m.evaluate(grid)
        for comp, modes in enumerate((c.u_modes, c.v_modes)[: grid.d]):
            for m in modes:
                u[comp] = u[comp] + m.evaluate(grid)
        if c.noise > 0:
            rng = np.random.default_rng(seed)
            h = h + c.noise * _smooth_noise(grid, rng)
            for comp in range(grid.d):
                u[comp] = u[comp] + c.noise * _smooth_noise(grid, rng)
        return h, u

    def hydro_state(self, grid=None, seed=None):
        h, u = self.initial_fields(grid, seed)
        return HydroState(0.0, h, u)

    def nonhydro_state(self, grid=None, profile=None, seed=None):
        grid = grid or self.grid()
        profile = profile or self.profile(grid)
        h, u = self.initial_fields(grid, seed)
        w = init_w(grid, h, u, profile) if self.initial.w == "balanced" else grid.zeros()
        return NonHydroState(0.0, h, u, w)

    @property
    def t_end(self):
        return self.time.dt * self.time.steps


def _smooth_noise(grid, rng, nmax=4):
    # band-limited random field with smooth density dependence, every axis
    out = grid.zeros()
    s = (grid.rho_b - grid.rho0) / (grid.rho1 - grid.rho0)
    for L, x in zip(grid.lengths, grid.x):
        for n in range(1, nmax + 1):
            for prof in (np.ones_like(s), s, np.cos(np.pi * s)):
                a, b = rng.standard_normal(2) / n**2
                arg = 2 * np.pi * n / L * x
                out = out + (a * np.cos(arg) + b * np.sin(arg)) * prof
    return out / np.sqrt(3 * nmax * grid.d)


# ---------------------------------------------------------------- validation
def _validate(cfg, lines):
    def fail(section, key, msg):
        raise ConfigValidationError(msg, f"{section}.{key}", lines.get((section, key)))

    d = cfg.domain
    if d.d not in (1, 2):
        fail("domain", "d", "must be 1 or 2")
    for key in ("nx",) + (("ny",) if d.d == 2 else ()):
        n = getattr(d, key)
        if n < 4 or n & (n - 1):
            fail("domain", key, "must be a power of two >= 4")
    if d.nrho < 4:
        fail("domain", "nrho", "must be >= 4")
    for key in ("lx", "ly"):
        if getattr(d, key) <= 0:
            fail("domain", key, "must be positive")
    if d.rho0 <= 0:
        fail("domain", "rho0", "must be positive")
    if d.rho1 <= d.rho0:
        fail("domain", "rho1", "must exceed rho0")
    if not 0 < d.dealias_fraction <= 1:
        fail("domain", "dealias_fraction", "must lie in (0, 1]")

    b = cfg.background
    if b.hbar <= 0:
        fail("background", "hbar", "must be positive")
    if b.hbar + b.hbar_slope * (d.rho1 - d.rho0) <= 0:
        fail("background", "hbar_slope", "makes hbar nonpositive at the bottom density")
    if d.d == 1 and (b.vbar or b.vbar_shear):
        fail("background", "vbar" if b.vbar else "vbar_shear", "requires d = 2")

    i = cfg.initial
    if d.d == 1 and i.v_modes:
        fail("initial", "v_modes", "requires d = 2")
    if i.noise < 0:
        fail("initial", "noise", "must be nonnegative")
    if i.w not in ("balanced", "zero"):
        fail("initial", "w", "must be 'balanced' or 'zero'")

    p = cfg.params
    for key in ("mu", "kappa", "nu"):
        if getattr(p, key) < 0:
            fail("params", key, "must be nonnegative")
    for key in ("h_floor", "cfl_limit", "solver_tol"):
        if getattr(p, key) <= 0:
            fail("params", key, "must be positive")
    if p.max_iters < 0:
        fail("params", "max_iters", "must be nonnegative (0 selects the default)")

    if cfg.time.dt <= 0:
        fail("time", "dt", "must be positive")
    if cfg.time.steps < 0:
        fail("time", "steps", "must be nonnegative")

    o = cfg.output
    if o.stride < 1:
        fail("output", "stride", "must be >= 1")
    if o.norm_s < 0:
        fail("output", "norm_s", "must be nonnegative")
    if not 0 <= o.norm_k <= o.norm_s:
        fail("output", "norm_k", "must satisfy 0 <= norm_k <= norm_s")

    s = cfg.study
    if any(v <= 0 for v in s.mu_list):
        fail("study", "mu_list", "entries must be positive")
    if any(v < 0 for v in s.nu_list):
        fail("study", "nu_list", "entries must be nonnegative")
    if any(v < 0 for v in s.kappa_list):
        fail("study", "kappa_list", "entries must be nonnegative")
    if s.t_max <= 0:
        fail("study", "t_max", "must be positive")


def _key_lines(text):
    # (section, key) -> one-based line number, for error messages
    out, section = {}, None
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            continue
        m = re.match(r"\s*([^#;=:\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip().lower()), no)
    return out


def parse_config_text(text):
    """Parse and validate configuration text; see :func:`parse_config`."""
    parser = configparser.ConfigParser(interpolation=None, strict=True, default_section="__none__")
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigParseError(str(exc).splitlines()[0], line=line) from exc
    lines = _key_lines(text)
    section_lines = {}
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section_lines.setdefault(m.group(1).strip().lower(), no)
    try:
        d_hint = _parse_int(parser.get("domain", "d", fallback="1"))
    except ValueError:
        d_hint = 1
    values = {}
    for section in parser.sections():
        name = section.strip().lower()
        if name not in SECTIONS:
            raise ConfigValidationError(f"unknown section [{section}]", line=section_lines.get(name))
        known = {f.name: f for f in fields(SECTIONS[name])}
        vals = values.setdefault(name, {})
        for key, raw in parser.items(section):
            where = (f"{name}.{key}", lines.get((name, key)))
            if key not in known:
                raise ConfigValidationError("unknown key", *where)
            kind = known[key].metadata["kind"]
            try:
                if kind == "modes":
                    vals[key] = _parse_modes(raw, d_hint)
                else:
                    vals[key] = _KINDS[kind][0](raw)
            except ValueError as exc:
                raise ConfigValidationError(str(exc) or "invalid value", *where) from exc
    cfg = RunConfig(**{name: SECTIONS[name](**vals) for name, vals in values.items()})
    _validate(cfg, lines)
    return cfg


def parse_config(path):
    """Read, parse and validate a configuration file.

    Raises
    ------
    ConfigMissingError, ConfigParseError, ConfigValidationError
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigMissingError(f"configuration file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"))


def emit_config(cfg):
    """Canonical text of the effective configuration (every key, fixed order)."""
    out = []
    for name, cls in SECTIONS.items():
        out.append(f"[{name}]")
        sec = getattr(cfg, name)
        for f in fields(cls):
            value = getattr(sec, f.name)
            text = _KINDS[f.metadata["kind"]][1](value)
            out.append(f"{f.name} = {text}".rstrip())
        out.append("")
    return "\n".join(out)


def config_hash(cfg):
    """Short SHA-256 digest of :func:`emit_config`."""
    return hashlib.sha256(emit_config(cfg).encode("utf-8")).hexdigest()[:16]


def replace_section(cfg, section, **changes):
    """Copy of ``cfg`` with keys of one section replaced."""
    return dataclasses.replace(cfg, **{section: dataclasses.replace(getattr(cfg, section), **changes)})
