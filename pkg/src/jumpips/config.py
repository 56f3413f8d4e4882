"""INI run configuration: parsing, validation, serialization.

Sections mirror the modules (domain, potential, kernel, rate, dynamics,
diagnostics, testfn) plus [run] for seed, output directory and replicas.
Every key has a documented default except ``domain.dimension`` and
``domain.half_width``; unknown sections or keys are errors.
"""
from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .dynamics import SimParams
from .functionals import TestFunction
from .geometry import Domain
from .kernels import KernelSpec
from .potentials import PotentialSpec
from .rates import RateSpec

REQUIRED = object()


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in re.split(r"[,\s]+", text.strip()) if v)


def _points(text: str) -> tuple:
    # rows separated by ';', coordinates by ',' or whitespace
    return tuple(_floats(row) for row in text.split(";") if row.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none") else float(text)


def _opt_str(text: str):
    return None if text.strip().lower() in ("", "none") else text.strip()


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(", ".join(repr(x) for x in row) for row in v)
        return ", ".join(repr(x) for x in v)
    return str(v)


# section -> key -> (parser, default)
SCHEMA = {
    "run": {
        "seed": (int, 0),
        "out": (str, "out"),
        "replicas": (int, 1),
    },
    "domain": {
        "dimension": (int, REQUIRED),
        "half_width": (float, REQUIRED),
        "boundary_mode": (str, "reject"),
    },
    "potential": {
        "pair": (str, "zero"),
        "a": (_opt_float, None),
        "beta": (float, 2.0),
        "sign": (int, -1),
        "radius": (_opt_float, None),
        "scale": (float, 1.0),
        "self_kind": (str, "zero"),
        "strength": (float, 0.0),
        "table": (_opt_str, None),
        "table_resolution": (int, 513),
    },
    "kernel": {
        "kind": (str, "alpha_stable"),
        "alpha": (float, 1.0),
        "alpha_field": (str, "constant"),
        "field_center": (float, 1.0),
        "field_amplitude": (float, 0.0),
        "field_frequency": (float, 1.0),
        "radius": (float, 1.0),
        "power": (float, 1.0),
        "constant_mode": (str, "unit"),
        "C1": (float, 1.0),
        "r_min": (_opt_float, None),
    },
    "rate": {
        "mode": (str, "gibbs_closed_form"),
        "ginibre_radius": (float, math.inf),
    },
    "dynamics": {
        "particles": (int, 3),
        "initial": (_points, ()),
        "steps": (int, 0),
        "horizon": (float, 0.0),
        "gamma": (float, 1.0),
        "stride": (int, 1),
        "record_dt": (float, 0.0),
        "record_events": (_bool, True),
        "envelope": (str, "pair"),
        "activity": (float, 1.0),
        "energy_floor": (float, 0.0),
        "max_events": (int, 10**8),
    },
    "diagnostics": {
        "samples": (int, 2000),
        "energy_samples": (int, 50),
        "kappa": (float, 0.0),
        "bins": (int, 8),
        "radii": (_floats, (0.5, 1.0, 1.5, 2.0, 3.0)),
        "test_box": (_floats, (-1.0, 1.0)),
        "level": (float, 0.05),
    },
    "testfn": {
        "degree": (int, 1),
        "centers": (_points, ()),
        "radii": (_floats, (1.0,)),
        "coefficients": (_floats, (0.0, 1.0)),
    },
}

REQUIRED_SECTIONS = ("domain", "kernel")


class ConfigError(ValueError):
    def __init__(self, message: str, section: str | None = None, key: str | None = None,
                 line: int | None = None):
        where = ""
        if section:
            where = f"[{section}]" + (f" {key}" if key else "")
            if line is not None:
                where += f" (line {line})"
            where += ": "
        super().__init__(where + message)
        self.section, self.key, self.line = section, key, line

    def to_dict(self) -> dict:
        return {"error": "ConfigError", "message": str(self), "section": self.section, "key": self.key,
                "line": self.line}


def _line_index(text: str) -> dict:
    """(section, key) -> line number, and section -> header line."""
    out, section = {}, None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = no
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            out[(section, m.group(1).strip())] = no
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration: ``values[section][key]`` holds parsed values."""

    values: dict

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values == other.values

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    @property
    def out(self) -> str:
        return self.values["run"]["out"]

    def domain(self) -> Domain:
        return Domain(**self.values["domain"])

    def potential(self) -> PotentialSpec:
        return PotentialSpec(**self.values["potential"])

    def kernel(self) -> KernelSpec:
        return KernelSpec(**self.values["kernel"])

    def rate(self) -> RateSpec:
        r = self.values["rate"]
        return RateSpec(self.kernel(), self.potential(), r["mode"], r["ginibre_radius"])

    def sim_params(self, seed: int | None = None) -> SimParams:
        dyn = {k: v for k, v in self.values["dynamics"].items() if k not in ("particles", "initial")}
        return SimParams(seed=self.seed if seed is None else seed, **dyn)

    def testfn(self) -> TestFunction:
        return _testfn(self.values)

    def serialize(self) -> str:
        parts = []
        for section, keys in SCHEMA.items():
            parts.append(f"[{section}]")
            parts += [f"{k} = {_fmt(self.values[section][k])}" for k in keys]
            parts.append("")
        return "\n".join(parts)

    def hash(self) -> str:
        """Digest of every setting except the output directory."""
        lines = [ln for ln in self.serialize().splitlines() if not ln.startswith("out = ")]
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]

    def with_overrides(self, overrides) -> "RunConfig":
        """Apply ``section.key=value`` strings and revalidate."""
        text = self.serialize()
        return parse_config(text, overrides=overrides)


def _testfn(values: dict) -> TestFunction:
    t = values["testfn"]
    # no centers given: one bump at the origin
    centers = t["centers"] or ((0.0,) * values["domain"]["dimension"],)
    return TestFunction(centers, t["radii"], t["coefficients"], degree=t["degree"])


def _validate(values: dict, lines: dict):
    def fail(section, key, exc):
        raise ConfigError(str(exc), section, key, lines.get((section, key), lines.get((section, None))))

    builders = [
        ("domain", lambda: Domain(**values["domain"])),
        ("potential", lambda: PotentialSpec(**values["potential"]).check_dimension(values["domain"]["dimension"])),
        ("kernel", lambda: KernelSpec(**values["kernel"])),
        ("rate", lambda: RateSpec(KernelSpec(**values["kernel"]), PotentialSpec(**values["potential"]),
                                  values["rate"]["mode"], values["rate"]["ginibre_radius"])),
        ("dynamics", lambda: SimParams(**{k: v for k, v in values["dynamics"].items()
                                          if k not in ("particles", "initial")})),
        ("testfn", lambda: _testfn(values)),
    ]
    for section, build in builders:
        try:
            build()
        except ValueError as exc:
            # point at the key the message names, if any
            key = next((k for k in values[section] if re.search(rf"\b{re.escape(k)}\b", str(exc))), None)
            fail(section, key, exc)
    d = values["domain"]["dimension"]
    dyn = values["dynamics"]
    if dyn["particles"] < 0:
        fail("dynamics", "particles", "particles must be >= 0")
    if dyn["initial"] and any(len(row) != d for row in dyn["initial"]):
        fail("dynamics", "initial", f"initial points need {d} coordinates each")
    if any(len(row) != d for row in values["testfn"]["centers"]):
        fail("testfn", "centers", f"bump centers need {d} coordinates each")
    if values["run"]["replicas"] < 1:
        fail("run", "replicas", "replicas must be >= 1")
    diag = values["diagnostics"]
    if len(diag["test_box"]) != 2:
        fail("diagnostics", "test_box", "test_box takes two numbers a, b")
    if diag["samples"] < 2 or diag["energy_samples"] < 2:
        fail("diagnostics", "samples", "sample counts must be >= 2")
    if not 0 < diag["level"] < 1:
        fail("diagnostics", "level", "level must lie in (0, 1)")


def parse_config(source, overrides=()) -> RunConfig:
    """Parse a path or INI text into a validated :class:`RunConfig`.

    ``overrides`` are ``section.key=value`` strings applied on top.
    """
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and "[" not in source):
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text()
    else:
        text = source
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    lines = _line_index(text)
    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {ov!r}")
        name, value = ov.split("=", 1)
        section, key = (s.strip() for s in name.split(".", 1))
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value.strip())
        lines[(section, key)] = None
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section; known: {sorted(SCHEMA)}", section, None,
                              lines.get((section, None)))
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key; known: {sorted(SCHEMA[section])}", section, key,
                                  lines.get((section, key)))
    for section in REQUIRED_SECTIONS:
        if not cp.has_section(section):
            raise ConfigError(f"missing required section [{section}]")
    values = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (parse, default) in keys.items():
            if cp.has_section(section) and key in cp[section]:
                raw = cp[section][key]
                try:
                    values[section][key] = parse(raw)
                except ValueError as exc:
                    raise ConfigError(f"cannot parse {raw!r}: {exc}", section, key, lines.get((section, key)))
            elif default is REQUIRED:
                raise ConfigError("missing required key", section, key, lines.get((section, None)))
            else:
                values[section][key] = default
    _validate(values, lines)
    return RunConfig(values)


DEFAULT_CONFIG = """\
[domain]
dimension = 1
half_width = 4.0

[kernel]
kind = alpha_stable
alpha = 1.0
r_min = 0.1

[potential]
pair = lennard_jones

[dynamics]
particles = 3
steps = 2000
horizon = 20.0
"""
