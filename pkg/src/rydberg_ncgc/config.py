"""Run configuration: parsing, validation and round-trip emission.

Configs are INI-style sections or the equivalent JSON object.  Every
dimensional value carries an explicit unit suffix (``mhz_2pi``, ``ns``,
``rad``, ``khz``); bare numbers are rejected for them.  Values are kept
in these config units so that parse, emit and re-parse is exact.

Example::

    [run]
    experiment = gate
    protocol = ncgc

    [physical]
    omega = 4 mhz_2pi
    duration = 500 ns
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import math
import re
from dataclasses import dataclass, field, fields
from typing import Any

from .evolve import PropagatorOptions
from .experiments import ProtocolSettings
from .model import ModelMode, PhysicalParams, mhz
from .pulses import NcgcParams, PerturbationSpec, PmConstants, Protocol, RmConstants

UNITS = ("mhz_2pi", "ns", "rad", "khz")
EXPERIMENTS = (
    "waveform",
    "gate",
    "sweep-systematic",
    "sweep-noise",
    "sweep-blockade",
    "sweep-decoherence",
    "qft-timing",
)


class ConfigError(ValueError):
    """Invalid configuration; ``key`` and ``line`` locate the problem when known."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.key, self.line = key, line


def _f(default, unit: str | None = None, kind: str = "float"):
    if isinstance(default, (list, tuple)):
        return field(default=tuple(default), metadata={"unit": unit, "kind": kind})
    return field(default=default, metadata={"unit": unit, "kind": kind})


@dataclass(frozen=True)
class RunSection:
    experiment: str = _f("gate", kind="str")
    protocol: str = _f("ncgc", kind="str")
    mode: str = _f("reduced", kind="str")
    seed: int = _f(0, kind="int")
    trials: int = _f(50, kind="int")
    threads: int = _f(1, kind="int")
    format: str = _f("json", kind="str")
    out: str = _f("", kind="str")


@dataclass(frozen=True)
class PhysicalSection:
    omega: float = _f(4.0, "mhz_2pi")
    delta: float = _f(0.0, "mhz_2pi")
    v_blockade: float = _f(500.0, "mhz_2pi")
    duration: float = _f(500.0, "ns")


@dataclass(frozen=True)
class NcgcSection:
    a: float = _f(1.0)
    tau: float | None = _f(None, "ns", "optfloat")
    phi_initial: float = _f(0.0, "rad")
    sta: bool = _f(True, kind="bool")


@dataclass(frozen=True)
class RmSection:
    betas: tuple = _f((1.419, 0.0, 5.076, 13.425), "mhz_2pi", "floats")
    detuning: float = _f(3.512, "mhz_2pi")
    degree: int = _f(8, kind="int")
    reference_duration: float = _f(1000.0, "ns")


@dataclass(frozen=True)
class PmSection:
    rabi: float | None = _f(None, "mhz_2pi", "optfloat")
    amplitude: float = _f(mhz(0.1122), "rad")
    modulation_ratio: float = _f(1.0431)
    phase_offset: float = _f(-0.7318, "rad")
    pulse_area: float = _f(7.612, "rad")


@dataclass(frozen=True)
class IntegratorSection:
    step: float = _f(0.1, "ns")
    order: int = _f(4, kind="int")
    tolerance: float = _f(1e-7)
    include_cd: bool = _f(False, kind="bool")


@dataclass(frozen=True)
class PerturbationSection:
    kappa1: float = _f(0.0)
    kappa2: float = _f(0.0)
    noise_rabi: float = _f(0.0)
    noise_detuning: float = _f(0.0)
    noise_segment: float = _f(1.0, "ns")
    symmetric: bool = _f(False, kind="bool")


@dataclass(frozen=True)
class SweepSection:
    axis: str = _f("kappa1", kind="str")
    grid: tuple = _f((-0.1, -0.05, 0.0, 0.05, 0.1), None, "floats")
    protocols: tuple = _f(("ncgc", "pm", "rm"), None, "strs")
    rabi_amps: tuple = _f((0.0, 0.05, 0.1), None, "floats")
    detuning_amps: tuple = _f((0.0, 0.05, 0.1), None, "floats")
    v_grid: tuple = _f((200.0, 300.0, 400.0, 600.0, 1000.0), "mhz_2pi", "floats")
    durations: tuple = _f((500.0, 250.0), "ns", "floats")
    t_grid: tuple = _f((), "ns", "floats")
    rates: tuple = _f((1.0, 4.0, 30.0), "khz", "floats")
    convention: str = _f("doubled", kind="str")
    n_values: tuple = _f(tuple(range(2, 13)), None, "ints")
    t_gate: float = _f(250.0, "ns")
    qft_convention: str = _f("proportional", kind="str")


SECTIONS = {
    "run": RunSection,
    "physical": PhysicalSection,
    "ncgc": NcgcSection,
    "rm": RmSection,
    "pm": PmSection,
    "integrator": IntegratorSection,
    "perturbation": PerturbationSection,
    "sweep": SweepSection,
}


@dataclass(frozen=True)
class RunConfig:
    """Complete description of one run, in config units.

    The defaults are the geometric gate at its reference settings:
    ``Omega = 2 pi x 4 MHz``, zero detuning, ``V = 2 pi x 500 MHz``,
    ``T = 500 ns``, ``a = 1``, ``tau = T / 2`` and STA on.
    """

    run: RunSection = RunSection()
    physical: PhysicalSection = PhysicalSection()
    ncgc: NcgcSection = NcgcSection()
    rm: RmSection = RmSection()
    pm: PmSection = PmSection()
    integrator: IntegratorSection = IntegratorSection()
    perturbation: PerturbationSection = PerturbationSection()
    sweep: SweepSection = SweepSection()

    def __post_init__(self):
        _validate(self)

    # -- derived library objects --------------------------------------

    @property
    def protocol(self) -> Protocol:
        return Protocol.parse(self.run.protocol)

    @property
    def mode(self) -> ModelMode:
        return ModelMode.parse(self.run.mode)

    def physical_params(self) -> PhysicalParams:
        p = self.physical
        return PhysicalParams(mhz(p.omega), mhz(p.delta), mhz(p.v_blockade), p.duration)

    def settings(self) -> ProtocolSettings:
        n, r, m = self.ncgc, self.rm, self.pm
        return ProtocolSettings(
            NcgcParams(n.a, n.tau, n.phi_initial, n.sta),
            RmConstants(tuple(r.betas), r.detuning, r.degree, r.reference_duration),
            PmConstants(
                m.amplitude,
                m.modulation_ratio,
                m.phase_offset,
                m.pulse_area,
                None if m.rabi is None else mhz(m.rabi),
            ),
        )

    def options(self) -> PropagatorOptions:
        i = self.integrator
        return PropagatorOptions(i.step, i.order, i.tolerance, i.include_cd)

    def perturbation_spec(self) -> PerturbationSpec:
        p = self.perturbation
        return PerturbationSpec(
            p.kappa1, p.kappa2, p.noise_rabi, p.noise_detuning, p.noise_segment, self.run.seed, p.symmetric
        )

    def pm_rabi(self) -> float:
        """Phase-modulated Rabi frequency in 2 pi x MHz at the configured duration."""
        return self.settings().pm.rabi_for(self.physical.duration) / mhz(1.0)

    def replace(self, section: str, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **changes)})

    # -- emission -----------------------------------------------------

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            sec = getattr(self, name)
            out[name] = {f.name: _emit(getattr(sec, f.name), f) for f in fields(sec) if getattr(sec, f.name) is not None}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_ini(self) -> str:
        lines = []
        for name, sec in self.to_dict().items():
            lines.append(f"[{name}]")
            lines += [f"{k} = {v}" for k, v in sec.items()]
            lines.append("")
        return "\n".join(lines)


def _emit(value, f) -> Any:
    unit, kind = f.metadata["unit"], f.metadata["kind"]
    if kind == "bool":
        return "true" if value else "false"
    if kind == "str":
        return value
    if kind == "strs":
        return ", ".join(value)
    if kind == "int":
        return str(value)
    if kind == "ints":
        return ", ".join(str(v) for v in value)
    if kind == "floats":
        text = ", ".join(repr(float(v)) for v in value)
    else:
        text = repr(float(value))
    return f"{text} {unit}".strip() if unit else text


_VALUE = re.compile(r"^(?P<body>.*?)\s*(?P<unit>mhz_2pi|ns|rad|khz)?\s*$", re.IGNORECASE)


def _convert(raw: Any, f, key: str, line: int | None):
    unit, kind = f.metadata["unit"], f.metadata["kind"]
    if isinstance(raw, bool):
        raw = "true" if raw else "false"
    if isinstance(raw, (int, float)):
        raw = repr(raw)
    if isinstance(raw, list):
        raw = ", ".join(str(x) for x in raw)
    if not isinstance(raw, str):
        raise ConfigError("unsupported value type", key, line)
    text = raw.strip()
    if kind == "str":
        return text.lower()
    if kind == "strs":
        return tuple(s.strip().lower() for s in text.split(",") if s.strip())
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"malformed boolean {text!r}", key, line)
    if kind == "optfloat" and text.lower() in ("", "auto", "none"):
        return None
    m = _VALUE.match(text)
    body, suffix = m.group("body"), (m.group("unit") or "").lower() or None
    if suffix != unit:
        if unit is None:
            raise ConfigError(f"value is dimensionless, unexpected unit {suffix!r}", key, line)
        if suffix is None:
            raise ConfigError(f"missing unit suffix, expected '{unit}'", key, line)
        raise ConfigError(f"unit '{suffix}' does not match expected '{unit}'", key, line)
    parts = [s.strip() for s in body.split(",")] if kind in ("floats", "ints") else [body]
    if kind in ("floats", "ints") and parts == [""]:
        return ()
    try:
        if kind in ("int", "ints"):
            vals = [int(s) for s in parts]
        else:
            vals = [float(s) for s in parts]
    except ValueError:
        raise ConfigError(f"malformed number {body!r}", key, line) from None
    if any(isinstance(v, float) and not math.isfinite(v) for v in vals):
        raise ConfigError("value must be finite", key, line)
    return tuple(vals) if kind in ("floats", "ints") else vals[0]


def _validate(cfg: RunConfig):
    r = cfg.run
    if r.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {r.experiment!r}", "experiment")
    try:
        Protocol.parse(r.protocol)
    except ValueError as e:
        raise ConfigError(str(e), "protocol") from None
    try:
        ModelMode.parse(r.mode)
    except ValueError as e:
        raise ConfigError(str(e), "mode") from None
    for p in cfg.sweep.protocols:
        try:
            Protocol.parse(p)
        except ValueError as e:
            raise ConfigError(str(e), "protocols") from None
    if r.format not in ("csv", "json"):
        raise ConfigError("format must be csv or json", "format")
    if not 0 <= r.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", "seed")
    if r.trials < 1:
        raise ConfigError("trials must be at least 1", "trials")
    if r.threads < 1:
        raise ConfigError("threads must be at least 1", "threads")
    if cfg.sweep.axis not in ("kappa1", "kappa2"):
        raise ConfigError("axis must be kappa1 or kappa2", "axis")
    if cfg.sweep.convention not in ("doubled", "standard"):
        raise ConfigError("convention must be doubled or standard", "convention")
    if cfg.sweep.qft_convention not in ("proportional", "paper_text"):
        raise ConfigError("qft_convention must be proportional or paper_text", "qft_convention")
    checks = (
        ("physical", cfg.physical_params),
        ("ncgc", cfg.settings),
        ("integrator", cfg.options),
    )
    for key, build in checks:
        try:
            build()
        except ValueError as e:
            raise ConfigError(str(e), key) from None
    if cfg.run.protocol == "ncgc":
        try:
            cfg.settings().ncgc.boundary(cfg.physical.duration)
        except ValueError as e:
            raise ConfigError(str(e), "tau") from None


def _line_of(text: str, section: str | None, key: str) -> int | None:
    current = None
    pat = re.compile(rf"^\s*\"?{re.escape(key)}\"?\s*[=:]", re.IGNORECASE)
    for i, line in enumerate(text.splitlines(), start=1):
        head = re.match(r"^\s*\[([^\]]+)\]", line)
        if head:
            current = head.group(1).strip().lower()
            continue
        if (section is None or current == section) and pat.match(line):
            return i
    return None


def _build(raw: dict, text: str, ini: bool) -> RunConfig:
    sections = {}
    for name, body in raw.items():
        if name not in SECTIONS:
            line = _section_line(text, name) if ini else _json_line(text, name)
            raise ConfigError(f"unknown section '{name}'", name, line)
        if not isinstance(body, dict):
            raise ConfigError("section must be a mapping", name)
        cls = SECTIONS[name]
        known = {f.name: f for f in fields(cls)}
        values = {}
        for key, value in body.items():
            line = _line_of(text, name if ini else None, key) if ini else _json_line(text, key)
            if key not in known:
                raise ConfigError(f"unknown key in [{name}]", key, line)
            values[key] = _convert(value, known[key], key, line)
        try:
            sections[name] = cls(**values)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e), name) from None
    return RunConfig(**sections)


def _section_line(text: str, name: str) -> int | None:
    for i, line in enumerate(text.splitlines(), start=1):
        if re.match(rf"^\s*\[\s*{re.escape(name)}\s*\]", line, re.IGNORECASE):
            return i
    return None


def _json_line(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), start=1):
        if f'"{key}"' in line:
            return i
    return None


def parse_config(text: str) -> RunConfig:
    """Parse INI-style or JSON config text into a validated :class:`RunConfig`.

    A JSON run sidecar (an object with a ``config`` member) is accepted and
    reproduces the run that wrote it.
    """
    if text.strip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON: {e.msg}", None, e.lineno) from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        if "config" in raw and isinstance(raw["config"], dict):
            raw = raw["config"]
        return _build(raw, text, ini=False)
    parser = configparser.ConfigParser(interpolation=None, strict=True, default_section="\0defaults")
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("key outside any section", None, e.lineno) from None
    except configparser.DuplicateOptionError as e:
        raise ConfigError("duplicate key", e.option, e.lineno) from None
    except configparser.DuplicateSectionError as e:
        raise ConfigError("duplicate section", e.section, e.lineno) from None
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    return _build(raw, text, ini=True)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
