"""INI experiment configuration with line-precise validation errors.

Example::

    [experiment]
    protocol = plain
    seeds = 1, 2, 3
    k = 1024, 16384
    output = tcm_plain

    [model]
    preset = tcm_main
    num_qubits = 2

    [noise]
    p2 = 0.01
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..isl import IslConfig
from ..models import HSC_PRESETS, TCM_PRESETS
from ..simulator import NoiseModel
from ..transpiler import DEFAULT_EDGES, CouplingGraph
from ..zne import ZneConfig

PROTOCOLS = ("plain", "zne", "isl", "isl_zne")
DEFAULT_REPETITIONS = {"noisy": 6, "mixed": 5, "noiseless": 5}
_SECTIONS = {
    "experiment": {"name", "protocol", "seeds", "repetitions", "k", "output"},
    "model": {"preset", "num_qubits", "dt", "n_steps", "omega", "g", "j", "h"},
    "noise": {"enabled", "p1", "p2", "readout_flip"},
    "device": {"num_qubits", "edges", "layout"},
    "zne": {"lambdas", "n_avg", "asymptote", "clip"},
    "isl": {
        "variant",
        "thresholds",
        "theta_th",
        "max_layers",
        "stall_layers",
        "stall_delta",
        "tabu_tenure",
        "source",
    },
}


class ConfigError(ValueError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path, self.line, self.message = path, line, message
        where = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
        super().__init__(f"{where}{message}")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    protocol: str
    preset: str
    num_qubits: int
    dt: float
    n_steps: int
    overrides: dict = field(default_factory=dict)
    ks: tuple[int, ...] = (16384,)
    seeds: tuple[int, ...] = (0,)
    noise: NoiseModel = field(default_factory=NoiseModel)
    graph: CouplingGraph = field(default_factory=CouplingGraph.default)
    layout: tuple[int, ...] | None = None
    zne: ZneConfig = field(default_factory=ZneConfig)
    isl: IslConfig = field(default_factory=IslConfig)
    thresholds: tuple[float, ...] = (1e-2,)
    isl_source: str | None = None
    output: str = "results"
    source_path: str | None = None

    @property
    def family(self) -> str:
        return "tcm" if self.preset in TCM_PRESETS else "hsc"

    @property
    def uses_isl(self) -> bool:
        return self.protocol in ("isl", "isl_zne")


def _line_index(text: str) -> dict[tuple[str, str | None], int]:
    """Map (section, key) and (section, None) to 1-based line numbers."""
    index: dict[tuple[str, str | None], int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            index.setdefault((section, None), no)
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            index.setdefault((section, m.group(1).strip().lower()), no)
    return index


class _Reader:
    def __init__(self, parser: configparser.ConfigParser, lines: dict, path: str | None):
        self.p, self.lines, self.path = parser, lines, path

    def error(self, section: str, key: str | None, msg: str) -> ConfigError:
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        return ConfigError(msg, self.path, line)

    def has(self, section: str, key: str) -> bool:
        return self.p.has_option(section, key) and self.p.get(section, key).strip() != ""

    def raw(self, section: str, key: str, default: str | None = None) -> str | None:
        return self.p.get(section, key).strip() if self.has(section, key) else default

    def _convert(self, section: str, key: str, conv, what: str):
        text = self.raw(section, key)
        try:
            return conv(text)
        except (ValueError, TypeError):
            raise self.error(section, key, f"{key} must be {what}, got {text!r}") from None

    def integer(self, section: str, key: str, default: int, minimum: int | None = None) -> int:
        if not self.has(section, key):
            return default
        v = self._convert(section, key, int, "an integer")
        if minimum is not None and v < minimum:
            raise self.error(section, key, f"{key} must be >= {minimum}")
        return v

    def real(self, section: str, key: str, default: float | None) -> float | None:
        if not self.has(section, key):
            return default
        return self._convert(section, key, float, "a number")

    def boolean(self, section: str, key: str, default: bool) -> bool:
        if not self.has(section, key):
            return default
        try:
            return self.p.getboolean(section, key)
        except ValueError:
            raise self.error(section, key, f"{key} must be true or false") from None

    def ints(self, section: str, key: str, default: tuple[int, ...]) -> tuple[int, ...]:
        if not self.has(section, key):
            return default
        return self._convert(section, key, lambda s: tuple(int(x) for x in _split(s)), "a list of integers")

    def reals(self, section: str, key: str, default: tuple[float, ...]) -> tuple[float, ...]:
        if not self.has(section, key):
            return default
        return self._convert(section, key, lambda s: tuple(float(x) for x in _split(s)), "a list of numbers")


def _split(text: str) -> list[str]:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if not parts:
        raise ValueError("empty list")
    return parts


def _edges(text: str) -> tuple[tuple[int, int], ...]:
    out = []
    for token in _split(text):
        a, b = token.split("-")
        out.append((int(a), int(b)))
    return tuple(out)


def parse_config(text: str, path: str | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=path or "<config>")
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", path, exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", path, exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("content before the first [section]", path, exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", path, line) from None
    lines = _line_index(text)
    r = _Reader(parser, lines, path)

    for section in parser.sections():
        if section not in _SECTIONS:
            raise r.error(section, None, f"unknown section [{section}]")
        for key in parser.options(section):
            if key not in _SECTIONS[section]:
                raise r.error(section, key, f"unknown key {key!r} in [{section}]")
    for required in ("experiment", "model"):
        if not parser.has_section(required):
            raise ConfigError(f"missing [{required}] section", path, None)

    protocol = r.raw("experiment", "protocol")
    if protocol not in PROTOCOLS:
        raise r.error("experiment", "protocol", f"protocol must be one of {', '.join(PROTOCOLS)}")
    preset = r.raw("model", "preset")
    if preset not in TCM_PRESETS and preset not in HSC_PRESETS:
        raise r.error("model", "preset", f"unknown model preset {preset!r}")
    is_tcm = preset in TCM_PRESETS
    nq = r.integer("model", "num_qubits", 2, minimum=2)
    dt = r.real("model", "dt", 0.01)
    if dt <= 0:
        raise r.error("model", "dt", "dt must be positive")
    n_steps = r.integer("model", "n_steps", 40, minimum=1)
    overrides: dict = {}
    for key in ("omega", "g"):
        if r.has("model", key):
            if not is_tcm:
                raise r.error("model", key, f"{key} only applies to TCM presets")
            overrides[key] = r.real("model", key, None)
    for key, name in (("j", "J"), ("h", "h")):
        if r.has("model", key):
            if is_tcm:
                raise r.error("model", key, f"{name} only applies to HSC presets")
            vec = r.reals("model", key, ())
            if len(vec) != 3:
                raise r.error("model", key, f"{name} needs three components")
            overrides[name] = vec

    ks = r.ints("experiment", "k", (16384,))
    if any(k < 1 for k in ks):
        raise r.error("experiment", "k", "shot counts must be positive")

    noise = NoiseModel()
    if parser.has_section("noise"):
        enabled = r.boolean("noise", "enabled", True)
        vals = {}
        for key in ("p1", "p2", "readout_flip"):
            v = r.real("noise", key, getattr(noise, key))
            if not 0.0 <= v <= 1.0:
                raise r.error("noise", key, f"{key} must lie in [0, 1]")
            vals[key] = v
        noise = NoiseModel(**vals) if enabled else NoiseModel.noiseless()

    graph = CouplingGraph.default()
    layout = None
    if parser.has_section("device"):
        size = r.integer("device", "num_qubits", 7, minimum=1)
        edges = DEFAULT_EDGES
        if r.has("device", "edges"):
            try:
                edges = _edges(r.raw("device", "edges"))
            except ValueError:
                raise r.error("device", "edges", "edges must look like '0-1, 1-2'") from None
        try:
            graph = CouplingGraph(size, edges)
        except ValueError as exc:
            raise r.error("device", "edges", str(exc)) from None
        if r.has("device", "layout"):
            layout = r.ints("device", "layout", ())
            if len(layout) != nq or len(set(layout)) != nq or any(not 0 <= q < size for q in layout):
                raise r.error("device", "layout", f"layout must list {nq} distinct device qubits")
    if nq > graph.num_qubits:
        raise r.error("model", "num_qubits", "model needs more qubits than the device has")

    zne = ZneConfig()
    if parser.has_section("zne"):
        try:
            zne = ZneConfig(
                lambdas=r.reals("zne", "lambdas", zne.lambdas),
                n_avg=r.integer("zne", "n_avg", zne.n_avg, minimum=1),
                asymptote_a=r.real("zne", "asymptote", None),
                clip_to_unit_interval=r.boolean("zne", "clip", True),
            )
        except ValueError as exc:
            raise r.error("zne", "lambdas", str(exc)) from None

    variant = r.raw("isl", "variant", "noisy") if parser.has_section("isl") else "noisy"
    if variant not in DEFAULT_REPETITIONS:
        raise r.error("isl", "variant", f"variant must be one of {', '.join(DEFAULT_REPETITIONS)}")
    thresholds: tuple[float, ...] = (1e-2,)
    isl = IslConfig(variant=variant)
    source = None
    if parser.has_section("isl"):
        thresholds = r.reals("isl", "thresholds", thresholds)
        if any(t <= 0 for t in thresholds):
            raise r.error("isl", "thresholds", "thresholds must be positive")
        isl = IslConfig(
            variant=variant,
            theta_th=r.real("isl", "theta_th", isl.theta_th),
            max_layers=r.integer("isl", "max_layers", isl.max_layers, minimum=1),
            stall_layers=r.integer("isl", "stall_layers", isl.stall_layers, minimum=1),
            stall_delta=r.real("isl", "stall_delta", isl.stall_delta),
            tabu_tenure=r.integer("isl", "tabu_tenure", isl.tabu_tenure, minimum=0),
        )
        source = r.raw("isl", "source")
    if protocol == "isl_zne" and source is None:
        raise r.error("isl" if parser.has_section("isl") else "experiment", "source" if parser.has_section("isl") else "protocol", "isl_zne needs [isl] source pointing at a finished isl run")

    if r.has("experiment", "seeds"):
        seeds = r.ints("experiment", "seeds", ())
        if r.has("experiment", "repetitions"):
            reps = r.integer("experiment", "repetitions", 1, minimum=1)
            if reps != len(seeds):
                raise r.error("experiment", "repetitions", "repetitions disagrees with the number of seeds")
    else:
        default = DEFAULT_REPETITIONS[variant] if protocol in ("isl", "isl_zne") else 1
        seeds = tuple(range(r.integer("experiment", "repetitions", default, minimum=1)))
    if len(set(seeds)) != len(seeds):
        raise r.error("experiment", "seeds", "seeds must be distinct")

    name = r.raw("experiment", "name", Path(path).stem if path else "experiment")
    return ExperimentConfig(
        name=name,
        protocol=protocol,
        preset=preset,
        num_qubits=nq,
        dt=dt,
        n_steps=n_steps,
        overrides=overrides,
        ks=ks,
        seeds=seeds,
        noise=noise,
        graph=graph,
        layout=layout,
        zne=zne,
        isl=isl,
        thresholds=thresholds,
        isl_source=source,
        output=r.raw("experiment", "output", name),
        source_path=path,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(p)) from None
    return parse_config(text, str(p))
