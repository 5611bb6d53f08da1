"""Run configuration: INI-style ``key = value`` files plus ``--section.key`` overrides.

Keys before the first ``[section]`` header are top level (``experiment``,
``record_every``).  Every key has a default; some defaults depend on the
experiment, see :data:`EXPERIMENT_DEFAULTS`.
"""

from __future__ import annotations

import configparser
import difflib
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

from .games import BUILTIN_GAMES

__all__ = [
    "ConfigError",
    "EXPERIMENTS",
    "EXPERIMENT_DEFAULTS",
    "RunConfig",
    "config_help",
    "parse_config",
]

EXPERIMENTS = (
    "simulate",
    "variance-decay",
    "mf-rate",
    "iid-consensus",
    "stability-probe",
    "moment-monitor",
    "nash-search",
)
FORMATS = ("csv", "json", "png")


class ConfigError(ValueError):
    pass


def _as_list(conv):
    def parse(v):
        if isinstance(v, str):
            v = [s for s in (p.strip() for p in v.replace(";", ",").split(",")) if s]
        return tuple(conv(x) for x in v)
    parse.__name__ = f"list[{conv.__name__}]"
    return parse


def _as_int(v):
    if isinstance(v, str):
        v = v.strip()
        try:
            return int(v)
        except ValueError:
            v = float(v)
    if isinstance(v, float):
        if not v.is_integer():
            raise ValueError(f"{v} is not an integer")
        return int(v)
    return int(v)


# (section, key) -> (converter, default); section "" is top level
SCHEMA = {
    ("", "experiment"): (str, "variance-decay"),
    ("", "record_every"): (_as_int, 1),
    ("game", "name"): (str, "decoupled-quadratic"),
    ("game", "M"): (_as_int, 2),
    ("game", "d"): (_as_int, 2),
    ("game", "coupling"): (float, 0.0),
    ("params", "lambda"): (float, 1.0),
    ("params", "sigma"): (float, 0.5),
    ("params", "alpha"): (float, 40.0),
    ("params", "xi"): (float, 1.0),
    ("params", "dt"): (float, 0.01),
    ("params", "t_end"): (float, 10.0),
    ("params", "diffusion"): (str, "anisotropic"),
    ("particles", "N"): (_as_int, 200),
    ("particles", "n_list"): (_as_list(_as_int), (16, 32, 64, 128, 256)),
    ("particles", "n_ref"): (_as_int, 4096),
    ("analysis", "p"): (float, 2.0),
    ("analysis", "trials"): (_as_int, 1000),
    ("analysis", "R"): (float, 10.0),
    ("analysis", "xis"): (_as_list(float), (0.0, 0.5, 1.0)),
    ("seeds", "base_seed"): (_as_int, 0),
    ("seeds", "count"): (_as_int, 8),
    ("output", "directory"): (str, "cbo-out"),
    ("output", "formats"): (_as_list(str), ("csv", "json", "png")),
}

EXPERIMENT_DEFAULTS = {
    "mf-rate": {("seeds", "count"): 16},
    "iid-consensus": {
        ("params", "alpha"): 1.0,
        ("particles", "n_list"): (100, 1000, 10000, 100000),
        ("analysis", "trials"): 200,
    },
    "stability-probe": {("params", "alpha"): 10.0},
    "moment-monitor": {("seeds", "count"): 4},
    "nash-search": {
        ("game", "name"): "rastrigin-coupled",
        ("game", "coupling"): 0.1,
        ("params", "alpha"): 100.0,
        ("params", "sigma"): 0.3,
        ("params", "t_end"): 20.0,
        ("particles", "N"): 400,
    },
}


def _dotted(section, key):
    return f"{section}.{key}" if section else key


VALID_KEYS = [_dotted(s, k) for s, k in SCHEMA]


@dataclass(frozen=True)
class GameConfig:
    name: str
    M: int
    d: int
    coupling: float


@dataclass(frozen=True)
class ParamsConfig:
    lam: float
    sigma: float
    alpha: float
    xi: float
    dt: float
    t_end: float
    diffusion: str


@dataclass(frozen=True)
class ParticlesConfig:
    N: int
    n_list: tuple
    n_ref: int


@dataclass(frozen=True)
class AnalysisConfig:
    p: float
    trials: int
    R: float
    xis: tuple


@dataclass(frozen=True)
class SeedsConfig:
    base_seed: int
    count: int

    @property
    def seeds(self):
        return list(range(self.base_seed, self.base_seed + self.count))


@dataclass(frozen=True)
class OutputConfig:
    directory: str
    formats: tuple


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    record_every: int
    game: GameConfig
    params: ParamsConfig
    particles: ParticlesConfig
    analysis: AnalysisConfig
    seeds: SeedsConfig
    output: OutputConfig

    def to_dict(self) -> dict:
        """Nested mapping with the same keys as a config file; parses back to an equal config."""
        out: dict[str, Any] = {"experiment": self.experiment, "record_every": self.record_every}
        for sec in ("game", "params", "particles", "analysis", "seeds", "output"):
            values = asdict(getattr(self, sec))
            if sec == "params":
                values["lambda"] = values.pop("lam")
            out[sec] = {k: list(v) if isinstance(v, tuple) else v for k, v in values.items()}
        return out

    def cbo_params(self):
        from .dynamics import CboParams
        p = self.params
        return CboParams(lam=p.lam, sigma=p.sigma, alpha=p.alpha, xi=p.xi, dt=p.dt,
                         t_end=p.t_end, diffusion=p.diffusion)


def _unknown(key):
    close = difflib.get_close_matches(key, VALID_KEYS, n=1, cutoff=0.5)
    if not close:
        # compare on the bare key so "params.lamda" still finds "params.lambda"
        bare = {k.split(".")[-1]: k for k in VALID_KEYS}
        hit = difflib.get_close_matches(key.split(".")[-1], list(bare), n=1, cutoff=0.5)
        close = [bare[hit[0]]] if hit else []
    hint = f"; did you mean '{close[0]}'?" if close else ""
    return ConfigError(f"unknown key '{key}'{hint}")


def _read_file(path) -> dict:
    text = Path(path).read_text()
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[__top__]\n" + text, source=str(path))
    except configparser.Error as err:
        # shift line numbers back by the injected header
        msg = str(err)
        if isinstance(err, configparser.ParsingError):
            msg = f"cannot parse {path}: " + "; ".join(
                f"line {ln - 1}: {line!r}" for ln, line in err.errors)
        raise ConfigError(msg) from None
    raw = {}
    for section in parser.sections():
        sec = "" if section == "__top__" else section
        for key, value in parser.items(section):
            raw[_dotted(sec, key)] = value
    return raw


def _flatten(mapping: Mapping, prefix="") -> dict:
    out = {}
    for key, value in mapping.items():
        dotted = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, Mapping):
            out.update(_flatten(value, dotted))
        else:
            out[dotted] = value
    return out


def parse_overrides(tokens: Sequence[str]) -> dict:
    """Turn ``["--params.sigma", "0.3", "--game.M=3"]`` into a flat mapping."""
    out, i = {}, 0
    tokens = list(tokens)
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"flag --{key} needs a value")
            value = tokens[i + 1]
            i += 2
        out[key] = value
    return out


def parse_config(source: Union[str, Path, Mapping, None] = None,
                 overrides: Optional[Mapping] = None,
                 experiment: Optional[str] = None) -> RunConfig:
    """Build a validated :class:`RunConfig`.

    ``source`` is a file path, a (nested or dotted) mapping, or ``None``.
    ``overrides`` (flat dotted keys) win over the source; ``experiment``
    (from the subcommand) wins over both.
    """
    if source is None:
        raw = {}
    elif isinstance(source, Mapping):
        raw = _flatten(source)
    else:
        if not Path(source).is_file():
            raise ConfigError(f"config file not found: {source}")
        raw = _read_file(source)
    raw.update(overrides or {})
    if experiment is not None:
        raw["experiment"] = experiment
    lookup = {_dotted(s, k): (s, k) for s, k in SCHEMA}
    for key in raw:
        if key not in lookup:
            raise _unknown(key)
    exp = str(raw.get("experiment", SCHEMA[("", "experiment")][1]))
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")
    values = {}
    for (sec, key), (conv, default) in SCHEMA.items():
        dotted = _dotted(sec, key)
        if dotted in raw:
            try:
                values[(sec, key)] = conv(raw[dotted])
            except (TypeError, ValueError):
                raise ConfigError(f"{dotted}: cannot convert {raw[dotted]!r} "
                                  f"with {getattr(conv, '__name__', conv)}") from None
        else:
            values[(sec, key)] = EXPERIMENT_DEFAULTS.get(exp, {}).get((sec, key), default)

    def section(cls, sec, rename=None):
        rename = rename or {}
        kwargs = {}
        for f in fields(cls):
            kwargs[f.name] = values[(sec, rename.get(f.name, f.name))]
        return cls(**kwargs)

    cfg = RunConfig(
        experiment=exp,
        record_every=values[("", "record_every")],
        game=section(GameConfig, "game"),
        params=section(ParamsConfig, "params", {"lam": "lambda"}),
        particles=section(ParticlesConfig, "particles"),
        analysis=section(AnalysisConfig, "analysis"),
        seeds=section(SeedsConfig, "seeds"),
        output=section(OutputConfig, "output"),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if cfg.game.name not in BUILTIN_GAMES:
        raise ConfigError(f"game.name: unknown game {cfg.game.name!r}; choose from {sorted(BUILTIN_GAMES)}")
    if cfg.game.M < 2 or cfg.game.d < 1:
        raise ConfigError("game.M must be >= 2 and game.d >= 1")
    if cfg.game.name != "decoupled-quadratic" and abs(cfg.game.coupling) >= 1:
        raise ConfigError("game.coupling: |coupling| < 1 required (contraction)")
    try:
        cfg.cbo_params()
    except ValueError as err:
        raise ConfigError(f"params: {err}") from None
    if cfg.experiment == "variance-decay" and not 2 * cfg.params.lam > cfg.params.sigma ** 2:
        raise ConfigError("decay regime violated (2λ > σ² required)")
    if cfg.record_every < 1:
        raise ConfigError("record_every must be >= 1")
    if cfg.particles.N < 1:
        raise ConfigError("particles.N must be >= 1")
    if any(n < 1 for n in cfg.particles.n_list) or not cfg.particles.n_list:
        raise ConfigError("particles.n_list must hold positive integers")
    if cfg.experiment == "mf-rate" and max(cfg.particles.n_list) > cfg.particles.n_ref / 4:
        raise ConfigError("particles.n_ref must be at least 4 * max(particles.n_list)")
    if cfg.analysis.p < 1 or cfg.analysis.trials < 1 or cfg.analysis.R <= 0:
        raise ConfigError("analysis: need p >= 1, trials >= 1, R > 0")
    if any(not 0 <= x <= 1 for x in cfg.analysis.xis):
        raise ConfigError("analysis.xis must lie in [0, 1]")
    if cfg.seeds.count < 1 or cfg.seeds.base_seed < 0:
        raise ConfigError("seeds: need count >= 1 and base_seed >= 0")
    bad = [f for f in cfg.output.formats if f not in FORMATS]
    if bad:
        raise ConfigError(f"output.formats: unknown format(s) {bad}; allowed {list(FORMATS)}")


def config_help() -> str:
    lines = ["config keys (file: 'key = value' under [section]; flags: --section.key VALUE):"]
    for (sec, key), (conv, default) in SCHEMA.items():
        if isinstance(default, tuple):
            default = ",".join(str(x) for x in default)
        lines.append(f"  {_dotted(sec, key):<22} default {default}")
    lines.append("experiment-specific defaults:")
    for exp, over in EXPERIMENT_DEFAULTS.items():
        items = ", ".join(f"{_dotted(s, k)}={','.join(map(str, v)) if isinstance(v, tuple) else v}"
                          for (s, k), v in over.items())
        lines.append(f"  {exp}: {items}")
    return "\n".join(lines)
