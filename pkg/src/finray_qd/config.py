"""Flat key-value run configuration with dotted sections.

Format: one ``key = value`` per line, ``#`` comments, blank lines ignored.
Keys are either run-level (``seed``, ``generations``, ...) or dotted into
the ``qd``, ``sim`` and ``eval`` sections (``sim.dt = 0.005``). Unknown keys
are rejected with the offending line number so typos cannot silently change
an experiment.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError
from .grasp import EvalConfig
from .sim import SimConfig


@dataclass(frozen=True)
class RunConfig:
    """Everything an optimization campaign needs, reproducibly."""

    seed: int = 0
    generations: int = 5
    batch: int = 15
    out_dir: str = "finray_run"
    objects: str = ""                  # object-set JSON path; empty = default set
    parallel: int = 1
    archive_rows: int = 20
    archive_cols: int = 20
    sigma0: float = 0.2
    benchmark_d_mount: float = 35.0
    sim: SimConfig = field(default_factory=SimConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        if self.generations < 1:
            raise ConfigError("generations must be >= 1")
        if self.batch < 2:
            raise ConfigError("batch must be >= 2")
        if self.parallel < 1:
            raise ConfigError("parallel must be >= 1")
        object.__setattr__(self, "eval", replace(self.eval, sim=self.sim))


_RUN_KEYS = {
    "seed": int,
    "generations": int,
    "batch": int,
    "out_dir": str,
    "objects": str,
    "parallel": int,
}
_QD_KEYS = {
    "archive_rows": int,
    "archive_cols": int,
    "sigma0": float,
    "benchmark_d_mount": float,
}
_SIM_KEYS = {f.name: f.type for f in fields(SimConfig)}
_EVAL_KEYS = {f.name: f.type for f in fields(EvalConfig) if f.name != "sim"}


def _parse_value(raw: str, kind, key: str, line_no: int):
    raw = raw.strip()
    try:
        if kind is int or kind == "int":
            return int(raw)
        if kind is float or kind == "float":
            return float(raw)
        if kind is bool or kind == "bool":
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is str or kind == "str":
            return raw
        if "tuple" in str(kind):
            parts = [float(p) for p in raw.replace("(", "").replace(")", "").split(",")]
            return tuple(parts)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}", line=line_no) from exc


def parse_config(text: str) -> RunConfig:
    """Parse configuration text; raises :class:`ConfigError` with line numbers."""
    run: dict = {}
    qd: dict = {}
    sim: dict = {}
    evl: dict = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", line=line_no)
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key in _RUN_KEYS:
            run[key] = _parse_value(raw, _RUN_KEYS[key], key, line_no)
        elif key.startswith("qd."):
            sub = key[3:]
            if sub not in _QD_KEYS:
                raise ConfigError(f"unknown key {key!r}", line=line_no)
            qd[sub] = _parse_value(raw, _QD_KEYS[sub], key, line_no)
        elif key.startswith("sim."):
            sub = key[4:]
            if sub not in _SIM_KEYS:
                raise ConfigError(f"unknown key {key!r}", line=line_no)
            sim[sub] = _parse_value(raw, _SIM_KEYS[sub], key, line_no)
        elif key.startswith("eval."):
            sub = key[5:]
            if sub not in _EVAL_KEYS:
                raise ConfigError(f"unknown key {key!r}", line=line_no)
            evl[sub] = _parse_value(raw, _EVAL_KEYS[sub], key, line_no)
        else:
            raise ConfigError(f"unknown key {key!r}", line=line_no)
    sim_cfg = SimConfig(**sim)
    eval_cfg = EvalConfig(sim=sim_cfg, **evl)
    try:
        return RunConfig(sim=sim_cfg, eval=eval_cfg, **run, **qd)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def config_to_dict(cfg: RunConfig) -> dict:
    """Flat key -> value mapping, the canonical config echo."""
    out = {k: getattr(cfg, k) for k in _RUN_KEYS}
    out.update({f"qd.{k}": getattr(cfg, k) for k in _QD_KEYS})
    out.update({f"sim.{k}": getattr(cfg.sim, k) for k in _SIM_KEYS})
    out.update({f"eval.{k}": getattr(cfg.eval, k) for k in _EVAL_KEYS})
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in out.items()}


def config_from_dict(data: dict) -> RunConfig:
    """Rebuild a RunConfig from a config echo."""
    lines = []
    for key, value in data.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(repr(float(v)) for v in value)
        lines.append(f"{key} = {value}")
    return parse_config("\n".join(lines))


def config_to_text(cfg: RunConfig) -> str:
    lines = []
    for key, value in config_to_dict(cfg).items():
        if isinstance(value, (list, tuple)):
            value = ",".join(repr(float(v)) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
