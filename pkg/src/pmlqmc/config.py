"""``key = value`` run configuration files.

Blank lines and ``#`` comments are ignored.  Lists are comma separated.  The
field is given either by lognormal moments (``field.mean``, ``field.std``) or
directly by the Gaussian mean and variance (``field.zbar``,
``field.sigma2``); exactly one of the two blocks must be present.  Relative
paths are resolved against the directory of the config file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import fem, random_field as rf
from .errors import ConfigurationError, ParseError
from .hierarchy import FieldModel
from .point_selection import Approach
from .reference_rules import MAX_LEVEL

BUNDLED = "bundled"

_MOMENT_KEYS = ("field.mean", "field.std")
_DIRECT_KEYS = ("field.zbar", "field.sigma2")


@dataclass(frozen=True)
class RunConfig:
    mesh: str = BUNDLED
    approaches: tuple = ("nna", "gna", "lna")
    eps: tuple = ()
    max_level: int = 4
    s: int = 100
    R: int = 10
    n_init: int = 8
    growth_factor: int = 2
    start_level: int | None = None
    seed: int = 0
    threads: int = 1
    matern_nu: float = 2.0
    matern_lam: float = 0.3
    field_mean: float | None = 8020.0
    field_std: float | None = 400.0
    field_zbar: float | None = None
    field_sigma2: float | None = None
    young: float = 30e6
    poisson: float = 0.25
    density: float = 1330.0
    gravity: float = 9.81
    field_reference: float = 8020.0
    generating_vector: str = BUNDLED
    out: str = "results"
    record_timing: bool = True
    base_dir: str = field(default=".", compare=False)

    # -- derived objects --------------------------------------------------

    def field_model(self) -> FieldModel:
        if self.field_zbar is not None:
            return FieldModel(rf.MaternParams(self.matern_nu, self.matern_lam, self.field_sigma2), self.field_zbar)
        return FieldModel.from_lognormal_moments(self.field_mean, self.field_std, self.matern_nu, self.matern_lam)

    def material(self) -> fem.Material:
        return fem.Material(self.young, self.poisson, self.density, self.gravity, "scale_young", self.field_reference)

    def load_mesh(self) -> fem.Mesh:
        if self.mesh == BUNDLED:
            return fem.slope_mesh()
        return fem.load_mesh(self._resolve(self.mesh))

    def load_vector(self):
        from . import qmc

        if self.generating_vector == BUNDLED:
            return qmc.default_generating_vector()
        return qmc.load_generating_vector(self._resolve(self.generating_vector))

    def _resolve(self, p):
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def out_dir(self) -> Path:
        return self._resolve(self.out)

    # -- serialisation ----------------------------------------------------

    def to_pairs(self) -> dict:
        """The effective configuration as ``key -> text`` in file syntax."""
        out = {}
        for key, attr in _KEYMAP.items():
            v = getattr(self, attr)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            out[key] = str(v)
        return out

    def dumps(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_pairs().items())


_KEYMAP = {
    "mesh": "mesh",
    "approach": "approaches",
    "eps": "eps",
    "max_level": "max_level",
    "s": "s",
    "R": "R",
    "n_init": "n_init",
    "growth_factor": "growth_factor",
    "start_level": "start_level",
    "seed": "seed",
    "threads": "threads",
    "matern.nu": "matern_nu",
    "matern.lam": "matern_lam",
    "field.mean": "field_mean",
    "field.std": "field_std",
    "field.zbar": "field_zbar",
    "field.sigma2": "field_sigma2",
    "material.young": "young",
    "material.poisson": "poisson",
    "material.density": "density",
    "material.gravity": "gravity",
    "material.field_reference": "field_reference",
    "generating_vector": "generating_vector",
    "out": "out",
    "record_timing": "record_timing",
}


def _convert(attr, text):
    kind = {f.name: f.type for f in fields(RunConfig)}[attr]
    text = text.strip()
    if attr == "approaches":
        items = [t.strip().lower() for t in text.split(",") if t.strip()]
        if items == ["all"]:
            return ("nna", "gna", "lna")
        return tuple(Approach.parse(t).value for t in items)
    if attr == "eps":
        return tuple(float(t) for t in text.split(",") if t.strip())
    if "bool" in kind:
        if text.lower() in ("true", "yes", "1"):
            return True
        if text.lower() in ("false", "no", "0"):
            return False
        raise ValueError(f"expected true or false, got {text!r}")
    if "int" in kind:
        return int(text)
    if "float" in kind:
        return float(text)
    return text


def parse_pairs(pairs: dict, base_dir=".", source=None, lines=None) -> RunConfig:
    """Build a RunConfig from ``key -> text``; `lines` maps keys to line numbers."""
    lines = lines or {}
    unknown = [k for k in pairs if k not in _KEYMAP]
    if unknown:
        k = unknown[0]
        raise ParseError(f"unknown key {k!r}", source, lines.get(k))
    moment = [k for k in _MOMENT_KEYS if k in pairs]
    direct = [k for k in _DIRECT_KEYS if k in pairs]
    if moment and direct:
        raise ConfigurationError("give either the lognormal-moment block or the direct field block, not both")
    for block, present in ((_MOMENT_KEYS, moment), (_DIRECT_KEYS, direct)):
        if present and len(present) != len(block):
            missing = [k for k in block if k not in pairs]
            raise ConfigurationError(f"field block incomplete, missing {', '.join(missing)}")
    if not moment and not direct:
        raise ConfigurationError("a field block is required: field.mean/field.std or field.zbar/field.sigma2")
    kwargs = {"base_dir": str(base_dir)}
    if direct:
        kwargs.update(field_mean=None, field_std=None)
    for key, text in pairs.items():
        attr = _KEYMAP[key]
        try:
            kwargs[attr] = _convert(attr, text)
        except (ValueError, ConfigurationError) as exc:
            raise ParseError(f"bad value for {key}: {exc}", source, lines.get(key)) from None
    cfg = RunConfig(**kwargs)
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    """Read a key=value file, or the ``config`` block of an earlier report.json."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    text = path.read_text()
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
        pairs = doc.get("config")
        if not isinstance(pairs, dict):
            raise ParseError("JSON config needs a top-level 'config' object", path)
        base = doc.get("base_dir", str(path.parent))
        return parse_pairs({k: str(v) for k, v in pairs.items()}, base, path)
    pairs, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key = value, got {line!r}", path, lineno)
        key, value = (t.strip() for t in line.split("=", 1))
        if key in pairs:
            raise ParseError(f"duplicate key {key!r}", path, lineno)
        pairs[key] = value
        lines[key] = lineno
    return parse_pairs(pairs, path.parent, path, lines)


def validate(cfg: RunConfig):
    if not cfg.approaches:
        raise ConfigurationError("at least one approach is required")
    if any(not e > 0 for e in cfg.eps):
        raise ConfigurationError("tolerances must be positive")
    if not 0 <= cfg.max_level <= MAX_LEVEL:
        raise ConfigurationError(f"max_level must lie in [0, {MAX_LEVEL}]")
    if cfg.s < 1:
        raise ConfigurationError("s must be positive")
    if cfg.R < 2:
        raise ConfigurationError("R must be at least 2")
    if cfg.threads < 1:
        raise ConfigurationError("threads must be at least 1")
    for name in ("mesh", "generating_vector"):
        v = getattr(cfg, name)
        if v != BUNDLED and not cfg._resolve(v).exists():
            raise ConfigurationError(f"{name} file {cfg._resolve(v)} does not exist")
    cfg.field_model()
    cfg.material()


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    kw = {k: v for k, v in kw.items() if v is not None}
    out = replace(cfg, **kw)
    validate(out)
    return out
