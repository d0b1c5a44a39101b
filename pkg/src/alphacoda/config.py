"""Run configuration: a small JSON file plus command-line overrides."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .hmd import StudyWindow
from .pipeline import Transform

DEFAULT_CONFIG = "hmd31.json"
MODELS = ("default", "auto", "both")


@dataclass
class RunConfig:
    data_dir: str
    countries: list
    genders: list = field(default_factory=lambda: ["female", "male"])
    window: dict = field(default_factory=lambda: {"train": [1983, 2010], "test": [2011, 2018]})
    K: dict = field(default_factory=lambda: {"female": 7, "male": 4})
    kannisto_ages: list = field(default_factory=lambda: [80, 100])
    transforms: list = field(default_factory=lambda: ["clr", "alpha:auto"])
    model: str = "both"
    horizon: int = 8
    rates_pattern: str = "{code}.Mx_1x1.txt"
    exposures_pattern: str = "{code}.Exposures_1x1.txt"
    source: str = ""

    @property
    def study_window(self):
        return StudyWindow(tuple(self.window["train"]), tuple(self.window["test"]))

    @property
    def models(self):
        return ["default", "auto"] if self.model == "both" else [self.model]

    def paths(self, code):
        base = Path(self.data_dir)
        return base / self.rates_pattern.format(code=code), base / self.exposures_pattern.format(code=code)

    def to_dict(self):
        return asdict(self)


def _fail(src, fld, msg):
    raise ConfigError(f"{src}: field '{fld}': {msg}")


def validate(cfg):
    src = cfg.source or "<config>"
    if not isinstance(cfg.countries, list) or not cfg.countries:
        _fail(src, "countries", "must be a non-empty list of country codes")
    if not all(isinstance(c, str) and c for c in cfg.countries):
        _fail(src, "countries", "codes must be non-empty strings")
    if not cfg.genders or any(g not in ("female", "male") for g in cfg.genders):
        _fail(src, "genders", "must list 'female' and/or 'male'")
    try:
        cfg.study_window
    except (KeyError, TypeError, ValueError) as e:
        _fail(src, "window", str(e))
    for g in cfg.genders:
        k = cfg.K.get(g) if isinstance(cfg.K, dict) else None
        if not isinstance(k, int) or k < 1:
            _fail(src, "K", f"needs a positive integer for {g}")
    ka = cfg.kannisto_ages
    if len(ka) != 2 or not (0 < ka[0] < ka[1] <= 110):
        _fail(src, "kannisto_ages", "must be [first, last] with 0 < first < last <= 110")
    for t in cfg.transforms:
        if str(t).lower() != "alpha:auto":
            try:
                Transform.parse(t)
            except ValueError as e:
                _fail(src, "transforms", str(e))
    if cfg.model not in MODELS:
        _fail(src, "model", f"must be one of {MODELS}")
    if not isinstance(cfg.horizon, int) or cfg.horizon < 1:
        _fail(src, "horizon", "must be a positive integer")
    return cfg


def load_config(path=None):
    """Read a JSON config; ``data_dir`` is resolved relative to the file."""
    if path is None:
        text = resources.files("alphacoda.data").joinpath(DEFAULT_CONFIG).read_text()
        base, src = Path.cwd(), f"<builtin {DEFAULT_CONFIG}>"
    else:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"{path}: config file not found")
        text, base, src = path.read_text(), path.resolve().parent, str(path)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{src}: invalid JSON ({e})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{src}: top level must be an object")
    known = set(RunConfig.__dataclass_fields__) - {"source"}
    for key in raw:
        if key not in known:
            _fail(src, key, "unknown field")
    if "data_dir" not in raw:
        _fail(src, "data_dir", "is required")
    if "countries" not in raw:
        _fail(src, "countries", "is required")
    raw["data_dir"] = str((base / raw["data_dir"]).resolve())
    return validate(RunConfig(**raw, source=src))
