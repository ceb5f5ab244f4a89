"""Run configuration: INI file sections mapped onto the module parameter types."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigInvalid
from .evaluation import DEFAULT_RESOLUTIONS
from .features import ALL_GROUPS, DEFAULT_GROUPS, FeatureOptions
from .gbdt import DEFAULT_GRID, GbdtConfig
from .proximity import PlmParams
from .simulator import ScenarioConfig


@dataclass(frozen=True)
class RunConfig:
    data_dir: str = "data"
    out_dir: str = "out"
    seed: int = 0
    jobs: int = 1
    plm: PlmParams = field(default_factory=PlmParams)
    ceiling_measured_power: float = -65.0
    ceiling_path_loss_exponent: float = 1.5
    features: FeatureOptions = field(default_factory=FeatureOptions)
    feature_groups: tuple = DEFAULT_GROUPS
    gbdt: GbdtConfig = field(default_factory=GbdtConfig)
    cv_folds: int = 10
    tuning_fraction: float = 0.2
    grid_enabled: bool = False
    grid: dict = field(default_factory=lambda: dict(DEFAULT_GRID))
    tune_folds: int = 5
    edge_floor: float = 0.05
    resolution: float = 0.5
    resolutions: tuple = DEFAULT_RESOLUTIONS
    beta: float = 1.0
    ablation: tuple = ()
    simulator: ScenarioConfig = field(default_factory=ScenarioConfig)

    def with_(self, **kw):
        return replace(self, **kw)

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigInvalid(msg)

        need(self.jobs >= 1, "run.jobs must be >= 1")
        need(self.cv_folds >= 2, "gbdt.cv_folds must be >= 2")
        need(self.tune_folds >= 2, "grid.tune_folds must be >= 2")
        need(0 < self.tuning_fraction < 1, "gbdt.tuning_fraction must be in (0, 1)")
        need(0 <= self.edge_floor <= 1, "community.edge_floor must be in [0, 1]")
        need(self.resolution > 0, "community.resolution must be positive")
        need(len(self.resolutions) > 0 and all(r > 0 for r in self.resolutions),
             "community.resolutions must be positive")
        need(self.beta > 0, "evaluate.beta must be positive")
        need(len(self.feature_groups) > 0, "features.groups must not be empty")
        for g in tuple(self.feature_groups) + tuple(self.ablation):
            need(g in ALL_GROUPS, f"unknown feature group {g!r}")
        for k, v in self.grid.items():
            need(k in ("max_depth", "colsample_bytree", "subsample", "learning_rate"),
                 f"unknown grid parameter {k!r}")
            need(len(v) > 0, f"grid.{k} is empty")
        return self


_SECTIONS = ("paths", "run", "proximity", "features", "gbdt", "grid", "community", "evaluate",
             "simulator")


def _floats(text):
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _names(text):
    return tuple(x.strip() for x in text.replace(";", ",").split(",") if x.strip())


def load_config(path=None, base=None):
    """Read an INI file over the defaults; missing sections and keys keep defaults."""
    cfg = base or RunConfig()
    if path is None:
        return cfg.validate()
    path = Path(path)
    if not path.is_file():
        raise ConfigInvalid(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigInvalid(f"{path}: {exc}") from None
    unknown = [s for s in cp.sections() if s not in _SECTIONS]
    if unknown:
        raise ConfigInvalid(f"{path}: unknown sections {unknown}")
    try:
        return _apply(cp, cfg).validate()
    except ConfigInvalid:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigInvalid(f"{path}: {exc}") from None


def _apply(cp, cfg):
    def sec(name):
        return cp[name] if cp.has_section(name) else {}

    def take(section, types):
        s = sec(section)
        extra = set(s) - set(types)
        if extra:
            raise ConfigInvalid(f"[{section}] unknown keys {sorted(extra)}")
        return {k: types[k](v) for k, v in s.items()}

    boolean = configparser.ConfigParser.BOOLEAN_STATES

    def as_bool(v):
        if v.lower() not in boolean:
            raise ValueError(f"not a boolean: {v!r}")
        return boolean[v.lower()]

    kw = {}
    p = take("paths", {"data_dir": str, "out_dir": str})
    kw.update(p)
    kw.update(take("run", {"seed": int, "jobs": int}))

    prox = take("proximity", {"measured_power": float, "path_loss_exponent": float,
                              "ceiling_measured_power": float, "ceiling_path_loss_exponent": float})
    kw["plm"] = PlmParams(prox.pop("measured_power", cfg.plm.measured_power),
                          prox.pop("path_loss_exponent", cfg.plm.path_loss_exponent))
    kw.update(prox)

    feat = take("features", {"window_s": int, "max_lag_s": float, "move_threshold_g": float,
                             "groups": _names, "xcorr_chunk_s": int})
    if "groups" in feat:
        kw["feature_groups"] = feat.pop("groups")
    kw["features"] = replace(cfg.features, **feat)

    g = take("gbdt", {"n_trees": int, "max_depth": int, "colsample_bytree": float, "subsample": float,
                      "learning_rate": float, "min_child_weight": float, "reg_lambda": float,
                      "base_score": float, "cv_folds": int, "tuning_fraction": float})
    for k in ("cv_folds", "tuning_fraction"):
        if k in g:
            kw[k] = g.pop(k)
    kw["gbdt"] = replace(cfg.gbdt, **g)

    grid = take("grid", {"enabled": as_bool, "tune_folds": int, "max_depth": _floats,
                         "colsample_bytree": _floats, "subsample": _floats, "learning_rate": _floats})
    if "enabled" in grid:
        kw["grid_enabled"] = grid.pop("enabled")
    if "tune_folds" in grid:
        kw["tune_folds"] = grid.pop("tune_folds")
    if grid:
        new = dict(cfg.grid)
        for k, v in grid.items():
            new[k] = [int(x) for x in v] if k == "max_depth" else list(v)
        kw["grid"] = new

    com = take("community", {"edge_floor": float, "resolution": float, "resolutions": _floats})
    kw.update(com)
    ev = take("evaluate", {"beta": float, "ablation": _names})
    kw.update(ev)

    sim = take("simulator", {"n_participants": int, "duration_s": int, "rssi_noise_sigma": float,
                             "orientation": as_bool, "packets_per_second": int,
                             "sensitivity_floor": float, "idle_mean_s": float})
    kw["simulator"] = replace(cfg.simulator, **sim)
    return replace(cfg, **kw)


def dump_config(cfg):
    """Render a RunConfig back to INI text (all keys, defaults included)."""
    fmt = lambda xs: ", ".join(repr(x) if isinstance(x, float) else str(x) for x in xs)  # noqa: E731
    g, f, s = cfg.gbdt, cfg.features, cfg.simulator
    lines = [
        "[paths]", f"data_dir = {cfg.data_dir}", f"out_dir = {cfg.out_dir}", "",
        "[run]", f"seed = {cfg.seed}", f"jobs = {cfg.jobs}", "",
        "[proximity]", f"measured_power = {cfg.plm.measured_power}",
        f"path_loss_exponent = {cfg.plm.path_loss_exponent}",
        f"ceiling_measured_power = {cfg.ceiling_measured_power}",
        f"ceiling_path_loss_exponent = {cfg.ceiling_path_loss_exponent}", "",
        "[features]", f"window_s = {f.window_s}", f"max_lag_s = {f.max_lag_s}",
        f"move_threshold_g = {f.move_threshold_g}", f"xcorr_chunk_s = {f.xcorr_chunk_s}",
        f"groups = {', '.join(cfg.feature_groups)}", "",
        "[gbdt]", f"n_trees = {g.n_trees}", f"max_depth = {g.max_depth}",
        f"colsample_bytree = {g.colsample_bytree}", f"subsample = {g.subsample}",
        f"learning_rate = {g.learning_rate}", f"min_child_weight = {g.min_child_weight}",
        f"reg_lambda = {g.reg_lambda}", f"base_score = {g.base_score}",
        f"cv_folds = {cfg.cv_folds}", f"tuning_fraction = {cfg.tuning_fraction}", "",
        "[grid]", f"enabled = {str(cfg.grid_enabled).lower()}", f"tune_folds = {cfg.tune_folds}",
        *[f"{k} = {fmt(v)}" for k, v in cfg.grid.items()], "",
        "[community]", f"edge_floor = {cfg.edge_floor}", f"resolution = {cfg.resolution}",
        f"resolutions = {fmt(cfg.resolutions)}", "",
        "[evaluate]", f"beta = {cfg.beta}", f"ablation = {', '.join(cfg.ablation)}", "",
        "[simulator]", f"n_participants = {s.n_participants}", f"duration_s = {s.duration_s}",
        f"rssi_noise_sigma = {s.rssi_noise_sigma}", f"orientation = {str(s.orientation).lower()}",
        f"packets_per_second = {s.packets_per_second}", f"sensitivity_floor = {s.sensitivity_floor}",
        f"idle_mean_s = {s.idle_mean_s}", "",
    ]
    return "\n".join(lines)
