"""Experiment configuration: dataclass tree, YAML round trip, presets and validation."""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .construction import AdjustRadii, DeformationParams
from .errors import ConfigError

STAGES = ("construct", "verify", "lyapunov", "manifolds", "ergodicity")


@dataclass
class BaseSpec:
    """``kind`` is "matrix" (3x3 integer) or "product" (2x2 integer times the identity circle)."""

    kind: str = "matrix"
    matrix: list = field(default_factory=lambda: [[1, 1, 1], [1, 2, 2], [1, 2, 3]])


@dataclass
class AdjustSpec:
    sigma: float = 0.0
    radii: AdjustRadii = field(default_factory=AdjustRadii)


@dataclass
class VerificationConfig:
    volume: bool = True
    support: bool = True
    cone: bool = True
    domination: bool = True
    v_membership: bool = True
    samples: int = 10_000
    n_boundary: int = 64
    volume_tol: float = 1e-8
    support_tol: float = 0.0
    cone_margin: float = 0.05
    cone_scope: str = "global"  # "global" or "chart"
    domination_points: int = 1000
    n_time: int = 30
    grid: int = 32
    tube_scale: float = 1.2
    disk_max_radius: float = 0.22


@dataclass
class LyapunovConfig:
    n: int = 100_000
    ensemble: int = 32
    survey_n: int = 2000
    cs_n: int = 10_000


@dataclass
class ManifoldConfig:
    grid: int = 32
    N_ladder: list = field(default_factory=lambda: [5, 10, 20, 30])
    L_ladder: list = field(default_factory=lambda: [5.0, 20.0, 50.0])
    h_max: float = 0.05
    use_tube: bool = True


@dataclass
class ErgodicityConfig:
    ensemble: int = 1000
    horizons: list = field(default_factory=lambda: [1000, 10_000, 100_000])
    observables: list = field(default_factory=lambda: [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]])
    contrast_with: str = "unadjusted"  # "unadjusted" or "base"


@dataclass
class ExperimentConfig:
    name: str = "custom"
    base: BaseSpec = field(default_factory=BaseSpec)
    point: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    period: int = 1
    adjust: AdjustSpec = field(default_factory=AdjustSpec)
    deformation: DeformationParams | None = field(default_factory=DeformationParams)
    verification: VerificationConfig = field(default_factory=VerificationConfig)
    lyapunov: LyapunovConfig = field(default_factory=LyapunovConfig)
    manifolds: ManifoldConfig = field(default_factory=ManifoldConfig)
    ergodicity: ErgodicityConfig = field(default_factory=ErgodicityConfig)
    stages: list = field(default_factory=lambda: list(STAGES))
    seed: int = 0
    output: str = "out"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return _build(cls, d, "")


def _build(cls, d, path: str):
    if not isinstance(d, dict):
        raise ConfigError(f"expected a mapping, got {type(d).__name__}", path or "<root>")
    known = {f.name: f for f in fields(cls)}
    for k in d:
        if k not in known:
            raise ConfigError(f"unknown field {k!r}", _join(path, k))
    kw = {}
    hints = {f.name: f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default
             for f in fields(cls)}
    for k, v in d.items():
        p = _join(path, k)
        default = hints[k]
        if dataclasses.is_dataclass(default) or (cls is ExperimentConfig and k == "deformation"):
            if v is None:
                if k != "deformation":
                    raise ConfigError("section cannot be null", p)
                kw[k] = None
                continue
            sub = type(default) if default is not None else DeformationParams
            kw[k] = _build(sub, v, p)
        else:
            kw[k] = _coerce(v, default, p)
    try:
        return cls(**kw)
    except TypeError as e:  # pragma: no cover - guarded above
        raise ConfigError(str(e), path or "<root>") from e


def _coerce(v, default, path):
    if isinstance(default, bool):
        if not isinstance(v, bool):
            raise ConfigError(f"expected a boolean, got {v!r}", path)
        return v
    if isinstance(default, int):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"expected an integer, got {v!r}", path)
        return v
    if isinstance(default, float):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"expected a number, got {v!r}", path)
        return float(v)
    if isinstance(default, str):
        if not isinstance(v, str):
            raise ConfigError(f"expected a string, got {v!r}", path)
        return v
    if isinstance(default, list):
        if not isinstance(v, list):
            raise ConfigError(f"expected a list, got {v!r}", path)
        return v
    return v


def _join(path: str, key) -> str:
    return f"{path}.{key}" if path else str(key)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}", str(path)) from e
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed YAML: {e}", str(path)) from e
    if isinstance(d, dict) and "preset" in d:
        base = preset(d.pop("preset")).to_dict()
        d = _merge(base, d)
    return ExperimentConfig.from_dict(d or {})


def _merge(a: dict, b: dict) -> dict:
    out = copy.deepcopy(a)
    for k, v in b.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


# ----------------------------------------------------------------------------
# presets


def _bv_t3() -> ExperimentConfig:
    return ExperimentConfig(name="bv-t3")


def _catxid() -> ExperimentConfig:
    return ExperimentConfig(
        name="catxid",
        base=BaseSpec("product", [[2, 1], [1, 1]]),
        adjust=AdjustSpec(sigma=0.3),
        deformation=DeformationParams(psi_support=0.24, psi_core=0.06, scale=0.04, ramp_support=0.016,
                                      ramp_core=0.004, theta=0.3, rot_plateau=0.004, rot_support=0.016,
                                      chart_radius=0.04),
        verification=VerificationConfig(cone_scope="chart", v_membership=False),
        # slow center mixing keeps coverage far below full at desk budgets; enable explicitly
        manifolds=ManifoldConfig(grid=16),
        stages=["construct", "verify", "lyapunov", "ergodicity"],
    )


def _linear_only() -> ExperimentConfig:
    return ExperimentConfig(
        name="linear-only",
        deformation=None,
        verification=VerificationConfig(support=False, v_membership=False),
        lyapunov=LyapunovConfig(n=10_000),
        stages=["construct", "verify", "lyapunov", "ergodicity"],
        ergodicity=ErgodicityConfig(horizons=[1000, 10_000], contrast_with="base"),
    )


PRESETS = {"bv-t3": _bv_t3, "catxid": _catxid, "linear-only": _linear_only}

PRESET_HELP = {
    "bv-t3": "deformation of the symmetric SL(3,Z) matrix [[1,1,1],[1,2,2],[1,2,3]] at the origin",
    "catxid": "cat map times identity, center index adjusted, then deformed at the origin",
    "linear-only": "the undeformed linear Anosov map; baseline oracles",
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}", "preset")
    return PRESETS[name]()


# ----------------------------------------------------------------------------
# validation


def static_diagnostics(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    """Field-level checks that need no computation."""
    out = []
    if cfg.base.kind not in ("matrix", "product"):
        out.append(("base.kind", "must be 'matrix' or 'product'"))
    else:
        n = 3 if cfg.base.kind == "matrix" else 2
        M = np.asarray(cfg.base.matrix)
        if M.shape != (n, n) or not np.issubdtype(M.dtype, np.integer):
            out.append(("base.matrix", f"must be a {n}x{n} integer matrix"))
        elif round(np.linalg.det(M)) not in (1, -1):
            out.append(("base.matrix", "must have determinant +-1"))
    if len(cfg.point) != 3:
        out.append(("point", "must have three coordinates"))
    if cfg.period < 1:
        out.append(("period", "must be at least 1"))
    if cfg.adjust.sigma < 0:
        out.append(("adjust.sigma", "must be nonnegative"))
    if cfg.adjust.sigma > 0 and cfg.base.kind != "product":
        out.append(("adjust.sigma", "index adjustment needs a product base with a neutral center"))
    r = cfg.adjust.radii
    for a, b in (("u_core", "u_support"), ("c_core", "c_support"), ("s_core", "s_support")):
        if not 0 < getattr(r, a) < getattr(r, b):
            out.append((f"adjust.radii.{a}", f"must lie in (0, {b})"))
    if cfg.deformation is not None:
        out += [(f"deformation.{k}", m) for k, m in cfg.deformation.validate()]
    v = cfg.verification
    for k in ("samples", "n_boundary", "domination_points", "n_time", "grid"):
        if getattr(v, k) < 1:
            out.append((f"verification.{k}", "must be positive"))
    if v.cone_scope not in ("global", "chart"):
        out.append(("verification.cone_scope", "must be 'global' or 'chart'"))
    if not 0 <= v.cone_margin < 1:
        out.append(("verification.cone_margin", "must lie in [0, 1)"))
    if v.volume_tol <= 0:
        out.append(("verification.volume_tol", "must be positive"))
    if v.support_tol < 0:
        out.append(("verification.support_tol", "must be nonnegative"))
    if v.disk_max_radius <= 0 or v.tube_scale < 1:
        out.append(("verification.disk_max_radius", "must be positive (tube_scale >= 1)"))
    ly = cfg.lyapunov
    if ly.n < 100:
        out.append(("lyapunov.n", "must be at least 100"))
    if ly.ensemble < 10:
        out.append(("lyapunov.ensemble", "must be at least 10"))
    for k in ("survey_n", "cs_n"):
        if getattr(ly, k) < 1:
            out.append((f"lyapunov.{k}", "must be positive"))
    m = cfg.manifolds
    if m.grid < 1 or not m.N_ladder or min(m.N_ladder) < 1:
        out.append(("manifolds.N_ladder", "grid and horizons must be positive"))
    if not m.L_ladder or min(m.L_ladder) <= 0:
        out.append(("manifolds.L_ladder", "lengths must be positive"))
    if m.h_max <= 0:
        out.append(("manifolds.h_max", "must be positive"))
    e = cfg.ergodicity
    if e.ensemble < 30:
        out.append(("ergodicity.ensemble", "must be at least 30"))
    if not e.horizons or min(e.horizons) < 1:
        out.append(("ergodicity.horizons", "must be positive"))
    for i, k in enumerate(e.observables):
        if len(k) != 3 or not all(isinstance(c, int) for c in k) or not any(k):
            out.append((f"ergodicity.observables[{i}]", "must be a nonzero integer triple"))
    if e.contrast_with not in ("unadjusted", "base"):
        out.append(("ergodicity.contrast_with", "must be 'unadjusted' or 'base'"))
    for i, s in enumerate(cfg.stages):
        if s not in STAGES:
            out.append((f"stages[{i}]", f"unknown stage {s!r}"))
    if cfg.seed < 0:
        out.append(("seed", "must be nonnegative"))
    return out


def feasibility_diagnostics(cfg: ExperimentConfig, k_samples: int = 5000) -> list[tuple[str, str]]:
    """Quick scans of the construction inequalities: aK below the profile support, cone gap, orbit balls."""
    from .construction import (SpectrumTriple, build_F1, build_shear, check_orbit_balls, chart_frame,
                               cone_interval, orbit_linearization)
    from .errors import DeformError

    out = []
    try:
        base = build_base(cfg)
        p = np.asarray(cfg.point, float)
        if cfg.adjust.sigma > 0:
            from .construction import index_adjust

            base = index_adjust(base, p, cfg.adjust.sigma, cfg.adjust.radii)
        _, D = orbit_linearization(base, p, cfg.period)
        if cfg.period > 1 and cfg.deformation is not None:
            check_orbit_balls(base, p, cfg.period, cfg.deformation.chart_radius)
        if cfg.deformation is None:
            return out
        w, _ = chart_frame(D)
        s = SpectrumTriple.from_values(w)
        d = cfg.deformation
        shear, ramp = build_shear(s, d)
        F1 = build_F1(s, shear, ramp, d.scale, k_samples=k_samples, k_inflation=d.k_inflation,
                      check_samples=200, seed=d.seed)
        aK = d.scale * F1.K
        try:
            cone_interval(s.mu, s.rho, d.gamma, aK)
        except DeformError as e:
            out.append(("deformation.gamma", f"cone gap infeasible: {e}"))
    except DeformError as e:
        name = type(e).__name__
        field_path = {"ScaleTooLarge": "deformation.scale", "BallsNotDisjoint": "deformation.chart_radius",
                      "NotPeriodic": "point", "BoundInfeasible": "deformation.psi_bound",
                      "AdjustmentBreaksOrder": "adjust.sigma"}.get(name, "base")
        out.append((field_path, f"{name} predicted: {e}"))
    return out


def validate(cfg: ExperimentConfig, quick_scan: bool = True) -> list[tuple[str, str]]:
    """All diagnostics for a config; never raises."""
    out = static_diagnostics(cfg)
    if not out and quick_scan:
        out += feasibility_diagnostics(cfg)
    return out


def build_base(cfg: ExperimentConfig):
    from .maps import linear_anosov, product_with_identity

    if cfg.base.kind == "product":
        return product_with_identity(cfg.base.matrix)
    return linear_anosov(cfg.base.matrix)
