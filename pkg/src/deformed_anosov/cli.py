"""Command-line experiment runner.

    deform-anosov preset list
    deform-anosov preset show bv-t3
    deform-anosov validate --config exp.yaml
    deform-anosov run --config exp.yaml --seed 1 --out results/ --stages construct,verify
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import (PRESET_HELP, PRESETS, STAGES, ExperimentConfig, build_base, load_config, preset,
                     validate)
from .errors import ConfigError, DeformError

log = logging.getLogger("deformed_anosov")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
DEPENDS = {"construct": (), "verify": ("construct",), "lyapunov": ("construct",),
           "manifolds": ("construct",), "ergodicity": ("construct",)}


@dataclass
class RunManifest:
    config_digest: str
    version: str
    seed: int
    stages: dict = field(default_factory=dict)  # name -> {"status", "wall_time", "error"}
    files: dict = field(default_factory=dict)  # name -> sha256
    verdicts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok_stages = all(s["status"] in ("ok", "skipped") for s in self.stages.values())
        return ok_stages and all(v == "pass" for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return {"config_digest": self.config_digest, "version": self.version, "seed": self.seed,
                "stages": self.stages, "files": self.files, "verdicts": self.verdicts,
                "overall": "pass" if self.passed else "fail"}


# ----------------------------------------------------------------------------
# output helpers


def _dump_json(obj) -> bytes:
    from .verification import _jsonable

    return (json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n").encode()


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue().encode()


class _Writer:
    def __init__(self, out: Path, manifest: RunManifest):
        self.out = out
        self.manifest = manifest
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, data: bytes) -> None:
        (self.out / name).write_bytes(data)
        self.manifest.files[name] = hashlib.sha256(data).hexdigest()


# ----------------------------------------------------------------------------
# stages


class _State:
    """Objects shared between stages."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.p = np.asarray(cfg.point, float)
        self.raw_base = None
        self.base = None
        self.map = None
        self.construction = None
        self.frame = None
        self.xi = None
        self.gamma = cfg.deformation.gamma if cfg.deformation is not None else 1.0
        self.region = None
        self.disk = None
        self.verification: list = []
        self.diagnostics: dict = {}


def _stage_construct(st: _State, w: _Writer) -> None:
    from .construction import chart_frame, cone_interval, construct, index_adjust, orbit_linearization
    from .geometry import eig_sorted
    from .verification import fixed_point_spectrum

    cfg = st.cfg
    st.raw_base = build_base(cfg)
    st.base = st.raw_base
    if cfg.adjust.sigma > 0:
        st.base = index_adjust(st.raw_base, st.p, cfg.adjust.sigma, cfg.adjust.radii)
    if cfg.deformation is None:
        st.map = st.base
        _, D = orbit_linearization(st.base, st.p, cfg.period)
        w_, st.frame = chart_frame(D)
        lo, hi = cone_interval(w_[0], w_[1], st.gamma, 0.0)
        st.xi = 0.5 * (lo + hi)
        rep = {"map": st.map.label, "deformed": False, "linearization_eigenvalues": eig_sorted(D).values.real.tolist(),
               "xi": st.xi}
    else:
        c = construct(st.base, st.p, cfg.deformation, cfg.period)
        st.construction = c
        st.map = c.map
        st.frame = c.frame
        st.xi = c.deformation.xi
        rep = c.report()
        rep["deformed"] = True
        rep["designed_spectrum"] = {"moduli": np.abs(c.designed_spectrum()).tolist(),
                                    "arguments": np.angle(c.designed_spectrum()).tolist()}
    rep["base"] = {"kind": cfg.base.kind, "matrix": cfg.base.matrix, "index_adjust_sigma": cfg.adjust.sigma}
    rep["fixed_point_spectrum"] = fixed_point_spectrum(st.map, st.p, cfg.period).to_dict()
    w.write("construction_report.json", _dump_json(rep))


def _region(st: _State):
    from .verification import RegionSpec

    box = st.construction.deformation.perturbation_box()
    chart = st.cfg.deformation.chart_radius
    # shrink the enlargement when the scaled box would leave the chart ball
    s = min(st.cfg.verification.tube_scale, 0.999 * chart / float(np.linalg.norm(box)))
    return RegionSpec(st.p, st.frame, s * box[0], s * math.hypot(box[1], box[2]), chart)


def _disk(st: _State):
    from .manifolds import largest_stable_disk

    if st.disk is None:
        st.disk = largest_stable_disk(st.map, st.p, st.frame, st.cfg.verification.disk_max_radius,
                                      seed=st.cfg.seed)
    return st.disk


def _stage_verify(st: _State, w: _Writer) -> None:
    from .geometry import ConeSpec
    from .verification import (VerificationReport, check_cone_invariance, check_domination, check_support,
                               check_V_membership, check_volume)

    cfg, v = st.cfg, st.cfg.verification
    f, seed = st.map, cfg.seed
    deformed = st.construction is not None
    focus = (st.p, cfg.deformation.chart_radius) if deformed else None
    reps = []
    if deformed:
        reps.append(_exactness_report(st))
        drift = st.construction.hamiltonian_drift()
        ok = drift <= 1e-9
        reps.append(VerificationReport("hamiltonian_sentinel", "pass" if ok else "fail", 1e-9 - drift,
                                       None if ok else [drift], len(st.construction.shears()),
                                       {"max_relative_drift": 1e-9}, details={"drift": drift}))
    if v.volume:
        reps.append(check_volume(f, v.samples, v.volume_tol, seed, focus))
    if v.support and deformed:
        reps.append(check_support(f, st.base, st.p, cfg.deformation.chart_radius, v.samples, v.support_tol, seed))
    cone = ConeSpec(st.gamma, st.frame)
    if v.cone:
        region = (st.p, cfg.deformation.chart_radius) if (v.cone_scope == "chart" and deformed) else None
        r = check_cone_invariance(f, cone, st.xi, v.samples, v.n_boundary, seed, focus=focus, region=region)
        if r.passed and r.margin < v.cone_margin:
            r.verdict = "fail"
        r.tolerances["required_margin"] = v.cone_margin
        r.details["scope"] = v.cone_scope if deformed else "global"
        reps.append(r)
    if v.domination:
        # a cone certified only on the chart ball says nothing about directions elsewhere
        local = v.cone_scope == "chart" and deformed
        r = check_domination(f, v.n_time, v.domination_points, None if local else cone, seed + 1)
        r.details["cone_scope"] = "none" if local else "global"
        reps.append(r)
    if v.v_membership and deformed:
        st.region = _region(st)
        reps.append(check_V_membership(f, st.region, st.p, v.n_time, st.gamma, st.xi, v.grid, v.samples,
                                       v.n_boundary, disk_radius=_disk(st).radius, seed=seed))
    st.verification += reps
    _write_verification(st, w)


def _exactness_report(st: _State):
    from .verification import VerificationReport, fixed_point_spectrum

    c = st.construction
    got = fixed_point_spectrum(st.map, st.p, st.cfg.period)
    want = c.designed_spectrum()
    order = np.argsort(-np.abs(want) - 1e-3 * np.angle(want))
    want = want[order]
    got_v = got.values[np.argsort(-got.moduli - 1e-3 * got.arguments)]
    dmod = float(np.abs(np.abs(got_v) - np.abs(want)).max())
    darg = float(np.abs(np.angle(got_v) - np.angle(want)).max())
    ok = dmod <= 1e-6 and darg <= 1e-6 and got.complex_stable_pair == (c.deformation.params.theta != 0)
    return VerificationReport("fixed_point_exactness", "pass" if ok else "fail", 1e-6 - max(dmod, darg),
                              None if ok else st.p.tolist(), 1, {"modulus": 1e-6, "argument": 1e-6},
                              details={"modulus_error": dmod, "argument_error": darg,
                                       "complex_stable_pair": got.complex_stable_pair})


def _write_verification(st: _State, w: _Writer) -> None:
    body = {"checks": [r.to_dict() for r in st.verification], "diagnostics": st.diagnostics}
    w.write("verification_report.json", _dump_json(body))


def _stage_lyapunov(st: _State, w: _Writer) -> None:
    from .lyapunov import benettin_exponents, cs_birkhoff_average, exponent_survey
    from .maps import TorusAutomorphism
    from .verification import VerificationReport

    cfg, ly = st.cfg, st.cfg.lyapunov
    x0 = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(10**6,))).random(3)
    est = benettin_exponents(st.map, x0, ly.n)
    survey = exponent_survey(st.map, ly.ensemble, ly.survey_n, seed=cfg.seed)
    cs = cs_birkhoff_average(st.map, x0, ly.cs_n)
    diag = {"x0": x0, "n": ly.n, "exponents": est.exponents, "sum": est.total, "cs_birkhoff_average": cs,
            "cs_n": ly.cs_n, "survey": survey.summary()}
    tol = 1e-3
    ok = abs(est.total) <= tol
    rep = VerificationReport("lyapunov_volume_sum", "pass" if ok else "fail", tol - abs(est.total),
                             None if ok else x0.tolist(), ly.n, {"abs_sum": tol}, details={"sum": est.total})
    st.verification.append(rep)
    if isinstance(st.map, TorusAutomorphism):
        oracle = np.sort(np.log(np.abs(np.linalg.eigvals(st.map.matrix.astype(float)))))[::-1]
        err = float(np.abs(est.exponents - oracle).max())
        ok = err <= 1e-6
        diag["eigen_oracle"] = oracle
        st.verification.append(VerificationReport("lyapunov_eigen_oracle", "pass" if ok else "fail", 1e-6 - err,
                                                   None if ok else x0.tolist(), ly.n, {"abs": 1e-6},
                                                   details={"max_error": err}))
    st.diagnostics["lyapunov"] = diag
    rows = [("benettin", -1, *x0, *est.exponents)]
    from .geometry import sobol

    X0 = sobol(ly.ensemble, 3, cfg.seed)
    rows += [("survey", i, *X0[i], *survey.exponents[i]) for i in range(ly.ensemble)]
    w.write("lyapunov.csv", _csv_bytes(["kind", "member", "x", "y", "z", "l1", "l2", "l3"], rows))
    _write_verification(st, w)


def _stage_manifolds(st: _State, w: _Writer) -> None:
    from .manifolds import coverage_ladder, unstable_box_coverage, uu_directions
    from .verification import VerificationReport

    m = st.cfg.manifolds
    disk = _disk(st)
    tube = None
    if m.use_tube and st.construction is not None:
        st.region = st.region or _region(st)
        tube = st.region
    reps = coverage_ladder(st.map, disk, m.grid, m.N_ladder, m.L_ladder, tube, m.h_max)
    w.write("coverage.csv", _csv_bytes(["grid", "N", "L", "fraction", "failures"],
                                       [(r.grid, r.N, r.L, r.fraction, len(r.failures)) for r in reps]))
    final = max(reps, key=lambda r: (r.N, r.L))
    w.write("failure_cloud.csv", _csv_bytes(["x", "y", "z"], [tuple(x) for x in final.failures]))
    mono = _monotone(reps)
    target = 0.99
    ok = final.fraction >= target and mono
    st.verification.append(VerificationReport(
        "phc_plus_coverage", "pass" if ok else "fail", final.fraction - target,
        None if ok else (final.failures[0].tolist() if len(final.failures) else st.p.tolist()),
        len(final.first_hit), {"min_fraction": target, "N": final.N, "L": final.L},
        details={"fraction": final.fraction, "monotone": mono, "disk_radius": disk.radius}))
    d = uu_directions(st.map, st.p[None])[0]
    st.diagnostics["phc_minus_proxy"] = unstable_box_coverage(st.map, st.p, d, L=max(m.L_ladder))
    _write_verification(st, w)


def _monotone(reps) -> bool:
    table = {(r.N, r.L): r.fraction for r in reps}
    Ns = sorted({r.N for r in reps})
    Ls = sorted({r.L for r in reps})
    for i, N in enumerate(Ns):
        for j, L in enumerate(Ls):
            if i and table[(Ns[i - 1], L)] > table[(N, L)]:
                return False
            if j and table[(N, Ls[j - 1])] > table[(N, L)]:
                return False
    return True


def _stage_ergodicity(st: _State, w: _Writer) -> None:
    from .ergodicity import ergodicity_contrast, trig_observable

    e = st.cfg.ergodicity
    obs = [trig_observable(k) for k in e.observables]
    ref = st.raw_base if e.contrast_with == "unadjusted" else st.base
    rows = ergodicity_contrast(ref, st.map, obs, e.ensemble, e.horizons, st.cfg.seed)
    w.write("dispersion.csv", _csv_bytes(["observable", "n", "base", "deformed", "ratio"],
                                         [(r["observable"], r["n"], r["base"], r["deformed"], r["ratio"])
                                          for r in rows]))
    st.diagnostics["ergodicity_contrast"] = {
        "reference": ref.label, "ensemble": e.ensemble, "seed": st.cfg.seed, "rows": rows,
        "note": "small dispersion is consistent with ergodicity at the given horizon; it is not a proof"}
    _write_verification(st, w)


STAGE_FUNCS = {"construct": _stage_construct, "verify": _stage_verify, "lyapunov": _stage_lyapunov,
               "manifolds": _stage_manifolds, "ergodicity": _stage_ergodicity}


# ----------------------------------------------------------------------------
# entry points


def run(cfg: ExperimentConfig, out: str | Path | None = None, stages=None, threads: int | None = None) -> RunManifest:
    """Execute the enabled stages in order and write reports plus ``manifest.json`` into ``out``.

    Raises :class:`ConfigError` for an invalid config; stage errors are
    recorded in the manifest and halt the stages that depend on them.
    """
    bad = validate(cfg, quick_scan=False)
    if bad:
        path, msg = bad[0]
        raise ConfigError(msg, path)
    if threads is not None:
        _set_threads(threads)
    enabled = list(cfg.stages if stages is None else stages)
    for s in enabled:
        if s not in STAGES:
            raise ConfigError(f"unknown stage {s!r}", "stages")
    if "construct" not in enabled:
        enabled.insert(0, "construct")
    out = Path(out if out is not None else cfg.output)
    manifest = RunManifest(cfg.digest(), __version__, cfg.seed)
    w = _Writer(out, manifest)
    w.write("config.yaml", cfg.to_yaml().encode())
    st = _State(cfg)
    failed: set[str] = set()
    for name in STAGES:
        if name not in enabled:
            continue
        if any(d in failed for d in DEPENDS[name]):
            manifest.stages[name] = {"status": "skipped", "reason": "dependency failed"}
            failed.add(name)
            continue
        t0 = time.perf_counter()
        log.info("stage %s", name)
        try:
            STAGE_FUNCS[name](st, w)
            status = {"status": "ok"}
        except DeformError as e:
            status = {"status": "error", "error": type(e).__name__, "message": str(e)}
            failed.add(name)
        status["wall_time"] = time.perf_counter() - t0
        manifest.stages[name] = status
    manifest.verdicts = {r.name: r.verdict for r in st.verification}
    (out / "manifest.json").write_bytes(_dump_json(manifest.to_dict()))
    return manifest


def _set_threads(n: int) -> None:
    import numba

    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def _resolve_config(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both", "--config")
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = preset(args.preset or "bv-t3")
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deform-anosov", description=__doc__.splitlines()[0] if __doc__ else None)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML experiment file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="use a shipped preset instead of --config")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("validate", help="check a config without running it")
    common(p)
    p.add_argument("--no-scan", action="store_true", help="skip the quick feasibility scan")
    p = sub.add_parser("run", help="run an experiment")
    common(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--stages", help=f"comma-separated subset of {','.join(STAGES)}")
    p.add_argument("--threads", type=int)
    p = sub.add_parser("preset", help="list or show shipped presets")
    ps = p.add_subparsers(dest="preset_command", required=True)
    ps.add_parser("list")
    show = ps.add_parser("show")
    show.add_argument("name")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "preset":
            if args.preset_command == "list":
                for name in PRESETS:
                    print(f"{name:12s} {PRESET_HELP[name]}")
            else:
                print(preset(args.name).to_yaml(), end="")
            return EXIT_OK
        cfg = _resolve_config(args)
        if args.command == "validate":
            diags = validate(cfg, quick_scan=not args.no_scan)
            for path, msg in diags:
                print(f"{path}: {msg}")
            if not diags:
                print("ok")
            return EXIT_CONFIG if diags else EXIT_OK
        stages = args.stages.split(",") if args.stages else None
        m = run(cfg, args.out, stages, args.threads)
    except ConfigError as e:
        print(f"config error at {e.path}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    for k, v in m.verdicts.items():
        print(f"{k:36s} {v}")
    for k, s in m.stages.items():
        if s["status"] != "ok":
            print(f"stage {k}: {s['status']} {s.get('error', '')} {s.get('message', '')}".rstrip())
    print("overall", "pass" if m.passed else "fail")
    return EXIT_OK if m.passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
