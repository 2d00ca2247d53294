"""Command line: JSON configs in, report.json and per-task CSVs out.

Exit codes: 0 every task passed, 1 some task failed, 2 some task raised,
3 the configuration was rejected before any computation.
"""
import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import cones, covering, holder, localize, segments, shadowing
from .systems import (HyperbolicLinearField, HyperbolicLinearMap, HypothesisError, MapSystem, OdeSystem,
                      Perturbation, Splitting)

SCHEMA = "ghconj/1"
TASKS = ("verify-map", "conjugate", "holder", "verify-ode", "conjugate-ode", "localize", "periodic")
MAP_TASKS = {"verify-map", "conjugate", "holder", "periodic"}
ODE_TASKS = {"verify-ode", "conjugate-ode"}
LAMBDA_GRID = (0.0, 0.5, 1.0)

EXIT_PASS, EXIT_FAIL, EXIT_ERROR, EXIT_CONFIG = 0, 1, 2, 3


class ConfigError(ValueError):
    """Configuration rejected before any computation."""


# -- schema ---------------------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SplittingSpec(_Strict):
    u: int = Field(ge=1)
    s: int = Field(ge=1)


class PerturbationSpec(_Strict):
    family: Literal["zero", "sine", "cosine", "quadratic", "cutoff"]
    params: dict = Field(default_factory=dict)
    M: Optional[float] = None
    eps: Optional[float] = None


class SolverSpec(_Strict):
    alpha: Optional[float] = Field(default=None, gt=0)
    K: int = Field(default=40, ge=1)
    tol: float = Field(default=1e-10, gt=0)
    delta: float = Field(default=0.5, gt=0, le=1)
    T: float = Field(default=8.0, gt=0)
    T_segment: float = Field(default=5.0, gt=0)
    step: float = Field(default=0.01, gt=0)
    eta: Optional[float] = Field(default=None, gt=0)
    lam: float = Field(default=1.0, ge=0, le=1)
    samples: int = Field(default=1000, ge=1)
    box: float = Field(default=3.0, gt=0)
    seed: int = Field(default=0, ge=0)
    defect_tol: float = Field(default=1e-6, gt=0)
    flow_defect_tol: float = Field(default=1e-4, gt=0)
    flow_times: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    holder_pairs: int = Field(default=50, ge=1)
    holder_count: int = Field(default=500, ge=2)
    holder_band: tuple[float, float] = (1e-4, 1e-1)
    periodic_tol: float = Field(default=1e-9, gt=0)


class GridAxis(_Strict):
    min: float
    max: float
    count: int = Field(ge=1)


class RandomPoints(_Strict):
    count: int = Field(ge=1)
    box: float = Field(gt=0)


class PointsSpec(_Strict):
    csv: Optional[str] = None
    grid: Optional[list[GridAxis]] = None
    random: Optional[RandomPoints] = None

    @model_validator(mode="after")
    def _one_source(self):
        if sum(x is not None for x in (self.csv, self.grid, self.random)) != 1:
            raise ValueError("exactly one of csv, grid, random is required")
        return self


class LocalizeSpec(_Strict):
    eps: float = Field(gt=0)
    delta: float = Field(gt=0)
    plateau: Optional[float] = None
    points: int = Field(default=20, ge=1)


class RunConfig(_Strict):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: Literal["ghconj/1"] = Field(alias="schema")
    kind: Literal["map", "ode", "localize"]
    splitting: SplittingSpec
    a_u: list[float]
    a_s: list[float]
    c_u: Optional[float] = None
    c_s: Optional[float] = None
    perturbation: PerturbationSpec
    solver: SolverSpec = Field(default_factory=SolverSpec)
    points: Optional[PointsSpec] = None
    localize: Optional[LocalizeSpec] = None
    loop: Optional[list[list[float]]] = None
    tasks: list[Literal[TASKS]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _shapes(self):
        u, s = self.splitting.u, self.splitting.s
        if len(self.a_u) != u * u:
            raise ValueError(f"a_u: expected {u * u} entries for u={u}, got {len(self.a_u)}")
        if len(self.a_s) != s * s:
            raise ValueError(f"a_s: expected {s * s} entries for s={s}, got {len(self.a_s)}")
        if self.kind == "localize" and self.localize is None:
            raise ValueError("localize: block required for kind=localize")
        allowed = {"map": MAP_TASKS, "ode": ODE_TASKS, "localize": MAP_TASKS | {"localize"}}[self.kind]
        bad = [t for t in self.tasks if t not in allowed]
        if bad:
            raise ValueError(f"tasks: {bad} not available for kind={self.kind}")
        return self


# -- building systems -------------------------------------------------------------

def _matrix(entries, n, name):
    m = np.asarray(entries, dtype=float)
    if m.size != n * n:
        raise ConfigError(f"{name}: expected {n * n} entries, got {m.size}")
    return m.reshape(n, n)


def build_perturbation(spec, split):
    """Perturbation from its config block; declared bounds are certified per family."""
    n = split.n
    p = spec.params
    fam = spec.family
    if fam == "zero":
        return Perturbation.zero(n)
    if fam in ("sine", "cosine"):
        mat = _matrix(p.get("matrix", []), n, "perturbation.params.matrix")
        ctor = Perturbation.sine if fam == "sine" else Perturbation.cosine
        return ctor(p.get("amplitude", 0.0), mat, p.get("phase"), spec.M, spec.eps, split)
    if fam == "quadratic":
        return Perturbation.quadratic(_matrix(p.get("coeffs", []), n, "perturbation.params.coeffs"))
    base_spec = PerturbationSpec(**p.get("base", {}))
    if base_spec.family == "cutoff":
        raise ConfigError("perturbation.params.base: nested cutoff not supported")
    if spec.M is None or spec.eps is None:
        raise ConfigError("perturbation: cutoff family needs declared M and eps")
    base = build_perturbation(base_spec, split)
    return localize.certified_cutoff(base, float(p["delta"]), p.get("plateau"), spec.M, spec.eps)


def perturbation_spec(pert):
    """Inverse of build_perturbation for built-in families."""
    def plain(q):
        if q.family == "quadratic":
            return {"family": "quadratic", "params": {"coeffs": q.mat.ravel().tolist()}}
        if q.family == "zero":
            return {"family": "zero", "params": {}}
        return {"family": q.family, "params": {"matrix": q.mat.ravel().tolist(), "amplitude": q.amp.tolist(),
                                               "phase": q.phase.tolist()},
                "M": q.m_bound, "eps": q.eps_bound}
    if pert.family != "cutoff":
        return plain(pert)
    return {"family": "cutoff", "params": {"base": plain(pert.base), "delta": float(pert.cut[1]),
                                           "plateau": float(pert.cut[2])},
            "M": pert.m_bound, "eps": pert.eps_bound}


def _load_points(spec, n, base_dir, seed):
    if spec.csv is not None:
        path = Path(spec.csv)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if header != [f"z_{i + 1}" for i in range(n)]:
            raise ConfigError(f"points.csv: header must be z_1..z_{n}")
        return np.array([[float(x) for x in r] for r in body if r], dtype=float).reshape(-1, n)
    if spec.grid is not None:
        if len(spec.grid) != n:
            raise ConfigError(f"points.grid: expected {n} axes, got {len(spec.grid)}")
        axes = [np.linspace(a.min, a.max, a.count) for a in spec.grid]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)
    rng = np.random.default_rng(seed)
    return rng.uniform(-spec.random.box, spec.random.box, size=(spec.random.count, n))


@dataclass(eq=False)
class Setup:
    """Validated config plus the certified objects built from it."""
    config: RunConfig
    split: Splitting
    linear: object
    pert: Perturbation
    base_dir: Optional[Path] = None
    seed: int = 0
    _cache: dict = field(default_factory=dict)

    @property
    def solver(self):
        return self.config.solver

    @cached_property
    def local_map(self):
        return MapSystem(self.linear, self.pert, self.solver.lam)

    @cached_property
    def globalized(self):
        loc = self.config.localize
        return localize.globalize(self.local_map, loc.eps, loc.delta, loc.plateau, self.solver.samples,
                                  self.seed)

    @cached_property
    def map_system(self):
        if self.config.kind == "localize":
            return self.globalized[1]
        return self.local_map

    @cached_property
    def ode_system(self):
        return OdeSystem(self.linear, self.pert, self.solver.lam, self.solver.step)

    def points(self, default_count=20):
        n = self.split.n
        if self.config.points is None:
            rng = np.random.default_rng(self.seed)
            return rng.uniform(-self.solver.box, self.solver.box, size=(default_count, n))
        if "points" not in self._cache:
            self._cache["points"] = _load_points(self.config.points, n, self.base_dir, self.seed)
        return self._cache["points"].copy()


def _format_validation(err):
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def parse_config(text, base_dir=None, seed=None):
    """Validate JSON config text and certify the systems it describes."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None
    return build_setup(cfg, base_dir, seed)


def build_setup(cfg, base_dir=None, seed=None):
    split = Splitting(cfg.splitting.u, cfg.splitting.s)
    a_u = np.asarray(cfg.a_u, dtype=float).reshape(split.u, split.u)
    a_s = np.asarray(cfg.a_s, dtype=float).reshape(split.s, split.s)
    try:
        if cfg.kind == "ode":
            linear = HyperbolicLinearField(a_u, a_s, cfg.c_u, cfg.c_s)
        else:
            linear = HyperbolicLinearMap(a_u, a_s, cfg.c_u, cfg.c_s)
        pert = build_perturbation(cfg.perturbation, split)
    except (HypothesisError, ValueError, KeyError) as exc:
        raise ConfigError(f"certification failed: {exc}") from None
    if cfg.kind != "localize" and not (math.isfinite(pert.m_bound) and math.isfinite(pert.eps_bound)):
        raise ConfigError(f"perturbation: family {pert.family} is unbounded; use kind=localize or the cutoff family")
    seed = cfg.solver.seed if seed is None else int(seed)
    st = Setup(cfg, split, linear, pert, None if base_dir is None else Path(base_dir), seed)
    try:
        st.points()
    except (OSError, ValueError, IndexError) as exc:
        raise ConfigError(f"points: {exc}") from None
    return st


# -- tasks -------------------------------------------------------------------------

@dataclass
class TaskResult:
    task: str
    status: str
    payload: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    header: list = field(default_factory=list)
    error: Optional[str] = None


def _cone_payload(rep):
    return {k: v for k, v in rep.items() if k != "witness"} | (
        {"witness": rep["witness"]} if "witness" in rep else {})


def task_verify_map(st):
    sysm = st.map_system
    lin = sysm.linear
    sv = st.solver
    eta = sv.eta if sv.eta is not None else 0.1
    cert = cones.certify_eps0(lin, eta, seed=st.seed)
    alpha = sv.alpha if sv.alpha is not None else shadowing.default_alpha(sysm)
    a_hat = shadowing.alpha_hat(sysm)
    eps = sysm.lam * sysm.eps
    hyp = bool(eps < min(cert.eps0, lin.eps1) and alpha > a_hat)
    n = st.split.n
    z1, z2 = cones.sample_pairs(n, sv.samples, sv.box, seed=st.seed)
    cone = cones.check_cone_map(sysm, eta, z1, z2)
    rng = np.random.default_rng(st.seed + 1)
    rows, ok_cov = [], True
    for l1 in LAMBDA_GRID:
        for l2 in LAMBDA_GRID:
            center = rng.uniform(-sv.box, sv.box, size=n)
            target = sysm.with_lambda(l2)(center)
            src = sysm.with_lambda(l1)
            for mode in ("analytic", "sampled"):
                rep = covering.check_covering(src, center, target, alpha, mode, sv.samples, st.seed, l2)
                ok_cov &= rep.passed
                rows.append([l1, l2, mode, rep.passed, rep.exit_margin, rep.entry_margin])
    payload = {"c_u": lin.c_u, "c_s": lin.c_s, "eps1": lin.eps1, "eta_max": cones.eta_max(lin.c_u, lin.c_s),
               "eta": eta, "eps0": cert.eps0, "M": sysm.M, "eps": sysm.eps, "lam": sysm.lam,
               "alpha_hat": a_hat, "alpha": alpha, "hypotheses": hyp, "cone": _cone_payload(cone),
               "covering_pass": bool(ok_cov)}
    ok = hyp and cone["pass"] and ok_cov
    return ok, payload, ["lambda1", "lambda2", "mode", "pass", "exit_margin", "entry_margin"], rows


def task_conjugate(st):
    sysm = st.map_system
    sv = st.solver
    alpha = sv.alpha if sv.alpha is not None else shadowing.default_alpha(sysm)
    pts = st.points()
    n = st.split.n
    rows = []
    worst = {"defect": 0.0, "roundtrip": 0.0, "residual": 0.0, "truncation_bound": 0.0}
    for z in pts:
        cp = shadowing.rho(sysm, z, alpha, sv.K, sv.tol)
        defect = float(np.abs(shadowing.rho(sysm, sysm.A @ z, alpha, sv.K, sv.tol).value - sysm(cp.value)).max())
        back = shadowing.sigma(sysm, cp.value, alpha, sv.K, sv.tol).value
        fwd = shadowing.rho(sysm, shadowing.sigma(sysm, z, alpha, sv.K, sv.tol).value, alpha, sv.K, sv.tol).value
        rt = float(max(np.abs(back - z).max(), np.abs(fwd - z).max()))
        rows.append([*z, *cp.value, cp.residual, cp.truncation_bound, cp.orbit.containment, defect, rt])
        for k, v in (("defect", defect), ("roundtrip", rt), ("residual", cp.residual),
                     ("truncation_bound", cp.truncation_bound)):
            worst[k] = max(worst[k], v)
    header = [f"z_{i + 1}" for i in range(n)] + [f"rho_{i + 1}" for i in range(n)] + [
        "residual", "truncation_bound", "containment", "defect", "roundtrip"]
    payload = {"alpha": alpha, "K": sv.K, "tol": sv.tol, "points": len(pts),
               **{f"max_{k}": v for k, v in worst.items()}}
    ok = worst["defect"] <= sv.defect_tol and worst["roundtrip"] <= sv.defect_tol
    return ok, payload, header, rows


def task_holder(st):
    sysm = st.map_system
    sv = st.solver
    alpha = sv.alpha if sv.alpha is not None else shadowing.default_alpha(sysm)
    est = holder.holder_estimate(sysm, alpha)
    rng = np.random.default_rng(st.seed)
    n = st.split.n
    pairs = [(rng.uniform(-sv.box, sv.box, n), rng.uniform(-sv.box, sv.box, n)) for _ in range(sv.holder_pairs)]
    basic = holder.check_basic_estimate(sysm, pairs, range(1, 11), alpha, sv.K, sv.tol)
    bases = rng.uniform(-sv.box, sv.box, size=(50, n))
    fit = holder.empirical_holder(sysm, bases, tuple(sv.holder_band), sv.holder_count, alpha, sv.K, sv.tol,
                                  seed=st.seed)
    payload = {**est.as_dict(), "basic_min_slack": basic["min_slack"], "basic_pass": basic["pass"],
               "slope": fit.slope, "intercept": fit.intercept, "fit_residual": fit.residual,
               "ratio_max": fit.ratio_max, "ratio_bound": fit.ratio_bound}
    rows = [[d, r] for d, r in zip(fit.distances, fit.image_distances)]
    ok = basic["pass"] and fit.slope_ok and fit.ratio_ok
    return ok, payload, ["distance", "image_distance"], rows


def task_periodic(st):
    sysm = st.map_system
    sv = st.solver
    n = st.split.n
    loop = np.zeros((1, n)) if st.config.loop is None else np.asarray(st.config.loop, dtype=float)
    if loop.ndim != 2 or loop.shape[1] != n:
        raise ValueError(f"loop: anchors must have {n} coordinates")
    alpha = sv.alpha if sv.alpha is not None else shadowing.default_alpha(sysm)
    x = shadowing.periodic_from_loop(sysm, loop, alpha, tol=min(sv.tol, 1e-12))
    cur = x
    for _ in range(len(loop)):
        cur = sysm(cur)
    closure = float(np.abs(cur - x).max())
    r0 = shadowing.rho(sysm, loop[0], alpha, sv.K, sv.tol).value
    diff = float(np.abs(r0 - x).max())
    payload = {"period": len(loop), "alpha": alpha, "point": x.tolist(), "closure": closure,
               "rho_anchor": r0.tolist(), "rho_difference": diff}
    rows = [[*x, *r0, diff]]
    header = [f"x_{i + 1}" for i in range(n)] + [f"rho_{i + 1}" for i in range(n)] + ["difference"]
    return diff <= sv.periodic_tol, payload, header, rows


def task_verify_ode(st):
    ode = st.ode_system
    lin = ode.linear
    sv = st.solver
    eta = sv.eta if sv.eta is not None else 0.1 * min(lin.c_u, lin.c_s)
    e0 = cones.eps0_ode(lin, eta)
    a_hat = segments.alpha_hat_ode(lin.c_u, lin.c_s, ode.lam * ode.M)
    alpha = sv.alpha if sv.alpha is not None else segments.default_alpha_ode(ode)
    hyp = bool(ode.lam * ode.eps < e0 and alpha > a_hat)
    n = st.split.n
    z1, z2 = cones.sample_pairs(n, sv.samples, sv.box, seed=st.seed)
    cone = cones.check_cone_ode(ode, eta, z1, z2, seed=st.seed)
    rng = np.random.default_rng(st.seed + 1)
    rows, seg_ok = [], True
    for l1 in LAMBDA_GRID:
        z0 = rng.uniform(-1.0, 1.0, size=n)
        seg = segments.IsolatingSegment(ode.with_lambda(l1), z0, alpha, sv.T_segment)
        for l2 in LAMBDA_GRID:
            rep = segments.check_segment(seg, l2, sv.samples, seed=st.seed)
            ok = (rep.passed and rep.exit_min_slack >= rep.exit_analytic
                  and rep.entry_max_slack <= rep.entry_analytic)
            seg_ok &= ok
            rows.append([l1, l2, ok, rep.exit_min_slack, rep.exit_analytic, rep.entry_max_slack,
                         rep.entry_analytic])
    gr_margin = math.inf
    h = ode.step
    count = int(math.ceil(sv.T_segment / h - 1e-9))
    for z in st.points():
        for sign in (1.0, -1.0):
            path = ode.path(z, sign * h, count)
            norms = st.split.norm(path)
            bounds = np.array([segments.gronwall_bound(ode, z, i * h) for i in range(count + 1)])
            gr_margin = min(gr_margin, float((bounds - norms).min()))
    payload = {"c_u": lin.c_u, "c_s": lin.c_s, "eta": eta, "eps0": e0, "M": ode.M, "eps": ode.eps,
               "lam": ode.lam, "alpha_hat": a_hat, "alpha": alpha, "hypotheses": hyp,
               "cone": _cone_payload(cone), "segments_pass": bool(seg_ok), "gronwall_min_margin": gr_margin}
    header = ["lambda1", "lambda2", "pass", "exit_min_slack", "exit_analytic_slack", "entry_max_slack",
              "entry_analytic_slack"]
    return hyp and cone["pass"] and seg_ok and gr_margin >= 0, payload, header, rows


def task_conjugate_ode(st):
    ode = st.ode_system
    sv = st.solver
    alpha = sv.alpha if sv.alpha is not None else segments.default_alpha_ode(ode)
    pts = st.points()
    n = st.split.n
    kw = {"alpha": alpha, "T": sv.T, "delta": sv.delta, "tol": sv.tol}
    rows, worst = [], 0.0
    for z in pts:
        cp = segments.rho_flow(ode, z, **kw)
        defects = [segments.flow_conjugacy_defect(ode, z, t, rho_z=cp.value, **kw) for t in sv.flow_times]
        worst = max(worst, *defects)
        rows.append([*z, *cp.value, cp.residual, *defects])
    header = [f"z_{i + 1}" for i in range(n)] + [f"rho_{i + 1}" for i in range(n)] + ["residual"] + [
        f"defect_t{t:g}" for t in sv.flow_times]
    payload = {"alpha": alpha, "T": sv.T, "delta": sv.delta, "points": len(pts), "max_defect": worst,
               "flow_times": list(sv.flow_times)}
    return worst <= sv.flow_defect_tol, payload, header, rows


def task_localize(st):
    gsys, sysg = st.globalized
    loc = st.config.localize
    sv = st.solver
    orig = st.local_map
    n = st.split.n
    rng = np.random.default_rng(st.seed)
    # phi-hat agrees with phi on the guarantee ball
    d = rng.standard_normal((1000, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    inside = d * (gsys.guarantee_radius * rng.uniform(size=(1000, 1)) ** (1.0 / n))
    agree = float(np.abs(sysg(inside) - orig(inside)).max())
    d = rng.standard_normal((loc.points, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    pts = d * (0.25 * loc.delta * rng.uniform(size=(loc.points, 1)) ** (1.0 / n))
    alpha = sv.alpha if sv.alpha is not None else shadowing.default_alpha(sysg)
    rows, worst, reach = [], 0.0, 0.0
    for z in pts:
        r = shadowing.rho(sysg, z, alpha, sv.K, sv.tol).value
        defect = float(np.abs(shadowing.rho(sysg, sysg.A @ z, alpha, sv.K, sv.tol).value - orig(r)).max())
        reach = max(reach, float(np.linalg.norm(r)))
        worst = max(worst, defect)
        rows.append([*z, *r, defect])
    cfg = st.config.model_dump(by_alias=True, exclude_none=True)
    cfg.update(kind="map", perturbation=perturbation_spec(sysg.pert), tasks=["verify-map", "conjugate"])
    cfg.pop("localize", None)
    payload = {"m_hat": gsys.m_hat, "eps_hat": gsys.eps_hat, "dr_bound": gsys.dr_bound, "audit": gsys.audit,
               "alpha_hat": shadowing.alpha_hat(sysg), "alpha": alpha,
               "guarantee_radius": gsys.guarantee_radius, "agreement": agree, "max_rho_norm": reach,
               "max_defect": worst, "globalized_config": cfg}
    header = [f"z_{i + 1}" for i in range(n)] + [f"rho_{i + 1}" for i in range(n)] + ["defect"]
    ok = agree == 0.0 and worst <= sv.defect_tol and reach <= gsys.guarantee_radius
    return ok, payload, header, rows


_RUNNERS = {"verify-map": task_verify_map, "conjugate": task_conjugate, "holder": task_holder,
            "periodic": task_periodic, "verify-ode": task_verify_ode, "conjugate-ode": task_conjugate_ode,
            "localize": task_localize}


def run_task(st, name):
    try:
        ok, payload, header, rows = _RUNNERS[name](st)
    except Exception as exc:  # reported, never fatal
        module = type(exc).__module__.rsplit(".", 1)[-1]
        return TaskResult(name, "ERROR", error=f"{module}.{type(exc).__name__}: {exc}")
    return TaskResult(name, "PASS" if ok else "FAIL", payload, rows, header)


def execute(st, tasks=None, timings=None):
    """Run the tasks in order and return the report dict."""
    tasks = list(st.config.tasks) if tasks is None else list(tasks)
    results = []
    for name in tasks:
        t0 = time.perf_counter()
        results.append(run_task(st, name))
        if timings is not None:
            timings[name] = time.perf_counter() - t0
    statuses = [r.status for r in results]
    overall = "ERROR" if "ERROR" in statuses else "FAIL" if "FAIL" in statuses else "PASS"
    report = {"schema": "ghconj-report/1", "status": overall, "seed": st.seed,
              "config": st.config.model_dump(by_alias=True, exclude_none=True),
              "tasks": [{"task": r.task, "status": r.status, **({"error": r.error} if r.error else {}),
                         "payload": r.payload} for r in results]}
    return report, results


def exit_code(report):
    return {"PASS": EXIT_PASS, "FAIL": EXIT_FAIL, "ERROR": EXIT_ERROR}[report["status"]]


# -- serialization ---------------------------------------------------------------

def format_float(x):
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps(obj, indent=2, _level=0):
    """JSON with floats at 17 significant digits; non-finite floats become strings."""
    obj = _plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        s = format_float(obj)
        return s if math.isfinite(obj) else json.dumps(s)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(_plain(v), (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format_float(v) if isinstance(_plain(v), float) else _plain(v) for v in r])
    return buf.getvalue()


def write_outputs(out, report, results, timings=None):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps(report) + "\n")
    for r in results:
        if r.rows:
            (out / f"{r.task}.csv").write_text(csv_text(r.header, r.rows))
        if r.task == "localize" and r.status != "ERROR":
            (out / "globalized.json").write_text(dumps(r.payload["globalized_config"]) + "\n")
    if timings is not None:
        (out / "timings.json").write_text(dumps(timings) + "\n")


def summary_csv(report):
    rows = [[t["task"], t["status"]] for t in report["tasks"]]
    return csv_text(["task", "status"], rows)


# -- entry point -----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="ghconj", description="Conjugacies of perturbed hyperbolic systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run",) + TASKS:
        p = sub.add_parser(name, help="run the config's task list" if name == "run" else f"run the {name} task")
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="override solver.seed")
        p.add_argument("--out", default=None, help="directory for report.json and CSVs")
        p.add_argument("--format", choices=("json", "csv"), default="json", help="stdout summary format")
        p.add_argument("--timings", action="store_true", help="also write wall-clock timings.json")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    path = Path(args.config)
    try:
        text = path.read_text(encoding="utf-8")
        st = parse_config(text, base_dir=path.parent, seed=args.seed)
        tasks = None if args.command == "run" else [args.command]
        if tasks and args.command not in {"map": MAP_TASKS, "ode": ODE_TASKS,
                                          "localize": MAP_TASKS | {"localize"}}[st.config.kind]:
            raise ConfigError(f"task {args.command} not available for kind={st.config.kind}")
    except (OSError, ConfigError) as exc:
        print(f"config rejected: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    timings = {} if args.timings else None
    report, results = execute(st, tasks, timings)
    if args.out:
        write_outputs(args.out, report, results, timings)
    sys.stdout.write(dumps(report) + "\n" if args.format == "json" else summary_csv(report))
    return exit_code(report)
