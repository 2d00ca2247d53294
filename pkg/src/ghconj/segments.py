"""ODE side: Gronwall bound, isolating segments, exit times and the flow conjugacy."""
import math
from dataclasses import dataclass, field

import numpy as np

from .cones import QuadraticForm, eps0_ode
from .numerics import matrix_exp
from .shadowing import (ConjugacyPoint, ContainmentError, ShadowProblem,
                        solve_shadow)
from .systems import HypothesisError

DEFAULT_T = 8.0
DEFAULT_DELTA = 0.5
AUDIT_POINTS = 8


def gronwall_bound(sys, z, t):
    """|z| e^{(|A|+eps)|t|} + M/(|A|+eps) (e^{(|A|+eps)|t|} - 1) in the max-of-blocks norm."""
    rate = sys.linear.norm + sys.lam * sys.eps
    m = sys.lam * sys.M
    z0 = float(sys.splitting.norm(z))
    if rate == 0:
        return z0 + m * abs(t)
    g = math.exp(rate * abs(t))
    return z0 * g + m / rate * (g - 1.0)


def alpha_hat_ode(c_u, c_s, m_bound):
    """max(2M/c_u, 2M/c_s)."""
    if c_u <= 0 or c_s <= 0:
        raise HypothesisError("c_u and c_s must be positive")
    return max(2.0 * m_bound / c_u, 2.0 * m_bound / c_s)


@dataclass(eq=False)
class IsolatingSegment:
    """Moving box phi^{lam1}(t, z0) + B_u(0, alpha) x B_s(0, alpha) for t in [-T, T]."""
    ode_anchor: object
    z0: np.ndarray
    alpha: float
    horizon: float
    _fwd: np.ndarray = field(init=False, repr=False)
    _back: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.z0 = np.asarray(self.z0, dtype=float)
        if self.alpha <= 0 or self.horizon <= 0:
            raise ValueError("alpha and horizon must be positive")
        h = self.ode_anchor.step
        count = int(math.ceil(self.horizon / h - 1e-9))
        self._fwd = self.ode_anchor.path(self.z0, h, count)
        self._back = self.ode_anchor.path(self.z0, -h, count)

    @property
    def splitting(self):
        return self.ode_anchor.splitting

    def anchor(self, t):
        """phi^{lam1}(t, z0) from the cached grid plus one short step."""
        h = self.ode_anchor.step
        path = self._fwd if t >= 0 else self._back
        j = min(int(abs(t) / h), len(path) - 1)
        rem = abs(t) - j * h
        base = path[j]
        if rem <= 0:
            return base.copy()
        return self.ode_anchor.flow(base, math.copysign(rem, t))

    def face_values(self, t, z):
        """(L^-, L^+) = (|x - x_a|^2 - alpha^2, |y - y_a|^2 - alpha^2)."""
        d = np.asarray(z) - self.anchor(t)
        u = self.splitting.u
        return float(d[:u] @ d[:u] - self.alpha**2), float(d[u:] @ d[u:] - self.alpha**2)


@dataclass(frozen=True)
class SegmentCheckReport:
    exit_min_slack: float
    entry_max_slack: float
    exit_analytic: float
    entry_analytic: float
    samples: int

    @property
    def passed(self):
        return self.exit_min_slack > 0 and self.entry_max_slack < 0

    def as_dict(self):
        return {"pass": self.passed, "exit_min_slack": self.exit_min_slack,
                "entry_max_slack": self.entry_max_slack, "exit_analytic_slack": self.exit_analytic,
                "entry_analytic_slack": self.entry_analytic, "samples": self.samples}


def check_segment(seg, lambda2, time_samples=1000, boundary_samples=1, seed=0):
    """Sign of 1/2 grad L^-+ . (1, f^{lambda2}) on the exit and entry faces.

    Draws ``time_samples`` seeded times in [-T, T] and ``boundary_samples``
    face points per time. Uses the expanded form d.(A d) + d.(-lam1 h(anchor)
    + lam2 h(p)) for the relevant block d of p - anchor(t).
    """
    from .covering import sample_ball, sample_sphere
    ode = seg.ode_anchor
    split = seg.splitting
    u, s = split.u, split.s
    lam1 = ode.lam
    rng = np.random.default_rng(seed)
    alpha = seg.alpha
    count = time_samples * boundary_samples
    times = rng.uniform(-seg.horizon, seg.horizon, size=2 * time_samples)
    anchors = np.repeat(np.array([seg.anchor(t) for t in times]), boundary_samples, axis=0)
    off_exit = np.hstack([sample_sphere(rng, count, u, alpha), sample_ball(rng, count, s, alpha)])
    off_entry = np.hstack([sample_ball(rng, count, u, alpha), sample_sphere(rng, count, s, alpha)])
    offs = np.vstack([off_exit, off_entry])
    pts = anchors + offs
    drift = -lam1 * ode.pert.value(anchors) + lambda2 * ode.pert.value(pts)
    dx, dy = offs[:count, :u], offs[count:, u:]
    exit_s = np.einsum("ij,ij->i", dx, dx @ ode.linear.a_u.T + drift[:count, :u])
    entry_s = np.einsum("ij,ij->i", dy, dy @ ode.linear.a_s.T + drift[count:, u:])
    lin = ode.linear
    m = ode.M
    return SegmentCheckReport(float(exit_s.min()), float(entry_s.max()),
                              float(alpha * (lin.c_u * alpha - 2 * m)), float(alpha * (-lin.c_s * alpha + 2 * m)),
                              count)


def exit_time(seg, lam2, t0, z, tol=1e-9):
    """Time until the phi^{lam2} orbit of (t0, z) leaves the segment; inf past the horizon."""
    ode2 = seg.ode_anchor.with_lambda(lam2)
    anc_sys = seg.ode_anchor
    h = anc_sys.step
    z = np.asarray(z, dtype=float)
    a = seg.anchor(t0)
    u = seg.splitting.u

    def level(w, b):
        d = w - b
        return max(d[:u] @ d[:u], d[u:] @ d[u:]) - seg.alpha**2

    lv = level(z, a)
    if lv > 1e-12 * seg.alpha**2:
        raise ValueError("start point lies outside the segment")
    if lv >= -1e-12 * seg.alpha**2:
        d = z - a
        dx = d[:u]
        if dx @ dx >= seg.alpha**2 * (1 - 1e-12):
            rate = dx @ (ode2.field(z)[:u] - anc_sys.field(a)[:u])
            if rate > 0:
                return 0.0
    t = t0
    w = z
    while t < seg.horizon:
        dt = min(h, seg.horizon - t)
        w_new = ode2.flow(w, dt)
        a_new = anc_sys.flow(a, dt)
        if level(w_new, a_new) > 0:
            lo, hi = 0.0, dt
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if level(ode2.flow(w, mid), anc_sys.flow(a, mid)) > 0:
                    hi = mid
                else:
                    lo = mid
            return t + 0.5 * (lo + hi) - t0
        t, w, a = t + dt, w_new, a_new
    return math.inf


@dataclass(eq=False)
class TimeMap:
    """The time-delta map phi^lam(delta, .) as shadowing dynamics."""
    ode: object
    delta: float

    @property
    def splitting(self):
        return self.ode.splitting

    def __call__(self, z):
        return self.ode.flow(z, self.delta)

    def theta(self):
        lin = self.ode.linear
        e = self.ode.lam * self.ode.eps
        th = math.exp(self.delta * (min(lin.c_u, lin.c_s) - 2 * e))
        return th if th > 1 else float("nan")

    def shadow_model(self, anchors):
        memo = {}

        def evaluate(v):
            key = v.tobytes()
            if key not in memo:
                memo.clear()
                vals, jacs = [], []
                for k in range(len(anchors) - 1):
                    w, j = self.ode.flow_with_jacobian(anchors[k] + v[k], self.delta)
                    vals.append(w - anchors[k + 1])
                    jacs.append(j)
                memo[key] = (np.array(vals), np.array(jacs))
            return memo[key]

        return (lambda v: evaluate(v)[0]), (lambda v: evaluate(v)[1])


def default_alpha_ode(ode):
    a_hat = alpha_hat_ode(ode.linear.c_u, ode.linear.c_s, ode.lam * ode.M)
    return 1.25 * a_hat if a_hat > 0 else 0.25


def require_ode_hypotheses(ode, alpha, eta=None):
    lin = ode.linear
    a_hat = alpha_hat_ode(lin.c_u, lin.c_s, ode.lam * ode.M)
    if not alpha > a_hat:
        raise HypothesisError(f"alpha={alpha} must exceed alpha_hat={a_hat}")
    eta = 0.1 * min(lin.c_u, lin.c_s) if eta is None else eta
    e0 = eps0_ode(lin, eta)
    if not ode.lam * ode.eps < e0:
        raise HypothesisError(f"eps={ode.lam * ode.eps} must be below eps0={e0}")


def rho_flow(ode, z, alpha=None, T=DEFAULT_T, delta=DEFAULT_DELTA, tol=1e-10, audit=True, check=True):
    """rho(z) with phi^1(t, rho(z)) within alpha of e^{At} z, realized on a time grid.

    Shadowing runs on the time-delta map over t in [-T, T]; the continuous
    containment is then audited at intermediate times of every grid cell.
    """
    z = np.asarray(z, dtype=float)
    alpha = default_alpha_ode(ode) if alpha is None else alpha
    if check:
        require_ode_hypotheses(ode, alpha)
    if not 0 < delta <= 1:
        raise ValueError("grid spacing must lie in (0, 1]")
    J = int(round(T / delta))
    if J < 1 or abs(J * delta - T) > 1e-9 * T:
        raise ValueError("T must be a positive multiple of delta")
    a = ode.A
    step = matrix_exp(a, delta)
    back = matrix_exp(a, -delta)
    fwd_pts, back_pts = [z], []
    for _ in range(J):
        fwd_pts.append(step @ fwd_pts[-1])
    cur = z
    for _ in range(J):
        cur = back @ cur
        back_pts.append(cur)
    anchors = np.array(back_pts[::-1] + fwd_pts)
    orb = solve_shadow(ShadowProblem(TimeMap(ode, delta), anchors, alpha, tol))
    if audit:
        _audit_continuous(ode, z, orb.points, alpha, J, delta)
    return ConjugacyPoint(z, orb.center, alpha, J, orb.residual, orb.truncation_bound, orb)


def _audit_continuous(ode, z, points, alpha, J, delta, slack=1e-6):
    split = ode.splitting
    for j in range(2 * J):
        t_cell = (j - J) * delta
        for i in range(1, AUDIT_POINTS + 1):
            s = i * delta / (AUDIT_POINTS + 1)
            d = float(split.norm(ode.flow(points[j], s) - matrix_exp(ode.A, t_cell + s) @ z))
            if d > alpha + slack:
                err = ContainmentError(j - J, d, alpha)
                err.time = t_cell + s
                raise err


def flow_conjugacy_defect(ode, z, t, rho_z=None, **kw):
    """max-norm of phi^1(t, rho(z)) - rho(e^{At} z)."""
    z = np.asarray(z, dtype=float)
    rz = rho_flow(ode, z, **kw).value if rho_z is None else rho_z
    left = ode.flow(rz, t)
    right = rho_flow(ode, matrix_exp(ode.A, t) @ z, **kw).value
    return float(np.abs(left - right).max())


def flow_cone_monitor(ode, z1, z2, eta, T, grid=None):
    """min over a time grid of dQ/dt - eta |Q| along the difference of two orbits.

    dQ/dt = 2 (f(w1) - f(w2))^T Q (w1 - w2) is evaluated from the field.
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    if np.all(z1 == z2):
        raise ValueError("flow_cone_monitor needs z1 != z2")
    h = ode.step if grid is None else grid
    count = int(math.ceil(T / h - 1e-9))
    p1 = ode.path(z1, h, count)
    p2 = ode.path(z2, h, count)
    qf = QuadraticForm(ode.splitting)
    d = p1 - p2
    df = ode.field(p1) - ode.field(p2)
    dq = 2.0 * np.einsum("ij,jk,ik->i", df, qf.matrix, d)
    return float((dq - eta * np.abs(qf(d))).min())
