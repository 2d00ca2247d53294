"""h-sets N(z, alpha) and covering relations N(z, alpha) => N(g_lam2(z), alpha) under g_lam1."""
from dataclasses import dataclass

import numpy as np

from .systems import HypothesisError, Splitting, invert_map


@dataclass(frozen=True, eq=False)
class HSet:
    """center + closed ball_u(0, alpha) x closed ball_s(0, alpha)."""
    center: np.ndarray
    radius: float
    splitting: Splitting

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("h-set radius must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    def contains(self, z, slack=0.0):
        return self.splitting.norm(np.asarray(z) - self.center) <= self.radius + slack

    def on_exit_set(self, z, tol=1e-12):
        dx = np.linalg.norm(self.splitting.x(np.asarray(z) - self.center), axis=-1)
        return np.abs(dx - self.radius) <= tol * max(1.0, self.radius)

    def on_entry_set(self, z, tol=1e-12):
        dy = np.linalg.norm(self.splitting.y(np.asarray(z) - self.center), axis=-1)
        return np.abs(dy - self.radius) <= tol * max(1.0, self.radius)


@dataclass(frozen=True, eq=False)
class CoveringCheckReport:
    mode: str
    passed: bool
    exit_margin: float
    entry_margin: float
    witnesses: tuple = ()

    def as_dict(self):
        out = {"mode": self.mode, "pass": self.passed, "exit_margin": self.exit_margin,
               "entry_margin": self.entry_margin}
        if self.witnesses:
            out["witnesses"] = [list(map(float, w)) for w in self.witnesses]
        return out


@dataclass(frozen=True, eq=False)
class CoveringChain:
    sets: tuple
    lam_source: float
    lam_anchor: float

    @property
    def centers(self):
        return np.array([s.center for s in self.sets])

    @property
    def radius(self):
        return self.sets[0].radius


def alpha_hat_map(c_u, c_s, m_bound):
    """max(2M/(c_u - 1), 2M/(1 - c_s))."""
    if c_u <= 1.0 or c_s >= 1.0:
        raise HypothesisError(f"not hyperbolic: c_u={c_u}, c_s={c_s}")
    if m_bound < 0:
        raise ValueError("M must be nonnegative")
    return max(2.0 * m_bound / (c_u - 1.0), 2.0 * m_bound / (1.0 - c_s))


def sample_ball(rng, count, dim, radius):
    d = rng.standard_normal((count, dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * (radius * rng.uniform(size=(count, 1)) ** (1.0 / dim))


def sample_sphere(rng, count, dim, radius):
    d = rng.standard_normal((count, dim))
    return radius * d / np.linalg.norm(d, axis=1, keepdims=True)


def check_covering(sys_source, center, target_center, alpha, mode="sampled", boundary_samples=1000,
                   seed=0, lam_target=1.0):
    """Does N(center, alpha) g_lam1-cover N(target_center, alpha)?

    ``analytic`` checks (c_u - 1) alpha > m and (1 - c_s) alpha > m with
    m = (lam1 + lam_target) M, which is 2M in the worst case.
    ``sampled`` checks |pi_x(g(p) - target)| > alpha on exit-face points and
    |pi_y(g(p) - target)| < alpha on box points (half of them on the entry face).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    lin = sys_source.linear
    budget = (sys_source.lam + lam_target) * sys_source.M
    if mode == "analytic":
        exit_m = (lin.c_u - 1.0) * alpha - budget
        entry_m = (1.0 - lin.c_s) * alpha - budget
        return CoveringCheckReport("analytic", bool(exit_m > 0 and entry_m > 0), float(exit_m), float(entry_m))
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    split = sys_source.splitting
    u, s = split.u, split.s
    center = np.asarray(center, dtype=float)
    target = np.asarray(target_center, dtype=float)
    rng = np.random.default_rng(seed)
    exit_pts = np.hstack([sample_sphere(rng, boundary_samples, u, alpha),
                          sample_ball(rng, boundary_samples, s, alpha)])
    half = boundary_samples // 2
    box_pts = np.hstack([sample_ball(rng, boundary_samples, u, alpha),
                         np.vstack([sample_sphere(rng, half, s, alpha),
                                    sample_ball(rng, boundary_samples - half, s, alpha)])])
    gx = sys_source(center + exit_pts) - target
    gy = sys_source(center + box_pts) - target
    ex = np.linalg.norm(gx[:, :u], axis=1) - alpha
    en = alpha - np.linalg.norm(gy[:, u:], axis=1)
    i, j = int(np.argmin(ex)), int(np.argmin(en))
    witnesses = []
    if ex[i] <= 0:
        witnesses.append(center + exit_pts[i])
    if en[j] <= 0:
        witnesses.append(center + box_pts[j])
    return CoveringCheckReport("sampled", bool(ex[i] > 0 and en[j] > 0), float(ex[i]), float(en[j]),
                               tuple(witnesses))


def anchor_orbit(sys_anchor, base, window, tol=1e-13):
    """Points g^k(base) for k = -window..window (forward by g, backward by inversion)."""
    base = np.asarray(base, dtype=float)
    fwd = [base]
    for _ in range(window):
        fwd.append(sys_anchor(fwd[-1]))
    back = []
    cur = base
    for _ in range(window):
        cur = invert_map(sys_anchor, cur, tol=tol)
        back.append(cur)
    return np.array(back[::-1] + fwd)


def build_chain(sys_anchor, sys_source, base, window, alpha):
    """Chain N(a_k, alpha) along the g_lam2-orbit of ``base`` for k = -K..K.

    Every link is certified by the analytic covering check under ``sys_source``.
    """
    a_hat = alpha_hat_map(sys_source.linear.c_u, sys_source.linear.c_s, sys_source.M)
    if alpha <= a_hat:
        raise HypothesisError(f"alpha={alpha} must exceed alpha_hat={a_hat}")
    centers = anchor_orbit(sys_anchor, base, window)
    rep = check_covering(sys_source, centers[0], centers[1], alpha, "analytic", lam_target=sys_anchor.lam)
    if not rep.passed:
        raise HypothesisError("covering relation fails analytically")
    split = sys_anchor.splitting
    return CoveringChain(tuple(HSet(c, alpha, split) for c in centers), sys_source.lam, sys_anchor.lam)
