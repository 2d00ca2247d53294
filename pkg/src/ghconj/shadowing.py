"""Finite-window shadowing: the conjugacy rho, its inverse sigma, and loop orbits.

A window of 2K+1 boxes N(a_k, alpha), k = -K..K, is realized by an orbit
w_k = a_k + v_k of the iterated map. The stable part is pinned at the left
end and the unstable part at the right end; uniqueness of bounded orbits
makes the centre point insensitive to this closure up to 2 alpha / theta^K.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .covering import alpha_hat_map, anchor_orbit, check_covering
from .cones import certify_eps0, default_eta
from .numerics import NumericsError, newton_solve
from .systems import HypothesisError, MapSystem

DEFAULT_K = 40
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50


class ShadowError(NumericsError):
    """The shadowing solve failed; the hypotheses are likely violated."""


class ContainmentError(ShadowError):
    def __init__(self, k, distance, alpha):
        super().__init__(f"orbit leaves its box at k={k}: distance {distance:.6g} > alpha={alpha:.6g}")
        self.k = k


@dataclass(eq=False)
class ShadowProblem:
    dynamics: object
    anchors: np.ndarray
    alpha: float
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    forcing: np.ndarray = None
    initial: np.ndarray = None
    theta: float = None

    def __post_init__(self):
        self.anchors = np.asarray(self.anchors, dtype=float)
        if self.anchors.ndim != 2 or len(self.anchors) % 2 != 1 or len(self.anchors) < 3:
            raise ValueError("anchors must be an odd-length list of points a_-K..a_K, K >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    @property
    def window(self):
        return (len(self.anchors) - 1) // 2


@dataclass(eq=False)
class ShadowOrbit:
    points: np.ndarray
    deviations: np.ndarray
    residual: float
    containment: float
    truncation_bound: float
    iterations: int = 0

    @property
    def window(self):
        return (len(self.points) - 1) // 2

    @property
    def center(self):
        return self.points[self.window]


@dataclass(eq=False)
class ConjugacyPoint:
    z: np.ndarray
    value: np.ndarray
    alpha: float
    window: int
    residual: float
    truncation_bound: float
    orbit: ShadowOrbit = field(default=None, repr=False)


def _map_model(sys, anchors, forcing):
    a = sys.A
    lam = sys.lam
    base = anchors[:-1]

    def dev(v):
        out = v[:-1] @ a.T - forcing
        if lam:
            out += lam * sys.pert.value_offset(base, v[:-1])
        return out

    def jac(v):
        if not lam:
            return np.broadcast_to(a, (len(base),) + a.shape)
        return a + lam * sys.pert.jacobian_offset(base, v[:-1])

    return dev, jac


def map_theta(c_u, c_s, eps):
    """min(c_u - 2 eps, 1/(c_s + 2 eps)), or nan when not expanding."""
    tu, ts = c_u - 2 * eps, 1.0 / (c_s + 2 * eps)
    th = min(tu, ts)
    return th if th > 1 else float("nan")


def truncation_bound(alpha, theta, window):
    if not theta > 1:
        return float("inf")
    return 2.0 * alpha / theta**window


def solve_shadow(p):
    """Newton on the stacked orbit equations with boundary closure."""
    dyn = p.dynamics
    split = dyn.splitting
    u, n = split.u, split.n
    anchors = p.anchors
    K = p.window
    m = 2 * K + 1
    if isinstance(dyn, MapSystem):
        forcing = anchors[1:] - anchors[:-1] @ dyn.A.T if p.forcing is None else np.asarray(p.forcing, float)
        dev, jac = _map_model(dyn, anchors, forcing)
        theta = p.theta if p.theta is not None else map_theta(dyn.linear.c_u, dyn.linear.c_s, dyn.lam * dyn.eps)
    else:
        dev, jac = dyn.shadow_model(anchors)
        theta = p.theta if p.theta is not None else dyn.theta()

    def residual(flat):
        v = flat.reshape(m, n)
        return np.concatenate([v[0, u:], (v[1:] - dev(v)).ravel(), v[-1, :u]])

    eye = np.eye(n)

    def jacobian(flat):
        v = flat.reshape(m, n)
        blocks = jac(v)
        big = np.zeros((m * n, m * n))
        s = n - u
        big[np.arange(s), u + np.arange(s)] = 1.0
        for k in range(m - 1):
            r = s + k * n
            big[r:r + n, k * n:(k + 1) * n] = -blocks[k]
            big[r:r + n, (k + 1) * n:(k + 2) * n] = eye
        big[m * n - u + np.arange(u), (m - 1) * n + np.arange(u)] = 1.0
        return big

    v0 = np.zeros(m * n) if p.initial is None else (np.asarray(p.initial, float) - anchors).ravel()
    try:
        flat = newton_solve(residual, jacobian, v0, p.tol, p.max_iter)
    except NumericsError as exc:
        raise ShadowError(f"shadowing Newton failed: {exc}") from None
    # one polishing step; kept only if it does not increase the residual
    r = residual(flat)
    try:
        cand = flat + np.linalg.solve(jacobian(flat), -r)
        if np.abs(residual(cand)).max() <= np.abs(r).max():
            flat = cand
    except np.linalg.LinAlgError:
        pass
    v = flat.reshape(m, n)
    res = float(np.abs(v[1:] - dev(v)).max()) if m > 1 else 0.0
    dist = split.norm(v)
    k_bad = int(np.argmax(dist))
    if dist[k_bad] > p.alpha * (1 + 1e-12):
        raise ContainmentError(k_bad - K, float(dist[k_bad]), p.alpha)
    return ShadowOrbit(points=anchors + v, deviations=v, residual=res, containment=float(dist.max()),
                       truncation_bound=truncation_bound(p.alpha, theta, K))


def splitting_shadow(sys, anchors, forcing=None, tol=1e-14, max_sweeps=10000):
    """Independent oracle: Gauss-Seidel sweeps of the split recursions.

    Stable deviations run forward from v_-K = 0 through A_s; unstable
    deviations run backward from v_K = 0 through A_u^-1. Uses h only.
    """
    anchors = np.asarray(anchors, dtype=float)
    split = sys.splitting
    u = split.u
    a = sys.A
    a_s = sys.linear.a_s
    inv_u = np.linalg.inv(sys.linear.a_u)
    if forcing is None:
        forcing = anchors[1:] - anchors[:-1] @ a.T
    m = len(anchors)
    v = np.zeros_like(anchors)
    for sweep in range(max_sweeps):
        old = v.copy()
        for k in range(m - 1):
            hk = sys.lam * sys.pert.value(anchors[k] + v[k])
            v[k + 1, u:] = a_s @ v[k, u:] + hk[u:] - forcing[k, u:]
        for k in range(m - 2, -1, -1):
            hk = sys.lam * sys.pert.value(anchors[k] + v[k])
            v[k, :u] = inv_u @ (v[k + 1, :u] - hk[:u] + forcing[k, :u])
        if np.abs(v - old).max() <= tol:
            return anchors + v
    raise NumericsError("splitting iteration did not converge")


# -- hypotheses ---------------------------------------------------------------

_CERT_CACHE = {}


def cone_certificate(linear, eta=None):
    eta = default_eta(linear.c_u, linear.c_s) if eta is None else eta
    key = (linear.a_u.tobytes(), linear.a_s.tobytes(), linear.c_u, linear.c_s, eta)
    if key not in _CERT_CACHE:
        _CERT_CACHE[key] = certify_eps0(linear, eta)
    return _CERT_CACHE[key]


def alpha_hat(sys):
    return alpha_hat_map(sys.linear.c_u, sys.linear.c_s, sys.lam * sys.M)


def default_alpha(sys):
    a_hat = alpha_hat(sys)
    return 1.25 * a_hat if a_hat > 0 else 0.25


def require_hypotheses(sys, alpha):
    a_hat = alpha_hat(sys)
    if not alpha > a_hat:
        raise HypothesisError(f"alpha={alpha} must exceed alpha_hat={a_hat}")
    eps = sys.lam * sys.eps
    eps1 = sys.linear.eps1
    eps0 = cone_certificate(sys.linear).eps0
    if not eps < min(eps0, eps1):
        raise HypothesisError(f"eps={eps} must be below min(eps0={eps0:.6g}, eps1={eps1:.6g})")


def linear_orbit(a, z, window):
    """A^k z for k = -window..window."""
    z = np.asarray(z, dtype=float)
    a_inv = np.linalg.inv(a)
    fwd, back = [z], []
    for _ in range(window):
        fwd.append(a @ fwd[-1])
    cur = z
    for _ in range(window):
        cur = a_inv @ cur
        back.append(cur)
    return np.array(back[::-1] + fwd)


# -- conjugacy -----------------------------------------------------------------

def rho(sys, z, alpha=None, K=DEFAULT_K, tol=DEFAULT_TOL, initial=None, check=True):
    """rho(z): the g-orbit point with g^k(rho(z)) in N(A^k z, alpha), |k| <= K."""
    alpha = default_alpha(sys) if alpha is None else alpha
    if check:
        require_hypotheses(sys, alpha)
    anchors = linear_orbit(sys.A, z, K)
    theta = map_theta(sys.linear.c_u, sys.linear.c_s, sys.lam * sys.eps)
    orb = solve_shadow(ShadowProblem(sys, anchors, alpha, tol, forcing=np.zeros((2 * K, len(anchors[0]))),
                                     initial=initial, theta=theta))
    return ConjugacyPoint(np.asarray(z, float), orb.center, alpha, K, orb.residual, orb.truncation_bound, orb)


def sigma(sys, z, alpha=None, K=DEFAULT_K, tol=DEFAULT_TOL, check=True):
    """sigma(z): the A-orbit point with A^k(sigma(z)) in N(g^k z, alpha)."""
    alpha = default_alpha(sys) if alpha is None else alpha
    if check:
        require_hypotheses(sys, alpha)
    anchors = anchor_orbit(sys, z, K)
    forcing = sys.lam * sys.pert.value(anchors[:-1]) if sys.lam else np.zeros((2 * K, anchors.shape[1]))
    lin = sys.with_lambda(0.0)
    theta = map_theta(sys.linear.c_u, sys.linear.c_s, 0.0)
    orb = solve_shadow(ShadowProblem(lin, anchors, alpha, tol, forcing=forcing, theta=theta))
    return ConjugacyPoint(np.asarray(z, float), orb.center, alpha, K, orb.residual, orb.truncation_bound, orb)


def conjugacy_defect(sys, z, alpha=None, K=DEFAULT_K, tol=DEFAULT_TOL):
    """max-norm of rho(Az) - g(rho(z))."""
    z = np.asarray(z, dtype=float)
    left = rho(sys, sys.A @ z, alpha, K, tol).value
    right = sys(rho(sys, z, alpha, K, tol).value)
    return float(np.abs(left - right).max())


def alpha_independence(sys, z, alpha1, alpha2, K=DEFAULT_K, tol=DEFAULT_TOL):
    r1 = rho(sys, z, alpha1, K, tol).value
    r2 = rho(sys, z, alpha2, K, tol).value
    return float(np.abs(r1 - r2).max())


def periodic_from_loop(sys, loop_anchors, alpha=None, tol=1e-12, anchor_lam=0.0, max_iter=50):
    """Point x in int N(a_0, alpha) with g^k(x) = x for a closed covering loop.

    The anchors must close up under g_{anchor_lam}; the orbit of the result
    is checked to stay in the loop's boxes.
    """
    loop = np.atleast_2d(np.asarray(loop_anchors, dtype=float))
    k = len(loop)
    alpha = default_alpha(sys) if alpha is None else alpha
    anchor_sys = sys.with_lambda(anchor_lam)
    nxt = anchor_sys(loop)
    closure = np.abs(nxt - np.roll(loop, -1, axis=0)).max()
    if closure > 1e-9 * (1 + np.abs(loop).max()):
        raise HypothesisError(f"loop anchors do not close up (defect {closure:.3e})")
    if not check_covering(sys, loop[0], nxt[0], alpha, "analytic", lam_target=anchor_lam).passed:
        raise HypothesisError(f"alpha={alpha} too small for the loop coverings")

    def power(x):
        out = x
        for _ in range(k):
            out = sys(out)
        return out - x

    def power_jac(x):
        jac = np.eye(len(x))
        cur = x
        for _ in range(k):
            jac = sys.jacobian(cur) @ jac
            cur = sys(cur)
        return jac - np.eye(len(x))

    x = newton_solve(power, power_jac, loop[0], tol, max_iter)
    cur = x
    for i in range(k):
        d = float(sys.splitting.norm(cur - loop[i]))
        if d > alpha:
            raise ContainmentError(i, d, alpha)
        cur = sys(cur)
    return x
