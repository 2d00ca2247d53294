"""Hölder regularity of the conjugacy: exponents, the two-term estimate, empirical fits."""
import math
from dataclasses import dataclass

import numpy as np

from .numerics import operator_norm_2, spectral_radius
from .shadowing import DEFAULT_K, DEFAULT_TOL, default_alpha, rho
from .systems import HypothesisError


def thetas(c_u, c_s, eps):
    """(c_u - 2 eps, 1/(c_s + 2 eps)); both must exceed 1."""
    th_u = c_u - 2.0 * eps
    if not th_u > 1:
        raise HypothesisError(f"c_u - 2 eps = {th_u} is not > 1; Hölder bounds do not apply")
    if not c_s + 2.0 * eps < 1:
        raise HypothesisError(f"c_s + 2 eps = {c_s + 2.0 * eps} is not < 1; Hölder bounds do not apply")
    return th_u, 1.0 / (c_s + 2.0 * eps)


def lipschitz_L(linear):
    """Lipschitz constant of A and A^-1 in the max-of-blocks norm."""
    return max(operator_norm_2(linear.a_u), operator_norm_2(linear.a_s),
               operator_norm_2(np.linalg.inv(linear.a_u)), operator_norm_2(np.linalg.inv(linear.a_s)))


def gamma(theta, L):
    if not theta > 1:
        raise HypothesisError("theta must exceed 1")
    if not L > 1:
        raise HypothesisError("L must exceed 1 for the exponent to be defined")
    return math.log(theta) / math.log(L)


def gamma_improved(theta_u, theta_s, linear):
    """min(ln theta_u / ln|A_u|, ln theta_s / ln|A_s^-1|)."""
    nu = operator_norm_2(linear.a_u)
    ns = operator_norm_2(np.linalg.inv(linear.a_s))
    if nu <= 1 or ns <= 1:
        raise HypothesisError("|A_u| and |A_s^-1| must exceed 1")
    return min(math.log(theta_u) / math.log(nu), math.log(theta_s) / math.log(ns))


def bv_exponent(a_u, a_s):
    """min(-ln r(A_s)/ln r(A_s^-1), -ln r(A_u^-1)/ln r(A_u)) from spectral radii."""
    a_u = np.atleast_2d(np.asarray(a_u, dtype=float))
    a_s = np.atleast_2d(np.asarray(a_s, dtype=float))
    r = [spectral_radius(a_s), spectral_radius(np.linalg.inv(a_s)),
         spectral_radius(np.linalg.inv(a_u)), spectral_radius(a_u)]
    if any(abs(math.log(x)) < 1e-15 for x in r):
        raise HypothesisError("spectral radius 1 encountered: degenerate hyperbolicity")
    return min(-math.log(r[0]) / math.log(r[1]), -math.log(r[2]) / math.log(r[3]))


@dataclass(frozen=True)
class HolderEstimate:
    theta_u: float
    theta_s: float
    theta: float
    lipschitz_L: float
    gamma: float
    gamma_improved: float
    bv_alpha0: float
    C1: float
    C2: float

    def as_dict(self):
        return dict(self.__dict__)


def holder_estimate(sys, alpha=None):
    alpha = default_alpha(sys) if alpha is None else alpha
    lin = sys.linear
    th_u, th_s = thetas(lin.c_u, lin.c_s, sys.lam * sys.eps)
    th = min(th_u, th_s)
    L = lipschitz_L(lin)
    return HolderEstimate(th_u, th_s, th, L, gamma(th, L), gamma_improved(th_u, th_s, lin),
                          bv_exponent(lin.a_u, lin.a_s), 2.0 * alpha, L / th)


def check_basic_estimate(sys, pairs, k_values, alpha=None, K=DEFAULT_K, tol=DEFAULT_TOL):
    """Slack of |rho(z1) - rho(z2)| <= 2 alpha/theta^k + (L/theta)^k |z1 - z2| per pair and k."""
    alpha = default_alpha(sys) if alpha is None else alpha
    est = holder_estimate(sys, alpha)
    norm = sys.splitting.norm
    rows = []
    for z1, z2 in pairs:
        dz = float(norm(np.asarray(z1, float) - np.asarray(z2, float)))
        dr = float(norm(rho(sys, z1, alpha, K, tol).value - rho(sys, z2, alpha, K, tol).value))
        for k in k_values:
            bound = 2.0 * alpha / est.theta**k + est.C2**k * dz
            rows.append((dz, dr, int(k), bound - dr))
    slacks = [r[3] for r in rows]
    return {"pass": bool(min(slacks) >= 0), "min_slack": float(min(slacks)), "rows": rows,
            "theta": est.theta, "L": est.lipschitz_L}


@dataclass(frozen=True)
class EmpiricalHolderFit:
    distances: np.ndarray
    image_distances: np.ndarray
    slope: float
    intercept: float
    residual: float
    gamma: float
    ratio_max: float
    ratio_bound: float

    @property
    def slope_ok(self):
        return self.slope >= self.gamma - 0.05

    @property
    def ratio_ok(self):
        return self.ratio_max <= self.ratio_bound


def holder_pairs(split, bases, band, count, seed=0):
    """Seeded pairs (z1, z2) with |z1 - z2| log-uniform in the band, sorted by distance."""
    d_min, d_max = band
    if not 0 < d_min < d_max < 1:
        raise ValueError("band must satisfy 0 < d_min < d_max < 1")
    rng = np.random.default_rng(seed)
    bases = np.atleast_2d(np.asarray(bases, dtype=float))
    z1 = bases[rng.integers(0, len(bases), size=count)]
    dirs = rng.standard_normal((count, split.n))
    dirs /= split.norm(dirs)[:, None]
    dist = np.exp(rng.uniform(math.log(d_min), math.log(d_max), size=count))
    z2 = z1 + dist[:, None] * dirs
    order = np.argsort(dist, kind="stable")
    return z1[order], z2[order]


def empirical_holder(sys, bases, band=(1e-4, 1e-1), count=500, alpha=None, K=DEFAULT_K,
                     tol=DEFAULT_TOL, seed=0):
    """Least-squares slope of log |rho(z1) - rho(z2)| against log |z1 - z2|."""
    alpha = default_alpha(sys) if alpha is None else alpha
    est = holder_estimate(sys, alpha)
    z1, z2 = holder_pairs(sys.splitting, bases, band, count, seed)
    norm = sys.splitting.norm
    r1 = np.array([rho(sys, p, alpha, K, tol).value for p in z1])
    r2 = np.array([rho(sys, p, alpha, K, tol).value for p in z2])
    d = norm(z1 - z2)
    dr = norm(r1 - r2)
    x, y = np.log(d), np.log(dr)
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    resid = float(math.sqrt(res[0] / len(x))) if len(res) else 0.0
    ratio = float(np.max(dr / d**est.gamma))
    return EmpiricalHolderFit(d, dr, float(slope), float(intercept), resid, est.gamma, ratio, est.C1 + est.C2)
