"""Cone conditions for the quadratic form Q(x, y) = |x|^2 - |y|^2."""
from dataclasses import dataclass

import numpy as np

from .numerics import operator_norm_2, sym_eig_extremes
from .systems import HypothesisError, Splitting

EPS0_MARGIN = 1e-6
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
GL_NODES = 0.5 * (_GL_NODES + 1.0)
GL_WEIGHTS = 0.5 * _GL_WEIGHTS


@dataclass(frozen=True)
class QuadraticForm:
    splitting: Splitting

    @property
    def matrix(self):
        u, s = self.splitting.u, self.splitting.s
        return np.diag(np.concatenate([np.ones(u), -np.ones(s)]))

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        x, y = z[..., :self.splitting.u], z[..., self.splitting.u:]
        return (x * x).sum(axis=-1) - (y * y).sum(axis=-1)


@dataclass(frozen=True)
class ConeCertificate:
    eta: float
    eps0: float
    lambda_min_plus: float
    lambda_min_minus: float
    norm_a: float
    audit_trials: int


def eta_max(c_u, c_s):
    if c_u <= 1.0 or not 0.0 < c_s < 1.0:
        raise HypothesisError(f"not hyperbolic: c_u={c_u}, c_s={c_s}")
    return min(c_u**2 - 1.0, 1.0 - c_s**2)


def default_eta(c_u, c_s):
    return 0.1 * eta_max(c_u, c_s)


def _cone_matrices(d, q, eta):
    base = d.T @ q @ d
    return base - (1.0 + eta) * q, base - (1.0 - eta) * q


def certify_eps0(linear, eta, audit_trials=200, seed=0):
    """Perturbation size eps0 keeping (A+C)^T Q (A+C) - (1 +- eta) Q positive definite.

    Uses |(A+C)^T Q (A+C) - A^T Q A| <= 2|A||C| + |C|^2 and |Q| = 1, then
    audits the result against random C with |C| = eps0.
    """
    top = eta_max(linear.c_u, linear.c_s)
    if not 0.0 < eta < top:
        raise ValueError(f"eta must lie in (0, {top:.6g}), got {eta}")
    a = linear.matrix
    q = QuadraticForm(linear.splitting).matrix
    plus, minus = _cone_matrices(a, q, eta)
    lp = sym_eig_extremes(plus)[0]
    lm = sym_eig_extremes(minus)[0]
    if lp <= 0 or lm <= 0:
        raise HypothesisError(f"A^T Q A - (1+-eta) Q not positive definite (eta={eta})")
    norm_a = operator_norm_2(a)
    room = (1.0 - EPS0_MARGIN) * min(lp, lm)
    eps0 = -norm_a + np.sqrt(norm_a**2 + room)
    rng = np.random.default_rng(seed)
    n = a.shape[0]
    for _ in range(audit_trials):
        c = rng.standard_normal((n, n))
        c *= eps0 / operator_norm_2(c)
        for m in _cone_matrices(a + c, q, eta):
            if sym_eig_extremes(m)[0] <= 0:
                raise RuntimeError("eps0 audit failed: certified bound is wrong")
    return ConeCertificate(eta=eta, eps0=float(eps0), lambda_min_plus=lp, lambda_min_minus=lm,
                           norm_a=norm_a, audit_trials=audit_trials)


def mean_jacobian(pert, z1, z2):
    """C(z1, z2) = int_0^1 Dh(t(z1 - z2) + z2) dt by 16-point Gauss-Legendre."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    pts = z2 + GL_NODES[:, None] * (z1 - z2)
    return np.tensordot(GL_WEIGHTS, pert.jacobian(pts), axes=1)


@dataclass(frozen=True, eq=False)
class ConePairSample:
    z1: np.ndarray
    z2: np.ndarray
    c: np.ndarray
    d: np.ndarray


def pair_sample(sys, z1, z2):
    c = mean_jacobian(sys.pert, z1, z2)
    return ConePairSample(np.asarray(z1, float), np.asarray(z2, float), c, sys.A + sys.lam * c)


def sample_pairs(n, count, radius, seed=0, center=None, spread=None):
    """Seeded pairs; z1 uniform in a box, z2 = z1 + uniform offset of size spread."""
    rng = np.random.default_rng(seed)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    z1 = c + rng.uniform(-radius, radius, size=(count, n))
    if spread is None:
        z2 = c + rng.uniform(-radius, radius, size=(count, n))
    else:
        z2 = z1 + rng.uniform(-spread, spread, size=(count, n))
    return z1, z2


def _check_distinct(z1, z2):
    if np.any(np.all(z1 == z2, axis=-1)):
        raise ValueError("cone checks need z1 != z2 for every pair")


def check_cone_map(sys, eta, z1, z2):
    """Q(g(z1) - g(z2)) > (1 +- eta) Q(z1 - z2) on every pair.

    Slacks are divided by |z1 - z2|_2^2 so they compare across scales.
    """
    z1 = np.atleast_2d(np.asarray(z1, dtype=float))
    z2 = np.atleast_2d(np.asarray(z2, dtype=float))
    _check_distinct(z1, z2)
    q = QuadraticForm(sys.splitting)
    dz = z1 - z2
    qg = q(sys(z1) - sys(z2))
    qz = q(dz)
    slack = np.minimum(qg - (1 + eta) * qz, qg - (1 - eta) * qz) / (dz * dz).sum(axis=1)
    i = int(np.argmin(slack))
    report = {"pass": bool(slack[i] > 0), "min_slack": float(slack[i]), "pairs": len(z1), "eta": eta}
    if slack[i] <= 0:
        report["witness"] = [z1[i].tolist(), z2[i].tolist()]
    return report


def eps0_ode(field, eta):
    """Largest eps keeping D^T Q + Q D - eta|Q| definite: min(c_u, c_s) - eta/2."""
    if eta <= 0 or eta >= 2 * min(field.c_u, field.c_s):
        raise ValueError("eta must lie in (0, 2 min(c_u, c_s))")
    return min(field.c_u, field.c_s) - 0.5 * eta


def check_cone_ode(sys, eta, z1, z2, seed=0, directions=1000):
    """2 (f(z1) - f(z2))^T Q (z1 - z2) >= +-eta Q(z1 - z2), strictly, on every pair.

    Also samples v^T (A^T Q + Q A) v >= 2 min(c_u, c_s)|v|^2.
    """
    z1 = np.atleast_2d(np.asarray(z1, dtype=float))
    z2 = np.atleast_2d(np.asarray(z2, dtype=float))
    _check_distinct(z1, z2)
    qf = QuadraticForm(sys.splitting)
    q = qf.matrix
    dz = z1 - z2
    df = sys.field(z1) - sys.field(z2)
    dq = 2.0 * np.einsum("ij,jk,ik->i", df, q, dz)
    slack = (dq - eta * np.abs(qf(dz))) / (dz * dz).sum(axis=1)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((directions, dz.shape[1]))
    sym = sys.A.T @ q + q @ sys.A
    lin = np.einsum("ij,jk,ik->i", v, sym, v) - 2 * min(sys.linear.c_u, sys.linear.c_s) * (v * v).sum(axis=1)
    i = int(np.argmin(slack))
    ok = bool(slack[i] > 0 and lin.min() >= -1e-12)
    report = {"pass": ok, "min_slack": float(slack[i]), "linear_min_slack": float(lin.min()),
              "pairs": len(z1), "eta": eta}
    if slack[i] <= 0:
        report["witness"] = [z1[i].tolist(), z2[i].tolist()]
    return report
