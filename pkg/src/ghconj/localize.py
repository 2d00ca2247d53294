"""Local-to-global reduction: a radial cutoff turns a local perturbation into a global one."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .numerics import operator_norm_2
from .systems import HypothesisError, MapSystem

PROFILE_SAMPLES = 2048


@dataclass(frozen=True)
class CutoffProfile:
    """t(r) = r up to delta/2, cubic Hermite to the plateau value w at delta, then w."""
    delta: float
    plateau: float = None

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.plateau is None:
            object.__setattr__(self, "plateau", 0.75 * self.delta)
        if not self.plateau < self.delta:
            raise ValueError("plateau must be below delta")
        r = self.delta * (0.5 + 0.5 * np.arange(1, PROFILE_SAMPLES + 1) / (PROFILE_SAMPLES + 1))
        slopes = np.array([self.slope(x) for x in r])
        if not (np.all(slopes > 0) and np.all(slopes < 1)):
            bad = r[np.argmax((slopes <= 0) | (slopes >= 1))]
            raise ValueError(f"profile slope leaves (0, 1) at r={bad:.6g}")

    def value(self, r):
        return kernels.profile_value(float(r), self.delta, self.plateau)

    def slope(self, r):
        return kernels.profile_slope(float(r), self.delta, self.plateau)


def radial_retraction(profile, z):
    """R(z) = t(|z|) z/|z| in the Euclidean norm; rows are mapped independently."""
    z = np.ascontiguousarray(z, dtype=float)
    if z.ndim == 1:
        return kernels.retract(z, profile.delta, profile.plateau)
    return np.array([kernels.retract(p, profile.delta, profile.plateau) for p in z])


def retraction_derivative_bound(profile, samples=PROFILE_SAMPLES):
    """sup over radii of max(t(r)/r, t'(r)), the Euclidean norm of DR."""
    r = profile.delta * 2.0 * np.arange(1, samples + 1) / samples
    bound = max(max(profile.value(x) / x, profile.slope(x)) for x in r)
    if bound > 1 + 1e-9:
        raise ValueError(f"|DR| reaches {bound}; invalid profile")
    return float(bound)


@dataclass(frozen=True, eq=False)
class GlobalizedSystem:
    original: MapSystem
    profile: CutoffProfile
    system: MapSystem
    m_hat: float
    eps_hat: float
    dr_bound: float
    audit: dict

    @property
    def guarantee_radius(self):
        """phi-hat agrees with phi on the closed ball of this radius."""
        return 0.5 * self.profile.delta


def _audit_local(pert, eps, delta, samples, seed):
    n = pert.dim
    origin = np.zeros(n)
    if np.abs(pert.value(origin)).max() > 1e-14 or np.abs(pert.jacobian(origin)).max() > 1e-14:
        raise HypothesisError("local perturbation must satisfy h(0) = 0 and Dh(0) = 0")
    analytic = pert.deriv_bound_on_ball(delta)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((samples, n))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    radii = delta * rng.uniform(0, 1, size=samples) ** (1.0 / n)
    pts = np.vstack([dirs * radii[:, None], dirs * delta])
    norms = np.linalg.norm(pert.jacobian(pts), ord=2, axis=(1, 2))
    i = int(np.argmax(norms))
    audit = {"analytic_bound": float(analytic), "sampled_max": float(norms[i]), "samples": len(pts)}
    if norms[i] > eps * (1 + 1e-12):
        audit["witness"] = pts[i].tolist()
        raise HypothesisError(f"|Dh| reaches {norms[i]:.6g} > eps={eps} on the delta-ball at {pts[i].tolist()}")
    if np.isfinite(analytic) and analytic > eps * (1 + 1e-12):
        raise HypothesisError(f"analytic |Dh| bound {analytic:.6g} on the delta-ball exceeds eps={eps}")
    return audit


def globalize(local_map, eps, delta, plateau=None, samples=1000, seed=0):
    """Replace h by h o R so the global smallness hypotheses hold.

    Returns the bookkeeping record and the modified map, whose conjugacy
    conjugates the original map on the ball of radius delta/2.
    """
    profile = CutoffProfile(delta, plateau)
    pert = local_map.pert
    if pert.family == "zero":
        audit = {"analytic_bound": 0.0, "sampled_max": 0.0, "samples": 0}
        return GlobalizedSystem(local_map, profile, local_map, 0.0, 0.0, 1.0, audit), local_map
    audit = _audit_local(pert, eps, delta, samples, seed)
    dr = retraction_derivative_bound(profile)
    m_hat = eps * delta
    eps_hat = eps * dr
    system = MapSystem(local_map.linear, pert.with_cutoff(delta, profile.plateau, m_hat, eps_hat), local_map.lam)
    return GlobalizedSystem(local_map, profile, system, m_hat, eps_hat, dr, audit), system


def cutoff_bounds(base, profile):
    """Analytic (M, eps) for base o R: the range of R lies in the ball of radius w."""
    w = profile.plateau
    if base.family == "quadratic":
        m_an = operator_norm_2(base.mat) * w * w
    elif base.family == "zero":
        m_an = 0.0
    else:
        m_an = base.m_bound
    return m_an, base.deriv_bound_on_ball(w) * retraction_derivative_bound(profile)


def certified_cutoff(base, delta, plateau, M, eps):
    """base o R with declared bounds checked against the analytic ones."""
    profile = CutoffProfile(delta, plateau)
    m_an, eps_an = cutoff_bounds(base, profile)
    if M < m_an * (1 - 1e-12) or eps < eps_an * (1 - 1e-12):
        raise HypothesisError(f"declared cutoff bounds (M={M}, eps={eps}) below certified ({m_an:.17g}, {eps_an:.17g})")
    return base.with_cutoff(delta, profile.plateau, M, eps)
