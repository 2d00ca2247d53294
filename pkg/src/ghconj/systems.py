"""Hyperbolic linear parts, bounded perturbations and the families A + lambda*h.

Points z = (x, y) live in R^u x R^s and are measured in the max-of-blocks
norm ``max(|x|_2, |y|_2)``; derivative bounds are Euclidean operator norms.
"""
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import kernels
from .numerics import (ConvergenceError, NumericsError, newton_solve,
                       operator_norm_2, sym_eig_extremes)

_FAMILY_KIND = {"zero": kernels.ZERO, "sine": kernels.SINE,
                "cosine": kernels.COSINE, "quadratic": kernels.QUADRATIC}


class HypothesisError(ValueError):
    """A hypothesis of the conjugacy theorems does not hold."""


@dataclass(frozen=True)
class Splitting:
    u: int
    s: int

    def __post_init__(self):
        if self.u < 1 or self.s < 1:
            raise ValueError(f"degenerate splitting u={self.u}, s={self.s}: both blocks required")

    @property
    def n(self):
        return self.u + self.s

    def x(self, z):
        return np.asarray(z)[..., :self.u]

    def y(self, z):
        return np.asarray(z)[..., self.u:]

    def norm(self, z):
        """max(|x|_2, |y|_2), vectorized over leading axes."""
        z = np.asarray(z, dtype=float)
        return np.maximum(np.linalg.norm(z[..., :self.u], axis=-1),
                          np.linalg.norm(z[..., self.u:], axis=-1))


def block_diag(a_u, a_s):
    u, s = a_u.shape[0], a_s.shape[0]
    out = np.zeros((u + s, u + s))
    out[:u, :u] = a_u
    out[u:, u:] = a_s
    return out


def _as_block(m, name):
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def derive_map_constants(a_u, a_s):
    """(c_u, c_s, eps1) for the hyperbolic map diag(a_u, a_s).

    c_u = 1/|a_u^-1|, c_s = |a_s|, eps1 = 1/|A^-1| with A^-1 measured
    blockwise (the same value in the Euclidean and max-of-blocks norms).
    """
    a_u = _as_block(a_u, "a_u")
    a_s = _as_block(a_s, "a_s")
    try:
        inv_u = np.linalg.inv(a_u)
        inv_s = np.linalg.inv(a_s)
    except np.linalg.LinAlgError:
        raise HypothesisError("blocks of A must be invertible") from None
    n_inv_u = operator_norm_2(inv_u)
    n_inv_s = operator_norm_2(inv_s)
    c_u = 1.0 / n_inv_u
    c_s = operator_norm_2(a_s)
    if c_u <= 1.0 or c_s >= 1.0:
        raise HypothesisError(f"not hyperbolic: c_u={c_u:.6g} must exceed 1, c_s={c_s:.6g} must be below 1")
    return c_u, c_s, 1.0 / max(n_inv_u, n_inv_s)


def derive_field_constants(a_u, a_s):
    """(c_u, c_s) with (x, A_u x) >= c_u|x|^2 and (y, A_s y) <= -c_s|y|^2."""
    a_u = _as_block(a_u, "a_u")
    a_s = _as_block(a_s, "a_s")
    c_u = sym_eig_extremes(0.5 * (a_u + a_u.T))[0]
    c_s = -sym_eig_extremes(0.5 * (a_s + a_s.T))[1]
    if c_u <= 0 or c_s <= 0:
        raise HypothesisError(f"field not hyperbolic in the quadratic sense: c_u={c_u:.6g}, c_s={c_s:.6g}")
    return c_u, c_s


@dataclass(frozen=True, eq=False)
class HyperbolicLinearMap:
    a_u: np.ndarray
    a_s: np.ndarray
    c_u: float = None
    c_s: float = None

    def __post_init__(self):
        a_u = _as_block(self.a_u, "a_u")
        a_s = _as_block(self.a_s, "a_s")
        object.__setattr__(self, "a_u", a_u)
        object.__setattr__(self, "a_s", a_s)
        c_u, c_s, eps1 = derive_map_constants(a_u, a_s)
        # declared constants must be implied by the matrices
        if self.c_u is not None and self.c_u > c_u * (1 + 1e-12):
            raise HypothesisError(f"declared c_u={self.c_u} exceeds 1/|a_u^-1| = {c_u}")
        if self.c_s is not None and self.c_s < c_s * (1 - 1e-12):
            raise HypothesisError(f"declared c_s={self.c_s} is below |a_s| = {c_s}")
        if self.c_u is None:
            object.__setattr__(self, "c_u", c_u)
        if self.c_s is None:
            object.__setattr__(self, "c_s", c_s)
        if self.c_u <= 1.0 or not 0.0 < self.c_s < 1.0:
            raise HypothesisError("declared constants violate c_u > 1 > c_s > 0")
        object.__setattr__(self, "_eps1", eps1)

    @property
    def splitting(self):
        return Splitting(self.a_u.shape[0], self.a_s.shape[0])

    @cached_property
    def matrix(self):
        return block_diag(self.a_u, self.a_s)

    @cached_property
    def inverse(self):
        return block_diag(np.linalg.inv(self.a_u), np.linalg.inv(self.a_s))

    @property
    def eps1(self):
        return self._eps1

    @cached_property
    def norm(self):
        return max(operator_norm_2(self.a_u), operator_norm_2(self.a_s))


@dataclass(frozen=True, eq=False)
class HyperbolicLinearField:
    a_u: np.ndarray
    a_s: np.ndarray
    c_u: float = None
    c_s: float = None

    def __post_init__(self):
        a_u = _as_block(self.a_u, "a_u")
        a_s = _as_block(self.a_s, "a_s")
        object.__setattr__(self, "a_u", a_u)
        object.__setattr__(self, "a_s", a_s)
        c_u, c_s = derive_field_constants(a_u, a_s)
        if self.c_u is not None and self.c_u > c_u * (1 + 1e-12):
            raise HypothesisError(f"declared c_u={self.c_u} exceeds lambda_min of sym(a_u) = {c_u}")
        if self.c_s is not None and self.c_s > c_s * (1 + 1e-12):
            raise HypothesisError(f"declared c_s={self.c_s} exceeds -lambda_max of sym(a_s) = {c_s}")
        if self.c_u is None:
            object.__setattr__(self, "c_u", c_u)
        if self.c_s is None:
            object.__setattr__(self, "c_s", c_s)

    @property
    def splitting(self):
        return Splitting(self.a_u.shape[0], self.a_s.shape[0])

    @cached_property
    def matrix(self):
        return block_diag(self.a_u, self.a_s)

    @cached_property
    def norm(self):
        return max(operator_norm_2(self.a_u), operator_norm_2(self.a_s))


def _fd_audit(value, jacobian, dim, seed=1234, points=8, h=1e-5, tol=1e-6, radius=3.0):
    rng = np.random.default_rng(seed)
    for z in rng.uniform(-radius, radius, size=(points, dim)):
        jac = jacobian(z)
        fd = np.empty((dim, dim))
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = h
            fd[:, j] = (value(z + e) - value(z - e)) / (2 * h)
        err = np.abs(fd - jac).max()
        if err > tol:
            raise ValueError(f"derivative inconsistent with value at {z}: max error {err:.3e}")


@dataclass(frozen=True, eq=False)
class Perturbation:
    """Bounded perturbation h with declared bounds |h| <= M, |Dh| <= eps.

    Built-in families carry packed kernel parameters; ``custom`` wraps user
    procedures (the caller vouches for the bounds).
    """
    dim: int
    family: str
    m_bound: float
    eps_bound: float
    params: dict = field(default_factory=dict)
    mat: np.ndarray = None
    amp: np.ndarray = None
    phase: np.ndarray = None
    cut: np.ndarray = None
    value_fn: object = None
    jacobian_fn: object = None
    base: "Perturbation" = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, dim):
        return cls._builtin("zero", dim, np.zeros((dim, dim)), np.zeros(dim), np.zeros(dim), None, None, True)

    @classmethod
    def sine(cls, amplitude, matrix, phase=None, M=None, eps=None, splitting=None, certify=True):
        """h_i(z) = amplitude_i * sin((matrix @ z)_i + phase_i)."""
        return cls._periodic("sine", amplitude, matrix, phase, M, eps, splitting, certify)

    @classmethod
    def cosine(cls, amplitude, matrix, phase=None, M=None, eps=None, splitting=None, certify=True):
        return cls._periodic("cosine", amplitude, matrix, phase, M, eps, splitting, certify)

    @classmethod
    def quadratic(cls, coeffs):
        """h_i(z) = sum_j coeffs[i, j] z_j^2; unbounded, only for local use."""
        mat = np.atleast_2d(np.asarray(coeffs, dtype=float))
        n = mat.shape[0]
        return cls._builtin("quadratic", n, mat, np.zeros(n), np.zeros(n), np.inf, np.inf, True)

    @classmethod
    def custom(cls, dim, value, jacobian, M, eps):
        p = cls(dim=dim, family="custom", m_bound=float(M), eps_bound=float(eps),
                value_fn=value, jacobian_fn=jacobian)
        _fd_audit(p.value, p.jacobian, dim)
        return p

    @classmethod
    def _periodic(cls, family, amplitude, matrix, phase, M, eps, splitting, certify):
        mat = np.atleast_2d(np.asarray(matrix, dtype=float))
        n = mat.shape[0]
        amp = np.broadcast_to(np.asarray(amplitude, dtype=float), (n,)).copy()
        ph = np.zeros(n) if phase is None else np.broadcast_to(np.asarray(phase, dtype=float), (n,)).copy()
        if splitting is None:
            if n % 2:
                raise ValueError("odd dimension: pass the splitting to certify M")
            splitting = Splitting(n // 2, n // 2)
        # |sin|,|cos| <= 1 componentwise; Dh = diag(amp*trig) @ mat
        m_an = max(np.linalg.norm(amp[:splitting.u]), np.linalg.norm(amp[splitting.u:]))
        eps_an = np.abs(amp).max() * operator_norm_2(mat) if np.any(amp) else 0.0
        return cls._builtin(family, n, mat, amp, ph, M, eps, certify, m_an, eps_an,
                            {"u": splitting.u})

    @classmethod
    def _builtin(cls, family, n, mat, amp, ph, M, eps, certify, m_an=0.0, eps_an=0.0, extra=None):
        if family == "quadratic":
            m_an = eps_an = np.inf
        M = m_an if M is None else float(M)
        eps = eps_an if eps is None else float(eps)
        if certify and (M < m_an * (1 - 1e-12) or eps < eps_an * (1 - 1e-12)):
            raise HypothesisError(
                f"declared bounds (M={M}, eps={eps}) below certified ({m_an:.17g}, {eps_an:.17g}) for {family}")
        params = {"matrix": mat.tolist(), "amplitude": amp.tolist(), "phase": ph.tolist()}
        params.update(extra or {})
        return cls(dim=n, family=family, m_bound=M, eps_bound=eps, params=params,
                   mat=np.ascontiguousarray(mat), amp=np.ascontiguousarray(amp),
                   phase=np.ascontiguousarray(ph), cut=np.zeros(3))

    def with_cutoff(self, delta, plateau, M, eps):
        """h o R for the radial retraction with the given profile."""
        if self.kind is None:
            raise ValueError("cutoff is only available for built-in families")
        return replace(self, family="cutoff", m_bound=float(M), eps_bound=float(eps),
                       cut=np.array([1.0, float(delta), float(plateau)]), base=self,
                       params={"base": self.family, **self.params, "delta": float(delta),
                               "plateau": float(plateau)})

    # -- evaluation ---------------------------------------------------------
    @property
    def kind(self):
        if self.family == "custom":
            return None
        return _FAMILY_KIND[self.base.family if self.family == "cutoff" else self.family]

    @property
    def packed(self):
        return self.kind, self.mat, self.amp, self.phase, self.cut

    def value(self, z):
        z = np.ascontiguousarray(z, dtype=float)
        if self.kind is None:
            if z.ndim == 1:
                return np.asarray(self.value_fn(z), dtype=float)
            return np.array([self.value_fn(p) for p in z])
        if z.ndim == 1:
            return kernels.pert_value(*self.packed, z)
        return kernels.pert_value_batch(*self.packed, z)

    def jacobian(self, z):
        z = np.ascontiguousarray(z, dtype=float)
        if self.kind is None:
            if z.ndim == 1:
                return np.asarray(self.jacobian_fn(z), dtype=float)
            return np.array([self.jacobian_fn(p) for p in z])
        if z.ndim == 1:
            return kernels.pert_jacobian(*self.packed, z)
        return kernels.pert_jacobian_batch(*self.packed, z)

    __call__ = value

    def _offset_trig(self, base, v):
        # sin/cos of (mat a + phase) + mat v by angle addition: smooth in v even
        # when |a| is so large that a + v would round away the offset
        arg0 = base @ self.mat.T + self.phase
        d = v @ self.mat.T
        s0, c0, sd, cd = np.sin(arg0), np.cos(arg0), np.sin(d), np.cos(d)
        sin_ = s0 * cd + c0 * sd
        cos_ = c0 * cd - s0 * sd
        return (sin_, cos_) if self.family == "sine" else (cos_, -sin_)

    def value_offset(self, base, v):
        """h(base + v) evaluated without forming base + v where possible."""
        if self.family in ("sine", "cosine"):
            return self.amp * self._offset_trig(base, v)[0]
        return self.value(np.asarray(base) + np.asarray(v))

    def jacobian_offset(self, base, v):
        if self.family in ("sine", "cosine"):
            c = self.amp * self._offset_trig(base, v)[1]
            return c[..., :, None] * self.mat
        return self.jacobian(np.asarray(base) + np.asarray(v))

    def deriv_bound_on_ball(self, radius):
        """Analytic bound of |Dh|_2 on the Euclidean ball of the given radius."""
        if self.family == "quadratic":
            return 2.0 * operator_norm_2(self.mat) * radius
        return self.eps_bound

    def scaled(self, factor):
        """The family with amplitude multiplied by ``factor`` (bounds scale too)."""
        if self.family not in ("sine", "cosine", "zero"):
            raise ValueError("scaling defined for periodic families only")
        return replace(self, amp=self.amp * factor, m_bound=self.m_bound * abs(factor),
                       eps_bound=self.eps_bound * abs(factor),
                       params={**self.params, "amplitude": (self.amp * factor).tolist()})


def audit_perturbation(pert, box_radius, samples, seed=0, splitting=None):
    """Empirical max of |h|_max and |Dh|_2 over uniform samples in a box.

    Returns a dict with ``pass`` and, on failure, a ``witness`` point.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    split = splitting or Splitting(pert.params.get("u", pert.dim // 2), pert.dim - pert.params.get("u", pert.dim // 2))
    rng = np.random.default_rng(seed)
    zs = rng.uniform(-box_radius, box_radius, size=(samples, pert.dim))
    vals = split.norm(pert.value(zs))
    jacs = pert.jacobian(zs)
    dnorms = np.linalg.norm(jacs, ord=2, axis=(1, 2))
    i_m, i_e = int(np.argmax(vals)), int(np.argmax(dnorms))
    ok_m = vals[i_m] <= pert.m_bound + 1e-12
    ok_e = dnorms[i_e] <= pert.eps_bound + 1e-12
    report = {"pass": bool(ok_m and ok_e), "max_value": float(vals[i_m]),
              "max_derivative": float(dnorms[i_e]), "samples": samples}
    if not ok_m:
        report["witness"] = zs[i_m].tolist()
    elif not ok_e:
        report["witness"] = zs[i_e].tolist()
    return report


@dataclass(frozen=True, eq=False)
class MapSystem:
    """g_lambda = A + lambda*h."""
    linear: HyperbolicLinearMap
    pert: Perturbation
    lam: float = 1.0

    def __post_init__(self):
        if self.pert.dim != self.linear.splitting.n:
            raise ValueError(f"perturbation dimension {self.pert.dim} != {self.linear.splitting.n}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")

    @property
    def splitting(self):
        return self.linear.splitting

    @property
    def A(self):
        return self.linear.matrix

    @property
    def M(self):
        return self.pert.m_bound

    @property
    def eps(self):
        return self.pert.eps_bound

    def with_lambda(self, lam):
        return replace(self, lam=float(lam))

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        out = z @ self.A.T
        if self.lam:
            out = out + self.lam * self.pert.value(z)
        return out

    def jacobian(self, z):
        z = np.asarray(z, dtype=float)
        if not self.lam:
            return np.broadcast_to(self.A, z.shape[:-1] + self.A.shape).copy()
        return self.A + self.lam * self.pert.jacobian(z)

    def inverse_lipschitz(self):
        """(1/|A^-1| - lambda*eps)^-1, Euclidean norms."""
        margin = self.linear.eps1 - self.lam * self.eps
        return np.inf if margin <= 0 else 1.0 / margin


def eval_map(sys, z):
    return sys(z)


def eval_map_jacobian(sys, z):
    return sys.jacobian(z)


def invert_map(sys, y, tol=1e-12, max_iter=50):
    """z with g_lambda(z) = y.

    Solved as v + lambda A^-1 h(A^-1 y + v) = 0 for the displacement v from
    A^-1 y, which keeps the residual meaningful for points of large norm.
    """
    y = np.asarray(y, dtype=float)
    a_inv = sys.linear.inverse
    base = a_inv @ y
    if not sys.lam:
        return base
    if sys.lam * sys.eps >= sys.linear.eps1:
        raise HypothesisError("eps >= eps1: g_lambda need not be invertible")
    lam, pert, n = sys.lam, sys.pert, y.shape[0]
    eye = np.eye(n)
    try:
        v = newton_solve(lambda v: v + lam * (a_inv @ pert.value_offset(base, v)),
                         lambda v: eye + lam * (a_inv @ pert.jacobian_offset(base, v)),
                         np.zeros(n), tol, max_iter)
    except NumericsError as exc:
        raise NumericsError(f"inversion of g failed at y={y.tolist()}: {exc}") from None
    # Lipschitz inverse bound: |z - A^-1 y| <= Lip * |g(A^-1 y) - y| = Lip * lam |h(A^-1 y)|
    bound = sys.inverse_lipschitz() * lam * np.linalg.norm(pert.value(base))
    if np.linalg.norm(v) > bound * (1 + 1e-9) + 10 * tol:
        raise NumericsError("inverse violates the Lipschitz bound of g^-1")
    return base + v


@dataclass(frozen=True, eq=False)
class OdeSystem:
    """z' = f^lambda(z) = Az + lambda*h(z), integrated by fixed-step RK4."""
    linear: HyperbolicLinearField
    pert: Perturbation
    lam: float = 1.0
    step: float = 0.01

    def __post_init__(self):
        if self.pert.dim != self.linear.splitting.n:
            raise ValueError(f"perturbation dimension {self.pert.dim} != {self.linear.splitting.n}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.step <= 0:
            raise ValueError("integration step must be positive")

    @property
    def splitting(self):
        return self.linear.splitting

    @property
    def A(self):
        return self.linear.matrix

    @property
    def M(self):
        return self.pert.m_bound

    @property
    def eps(self):
        return self.pert.eps_bound

    def with_lambda(self, lam):
        return replace(self, lam=float(lam))

    def field(self, z):
        z = np.asarray(z, dtype=float)
        out = z @ self.A.T
        if self.lam:
            out = out + self.lam * self.pert.value(z)
        return out

    def field_jacobian(self, z):
        return self.A + self.lam * self.pert.jacobian(np.asarray(z, dtype=float))

    @property
    def _kargs(self):
        return (np.ascontiguousarray(self.A), float(self.lam)) + self.pert.packed

    def flow(self, z, t):
        """phi^lambda(t, z)."""
        from .numerics import integrate
        z = np.ascontiguousarray(z, dtype=float)
        if self.pert.kind is None:
            return integrate(self.field, z, 0.0, t, self.step)
        out = kernels.flow(*self._kargs, z, float(t), self.step)
        if not np.all(np.isfinite(out)):
            raise NumericsError("non-finite state during integration")
        return out

    def flow_with_jacobian(self, z, t):
        z = np.ascontiguousarray(z, dtype=float)
        if self.pert.kind is None:
            return self._flow_jac_generic(z, t)
        w, v = kernels.flow_with_jacobian(*self._kargs, z, float(t), self.step)
        if not np.all(np.isfinite(w)):
            raise NumericsError("non-finite state during integration")
        return w, v

    def _flow_jac_generic(self, z, t):
        from .numerics import integrate
        n = z.shape[0]

        def aug(s):
            w, v = s[:n], s[n:].reshape(n, n)
            return np.concatenate([self.field(w), (self.field_jacobian(w) @ v).ravel()])

        s = integrate(aug, np.concatenate([z, np.eye(n).ravel()]), 0.0, t, self.step)
        return s[:n], s[n:].reshape(n, n)

    def path(self, z, h, count):
        """States after 0..count RK4 steps of signed size h."""
        z = np.ascontiguousarray(z, dtype=float)
        if self.pert.kind is None:
            out = [z]
            for _ in range(count):
                out.append(self.flow(out[-1], h))
            return np.array(out)
        return kernels.flow_path(*self._kargs, z, float(h), int(count))
