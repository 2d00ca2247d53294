"""Small dense linear algebra, Newton's method, RK4 and the matrix exponential."""
import math

import numpy as np


class NumericsError(RuntimeError):
    """A numerical routine failed to meet its contract."""


class ConvergenceError(NumericsError):
    pass


def _square(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def operator_norm_2(m, rtol=1e-12, max_iter=200000):
    """Largest singular value of a square matrix by power iteration on m^T m.

    The start vector is all ones; once the iteration settles it is restarted
    from a fixed perturbation to guard against a start orthogonal to the
    dominant singular vector.
    """
    m = _square(m)
    n = m.shape[0]
    b = m.T @ m
    scale = np.abs(b).max()
    if scale == 0.0:
        return 0.0
    b = b / scale
    kick = np.cos(np.arange(1, n + 1) * 1.2345)

    def settle(v):
        v = v / np.linalg.norm(v)
        lam = 0.0
        for _ in range(max_iter):
            w = b @ v
            lam_new = float(v @ w)
            res = np.linalg.norm(w - lam_new * v)
            nw = np.linalg.norm(w)
            if nw == 0.0:
                return 0.0, v
            if res <= rtol * max(abs(lam_new), 1e-300) or (
                    lam_new > 0 and abs(lam_new - lam) < 1e-14 * lam_new and res <= 1e-7 * lam_new):
                return lam_new, w / nw
            lam, v = lam_new, w / nw
        raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")

    lam1, v1 = settle(np.ones(n))
    lam2, _ = settle(v1 + 1e-3 * kick)
    return math.sqrt(max(lam1, lam2) * scale)


def sym_eig_extremes(m, atol=1e-12):
    """(lambda_min, lambda_max) of a symmetric matrix.

    Positive definiteness is decided by ``lambda_min > 0``.
    """
    m = _square(m)
    if np.abs(m - m.T).max() > atol * max(1.0, np.abs(m).max()):
        raise ValueError("matrix is not symmetric")
    w = np.linalg.eigvalsh(0.5 * (m + m.T))
    return float(w[0]), float(w[-1])


def spectral_radius(m):
    m = _square(m)
    return float(np.abs(np.linalg.eigvals(m)).max())


def newton_solve(residual, jacobian, x0, tol, max_iter=50, max_halvings=30):
    """Damped Newton iteration until ``max|residual(x)| <= tol``.

    A full step that fails to reduce the residual is halved up to
    ``max_halvings`` times.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.array(x0, dtype=float, copy=True)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)

    def res(v):
        return np.atleast_1d(np.asarray(residual(v[0] if scalar else v), dtype=float))

    def jac(v):
        return np.atleast_2d(np.asarray(jacobian(v[0] if scalar else v), dtype=float))

    r = res(x)
    err = np.abs(r).max()
    for _ in range(max_iter):
        if err <= tol:
            return x[0] if scalar else x
        try:
            dx = np.linalg.solve(jac(x), -r)
        except np.linalg.LinAlgError as exc:
            raise NumericsError(f"singular linearization: {exc}") from None
        step = 1.0
        for _ in range(max_halvings + 1):
            x_new = x + step * dx
            r_new = res(x_new)
            err_new = np.abs(r_new).max()
            if err_new < err or not np.isfinite(err):
                break
            step *= 0.5
        else:
            raise ConvergenceError(f"damping exhausted at residual {err:.3e}")
        x, r, err = x_new, r_new, err_new
    if err <= tol:
        return x[0] if scalar else x
    raise ConvergenceError(f"no convergence in {max_iter} iterations (residual {err:.3e})")


def rk4_plan(duration, step):
    """Uniform steps of ``step`` with the last one shortened to land on the end."""
    d = abs(duration)
    if d == 0.0:
        return []
    sgn = math.copysign(1.0, duration)
    n = int(math.floor(d / step + 1e-9))
    rem = d - n * step
    if n == 0:
        return [sgn * d]
    if rem <= 1e-9 * step:
        return [sgn * step] * (n - 1) + [sgn * (d - (n - 1) * step)]
    return [sgn * step] * n + [sgn * rem]


def integrate(field, z, t0, t1, step):
    """Classical fixed-step RK4 for an autonomous field, forward or backward."""
    if step <= 0:
        raise ValueError("step must be positive")
    w = np.array(z, dtype=float, copy=True)
    for h in rk4_plan(t1 - t0, step):
        k1 = field(w)
        k2 = field(w + 0.5 * h * k1)
        k3 = field(w + 0.5 * h * k2)
        k4 = field(w + h * k3)
        w = w + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(w)):
            raise NumericsError("non-finite state during integration")
    return w


def matrix_exp(a, t=1.0):
    """e^{a t} by scaling and squaring with a degree-18 Taylor polynomial."""
    a = _square(a) * t
    n = a.shape[0]
    norm = np.abs(a).sum(axis=0).max()
    s = 0 if norm <= 0.5 else int(math.ceil(math.log2(norm / 0.5)))
    b = a / 2.0**s
    term = np.eye(n)
    out = np.eye(n)
    for k in range(1, 19):
        term = term @ b / k
        out = out + term
    for _ in range(s):
        out = out @ out
    if not np.all(np.isfinite(out)):
        raise NumericsError("matrix exponential overflowed")
    return out
