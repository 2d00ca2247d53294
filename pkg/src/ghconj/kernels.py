"""Hot numeric kernels: built-in perturbation families and fixed-step RK4 flows.

Every function here is compiled with numba when available; otherwise the same
source runs on plain numpy (see ``_accel``). Arrays must be contiguous float64.

Perturbation parameters are packed as ``(kind, mat, amp, phase, cut)``:

* ``kind``  -- ZERO, SINE (``amp*sin(mat@z + phase)``), COSINE
  (``amp*cos(mat@z + phase)``) or QUADRATIC (``h_i = sum_j mat[i,j] z_j**2``)
* ``cut``   -- ``[active, delta, plateau]``; when active the family is
  composed with the radial retraction ``R(z) = t(|z|) z/|z|``.
"""
import numpy as np

from ._accel import njit

ZERO = 0
SINE = 1
COSINE = 2
QUADRATIC = 3


@njit(cache=True)
def profile_value(r, delta, plateau):
    """Cutoff profile t(r): identity below delta/2, cubic Hermite, then constant."""
    half = 0.5 * delta
    if r <= half:
        return r
    if r >= delta:
        return plateau
    tau = (r - half) / half
    h00 = 2.0 * tau**3 - 3.0 * tau**2 + 1.0
    h10 = tau**3 - 2.0 * tau**2 + tau
    h01 = -2.0 * tau**3 + 3.0 * tau**2
    return h00 * half + h10 * half + h01 * plateau


@njit(cache=True)
def profile_slope(r, delta, plateau):
    half = 0.5 * delta
    if r <= half:
        return 1.0
    if r >= delta:
        return 0.0
    tau = (r - half) / half
    d00 = 6.0 * tau**2 - 6.0 * tau
    d10 = 3.0 * tau**2 - 4.0 * tau + 1.0
    d01 = -6.0 * tau**2 + 6.0 * tau
    return (d00 * half + d10 * half + d01 * plateau) / half


@njit(cache=True)
def retract(z, delta, plateau):
    r = np.sqrt(np.dot(z, z))
    if r == 0.0:
        return z.copy()
    return (profile_value(r, delta, plateau) / r) * z


@njit(cache=True)
def retract_jacobian(z, delta, plateau):
    """DR(z) = (t(r)/r)(I - e e^T) + t'(r) e e^T with e = z/r."""
    n = z.shape[0]
    r = np.sqrt(np.dot(z, z))
    eye = np.eye(n)
    if r == 0.0:
        return eye
    e = z / r
    proj = np.outer(e, e)
    return (profile_value(r, delta, plateau) / r) * (eye - proj) + profile_slope(r, delta, plateau) * proj


@njit(cache=True)
def _base_value(kind, mat, amp, phase, z):
    if kind == SINE:
        return amp * np.sin(np.dot(mat, z) + phase)
    if kind == COSINE:
        return amp * np.cos(np.dot(mat, z) + phase)
    if kind == QUADRATIC:
        return np.dot(mat, z * z)
    return np.zeros(z.shape[0])


@njit(cache=True)
def _base_jacobian(kind, mat, amp, phase, z):
    n = z.shape[0]
    if kind == SINE:
        c = amp * np.cos(np.dot(mat, z) + phase)
        return c.reshape((n, 1)) * mat
    if kind == COSINE:
        c = -amp * np.sin(np.dot(mat, z) + phase)
        return c.reshape((n, 1)) * mat
    if kind == QUADRATIC:
        return 2.0 * mat * z.reshape((1, n))
    return np.zeros((n, n))


@njit(cache=True)
def pert_value(kind, mat, amp, phase, cut, z):
    if cut[0] != 0.0:
        return _base_value(kind, mat, amp, phase, retract(z, cut[1], cut[2]))
    return _base_value(kind, mat, amp, phase, z)


@njit(cache=True)
def pert_jacobian(kind, mat, amp, phase, cut, z):
    if cut[0] != 0.0:
        rz = retract(z, cut[1], cut[2])
        return np.dot(_base_jacobian(kind, mat, amp, phase, rz), retract_jacobian(z, cut[1], cut[2]))
    return _base_jacobian(kind, mat, amp, phase, z)


@njit(cache=True)
def pert_value_batch(kind, mat, amp, phase, cut, zs):
    out = np.empty_like(zs)
    for i in range(zs.shape[0]):
        out[i] = pert_value(kind, mat, amp, phase, cut, zs[i])
    return out


@njit(cache=True)
def pert_jacobian_batch(kind, mat, amp, phase, cut, zs):
    m, n = zs.shape
    out = np.empty((m, n, n))
    for i in range(m):
        out[i] = pert_jacobian(kind, mat, amp, phase, cut, zs[i])
    return out


@njit(cache=True)
def field(a, lam, kind, mat, amp, phase, cut, z):
    return np.dot(a, z) + lam * pert_value(kind, mat, amp, phase, cut, z)


@njit(cache=True)
def field_jacobian(a, lam, kind, mat, amp, phase, cut, z):
    return a + lam * pert_jacobian(kind, mat, amp, phase, cut, z)


@njit(cache=True)
def step_plan(duration, step):
    """Split ``duration`` into ``count`` steps of ``h`` plus a final step ``last``.

    The final step is shortened so the plan lands exactly on the end time;
    a remainder below 1e-9*step is merged into the last full step.
    """
    d = abs(duration)
    if d == 0.0:
        return 0, 0.0, 0.0
    sgn = 1.0 if duration > 0 else -1.0
    n = int(np.floor(d / step + 1e-9))
    rem = d - n * step
    if n == 0:
        return 0, 0.0, sgn * d
    if rem <= 1e-9 * step:
        return n - 1, sgn * step, sgn * (d - (n - 1) * step)
    return n, sgn * step, sgn * rem


@njit(cache=True)
def _rk4(a, lam, kind, mat, amp, phase, cut, z, h):
    k1 = field(a, lam, kind, mat, amp, phase, cut, z)
    k2 = field(a, lam, kind, mat, amp, phase, cut, z + 0.5 * h * k1)
    k3 = field(a, lam, kind, mat, amp, phase, cut, z + 0.5 * h * k2)
    k4 = field(a, lam, kind, mat, amp, phase, cut, z + h * k3)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _rk4_tangent(a, lam, kind, mat, amp, phase, cut, z, v, h):
    # RK4 on (z, V) with V' = Df(z) V; V is the exact derivative of the RK4 step.
    k1 = field(a, lam, kind, mat, amp, phase, cut, z)
    j1 = np.dot(field_jacobian(a, lam, kind, mat, amp, phase, cut, z), v)
    z2 = z + 0.5 * h * k1
    v2 = v + 0.5 * h * j1
    k2 = field(a, lam, kind, mat, amp, phase, cut, z2)
    j2 = np.dot(field_jacobian(a, lam, kind, mat, amp, phase, cut, z2), v2)
    z3 = z + 0.5 * h * k2
    v3 = v + 0.5 * h * j2
    k3 = field(a, lam, kind, mat, amp, phase, cut, z3)
    j3 = np.dot(field_jacobian(a, lam, kind, mat, amp, phase, cut, z3), v3)
    z4 = z + h * k3
    v4 = v + h * j3
    k4 = field(a, lam, kind, mat, amp, phase, cut, z4)
    j4 = np.dot(field_jacobian(a, lam, kind, mat, amp, phase, cut, z4), v4)
    return (z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
            v + (h / 6.0) * (j1 + 2.0 * j2 + 2.0 * j3 + j4))


@njit(cache=True)
def flow(a, lam, kind, mat, amp, phase, cut, z, duration, step):
    count, h, last = step_plan(duration, step)
    w = z.copy()
    for _ in range(count):
        w = _rk4(a, lam, kind, mat, amp, phase, cut, w, h)
    if last != 0.0:
        w = _rk4(a, lam, kind, mat, amp, phase, cut, w, last)
    return w


@njit(cache=True)
def flow_with_jacobian(a, lam, kind, mat, amp, phase, cut, z, duration, step):
    count, h, last = step_plan(duration, step)
    w = z.copy()
    v = np.eye(z.shape[0])
    for _ in range(count):
        w, v = _rk4_tangent(a, lam, kind, mat, amp, phase, cut, w, v, h)
    if last != 0.0:
        w, v = _rk4_tangent(a, lam, kind, mat, amp, phase, cut, w, v, last)
    return w, v


@njit(cache=True)
def flow_path(a, lam, kind, mat, amp, phase, cut, z, h, count):
    """States after 0, 1, ..., count RK4 steps of signed size h."""
    out = np.empty((count + 1, z.shape[0]))
    out[0] = z
    w = z.copy()
    for i in range(count):
        w = _rk4(a, lam, kind, mat, amp, phase, cut, w, h)
        out[i + 1] = w
    return out


@njit(cache=True)
def flow_batch(a, lam, kind, mat, amp, phase, cut, zs, duration, step):
    out = np.empty_like(zs)
    for i in range(zs.shape[0]):
        out[i] = flow(a, lam, kind, mat, amp, phase, cut, zs[i], duration, step)
    return out
