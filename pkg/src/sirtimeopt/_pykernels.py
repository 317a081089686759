"""Pure-Python kernels. Arithmetic mirrors ``_ckernels.pyx`` line for line."""
import math

ERADICATED = 0
HORIZON = 1
STEP_FAILURE = 2
NEGATIVE_STATE = 3


def cn_step(b, c1, c2, mu, s, i, dt, tol, max_iter):
    """One Crank-Nicolson step with frozen coefficients.

    Returns ``(ok, s_new, i_new)`` before any clamping. ``ok`` is False when
    neither Newton nor the damped fixed-point fallback met the residual tolerance.
    """
    h = 0.5 * dt
    fs0 = -b * s * i - c1 * s
    fi0 = b * s * i - (mu + c2) * i
    rs0 = s + h * fs0
    ri0 = i + h * fi0
    scale = tol * max(1.0, abs(s), abs(i))

    ys = s
    yi = i
    for _ in range(max_iter):
        inf = b * ys * yi
        gs = ys - rs0 - h * (-inf - c1 * ys)
        gi = yi - ri0 - h * (inf - (mu + c2) * yi)
        if abs(gs) <= scale and abs(gi) <= scale:
            return True, ys, yi
        # I - h * dF/dx
        j11 = 1.0 + h * (b * yi + c1)
        j12 = h * b * ys
        j21 = -h * b * yi
        j22 = 1.0 - h * (b * ys - mu - c2)
        det = j11 * j22 - j12 * j21
        if det == 0.0 or not math.isfinite(det):
            break
        ys -= (j22 * gs - j12 * gi) / det
        yi -= (j11 * gi - j21 * gs) / det
        if not (math.isfinite(ys) and math.isfinite(yi)):
            break

    ys = s
    yi = i
    for _ in range(50 * max_iter):
        inf = b * ys * yi
        ns = rs0 + h * (-inf - c1 * ys)
        ni = ri0 + h * (inf - (mu + c2) * yi)
        if abs(ns - ys) <= scale and abs(ni - yi) <= scale:
            return True, ns, ni
        ys = 0.5 * (ys + ns)
        yi = 0.5 * (yi + ni)
        if not (math.isfinite(ys) and math.isfinite(yi)):
            break
    return False, ys, yi


def _hermite_crossing(b, c2, mu, s0, i0, s1, i1, dt, eps):
    """Fraction of the step where the cubic Hermite interpolant of I hits eps."""
    d0 = dt * (b * s0 * i0 - (mu + c2) * i0)
    d1 = dt * (b * s1 * i1 - (mu + c2) * i1)
    lo = 0.0
    hi = 1.0
    for _ in range(60):
        th = 0.5 * (lo + hi)
        t2 = th * th
        t3 = t2 * th
        p = ((2.0 * t3 - 3.0 * t2 + 1.0) * i0 + (t3 - 2.0 * t2 + th) * d0
             + (-2.0 * t3 + 3.0 * t2) * i1 + (t3 - t2) * d1)
        if p > eps:
            lo = th
        else:
            hi = th
    return hi


def integrate(b0, c10, c20, b1, c11, c21, mu, s, i, k0, k_switch, k_max,
              dt, eps, tol, max_iter, s_out=None, i_out=None):
    """March from grid index ``k0`` until ``I <= eps`` or index ``k_max``.

    Steps starting at index ``k >= k_switch`` use the controlled coefficients
    ``(b1, c11, c21)``; earlier steps use ``(b0, c10, c20)``.

    Returns ``(status, k_end, s_end, i_end, t_cross, worst_negative)`` where
    ``t_cross`` is the interpolated threshold time (NaN unless eradicated) and
    ``worst_negative`` the most negative pre-clamp component seen (0 if none).
    """
    record = s_out is not None
    worst = 0.0
    k = k0
    while k < k_max:
        if k >= k_switch:
            b, c1, c2 = b1, c11, c21
        else:
            b, c1, c2 = b0, c10, c20
        ok, ns, ni = cn_step(b, c1, c2, mu, s, i, dt, tol, max_iter)
        if not ok:
            return STEP_FAILURE, k, s, i, math.nan, worst
        if ns < 0.0 or ni < 0.0:
            floor = -tol * max(1.0, abs(s), abs(i))
            worst = min(worst, ns, ni)
            if ns < floor or ni < floor:
                return NEGATIVE_STATE, k, s, i, math.nan, worst
            ns = max(ns, 0.0)
            ni = max(ni, 0.0)
        k += 1
        if record:
            s_out[k] = ns
            i_out[k] = ni
        if ni <= eps:
            th = _hermite_crossing(b, c2, mu, s, i, ns, ni, dt, eps)
            return ERADICATED, k, ns, ni, (k - 1 + th) * dt, worst
        s = ns
        i = ni
    return HORIZON, k, s, i, math.nan, worst


def adjoint(s_arr, i_arr, k_switch, b0, c10, c20, b1, c11, c21, mu, dt,
            ls_end, li_end, ls_out, li_out):
    """Backward Crank-Nicolson sweep of the linear costate system.

    The costate obeys ``dlam/dt = A(x, u) lam`` with
    ``A = [[bI + c1, -bI], [bS, mu + c2 - bS]]``; step ``k -> k+1`` uses the
    control applied on that forward step at both ends.
    """
    n = len(s_arr) - 1
    h = 0.5 * dt
    ls = ls_end
    li = li_end
    ls_out[n] = ls
    li_out[n] = li
    for k in range(n - 1, -1, -1):
        if k >= k_switch:
            b, c1, c2 = b1, c11, c21
        else:
            b, c1, c2 = b0, c10, c20
        sp = s_arr[k + 1]
        ip = i_arr[k + 1]
        # right side (I - h A_{k+1}) lam_{k+1}
        r1 = ls - h * ((b * ip + c1) * ls - b * ip * li)
        r2 = li - h * (b * sp * ls + (mu + c2 - b * sp) * li)
        sk = s_arr[k]
        ik = i_arr[k]
        m11 = 1.0 + h * (b * ik + c1)
        m12 = -h * b * ik
        m21 = h * b * sk
        m22 = 1.0 + h * (mu + c2 - b * sk)
        det = m11 * m22 - m12 * m21
        ls = (m22 * r1 - m12 * r2) / det
        li = (m11 * r2 - m21 * r1) / det
        ls_out[k] = ls
        li_out[k] = li
