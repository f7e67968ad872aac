"""Compiled field evaluation and event-driven Dormand-Prince integration.

The orbit loops of every scan spend almost all their time here, so the
fields and the stepping logic are written against flat float arrays and
compiled with numba.  The public modules build the parameter vectors
(see ``wilson3_params`` / ``wilson_nd_params``) and unpack the results.

Field modes:
    0  3-D Wilson homotopy field X_W^t on W, optionally with the two
       Kuperberg insertions acting by teleports,
    1  n-D Wilson field in (z, s, t) with (r, |x|, |y|) frozen,
    2  the constant field d/dz.
State vectors are always (z, angle, third) with angle 2pi-periodic.
"""

import math

import numpy as np
from numba import njit

from ._smooth import TWO_PI, arc_distance, peak, plateau, signed_angle, smooth_step, wrap_angle

MODE_W3 = 0
MODE_ND = 1
MODE_DZ = 2

# parameter layout for MODE_W3
P_COLLAR, P_WZ, P_WR, P_T = 0, 1, 2, 3
P_ARCS = 4  # two arcs: (center, half, half_prime) each
P_INS = 10  # two insertion blocks of INS_LEN
INS_LEN = 11
I_THETA, I_HALF, I_RA, I_RB, I_ZC, I_SLOPE, I_FACE, I_KAPPA, I_SHRINK, I_ST, I_TRANSIT = range(11)
W3_LEN = P_INS + 2 * INS_LEN

# parameter layout for MODE_ND
N_COLLAR, N_WZ, N_B, N_T, N_R, N_X, N_Y = range(7)
ND_LEN = 7

# event kinds (mirrors core.EventKind)
EV_ENTER, EV_EXIT, EV_TDOWN, EV_TUP, EV_BOTTOM, EV_TOP, EV_LATERAL = range(7)

# terminal codes
ST_EXITED, ST_BOTTOM, ST_HORIZON, ST_ERROR, ST_SECTIONS = range(5)

# diagnostics
D_OK, D_UNDERFLOW, D_LATERAL, D_STACK, D_MAXSTEPS, D_TRANSIT, D_EXCISED = range(7)

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
A71, A73, A74, A75, A76 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = 71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0
D1, D3, D4 = -12715105075.0 / 11282082432.0, 87487479700.0 / 32700410799.0, -10690763975.0 / 1880347072.0
D5, D6, D7 = 701980252875.0 / 199316789632.0, -1453857185.0 / 822651844.0, 69997945.0 / 29380423.0


# ---------------------------------------------------------------- profiles

@njit(cache=True)
def w3_f(z, r, collar):
    az = abs(z)
    fz = smooth_step(az / 0.25) * plateau(az, 1.75, 2.0 - collar)
    if z < 0.0:
        fz = -fz
    lo = 1.0 + collar
    fr = smooth_step((r - lo) / (1.25 - lo)) * plateau(r, 2.75, 3.0 - collar)
    return fz * fr


@njit(cache=True)
def w3_g(z, r, wz, wr):
    return 1.0 - peak(abs(z) - 1.0, wz) * peak(r - 2.0, wr)


@njit(cache=True)
def arc_bump(theta, center, half, half_prime):
    return plateau(arc_distance(theta, center), half, half_prime)


@njit(cache=True)
def alpha_w3(theta, P):
    a = 0.0
    for k in range(2):
        o = P_ARCS + 3 * k
        v = arc_bump(theta, P[o], P[o + 1], P[o + 2])
        if v > a:
            a = v
    return a


@njit(cache=True)
def ramp_phi(t):
    return smooth_step(t)


@njit(cache=True)
def ramp_psi(t):
    return smooth_step(t - 1.0)


@njit(cache=True)
def nd_box(r, nx, ny, collar):
    return plateau(abs(r), 1.0, 2.0 - collar) * plateau(nx, 0.5, 1.0 - collar) * plateau(ny, 0.5, 1.0 - collar)


@njit(cache=True)
def nd_fz(z, collar):
    az = abs(z)
    v = smooth_step(az / 0.5) * plateau(az, 1.5, 2.0 - collar)
    if z > 0.0:
        return -v
    return v


@njit(cache=True)
def field(mode, P, t_override, z, a, c):
    """Return (dz, dangle, dthird).  t_override < 0 means use the stored t."""
    if mode == MODE_W3:
        collar = P[P_COLLAR]
        f = w3_f(z, c, collar)
        g = w3_g(z, c, P[P_WZ], P[P_WR])
        t = P[P_T] if t_override < 0.0 else t_override
        if t > 0.0:
            al = alpha_w3(a, P)
            m = ramp_phi(t) * al + ramp_psi(t) * (1.0 - al)
            f = f * (1.0 - m)
            g = g + (1.0 - g) * m
        return g, f, 0.0
    elif mode == MODE_ND:
        collar = P[N_COLLAR]
        box = nd_box(P[N_R], P[N_X], P[N_Y], collar)
        f = nd_fz(z, collar) * box
        g = 1.0 - peak(abs(z) - 1.0, P[N_WZ]) * box
        t = P[N_T] if t_override < 0.0 else t_override
        lg = min(2.0 * t, 1.0)
        lf = max(2.0 * t - 1.0, 0.0)
        g = g + lg * (1.0 - g)
        f = f * (1.0 - lf)
        return g, f, P[N_B] * f
    return 1.0, 0.0, 0.0


# ------------------------------------------------------------ insertions

@njit(cache=True)
def face_radius(P, k, theta_loc, r):
    """Radius of e_k(theta_loc, r): r - kappa * (u**2 + (r-2)**2)."""
    o = P_INS + INS_LEN * k
    u = signed_angle(theta_loc - P[o + I_THETA]) / P[o + I_HALF]
    return r - P[o + I_KAPPA] * (u * u + (r - 2.0) * (r - 2.0))


@njit(cache=True)
def shrink_bump(P, k, theta, r):
    o = P_INS + INS_LEN * k
    u = signed_angle(theta - P[o + I_THETA]) / P[o + I_HALF]
    mid = 0.5 * (P[o + I_RA] + P[o + I_RB])
    hw = 0.5 * (P[o + I_RB] - P[o + I_RA])
    return peak(u, 1.0) * peak((r - mid) / hw, 1.0)


@njit(cache=True)
def shrink(P, k, theta, r):
    o = P_INS + INS_LEN * k
    return r - P[o + I_ST] * P[o + I_SHRINK] * shrink_bump(P, k, theta, r)


@njit(cache=True)
def shrink_inverse(P, k, theta, rs):
    o = P_INS + INS_LEN * k
    if P[o + I_ST] == 0.0:
        return rs
    lo = P[o + I_RA]
    hi = P[o + I_RB]
    # shrink is increasing in r and fixes the radial boundary of L_k
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if shrink(P, k, theta, mid) < rs:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


@njit(cache=True)
def face_inverse(P, k, z, R):
    """Invert e_k on the face plane.  Returns (ok, theta_loc, r_img)."""
    o = P_INS + INS_LEN * k
    dth = (z - P[o + I_ZC]) / P[o + I_SLOPE]
    if abs(dth) > P[o + I_HALF]:
        return False, 0.0, 0.0
    theta_loc = wrap_angle(P[o + I_THETA] + dth)
    u = dth / P[o + I_HALF]
    kap = P[o + I_KAPPA]
    q = R - 2.0 + kap * u * u
    disc = 1.0 - 4.0 * kap * q
    if disc < 0.0:
        return False, 0.0, 0.0
    d = 2.0 * q / (1.0 + math.sqrt(disc))
    r = 2.0 + d
    if r < P[o + I_RA] or r > P[o + I_RB]:
        return False, 0.0, 0.0
    return True, theta_loc, r


@njit(cache=True)
def face_point(P, k, theta_loc, r_img):
    o = P_INS + INS_LEN * k
    dth = signed_angle(theta_loc - P[o + I_THETA])
    return P[o + I_ZC] + P[o + I_SLOPE] * dth, P[o + I_FACE], face_radius(P, k, theta_loc, r_img)


# ------------------------------------------------------------- stepping

@njit(cache=True)
def _eval(mode, P, tov, sign, y, out):
    a, b, c = field(mode, P, tov, y[0], y[1], y[2])
    out[0] = sign * a
    out[1] = sign * b
    out[2] = sign * c


@njit(cache=True)
def dopri_step(mode, P, tov, sign, y, K, h, y1, tmp):
    """One DP5(4) step from y with K[0] = f(y) already filled.

    Fills K[1..6], y1; returns the scaled-free error vector norm pieces via tmp.
    """
    n = 3
    for i in range(n):
        tmp[i] = y[i] + h * A21 * K[0, i]
    _eval(mode, P, tov, sign, tmp, K[1])
    for i in range(n):
        tmp[i] = y[i] + h * (A31 * K[0, i] + A32 * K[1, i])
    _eval(mode, P, tov, sign, tmp, K[2])
    for i in range(n):
        tmp[i] = y[i] + h * (A41 * K[0, i] + A42 * K[1, i] + A43 * K[2, i])
    _eval(mode, P, tov, sign, tmp, K[3])
    for i in range(n):
        tmp[i] = y[i] + h * (A51 * K[0, i] + A52 * K[1, i] + A53 * K[2, i] + A54 * K[3, i])
    _eval(mode, P, tov, sign, tmp, K[4])
    for i in range(n):
        tmp[i] = y[i] + h * (A61 * K[0, i] + A62 * K[1, i] + A63 * K[2, i] + A64 * K[3, i] + A65 * K[4, i])
    _eval(mode, P, tov, sign, tmp, K[5])
    for i in range(n):
        y1[i] = y[i] + h * (A71 * K[0, i] + A73 * K[2, i] + A74 * K[3, i] + A75 * K[4, i] + A76 * K[5, i])
    _eval(mode, P, tov, sign, y1, K[6])
    for i in range(n):
        tmp[i] = h * (E1 * K[0, i] + E3 * K[2, i] + E4 * K[3, i] + E5 * K[4, i] + E6 * K[5, i] + E7 * K[6, i])


@njit(cache=True)
def error_norm(y, y1, errv, rtol, atol):
    acc = 0.0
    for i in range(3):
        sc = atol + rtol * max(abs(y[i]), abs(y1[i]))
        e = errv[i] / sc
        acc += e * e
    return math.sqrt(acc / 3.0)


@njit(cache=True)
def dense_coeffs(y, y1, K, h, R):
    for i in range(3):
        ydiff = y1[i] - y[i]
        bspl = h * K[0, i] - ydiff
        R[0, i] = y[i]
        R[1, i] = ydiff
        R[2, i] = bspl
        R[3, i] = ydiff - h * K[6, i] - bspl
        R[4, i] = h * (D1 * K[0, i] + D3 * K[2, i] + D4 * K[3, i] + D5 * K[4, i] + D6 * K[5, i] + D7 * K[6, i])


@njit(cache=True)
def dense_at(R, s, i):
    s1 = 1.0 - s
    return R[0, i] + s * (R[1, i] + s1 * (R[2, i] + s * (R[3, i] + s1 * R[4, i])))


@njit(cache=True)
def _face_value(kind, R, s, target):
    # kind 0: angle face, 1: z face
    if kind == 0:
        return signed_angle(dense_at(R, s, 1) - target)
    return dense_at(R, s, 0) - target


@njit(cache=True)
def locate(kind, R, target, f0):
    """Bisection on the dense interpolant for a sign change on (0, 1]."""
    lo = 0.0
    hi = 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = _face_value(kind, R, mid, target)
        if (fm < 0.0) == (f0 < 0.0) and fm != 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14:
            break
    return hi


@njit(cache=True)
def exact_state(mode, P, tov, sign, y, K, h, s, kind, target, event_tol, out, K2, tmp):
    """State at fraction s of the step, recomputed with a fresh RK step and
    polished by Newton corrections on the face function.  Returns the step
    length actually used."""
    hs = h * s
    for _ in range(3):
        for j in range(3):
            K2[0, j] = K[0, j]
        dopri_step(mode, P, tov, sign, y, K2, hs, out, tmp)
        if kind == 0:
            fv = signed_angle(out[1] - target)
            rate = K2[6, 1]
        else:
            fv = out[0] - target
            rate = K2[6, 0]
        if abs(fv) <= 0.01 * event_tol or rate == 0.0:
            break
        hs = hs - fv / rate
    return hs


@njit(cache=True, nogil=True)
def flow_fixed(mode, P, tov, y0, T, rtol, atol, max_arc, out):
    """Flow for time T without events.  Returns False if z leaves [-2, 2]."""
    y = y0.copy()
    K = np.empty((7, 3))
    y1 = np.empty(3)
    tmp = np.empty(3)
    _eval(mode, P, tov, 1.0, y, K[0])
    t = 0.0
    h = min(0.05, T)
    for _ in range(10_000_000):
        if t >= T:
            break
        if t + h > T:
            h = T - t
        speed = math.sqrt(K[0, 0] ** 2 + K[0, 1] ** 2 + K[0, 2] ** 2)
        if speed * h > max_arc:
            h = max_arc / speed
        dopri_step(mode, P, tov, 1.0, y, K, h, y1, tmp)
        err = error_norm(y, y1, tmp, rtol, atol)
        if err <= 1.0:
            t += h
            for i in range(3):
                y[i] = y1[i]
                K[0, i] = K[6, i]
            y[1] = wrap_angle(y[1])
            if y[0] > 2.0 or y[0] < -2.0:
                return False
        fac = 0.9 * (max(err, 1e-10)) ** (-0.2)
        h = h * min(5.0, max(0.2, fac))
    for i in range(3):
        out[i] = y[i]
    return True


@njit(cache=True, nogil=True)
def run(mode, P, y0, stack_k0, stack_th0, stack_r0, direction, horizon,
        rtol, atol, max_arc, event_tol, teleport, sec_angle, sec_stop,
        cap_events, cap_samples, sample_every, cap_sections, cap_stack, max_steps):
    """Integrate one orbit of the (quotient) flow.

    Insertion teleports act only in MODE_W3 with ``teleport`` set.  A section
    at angle ``sec_angle`` (nan disables it) is recorded on every crossing;
    with ``sec_stop`` > 0 the run stops after that many crossings.
    """
    sign = 1.0 if direction >= 0 else -1.0
    ev_kind = np.zeros(cap_events, np.int64)
    ev_idx = np.zeros(cap_events, np.int64)
    ev_t = np.zeros(cap_events)
    ev_y = np.zeros((cap_events, 3))
    sp_t = np.zeros(cap_samples)
    sp_y = np.zeros((cap_samples, 3))
    sc_t = np.zeros(cap_sections)
    sc_y = np.zeros((cap_sections, 3))
    sc_depth = np.zeros(cap_sections, np.int64)
    st_k = np.zeros(cap_stack, np.int64)
    st_th = np.zeros(cap_stack)
    st_r = np.zeros(cap_stack)
    depth = stack_k0.shape[0]
    for j in range(depth):
        st_k[j] = stack_k0[j]
        st_th[j] = stack_th0[j]
        st_r[j] = stack_r0[j]

    n_ev = 0
    n_sp = 0
    n_sc = 0
    n_sc_total = 0
    n_ev_total = 0
    max_depth = depth
    max_mismatch = 0.0
    status = ST_HORIZON
    diag = D_OK
    K = np.empty((7, 3))
    K2 = np.empty((7, 3))
    R = np.empty((5, 3))
    y = y0.copy()
    y[1] = wrap_angle(y[1])
    y1 = np.empty(3)
    ye = np.empty(3)
    tmp = np.empty(3)
    land = np.empty(3)
    fp = np.empty(3)
    t = 0.0
    h = 0.01
    _eval(mode, P, -1.0, sign, y, K[0])
    sp_t[0] = 0.0
    for i in range(3):
        sp_y[0, i] = y[i]
    n_sp = 1
    faces_on = teleport and mode == MODE_W3
    have_sec = not math.isnan(sec_angle)
    accepted = 0
    steps = 0
    while True:
        if t >= horizon:
            status = ST_HORIZON
            break
        if steps >= max_steps:
            status = ST_ERROR
            diag = D_MAXSTEPS
            break
        steps += 1
        if t + h > horizon:
            h = horizon - t
        speed = math.sqrt(K[0, 0] ** 2 + K[0, 1] ** 2 + K[0, 2] ** 2)
        if speed * h > max_arc:
            h = max_arc / speed
        if h < 1e-14 * max(1.0, t):
            status = ST_ERROR
            diag = D_UNDERFLOW
            break
        dopri_step(mode, P, -1.0, sign, y, K, h, y1, tmp)
        err = error_norm(y, y1, tmp, rtol, atol)
        if err > 1.0:
            h = h * max(0.2, 0.9 * err ** (-0.2))
            continue
        # accepted step: look for events on [t, t+h]
        dense_coeffs(y, y1, K, h, R)
        best_s = 2.0
        best_kind = -1  # 0 face, 1 top, 2 bottom
        best_k = -1
        # z faces
        if y1[0] >= 2.0 and y[0] < 2.0:
            s = locate(1, R, 2.0, y[0] - 2.0)
            if s < best_s:
                best_s = s
                best_kind = 1
        if y1[0] <= -2.0 and y[0] > -2.0:
            s = locate(1, R, -2.0, y[0] + 2.0)
            if s < best_s:
                best_s = s
                best_kind = 2
        if faces_on:
            for k in range(2):
                o = P_INS + INS_LEN * k
                c = P[o + I_FACE]
                f0 = signed_angle(y[1] - c)
                f1 = signed_angle(y1[1] - c)
                if f0 != 0.0 and abs(f0) < 1.5 and abs(f1) < 1.5 and (f1 == 0.0 or (f0 < 0.0) != (f1 < 0.0)):
                    s = locate(0, R, c, f0)
                    if s < best_s:
                        zc = dense_at(R, s, 0)
                        rc = dense_at(R, s, 2)
                        ok, thl, rimg = face_inverse(P, k, zc, rc)
                        if ok:
                            best_s = s
                            best_kind = 0
                            best_k = k
        # section crossings before the transition
        if have_sec:
            f0 = signed_angle(y[1] - sec_angle)
            f1 = signed_angle(y1[1] - sec_angle)
            if f0 != 0.0 and abs(f0) < 1.5 and abs(f1) < 1.5 and (f1 == 0.0 or (f0 < 0.0) != (f1 < 0.0)):
                s = locate(0, R, sec_angle, f0)
                if s <= best_s:
                    hs = exact_state(mode, P, -1.0, sign, y, K, h, s, 0, sec_angle, event_tol, ye, K2, tmp)
                    if n_sc < cap_sections:
                        sc_t[n_sc] = t + hs
                        sc_y[n_sc, 0] = ye[0]
                        sc_y[n_sc, 1] = wrap_angle(ye[1])
                        sc_y[n_sc, 2] = ye[2]
                        sc_depth[n_sc] = depth
                        n_sc += 1
                    n_sc_total += 1
                    if sec_stop > 0 and n_sc_total >= sec_stop:
                        t = t + hs
                        for i in range(3):
                            y[i] = ye[i]
                        y[1] = wrap_angle(y[1])
                        status = ST_SECTIONS
                        break
        if best_kind < 0:
            t += h
            for i in range(3):
                y[i] = y1[i]
                K[0, i] = K[6, i]
            y[1] = wrap_angle(y[1])
            accepted += 1
            if sample_every > 0 and accepted % sample_every == 0 and n_sp < cap_samples:
                sp_t[n_sp] = t
                for i in range(3):
                    sp_y[n_sp, i] = y[i]
                n_sp += 1
            h = h * min(5.0, max(0.2, 0.9 * max(err, 1e-10) ** (-0.2)))
            continue

        # transition event
        if best_kind == 0:
            c = P[P_INS + INS_LEN * best_k + I_FACE]
            hs = exact_state(mode, P, -1.0, sign, y, K, h, best_s, 0, c, event_tol, ye, K2, tmp)
        else:
            target = 2.0 if best_kind == 1 else -2.0
            hs = exact_state(mode, P, -1.0, sign, y, K, h, best_s, 1, target, event_tol, ye, K2, tmp)
        t = t + hs
        ye[1] = wrap_angle(ye[1])
        for i in range(3):
            y[i] = ye[i]

        if best_kind == 0:
            k = best_k
            ok, thl, rimg = face_inverse(P, k, ye[0], ye[2])
            if not ok:
                # the polished point slid off the face rim; treat as a miss
                _eval(mode, P, -1.0, sign, y, K[0])
                continue
            rl = shrink_inverse(P, k, thl, rimg)
            for kind in (EV_ENTER, EV_TDOWN):
                if n_ev < cap_events:
                    ev_kind[n_ev] = kind
                    ev_idx[n_ev] = k
                    ev_t[n_ev] = t
                    if kind == EV_ENTER:
                        ev_y[n_ev, 0] = ye[0]
                        ev_y[n_ev, 1] = ye[1]
                        ev_y[n_ev, 2] = ye[2]
                    else:
                        ev_y[n_ev, 0] = -2.0
                        ev_y[n_ev, 1] = thl
                        ev_y[n_ev, 2] = rl
                    n_ev += 1
                n_ev_total += 1
            if depth >= cap_stack:
                status = ST_ERROR
                diag = D_STACK
                break
            st_k[depth] = k
            st_th[depth] = thl
            st_r[depth] = rl
            depth += 1
            if depth > max_depth:
                max_depth = depth
            y[0] = -2.0
            y[1] = thl
            y[2] = rl
        elif best_kind == 1:
            y[0] = 2.0
            if faces_on and depth > 0:
                depth -= 1
                k = st_k[depth]
                o = P_INS + INS_LEN * k
                dth = signed_angle(y[1] - P[o + I_THETA])
                tol = 1e-6
                if abs(dth) > P[o + I_HALF] + tol or y[2] < P[o + I_RA] - tol or y[2] > P[o + I_RB] + tol:
                    if n_ev < cap_events:
                        ev_kind[n_ev] = EV_LATERAL
                        ev_idx[n_ev] = k
                        ev_t[n_ev] = t
                        for i in range(3):
                            ev_y[n_ev, i] = y[i]
                        n_ev += 1
                    n_ev_total += 1
                    status = ST_ERROR
                    diag = D_LATERAL
                    break
                mm = max(abs(signed_angle(y[1] - st_th[depth])), abs(y[2] - st_r[depth]))
                if mm > max_mismatch:
                    max_mismatch = mm
                # land from the stored chart coordinates: the exit must mirror
                # the entry, and re-deriving it from the integrated arrival
                # compounds errors across nesting levels
                rs = shrink(P, k, st_th[depth], st_r[depth])
                fz, fth, fr = face_point(P, k, st_th[depth], rs)
                fp[0] = fz
                fp[1] = fth
                fp[2] = fr
                ok = flow_fixed(MODE_W3, P, 0.0, fp, P[o + I_TRANSIT], 1e-12, 1e-12, max_arc, land)
                if not ok:
                    status = ST_ERROR
                    diag = D_TRANSIT
                    break
                for kind in (EV_EXIT, EV_TUP):
                    if n_ev < cap_events:
                        ev_kind[n_ev] = kind
                        ev_idx[n_ev] = k
                        ev_t[n_ev] = t
                        if kind == EV_EXIT:
                            for i in range(3):
                                ev_y[n_ev, i] = y[i]
                        else:
                            for i in range(3):
                                ev_y[n_ev, i] = land[i]
                        n_ev += 1
                    n_ev_total += 1
                for i in range(3):
                    y[i] = land[i]
            else:
                if n_ev < cap_events:
                    ev_kind[n_ev] = EV_TOP
                    ev_idx[n_ev] = -1
                    ev_t[n_ev] = t
                    for i in range(3):
                        ev_y[n_ev, i] = y[i]
                    n_ev += 1
                n_ev_total += 1
                status = ST_EXITED
                break
        else:
            y[0] = -2.0
            if n_ev < cap_events:
                ev_kind[n_ev] = EV_BOTTOM
                ev_idx[n_ev] = -1
                ev_t[n_ev] = t
                for i in range(3):
                    ev_y[n_ev, i] = y[i]
                n_ev += 1
            n_ev_total += 1
            status = ST_BOTTOM
            break
        _eval(mode, P, -1.0, sign, y, K[0])

    if n_sp < cap_samples:
        sp_t[n_sp] = t
        for i in range(3):
            sp_y[n_sp, i] = y[i]
        n_sp += 1
    counts = np.array([n_ev, n_ev_total, n_sp, n_sc, n_sc_total, depth, max_depth, steps, status, diag], np.int64)
    return (counts, max_mismatch, t, y, ev_kind[:n_ev], ev_idx[:n_ev], ev_t[:n_ev], ev_y[:n_ev],
            sp_t[:n_sp], sp_y[:n_sp], sc_t[:n_sc], sc_y[:n_sc], sc_depth[:n_sc],
            st_k[:depth], st_th[:depth], st_r[:depth])
