"""Time-stepping kernels for the swing-equation simulator.

Two interchangeable implementations of the same math: numba-compiled
explicit loops (fast path) and a vectorised pure-numpy fallback.  The
module-level names ``run_swing`` / ``solve_network`` point at the active
backend's version; the numpy versions stay importable under ``*_numpy``
names so the agreement tests and the benchmark can compare both in one
process.

Data layout
-----------
Machine state is three arrays (rotor angle ``delta`` in rad, speed
deviation ``w`` in pu, governor output ``g`` in pu).  The algebraic
network is pre-reduced to the machine buses: ``zmm`` is the bus-impedance
submatrix among machine buses, ``zrow_p``/``zcol_p``/``zpp`` couple the
probing bus, and ``zsave``/``zsave_p`` map injections to *all* bus
voltages for recording.  ``mslot[i]`` is machine i's position in the
machine-bus list.  The probing injection is constant power, resolved by a
scalar fixed point each evaluation; the probe series is held
zero-order over each step.

Status codes from ``run_swing``: 0 ok, 1 speed deviation beyond the
small-signal limit, 2 non-finite state.
"""

import numpy as np

from .backend import using_numba

_FP_TOL = 1e-14
_FP_MAX_ITER = 80


# ---------------------------------------------------------------------------
# pure-numpy path
# ---------------------------------------------------------------------------

def _net_numpy(delta, p_probe, e_mag, ym, agg, mslot,
               zmm, zrow_p, zcol_p, zpp):
    """Solve the algebraic network at one machine state.

    Returns (pe, imb, ip): electrical power per machine, machine-bus
    current injections, probe current.
    """
    emf = e_mag * np.exp(1j * delta)
    imb = agg @ (emf * ym)
    vmb = zmm @ imb
    ip = 0j
    if p_probe != 0.0:
        vp = zrow_p @ imb
        x = 0j
        for _ in range(_FP_MAX_ITER):
            xn = p_probe / (vp + zpp * x).conjugate()
            if abs(xn - x) <= _FP_TOL:
                x = xn
                break
            x = xn
        ip = x
        vmb = vmb + zcol_p * ip
    pe = (emf * ((emf - vmb[mslot]) * ym).conjugate()).real
    return pe, imb, ip


def solve_network_numpy(delta, p_probe, e_mag, ym, mslot,
                        zmm, zrow_p, zcol_p, zpp, zsave, zsave_p):
    """Network solution plus full bus voltages at one machine state."""
    n_mb = zmm.shape[0]
    agg = _agg_matrix(n_mb, mslot)
    pe, imb, ip = _net_numpy(delta, p_probe, e_mag, ym, agg, mslot,
                             zmm, zrow_p, zcol_p, zpp)
    v_full = zsave @ imb + zsave_p * ip
    return pe, v_full, ip


def _agg_matrix(n_mb, mslot):
    agg = np.zeros((n_mb, mslot.size), dtype=np.complex128)
    agg[mslot, np.arange(mslot.size)] = 1.0
    return agg


def run_swing_numpy(delta0, w0, g0, probe, dt, omega_syn, tg,
                    e_mag, ym, mslot, m, d, kdr, pref,
                    zmm, zrow_p, zcol_p, zpp, zsave, zsave_p, w_max):
    """RK4 integration of the classical multi-machine model (numpy)."""
    n_steps = probe.size
    n_mach = delta0.size
    n_bus = zsave.shape[0]
    agg = _agg_matrix(zmm.shape[0], mslot)

    delta_hist = np.zeros((n_steps, n_mach))
    w_hist = np.zeros((n_steps, n_mach))
    v_hist = np.zeros((n_steps, n_bus), dtype=np.complex128)

    delta = delta0.copy()
    w = w0.copy()
    g = g0.copy()

    def derivs(dl, wv, gv, pk):
        pe, imb, ip = _net_numpy(dl, pk, e_mag, ym, agg, mslot,
                                 zmm, zrow_p, zcol_p, zpp)
        return (omega_syn * wv,
                (pref + gv - pe - d * wv) / m,
                (-kdr * wv - gv) / tg, imb, ip)

    # the t=0 record is the pre-probe equilibrium snapshot
    _, imb, ip = _net_numpy(delta, 0.0, e_mag, ym, agg, mslot,
                            zmm, zrow_p, zcol_p, zpp)
    v_hist[0] = zsave @ imb + zsave_p * ip
    delta_hist[0] = delta
    w_hist[0] = w

    for k in range(n_steps - 1):
        pk = probe[k]
        kd1, kw1, kg1, _, _ = derivs(delta, w, g, pk)
        kd2, kw2, kg2, _, _ = derivs(delta + 0.5 * dt * kd1,
                                     w + 0.5 * dt * kw1,
                                     g + 0.5 * dt * kg1, pk)
        kd3, kw3, kg3, _, _ = derivs(delta + 0.5 * dt * kd2,
                                     w + 0.5 * dt * kw2,
                                     g + 0.5 * dt * kg2, pk)
        kd4, kw4, kg4, _, _ = derivs(delta + dt * kd3,
                                     w + dt * kw3,
                                     g + dt * kg3, pk)
        delta = delta + (dt / 6.0) * (kd1 + 2.0 * kd2 + 2.0 * kd3 + kd4)
        w = w + (dt / 6.0) * (kw1 + 2.0 * kw2 + 2.0 * kw3 + kw4)
        g = g + (dt / 6.0) * (kg1 + 2.0 * kg2 + 2.0 * kg3 + kg4)

        if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(w))):
            bad = int(np.argmax(~(np.isfinite(delta) & np.isfinite(w))))
            return 2, k + 1, bad, delta_hist, w_hist, v_hist
        worst = int(np.argmax(np.abs(w)))
        if abs(w[worst]) > w_max:
            return 1, k + 1, worst, delta_hist, w_hist, v_hist

        _, imb, ip = _net_numpy(delta, probe[k + 1], e_mag, ym, agg, mslot,
                                zmm, zrow_p, zcol_p, zpp)
        v_hist[k + 1] = zsave @ imb + zsave_p * ip
        delta_hist[k + 1] = delta
        w_hist[k + 1] = w

    return 0, -1, -1, delta_hist, w_hist, v_hist


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if using_numba():
    from numba import njit

    @njit(cache=True)
    def _net_nb(delta, p_probe, e_mag, ym, mslot,
                zmm, zrow_p, zcol_p, zpp, imb, vmb, pe):
        n_mach = delta.size
        n_mb = imb.size
        for b in range(n_mb):
            imb[b] = 0j
        for i in range(n_mach):
            emf = e_mag[i] * (np.cos(delta[i]) + 1j * np.sin(delta[i]))
            imb[mslot[i]] += emf * ym[i]
        for a in range(n_mb):
            acc = 0j
            for b in range(n_mb):
                acc += zmm[a, b] * imb[b]
            vmb[a] = acc
        ip = 0j
        if p_probe != 0.0:
            vp = 0j
            for b in range(n_mb):
                vp += zrow_p[b] * imb[b]
            x = 0j
            for _ in range(_FP_MAX_ITER):
                xn = p_probe / np.conj(vp + zpp * x)
                if abs(xn - x) <= _FP_TOL:
                    x = xn
                    break
                x = xn
            ip = x
            for a in range(n_mb):
                vmb[a] += zcol_p[a] * ip
        for i in range(n_mach):
            emf = e_mag[i] * (np.cos(delta[i]) + 1j * np.sin(delta[i]))
            s = emf * np.conj((emf - vmb[mslot[i]]) * ym[i])
            pe[i] = s.real
        return ip

    @njit(cache=True)
    def _derivs_nb(delta, w, g, p_probe, omega_syn, tg,
                   e_mag, ym, mslot, m, d, kdr, pref,
                   zmm, zrow_p, zcol_p, zpp,
                   dd, dw, dg, imb, vmb, pe):
        ip = _net_nb(delta, p_probe, e_mag, ym, mslot,
                     zmm, zrow_p, zcol_p, zpp, imb, vmb, pe)
        for i in range(delta.size):
            dd[i] = omega_syn * w[i]
            dw[i] = (pref[i] + g[i] - pe[i] - d[i] * w[i]) / m[i]
            dg[i] = (-kdr[i] * w[i] - g[i]) / tg
        return ip

    @njit(cache=True)
    def _run_swing_nb(delta0, w0, g0, probe, dt, omega_syn, tg,
                      e_mag, ym, mslot, m, d, kdr, pref,
                      zmm, zrow_p, zcol_p, zpp, zsave, zsave_p, w_max):
        n_steps = probe.size
        n_mach = delta0.size
        n_mb = zmm.shape[0]
        n_bus = zsave.shape[0]

        delta_hist = np.zeros((n_steps, n_mach))
        w_hist = np.zeros((n_steps, n_mach))
        v_hist = np.zeros((n_steps, n_bus), dtype=np.complex128)

        delta = delta0.copy()
        w = w0.copy()
        g = g0.copy()
        ts_d = np.zeros(n_mach)
        ts_w = np.zeros(n_mach)
        ts_g = np.zeros(n_mach)
        kd = np.zeros((4, n_mach))
        kw = np.zeros((4, n_mach))
        kg = np.zeros((4, n_mach))
        imb = np.zeros(n_mb, dtype=np.complex128)
        vmb = np.zeros(n_mb, dtype=np.complex128)
        pe = np.zeros(n_mach)

        ip = _net_nb(delta, 0.0, e_mag, ym, mslot,
                     zmm, zrow_p, zcol_p, zpp, imb, vmb, pe)
        for b in range(n_bus):
            acc = 0j
            for a in range(n_mb):
                acc += zsave[b, a] * imb[a]
            v_hist[0, b] = acc + zsave_p[b] * ip
        for i in range(n_mach):
            delta_hist[0, i] = delta[i]
            w_hist[0, i] = w[i]

        half = 0.5 * dt
        for k in range(n_steps - 1):
            pk = probe[k]
            _derivs_nb(delta, w, g, pk, omega_syn, tg, e_mag, ym, mslot,
                       m, d, kdr, pref, zmm, zrow_p, zcol_p, zpp,
                       kd[0], kw[0], kg[0], imb, vmb, pe)
            for i in range(n_mach):
                ts_d[i] = delta[i] + half * kd[0, i]
                ts_w[i] = w[i] + half * kw[0, i]
                ts_g[i] = g[i] + half * kg[0, i]
            _derivs_nb(ts_d, ts_w, ts_g, pk, omega_syn, tg, e_mag, ym, mslot,
                       m, d, kdr, pref, zmm, zrow_p, zcol_p, zpp,
                       kd[1], kw[1], kg[1], imb, vmb, pe)
            for i in range(n_mach):
                ts_d[i] = delta[i] + half * kd[1, i]
                ts_w[i] = w[i] + half * kw[1, i]
                ts_g[i] = g[i] + half * kg[1, i]
            _derivs_nb(ts_d, ts_w, ts_g, pk, omega_syn, tg, e_mag, ym, mslot,
                       m, d, kdr, pref, zmm, zrow_p, zcol_p, zpp,
                       kd[2], kw[2], kg[2], imb, vmb, pe)
            for i in range(n_mach):
                ts_d[i] = delta[i] + dt * kd[2, i]
                ts_w[i] = w[i] + dt * kw[2, i]
                ts_g[i] = g[i] + dt * kg[2, i]
            _derivs_nb(ts_d, ts_w, ts_g, pk, omega_syn, tg, e_mag, ym, mslot,
                       m, d, kdr, pref, zmm, zrow_p, zcol_p, zpp,
                       kd[3], kw[3], kg[3], imb, vmb, pe)
            sixth = dt / 6.0
            for i in range(n_mach):
                delta[i] = delta[i] + sixth * (
                    kd[0, i] + 2.0 * kd[1, i] + 2.0 * kd[2, i] + kd[3, i])
                w[i] = w[i] + sixth * (
                    kw[0, i] + 2.0 * kw[1, i] + 2.0 * kw[2, i] + kw[3, i])
                g[i] = g[i] + sixth * (
                    kg[0, i] + 2.0 * kg[1, i] + 2.0 * kg[2, i] + kg[3, i])

            for i in range(n_mach):
                if not (np.isfinite(delta[i]) and np.isfinite(w[i])):
                    return 2, k + 1, i, delta_hist, w_hist, v_hist
                if abs(w[i]) > w_max:
                    return 1, k + 1, i, delta_hist, w_hist, v_hist

            ip = _net_nb(delta, probe[k + 1], e_mag, ym, mslot,
                         zmm, zrow_p, zcol_p, zpp, imb, vmb, pe)
            for b in range(n_bus):
                acc = 0j
                for a in range(n_mb):
                    acc += zsave[b, a] * imb[a]
                v_hist[k + 1, b] = acc + zsave_p[b] * ip
            for i in range(n_mach):
                delta_hist[k + 1, i] = delta[i]
                w_hist[k + 1, i] = w[i]

        return 0, -1, -1, delta_hist, w_hist, v_hist

    def run_swing_numba(*args):
        return _run_swing_nb(*args)

    def solve_network_numba(delta, p_probe, e_mag, ym, mslot,
                            zmm, zrow_p, zcol_p, zpp, zsave, zsave_p):
        n_mb = zmm.shape[0]
        imb = np.zeros(n_mb, dtype=np.complex128)
        vmb = np.zeros(n_mb, dtype=np.complex128)
        pe = np.zeros(delta.size)
        ip = _net_nb(delta, p_probe, e_mag, ym, mslot,
                     zmm, zrow_p, zcol_p, zpp, imb, vmb, pe)
        v_full = zsave @ imb + zsave_p * ip
        return pe, v_full, ip

    run_swing = run_swing_numba
    solve_network = solve_network_numba
else:
    run_swing = run_swing_numpy
    solve_network = solve_network_numpy
