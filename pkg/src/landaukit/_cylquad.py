"""Compiled nested adaptive quadrature for cylindrically symmetric kernel integrals.

Integrates (1 + (m−p)² + q² + (m·cf − p·cv)² + q²cv²)^{−β/2} φ(p,q) q^{d−2}
over p ∈ ℝ and q ∈ [0,∞), split at q = qr.  Each axis uses globally adaptive
bisection with a 15-point Gauss rule checked against the 7-point rule.
"""

import numba as nb
import numpy as np

_X15, _W15 = np.polynomial.legendre.leggauss(15)
_X7, _W7 = np.polynomial.legendre.leggauss(7)

MAX_INTERVALS = 400

# parameter slots
P_VAR, M, CF, CV, BETA, DIM, KIND, QR = range(8)
N_PARAMS = 8


@nb.njit(cache=True, nogil=True)
def _q_integrand(q, prm):
    p = prm[P_VAR]
    m = prm[M]
    cf = prm[CF]
    cv = prm[CV]
    br = 1.0 + (m - p) ** 2 + q * q + (m * cf - p * cv) ** 2 + q * q * cv * cv
    r2 = p * p + q * q
    if prm[KIND] == 0.0:
        phi = r2 ** 0.25 / (1.0 + r2)
    else:
        phi = r2 ** 0.25
    return q ** (prm[DIM] - 2.0) * phi * br ** (-0.5 * prm[BETA])


@nb.njit(cache=True, nogil=True)
def _mapped(x, prm, a, mode):
    # mode 0: finite; +1: [a, ∞) via x = a + s/(1−s); −1: (−∞, a] via x = a − s/(1−s)
    if mode == 0:
        return _q_integrand(x, prm)
    s = x
    y = s / (1.0 - s)
    jac = 1.0 / (1.0 - s) ** 2
    return _q_integrand(a + mode * y, prm) * jac


@nb.njit(cache=True, nogil=True)
def _rule_q(lo, hi, prm, a, mode):
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    s15 = 0.0
    for i in range(15):
        s15 += _W15[i] * _mapped(c + h * _X15[i], prm, a, mode)
    s7 = 0.0
    for i in range(7):
        s7 += _W7[i] * _mapped(c + h * _X7[i], prm, a, mode)
    return h * s15, abs(h * (s15 - s7))


@nb.njit(cache=True, nogil=True)
def adapt_q(prm, a, b, mode, epsrel, epsabs):
    """∫ over [a,b] (mode 0) or a half-line from a (mode ±1) of the q-integrand."""
    if mode != 0:
        lo0, hi0 = 0.0, 1.0
    else:
        lo0, hi0 = a, b
    los = np.empty(MAX_INTERVALS)
    his = np.empty(MAX_INTERVALS)
    vals = np.empty(MAX_INTERVALS)
    errs = np.empty(MAX_INTERVALS)
    los[0] = lo0
    his[0] = hi0
    vals[0], errs[0] = _rule_q(lo0, hi0, prm, a, mode)
    n = 1
    while True:
        total = 0.0
        err = 0.0
        worst = 0
        for i in range(n):
            total += vals[i]
            err += errs[i]
            if errs[i] > errs[worst]:
                worst = i
        if err <= max(epsabs, epsrel * abs(total)) or n >= MAX_INTERVALS:
            return total, err
        mid = 0.5 * (los[worst] + his[worst])
        los[n] = mid
        his[n] = his[worst]
        his[worst] = mid
        vals[worst], errs[worst] = _rule_q(los[worst], his[worst], prm, a, mode)
        vals[n], errs[n] = _rule_q(los[n], his[n], prm, a, mode)
        n += 1


@nb.njit(cache=True, nogil=True)
def _q_zone(p, prm, zone, breaks, epsrel):
    """q-integral at fixed p over [0, qr) (zone 0) or [qr, ∞) (zone 1)."""
    loc = prm.copy()
    loc[P_VAR] = p
    qr = prm[QR]
    if zone == 0:
        if qr <= 0.0:
            return 0.0
        return adapt_q(loc, 0.0, qr, 0, epsrel, 1e-300)[0]
    total = 0.0
    last = qr
    for i in range(breaks.size):
        if breaks[i] > last:
            total += adapt_q(loc, last, breaks[i], 0, epsrel, 1e-300)[0]
            last = breaks[i]
    total += adapt_q(loc, last, 0.0, 1, epsrel, 1e-300)[0]
    return total


@nb.njit(cache=True, nogil=True)
def _p_mapped(x, prm, zone, breaks, a, mode, epsrel):
    if mode == 0:
        return _q_zone(x, prm, zone, breaks, epsrel)
    y = x / (1.0 - x)
    jac = 1.0 / (1.0 - x) ** 2
    return _q_zone(a + mode * y, prm, zone, breaks, epsrel) * jac


@nb.njit(cache=True, nogil=True)
def _rule_p(lo, hi, prm, zone, breaks, a, mode, epsrel):
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    s15 = 0.0
    for i in range(15):
        s15 += _W15[i] * _p_mapped(c + h * _X15[i], prm, zone, breaks, a, mode, epsrel)
    s7 = 0.0
    for i in range(7):
        s7 += _W7[i] * _p_mapped(c + h * _X7[i], prm, zone, breaks, a, mode, epsrel)
    return h * s15, abs(h * (s15 - s7))


@nb.njit(cache=True, nogil=True)
def adapt_p(prm, zone, breaks, a, b, mode, epsrel, epsabs):
    if mode != 0:
        lo0, hi0 = 0.0, 1.0
    else:
        lo0, hi0 = a, b
    inner = 0.1 * epsrel
    los = np.empty(MAX_INTERVALS)
    his = np.empty(MAX_INTERVALS)
    vals = np.empty(MAX_INTERVALS)
    errs = np.empty(MAX_INTERVALS)
    los[0] = lo0
    his[0] = hi0
    vals[0], errs[0] = _rule_p(lo0, hi0, prm, zone, breaks, a, mode, inner)
    n = 1
    while True:
        total = 0.0
        err = 0.0
        worst = 0
        for i in range(n):
            total += vals[i]
            err += errs[i]
            if errs[i] > errs[worst]:
                worst = i
        if err <= max(epsabs, epsrel * abs(total)) or n >= MAX_INTERVALS:
            return total, err
        mid = 0.5 * (los[worst] + his[worst])
        los[n] = mid
        his[n] = his[worst]
        his[worst] = mid
        vals[worst], errs[worst] = _rule_p(los[worst], his[worst], prm, zone, breaks, a, mode, inner)
        vals[n], errs[n] = _rule_p(los[n], his[n], prm, zone, breaks, a, mode, inner)
        n += 1


@nb.njit(cache=True, nogil=True)
def plane_integral(prm, zone, pbreaks, qbreaks, epsrel):
    """∫_ℝ dp ∫_zone dq; pbreaks sorted, used as panel edges with half-line tails."""
    total = adapt_p(prm, zone, qbreaks, pbreaks[0], 0.0, -1, epsrel, 1e-300)[0]
    for i in range(pbreaks.size - 1):
        if pbreaks[i + 1] > pbreaks[i]:
            total += adapt_p(prm, zone, qbreaks, pbreaks[i], pbreaks[i + 1], 0, epsrel, 1e-300)[0]
    total += adapt_p(prm, zone, qbreaks, pbreaks[-1], 0.0, 1, epsrel, 1e-300)[0]
    return total
