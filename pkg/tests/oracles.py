"""Independent reference implementations used only by the tests."""

import mpmath as mp

H = mp.mpf("6.62607015e-34")
K_B = mp.mpf("1.380649e-23")


def detected_power_mp(kappa, n_H, eta, T_att, T_mc, f0, Z0, dps=50):
    """Detected-power model evaluated in extended precision with plain coth."""
    with mp.workdps(dps):
        a = H * mp.mpf(f0) / (2 * K_B)

        def c(T):
            T = mp.mpf(T)
            return mp.mpf(1) if T == 0 else mp.coth(a / T)

        return mp.mpf(kappa) / Z0 * (mp.mpf(eta) / 2 * c(T_att) + (1 - mp.mpf(eta)) / 2 * c(T_mc) + n_H)


def central_difference(f, x, rel_step=mp.mpf("1e-15"), dps=60):
    """Central finite difference of f at x in extended precision."""
    with mp.workdps(dps):
        x = mp.mpf(x)
        h = rel_step * max(abs(x), mp.mpf("1e-3"))
        return (f(x + h) - f(x - h)) / (2 * h)


def pchip_fritsch_carlson(x, y, t):
    """Monotone piecewise-cubic Hermite interpolation, written out by hand."""
    n = len(x)
    hk = [x[k + 1] - x[k] for k in range(n - 1)]
    dk = [(y[k + 1] - y[k]) / hk[k] for k in range(n - 1)]
    m = [0.0] * n
    for k in range(1, n - 1):
        if dk[k - 1] * dk[k] <= 0:
            m[k] = 0.0
        else:
            w1 = 2 * hk[k] + hk[k - 1]
            w2 = hk[k] + 2 * hk[k - 1]
            m[k] = (w1 + w2) / (w1 / dk[k - 1] + w2 / dk[k])

    def end(h0, h1, d0, d1):
        d = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
        if d * d0 <= 0:
            return 0.0
        if d0 * d1 <= 0 and abs(d) > abs(3 * d0):
            return 3 * d0
        return d

    m[0] = end(hk[0], hk[1], dk[0], dk[1])
    m[-1] = end(hk[-1], hk[-2], dk[-1], dk[-2])
    k = max(i for i in range(n - 1) if x[i] <= t) if t < x[-1] else n - 2
    s = (t - x[k]) / hk[k]
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * y[k] + h10 * hk[k] * m[k] + h01 * y[k + 1] + h11 * hk[k] * m[k + 1]
