"""Independent high-precision oracle for the quadratic-bump valuation scenario.

For x_a(t) = a - b (t - m)^2 the mean log price y solves y' = x_a - y in closed
form: y = x_a - x_a' + x_a'' + C exp(-(t - t0)).  Everything below is computed
from that closed form with mpmath quadrature and root finding; nothing here
shares code with the C++ implementation.  Printed values are frozen into
tests/test_extrema.cpp and tests/test_analytic.cpp.
"""
import mpmath as mp

mp.mp.dps = 40


def scenario(a, b, m, y0, sigma, t0=0):
    a, b, m, y0, sigma, t0 = map(mp.mpf, (a, b, m, y0, sigma, t0))
    c = 2 - sigma**2
    xa = lambda t: a - b * (t - m) ** 2
    dxa = lambda t: -2 * b * (t - m)
    ddxa = -2 * b
    yp = lambda t: xa(t) - dxa(t) + ddxa
    C = y0 - yp(t0)
    y = lambda t: yp(t) + C * mp.e ** (-(t - t0))
    w = lambda t: (1 + xa(t) - y(t)) ** 2
    dw = lambda t: 2 * (1 + xa(t) - y(t)) * (dxa(t) - (xa(t) - y(t)))
    z1 = lambda t: mp.quad(lambda s: mp.e ** (c * (s - t)) * w(s), [t0, t])
    q = lambda t: dw(t) + sigma**2 * w(t) - sigma**2 * c * z1(t)
    vol = lambda t: sigma**2 * w(t) + sigma**4 * z1(t)
    return dict(xa=xa, dxa=dxa, y=y, w=w, z1=z1, q=q, vol=vol, c=c, t0=t0, sigma=sigma)


def report(name, a, b, m, y0, sigma, t0=0):
    s = scenario(a, b, m, y0, sigma, t0)
    S = lambda t: s["dxa"](t) - s["xa"](t) + s["y"](t)
    t1 = mp.findroot(S, mp.mpf("0.7"))
    tstar = mp.findroot(lambda t: s["xa"](t) - s["y"](t), mp.mpf("2.9"))
    # Q changes sign between t1 and m; bracket with a coarse scan first.
    lo = t1
    hi = lo
    while s["q"](hi) > 0:
        lo, hi = hi, hi + mp.mpf("0.01")
    tv = mp.findroot(s["q"], (lo, hi), solver="anderson")
    E = 2 * s["dxa"](tstar) + s["sigma"] ** 2 * mp.e ** (s["c"] * (s["t0"] - tstar))
    print(f"{name}: t1={mp.nstr(t1, 17)} tv={mp.nstr(tv, 17)} tstar={mp.nstr(tstar, 17)} "
          f"E={mp.nstr(E, 17)} Q(t1)={mp.nstr(s['q'](t1), 17)} Q(tstar)={mp.nstr(s['q'](tstar), 17)}")
    for t in ["1", "3", "6"]:
        t = mp.mpf(t)
        print(f"  t={t}: y={mp.nstr(s['y'](t), 17)} z1={mp.nstr(s['z1'](t), 17)} "
              f"var_x={mp.nstr(s['sigma']**2 * s['z1'](t), 17)} q={mp.nstr(s['q'](t), 17)} "
              f"vol={mp.nstr(s['vol'](t), 17)}")


report("canonical", "1.5", "0.1", "2", "0.9", "0.5")
for b in ["0.05", "0.1", "0.2"]:
    for sg in ["0.2", "0.5", "0.8"]:
        y0 = mp.mpf("1.5") - 6 * mp.mpf(b)
        report(f"family b={b} sigma={sg}", "1.5", b, "2", y0, sg)

# Linear x_a(t) = t, t0 = 0, y0 = 1: y = t - 1 + 2 exp(-t).
print("linear y(1) =", mp.nstr(1 - 1 + 2 * mp.e ** -1, 17), " y(2) =", mp.nstr(2 - 1 + 2 * mp.e ** -2, 17))

# Anticorrelated ratio density at x = 1 with mu_D = mu_S = 1, sigma1 = 0.05.
print("ratio density =", mp.nstr(2 / (mp.sqrt(2 * mp.pi) * mp.mpf("0.05") * 4), 17))
# Deterministic section-2 example f = 0.2 - 0.1 (t - 2)^2: f > 0 ends at 2 + sqrt(2).
print("t_b =", mp.nstr(2 + mp.sqrt(2), 17))
