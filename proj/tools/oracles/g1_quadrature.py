#!/usr/bin/env python3
"""Reference values of the Faddeev kernel g1(w) by direct quadrature.

g1(w) = (2pi)^-2 * Int exp(i w.xi) / (|xi|^2 + 2(xi1 + i xi2)) dxi.

The xi1 integral is closed by residues (poles at xi1 = -i xi2 and
xi1 = -2 + i xi2), leaving exponentially damped integrals in xi2 that are
evaluated numerically with mpmath.  No special functions are involved, so
the values are independent of the E1-based evaluation in the library.

Usage: g1_quadrature.py > tests/fixtures/g1_oracle.txt
"""
import mpmath as mp

mp.mp.dps = 30


def g1_oracle(w):
    x, y = mp.re(w), mp.im(w)
    pi = mp.pi
    I = mp.mpc(0, 1)
    if x > 0:
        neg = lambda t: pi * I * mp.exp(x * t + I * y * t) / (1 - I * t)
        pos = lambda t: -pi * I * mp.exp(-2 * I * x) * mp.exp(-x * t + I * y * t) / (1 - I * t)
    else:
        neg = lambda t: pi * I * mp.exp(-2 * I * x) * mp.exp(-x * t + I * y * t) / (1 - I * t)
        pos = lambda t: -pi * I * mp.exp(x * t + I * y * t) / (1 - I * t)
    # break points every few decay lengths keep the tanh-sinh rule accurate
    scale = 1 / max(abs(x), mp.mpf("1e-30"))
    pts = [0] + [scale * 2**j for j in range(-6, 12)] + [mp.inf]
    total = mp.quad(lambda t: neg(-t), pts) + mp.quad(pos, pts)
    return total / (4 * pi**2)


def probes(count=50):
    golden = mp.pi * (3 - mp.sqrt(5))
    out = []
    for i in range(count):
        r = mp.mpf(10) ** (-3 + (mp.log10(30) + 3) * i / (count - 1))
        ang = golden * i + mp.mpf("0.1")
        w = r * mp.expj(ang)
        if abs(mp.re(w)) < 0.05 * r:  # keep away from the Re w = 0 seam of the residue split
            w = r * mp.expj(ang + 0.3)
        out.append(w)
    return out


if __name__ == "__main__":
    print("# re(w) im(w) re(g1) im(g1)   -- residue-reduced quadrature, 30 digits")
    for w in probes():
        g = g1_oracle(w)
        print(f"{mp.nstr(mp.re(w), 17)} {mp.nstr(mp.im(w), 17)} "
              f"{mp.nstr(mp.re(g), 17)} {mp.nstr(mp.im(g), 17)}")
