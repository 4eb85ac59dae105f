"""Independent oracle for cyclic integrals of |x - y|^{-a} on [0, 1].

For x < y write d = y - x.  The inner integral

    g(x, y) = int_0^1 |x - z|^{-a} |y - z|^{-a} dz

splits into a Beta integral over [x, y] and two hypergeometric pieces over
[0, x] and [y, 1].  Then

    N_3 = 2 int_{x<y} d^{-a} g(x, y),    N_4 = 2 int_{x<y} g(x, y)^2,

are computed by nested adaptive quadrature in (d, x) with an algebraic weight
at d = 0.  Nothing here shares code with the package.

Run as a script to print the values frozen in ``tests/golden.py``.
"""

import math

from scipy import integrate
from scipy.special import beta as beta_fn
from scipy.special import hyp2f1


def _side(a, length, d):
    # int_0^length u^{-a} (u + d)^{-a} du
    if length <= 0:
        return 0.0
    return d ** (-a) * length ** (1 - a) / (1 - a) * hyp2f1(a, 1 - a, 2 - a, -length / d)


def inner(a, x, d):
    if d == 0:
        return (x ** (1 - 2 * a) + (1 - x) ** (1 - 2 * a)) / (1 - 2 * a)
    y = x + d
    middle = d ** (1 - 2 * a) * beta_fn(1 - a, 1 - a)
    return middle + _side(a, x, d) + _side(a, 1 - y, d)


def numerator(a, k, tol=1e-11):
    if k == 2:
        return 2.0 / ((1 - 2 * a) * (2 - 2 * a))
    if k == 3:
        # weight d^{-a} handled by QUADPACK's algebraic-singularity rule
        f = lambda d: integrate.quad(lambda x: inner(a, x, d), 0, 1 - d, epsabs=0,
                                     epsrel=tol, limit=200)[0]
        val = integrate.quad(f, 0, 1, weight="alg", wvar=(-a, 0), epsabs=0, epsrel=tol,
                             limit=200)[0]
        return 2 * val
    if k == 4:
        f = lambda d: integrate.quad(lambda x: inner(a, x, d) ** 2, 0, 1 - d, epsabs=0,
                                     epsrel=tol, limit=200)[0]
        val = integrate.quad(f, 0, 1, epsabs=0, epsrel=tol, limit=200,
                             points=[1e-6, 1e-4, 1e-2])[0]
        return 2 * val
    raise ValueError("oracle covers k = 2, 3, 4")


def normalized(a, k):
    return numerator(a, k) / numerator(a, 2) ** (k / 2)


if __name__ == "__main__":
    for a in (0.2, 0.28, 0.3, 0.4):
        n = {k: numerator(a, k) for k in (2, 3, 4)}
        print(a, {k: repr(v) for k, v in n.items()},
              {k: repr(n[k] / n[2] ** (k / 2)) for k in (3, 4)})
