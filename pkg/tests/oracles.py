"""Finite-difference oracles shared by the test modules.

These are intentionally independent of the symbolic machinery under test:
they only ever call compiled field evaluation (or plain callables) and build
derivative estimates from central differences.
"""

import math


def fd_derivative(fn, x, y, name, h=None):
    """Central first difference of fn(x, y) in the named variable."""
    if h is None:
        h = 1e-6 * max(1.0, abs(x if name == "x" else y))
    if name == "x":
        return (fn(x + h, y) - fn(x - h, y)) / (2.0 * h)
    return (fn(x, y + h) - fn(x, y + (-h))) / (2.0 * h)


def fd_second(fn, x, y, which, h=1e-4):
    """Central second difference: which is 'xx', 'xy' or 'yy'."""
    if which == "xx":
        return (fn(x + h, y) - 2.0 * fn(x, y) + fn(x - h, y)) / (h * h)
    if which == "yy":
        return (fn(x, y + h) - 2.0 * fn(x, y) + fn(x, y - h)) / (h * h)
    if which == "xy":
        return (fn(x + h, y + h) - fn(x + h, y - h)
                - fn(x - h, y + h) + fn(x - h, y - h)) / (4.0 * h * h)
    raise ValueError(which)


def fd_christoffel(coeff_fn, x, y, h=1e-6):
    """Christoffel symbols from finite differences of the coefficient bundle.

    coeff_fn(x, y) -> (E, F, G).  Returns gamma[k][i][j] as nested lists.
    """
    E, F, G = coeff_fn(x, y)
    dEx = fd_derivative(lambda a, b: coeff_fn(a, b)[0], x, y, "x", h)
    dEy = fd_derivative(lambda a, b: coeff_fn(a, b)[0], x, y, "y", h)
    dFx = fd_derivative(lambda a, b: coeff_fn(a, b)[1], x, y, "x", h)
    dFy = fd_derivative(lambda a, b: coeff_fn(a, b)[1], x, y, "y", h)
    dGx = fd_derivative(lambda a, b: coeff_fn(a, b)[2], x, y, "x", h)
    dGy = fd_derivative(lambda a, b: coeff_fn(a, b)[2], x, y, "y", h)
    det = E * G - F * F
    inv = ((G / det, -F / det), (-F / det, E / det))
    first = {
        (0, 0, 0): 0.5 * dEx,
        (0, 0, 1): dFx - 0.5 * dEy,
        (0, 1, 0): 0.5 * dEy,
        (0, 1, 1): 0.5 * dGx,
        (1, 1, 0): dFy - 0.5 * dGx,
        (1, 1, 1): 0.5 * dGy,
    }
    first[(1, 0, 0)] = first[(0, 1, 0)]
    first[(1, 0, 1)] = first[(0, 1, 1)]
    gamma = [[[0.0, 0.0], [0.0, 0.0]] for _ in range(2)]
    for k in range(2):
        for i in range(2):
            for j in range(2):
                gamma[k][i][j] = sum(inv[k][l] * first[(i, j, l)] for l in range(2))
    return gamma


def fd_gaussian_curvature(coeff_fn, x, y, h=1e-4):
    """Gaussian curvature from finite differences of the coefficient bundle.

    Uses the determinant formula in E, F, G and their first and second
    differences; valid for either metric signature.
    """
    def E(a, b):
        return coeff_fn(a, b)[0]

    def F(a, b):
        return coeff_fn(a, b)[1]

    def G(a, b):
        return coeff_fn(a, b)[2]

    e, f, g = coeff_fn(x, y)
    Eu = fd_derivative(E, x, y, "x", h)
    Ev = fd_derivative(E, x, y, "y", h)
    Fu = fd_derivative(F, x, y, "x", h)
    Fv = fd_derivative(F, x, y, "y", h)
    Gu = fd_derivative(G, x, y, "x", h)
    Gv = fd_derivative(G, x, y, "y", h)
    Evv = fd_second(E, x, y, "yy", h)
    Fuv = fd_second(F, x, y, "xy", h)
    Guu = fd_second(G, x, y, "xx", h)

    def det3(m):
        return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))

    m1 = [[-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev],
          [Fv - 0.5 * Gu, e, f],
          [0.5 * Gv, f, g]]
    m2 = [[0.0, 0.5 * Ev, 0.5 * Gu],
          [0.5 * Ev, e, f],
          [0.5 * Gu, f, g]]
    det = e * g - f * f
    return (det3(m1) - det3(m2)) / (det * det)


def fd_map_jacobian(fx, fy, x, y, h=1e-6):
    """Jacobian of the map (fx, fy) from central differences."""
    return ((fd_derivative(fx, x, y, "x", h), fd_derivative(fx, x, y, "y", h)),
            (fd_derivative(fy, x, y, "x", h), fd_derivative(fy, x, y, "y", h)))


def richardson_limit(fn, base, direction, scales=(1e-2, 5e-3, 2.5e-3)):
    """Crude limit of fn along base + s * direction as s -> 0.

    Polynomial (Richardson) extrapolation through the sampled scales.
    """
    xs = list(scales)
    ys = [fn(base[0] + s * direction[0], base[1] + s * direction[1]) for s in xs]
    # Neville's scheme evaluated at s = 0.
    n = len(xs)
    table = list(ys)
    for level in range(1, n):
        for i in range(n - level):
            table[i] = ((0.0 - xs[i + level]) * table[i] - (0.0 - xs[i]) * table[i + 1]) \
                / (xs[i] - xs[i + level])
    return table[0]
