"""Independent numerical oracles used by the test suite.

These deliberately avoid the package's closed forms: Kendall functions
are cross-checked against a bivariate quadrature of the recursive
integral, and densities against finite differences of the CDF.
"""

import numpy as np

from hierkendall.copulas import copula_cdf, quantile_curve


def cdf_partial_u1(copula, u1, u2, h=1e-6):
    """d/du1 C(u1, u2) by central finite differences."""
    return (copula_cdf(copula, [u1 + h, u2]) - copula_cdf(copula, [u1 - h, u2])) / (2 * h)


def kendall_cdf_quadrature_2d(copula, t, nodes=96):
    """K(t) for a bivariate copula by the recursive-integral representation:

        K(t) = t + int_t^1 d/du1 C(u1, C^-1_{u1}(t)) du1,

    with the copula quantile function supplying the inner limit. The
    integrand is smooth on (t, 1), so fixed Gauss-Legendre suffices.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    lo, hi = t + 1e-9, 1.0 - 1e-9
    u1s = 0.5 * (hi - lo) * (x + 1.0) + lo
    vals = np.empty(nodes)
    for i, u1 in enumerate(u1s):
        u2 = quantile_curve(copula, [u1], t)
        vals[i] = cdf_partial_u1(copula, u1, u2)
    return t + 0.5 * (hi - lo) * float(w @ vals)


def pdf_mixed_fd_2d(copula, u1, u2, h=1e-4):
    """c(u1, u2) as the mixed second difference of the CDF."""
    return (copula_cdf(copula, [u1 + h, u2 + h])
            - copula_cdf(copula, [u1 + h, u2 - h])
            - copula_cdf(copula, [u1 - h, u2 + h])
            + copula_cdf(copula, [u1 - h, u2 - h])) / (4.0 * h * h)
