"""Shared oracle helpers for the test suite."""

import math

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from hypersinh.gmc import hermite


def hermite_pair_expectation(j, k, sigma, cov, n_nodes=64):
    """E[H_j(X; sigma) H_k(Y; sigma)] for a centered bivariate Gaussian.

    Independent route via 2-d Gauss-Hermite quadrature (exact for
    polynomials up to degree 2 * n_nodes - 1).
    """
    nodes, weights = hermegauss(n_nodes)
    rho = cov / sigma
    xi, eta = np.meshgrid(nodes, nodes, indexing="ij")
    w = np.outer(weights, weights) / (2 * math.pi)
    x = math.sqrt(sigma) * xi
    y = math.sqrt(sigma) * (rho * xi + math.sqrt(max(1 - rho ** 2, 0.0)) * eta)
    return float(np.sum(w * hermite(j, x, sigma) * hermite(k, y, sigma)))
