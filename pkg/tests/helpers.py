"""Independent reference computations shared by the tests."""

import math

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from covshift.sgd import stepsize_at


def quadrature_risk(inst, sched, nodes=3, w0=None):
    """Expected excess risk by tensor Gauss-Hermite quadrature over every draw.

    Each step draws ``d`` covariate coordinates and one noise value. The squared
    error of the last iterate has degree at most 4 in each of them, so three
    nodes per variable integrate it exactly. ``w0`` is the
    starting point, zero by default.
    """
    d, steps = inst.dim, sched.total
    z, wts = hermegauss(nodes)
    wts = wts / math.sqrt(2.0 * math.pi)
    n_vars = steps * (d + 1)
    grids = np.meshgrid(*([z] * n_vars), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1) if n_vars else np.zeros((1, 0))
    wgrid = np.meshgrid(*([wts] * n_vars), indexing="ij")
    weight = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1) if n_vars else np.ones(1)

    w = np.zeros((pts.shape[0], d))
    if w0 is not None:
        w += np.asarray(w0, dtype=float)
    for t in range(steps):
        spec = inst.g if t < sched.m else inst.h
        block = pts[:, t * (d + 1) : (t + 1) * (d + 1)]
        x = block[:, :d] * np.sqrt(spec)
        y = x @ inst.w_star + math.sqrt(inst.sigma2) * block[:, d]
        gamma = stepsize_at(sched, t)
        w = w - gamma * ((np.sum(x * w, axis=1) - y)[:, None] * x)
    diff = w - inst.w_star
    risk = 0.5 * (diff**2) @ inst.h
    return float(np.sum(weight * risk))
