"""Deterministic expectation operators for the fixed-point systems.

Gauss rules are built by Golub-Welsch (eigendecomposition of the Jacobi
matrix of the monic orthogonal-polynomial recurrence), normalized so the
weights integrate the underlying probability measure to one:

* ``GaussHermiteNormal``  -- nodes/weights for E[f(Z)], Z ~ N(0, 1);
* ``GaussLaguerreExp1``   -- nodes/weights for E[f(Z)], Z ~ Exp(1).

An order-n rule integrates polynomials up to degree 2n-1 exactly.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import eigh_tridiagonal


class RuleKind(Enum):
    GaussHermiteNormal = "hermite-normal"
    GaussLaguerreExp1 = "laguerre-exp1"


class QuadratureEvaluationError(RuntimeError):
    """Integrand returned a non-finite value at a quadrature node."""


@dataclass(frozen=True)
class QuadratureRule:
    kind: RuleKind
    order: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


def make_rule(kind, order):
    """Build a quadrature rule of the given kind and order.

    Parameters
    ----------
    kind : RuleKind
    order : int
        Number of nodes, >= 1.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    kind = RuleKind(kind)
    if kind is RuleKind.GaussHermiteNormal:
        # monic probabilist Hermite: a_k = 0, b_k = k
        diag = np.zeros(order)
        off = np.sqrt(np.arange(1.0, order))
        nodes, vecs = eigh_tridiagonal(diag, off)
        weights = vecs[0] ** 2
        # enforce the exact +/- symmetry of the measure
        nodes = 0.5 * (nodes - nodes[::-1])
        weights = 0.5 * (weights + weights[::-1])
    else:
        # monic Laguerre (weight e^{-z}): a_k = 2k+1, b_k = k^2
        k = np.arange(order, dtype=float)
        nodes, vecs = eigh_tridiagonal(2.0 * k + 1.0, np.arange(1.0, order))
        weights = vecs[0] ** 2
    weights = weights / weights.sum()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(kind, order, nodes, weights)


def make_logit_rules(order):
    """(Q, Z0) Hermite rule pair for the binary-response expectations."""
    h = make_rule(RuleKind.GaussHermiteNormal, order)
    return (h, h)


def make_weibull_rules(order):
    """(Z, Q, Z0) Laguerre/Hermite rule triple for the hazard expectations."""
    h = make_rule(RuleKind.GaussHermiteNormal, order)
    return (make_rule(RuleKind.GaussLaguerreExp1, order), h, h)


def _check_finite(vals, names, grids):
    if np.all(np.isfinite(vals)):
        return
    idx = np.unravel_index(np.argmin(np.isfinite(vals)), vals.shape)
    coords = ", ".join(
        f"{n}={np.broadcast_to(g, vals.shape)[idx]:.6g}" for n, g in zip(names, grids)
    )
    raise QuadratureEvaluationError(f"non-finite integrand value at node ({coords})")


def expect_logit(f, S, rules):
    """E[f(T, Q, Z0)] with Q, Z0 ~ N(0,1) independent and T | Z0 a +/-1
    label with P(T=1 | Z0) = e^{S Z0} / (2 cosh(S Z0)).

    ``f`` must accept broadcast arrays of shape (2, n_q, n_z0).
    """
    rule_q, rule_z0 = rules
    t = np.array([-1.0, 1.0]).reshape(2, 1, 1)
    q = rule_q.nodes.reshape(1, -1, 1)
    z0 = rule_z0.nodes.reshape(1, 1, -1)
    # e^{t y} / 2cosh(y) = (1 + t tanh y) / 2, stable for all y
    p_t = 0.5 * (1.0 + t * np.tanh(S * z0))
    wts = p_t * rule_q.weights.reshape(1, -1, 1) * rule_z0.weights.reshape(1, 1, -1)
    vals = np.asarray(f(t, q, z0), dtype=float)
    vals = np.broadcast_to(vals, wts.shape)
    _check_finite(vals, ("t", "q", "z0"), (t, q, z0))
    return float(np.sum(wts * vals))


def expect_weibull(f, rules):
    """E[f(Z, Q, Z0)] with Z ~ Exp(1) and Q, Z0 ~ N(0,1), all independent.

    ``f`` must accept broadcast arrays of shape (n_z, n_q, n_z0).
    """
    rule_z, rule_q, rule_z0 = rules
    z = rule_z.nodes.reshape(-1, 1, 1)
    q = rule_q.nodes.reshape(1, -1, 1)
    z0 = rule_z0.nodes.reshape(1, 1, -1)
    wts = (
        rule_z.weights.reshape(-1, 1, 1)
        * rule_q.weights.reshape(1, -1, 1)
        * rule_z0.weights.reshape(1, 1, -1)
    )
    vals = np.asarray(f(z, q, z0), dtype=float)
    vals = np.broadcast_to(vals, wts.shape)
    _check_finite(vals, ("z", "q", "z0"), (z, q, z0))
    return float(np.sum(wts * vals))
