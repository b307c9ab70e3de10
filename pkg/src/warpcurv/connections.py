"""Semi-symmetric non-metric and torsion-free affine connections.

Both connections are built from Levi-Civita data and the one-form
pi = g(., P):

* semi-symmetric non-metric:  nabla'_X Y = nabla_X Y + pi(Y) X
* symmetrized affine:         nabla~_X Y = nabla_X Y + pi(X) Y + pi(Y) X

The curvature of either connection is computed two independent ways: from
the modified coefficients (finite differences, `chart_core`) and from the
closed-form relation to the Levi-Civita curvature; the two must agree.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .chart_core import (
    CurvatureAtPoint,
    assemble_metric,
    curvature_from_coefficients,
    inverse_metric,
    levi_civita_coefficients,
    levi_civita_curvature,
    metric_derivatives,
)
from .errors import NumericalInstability
from .geometry import ambient_components


class ConnectionKind(Enum):
    LEVI_CIVITA = "levi-civita"
    SEMI_SYMMETRIC_NON_METRIC = "semi-symmetric"
    SYMMETRIZED_AFFINE = "symmetrized"


def pi_covector(spec, P, p):
    """Covariant components pi_j = g_jm P^m at p."""
    g = assemble_metric(spec, p)
    Pvec = ambient_components(spec, P, p)
    return g @ Pvec


def pi_and_dpi(spec, P, p):
    """pi_j and the exact partials dpi[i, j] = d_i pi_j."""
    g = assemble_metric(spec, p)
    dg = metric_derivatives(spec, p)
    jets = ambient_components(spec, P, p, order=1)
    Pvec = np.array([j.val for j in jets])
    dP = np.stack([j.grad for j in jets], axis=1)  # dP[i, m] = d_i P^m
    pi = g @ Pvec
    dpi = np.einsum("ijm,m->ij", dg, Pvec) + np.einsum("im,jm->ij", dP, g)
    return pi, dpi


def covariant_derivative_of_p(spec, P, p):
    """Levi-Civita derivative components nablaP[i, m] = (nabla_{d_i} P)^m."""
    G = levi_civita_coefficients(spec, p)
    jets = ambient_components(spec, P, p, order=1)
    Pvec = np.array([j.val for j in jets])
    dP = np.stack([j.grad for j in jets], axis=1)
    return dP + np.einsum("min,n->im", G, Pvec)


def modified_coefficients(kind, spec, P, p):
    """Coefficients of the requested connection at p, layout G[k, i, j]."""
    G = levi_civita_coefficients(spec, p)
    if kind == ConnectionKind.LEVI_CIVITA:
        return G
    pi = pi_covector(spec, P, p)
    eye = np.eye(spec.n_bar)
    G = G + np.einsum("ki,j->kij", eye, pi)
    if kind == ConnectionKind.SYMMETRIZED_AFFINE:
        G = G + np.einsum("kj,i->kij", eye, pi)
    return G


def torsion_tensor(kind, spec, P, p):
    """T^k_ij = G^k_ij - G^k_ji; vanishes except for the semi-symmetric case."""
    G = modified_coefficients(kind, spec, P, p)
    return G - np.transpose(G, (0, 2, 1))


def nonmetricity(kind, spec, P, p):
    """Components NM[i, j, k] = (nabla_{d_i} g)(d_j, d_k)."""
    g = assemble_metric(spec, p)
    dg = metric_derivatives(spec, p)
    G = modified_coefficients(kind, spec, P, p)
    return (
        dg
        - np.einsum("mij,mk->ijk", G, g)
        - np.einsum("mik,jm->ijk", G, g)
    )


def curvature_via_relation(kind, spec, P, p, check=True, check_tol=1e-4):
    """Curvature through the closed-form relation to Levi-Civita curvature.

    For the semi-symmetric connection the correction is
        g(Z, nabla_X P) Y - g(Z, nabla_Y P) X + pi(Z)[pi(Y) X - pi(X) Y],
    and the torsion-free variant adds [X(pi(Y)) - Y(pi(X))] Z, which on
    coordinate frames is the exterior derivative of pi (the pi([X,Y]) term
    drops since coordinate fields commute).

    When `check` is set the result is compared against the coefficient-path
    curvature of `modified_coefficients`; disagreement beyond `check_tol`
    raises NumericalInstability.
    """
    base = levi_civita_curvature(spec, p)
    if kind == ConnectionKind.LEVI_CIVITA:
        return base

    g = base.metric
    nbar = spec.n_bar
    eye = np.eye(nbar)
    pi, dpi = pi_and_dpi(spec, P, p)
    nablaP = covariant_derivative_of_p(spec, P, p)
    A = np.einsum("km,im->ik", g, nablaP)  # A[i, k] = g(d_k, nabla_{d_i} P)

    R = (
        base.riemann
        + np.einsum("ik,lj->lijk", A, eye)
        - np.einsum("jk,li->lijk", A, eye)
        + np.einsum("k,j,li->lijk", pi, pi, eye)
        - np.einsum("k,i,lj->lijk", pi, pi, eye)
    )
    if kind == ConnectionKind.SYMMETRIZED_AFFINE:
        dpi_anti = dpi - dpi.T
        R = R + np.einsum("ij,lk->lijk", dpi_anti, eye)

    ginv = inverse_metric(g)
    ricci = np.einsum("jijk->ik", R)
    scalar = float(np.einsum("ik,ik->", ginv, ricci))
    result = CurvatureAtPoint(riemann=R, ricci=ricci, scalar=scalar, metric=g)

    if check:
        direct = curvature_from_coefficients(
            spec, lambda q: modified_coefficients(kind, spec, P, q), p
        )
        dev = float(np.max(np.abs(direct.riemann - R)))
        if dev > check_tol:
            raise NumericalInstability(
                f"relation-path and coefficient-path curvature differ by {dev:.3e}"
            )
    return result


def connection_curvature(kind, spec, P, p, step=None):
    """Coefficient-path curvature of the requested connection."""
    if kind == ConnectionKind.LEVI_CIVITA:
        return levi_civita_curvature(spec, p)
    kwargs = {} if step is None else {"step": step}
    return curvature_from_coefficients(
        spec, lambda q: modified_coefficients(kind, spec, P, q), p, **kwargs
    )
