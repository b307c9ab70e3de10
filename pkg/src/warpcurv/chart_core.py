"""Generic coordinate-chart computations on product metrics.

Everything here is brute force and structure-blind: assemble the block
metric, differentiate it exactly through the expression trees, form the
Levi-Civita coefficients, and differentiate coefficient fields by central
differences to get the full curvature tensor.  This is the independent
oracle that the component formulas elsewhere in the package are tested
against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalInstability, SingularMetric
from .exprs import Const, Pow, Prod, jet_env
from .geometry import ProductManifoldSpec

FD_STEP = 1e-5


def metric_exprs(spec: ProductManifoldSpec):
    """Block-diagonal matrix of ScalarExpr entries for the full metric."""
    cached = getattr(spec, "_metric_expr_cache", None)
    if cached is not None:
        return cached
    nbar = spec.n_bar
    entries = [[Const(0.0) for _ in range(nbar)] for _ in range(nbar)]
    for a, s in enumerate(spec.base.signs):
        entries[a][a] = Const(float(s))
    for i, fiber in enumerate(spec.fibers):
        sl = spec.block_slice(i)
        names = spec.fiber_coord_names(i)
        gf = fiber.geometry.metric_exprs(names)
        b2 = Pow(spec.warpings[i], 2.0)
        for a in range(fiber.dim):
            for b in range(fiber.dim):
                if isinstance(gf[a][b], Const) and gf[a][b].value == 0.0:
                    continue
                entries[sl.start + a][sl.start + b] = Prod(b2, gf[a][b])
    spec._metric_expr_cache = entries
    return entries


def assemble_metric(spec: ProductManifoldSpec, p) -> np.ndarray:
    """Metric matrix at p; validates chart membership and warping positivity."""
    p = np.asarray(p, dtype=float)
    spec.check_point(p)
    entries = metric_exprs(spec)
    env = dict(zip(spec.coord_names, map(float, p)))
    nbar = spec.n_bar
    g = np.zeros((nbar, nbar))
    for i in range(nbar):
        for j in range(nbar):
            e = entries[i][j]
            if isinstance(e, Const):
                g[i, j] = e.value
            else:
                g[i, j] = float(e.eval(env))
    return g


def metric_derivatives(spec: ProductManifoldSpec, p) -> np.ndarray:
    """Exact partials dg[k, i, j] = d_k g_ij via jets through the entries."""
    p = np.asarray(p, dtype=float)
    spec.check_point(p)
    entries = metric_exprs(spec)
    env = jet_env(spec.coord_names, p, order=1)
    nbar = spec.n_bar
    dg = np.zeros((nbar, nbar, nbar))
    for i in range(nbar):
        for j in range(nbar):
            e = entries[i][j]
            if isinstance(e, Const):
                continue
            val = e.eval(env)
            if isinstance(val, float):
                continue
            dg[:, i, j] = val.grad
    return dg


def metric_and_derivatives(spec, p):
    g = assemble_metric(spec, p)
    dg = metric_derivatives(spec, p)
    return g, dg


def inverse_metric(g):
    try:
        ginv = np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise SingularMetric(str(exc)) from exc
    if not np.all(np.isfinite(ginv)):
        raise SingularMetric("metric inverse is not finite")
    return ginv


def levi_civita_coefficients(spec: ProductManifoldSpec, p) -> np.ndarray:
    """Christoffel symbols G[k, i, j] = G^k_ij of the Levi-Civita connection."""
    g, dg = metric_and_derivatives(spec, p)
    ginv = inverse_metric(g)
    # T[l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    T = np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg
    return 0.5 * np.einsum("kl,lij->kij", ginv, T)


@dataclass
class FrameField:
    """Orthonormal frame at a point: rows of `vectors` are the E_a."""

    vectors: np.ndarray  # (nbar, nbar), vectors[a] = components of E_a
    signs: np.ndarray  # (nbar,), eps_a

    def check(self, g, tol=1e-10):
        gram = self.vectors @ g @ self.vectors.T
        return np.max(np.abs(gram - np.diag(self.signs))) <= tol


def orthonormal_frame(spec: ProductManifoldSpec, p) -> FrameField:
    """Block-aligned frame diagonalizing g with signature signs."""
    g = assemble_metric(spec, p)
    nbar = spec.n_bar
    vectors = np.zeros((nbar, nbar))
    signs = np.zeros(nbar)
    blocks = ["base"] + list(range(spec.m))
    row = 0
    for blk in blocks:
        sl = spec.block_slice(blk)
        gb = g[sl, sl]
        w, V = np.linalg.eigh(gb)
        if np.any(np.abs(w) < 1e-12):
            raise SingularMetric(f"degenerate metric block {blk!r}")
        for a in range(sl.stop - sl.start):
            vectors[row, sl] = V[:, a] / np.sqrt(abs(w[a]))
            signs[row] = np.sign(w[a])
            row += 1
    return FrameField(vectors=vectors, signs=signs)


@dataclass
class CurvatureAtPoint:
    """Full curvature data of one connection at one chart point.

    riemann[l, i, j, k] are the components of R(d_i, d_j)d_k along d_l;
    ricci[i, k] = riemann[j, i, j, k] summed over j (orthonormal-frame trace
    with signature signs); scalar is the signed trace of ricci.
    """

    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    metric: np.ndarray

    def apply(self, x, y, z):
        """Vector R(X, Y)Z for constant-component coordinate vectors."""
        return np.einsum("lijk,i,j,k->l", self.riemann, x, y, z)

    def ricci_pair(self, x, y):
        return float(np.einsum("ik,i,k->", self.ricci, x, y))


def curvature_from_coefficients(spec, coeff_field, p, step=FD_STEP,
                                instability_tol=1e-4) -> CurvatureAtPoint:
    """Curvature of an arbitrary coefficient field by central differences.

    The field is differentiated with step `step` and once-Richardson
    extrapolation; disagreement between the two stencils beyond
    `instability_tol` (relative to the field scale) raises
    NumericalInstability.
    """
    p = np.asarray(p, dtype=float)
    G = coeff_field(p)
    nbar = spec.n_bar
    dG = np.zeros((nbar, nbar, nbar, nbar))  # dG[i, l, j, k] = d_i G^l_jk
    scale = max(1.0, float(np.max(np.abs(G))))
    for i in range(nbar):
        e = np.zeros(nbar)
        e[i] = step
        d_h = (coeff_field(p + e) - coeff_field(p - e)) / (2 * step)
        d_h2 = (coeff_field(p + e / 2) - coeff_field(p - e / 2)) / step
        if np.max(np.abs(d_h2 - d_h)) > instability_tol * scale:
            raise NumericalInstability(
                f"coefficient-field derivative unstable along coordinate {i}"
            )
        dG[i] = (4.0 * d_h2 - d_h) / 3.0

    # R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
    R = (
        np.einsum("iljk->lijk", dG)
        - np.einsum("jlik->lijk", dG)
        + np.einsum("lim,mjk->lijk", G, G)
        - np.einsum("ljm,mik->lijk", G, G)
    )
    g = assemble_metric(spec, p)
    ginv = inverse_metric(g)
    ricci = np.einsum("jijk->ik", R)
    scalar = float(np.einsum("ik,ik->", ginv, ricci))
    return CurvatureAtPoint(riemann=R, ricci=ricci, scalar=scalar, metric=g)


def levi_civita_curvature(spec, p, step=FD_STEP) -> CurvatureAtPoint:
    return curvature_from_coefficients(
        spec, lambda q: levi_civita_coefficients(spec, q), p, step
    )
