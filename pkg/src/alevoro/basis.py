"""Modal Taylor bases, quadrature rules and projection utilities.

Bases are rescaled Taylor monomials anchored at a cell barycenter and
normalized by the cell's circumradius h (time factor normalized by dt).
All rules live on reference domains: unit triangle {(0,0),(1,0),(0,1)},
unit interval [0,1], unit tetrahedron, unit square.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

from .errors import SingularMass, UnsupportedDegree

MAX_DEGREE = 9


def n_dofs(deg: int, dim: int) -> int:
    """Number of modal coefficients for polynomials of total degree <= deg."""
    out = 1
    for m in range(1, dim + 1):
        out = out * (deg + m)
    return out // math.factorial(dim)


@lru_cache(maxsize=None)
def spatial_exponents(deg: int) -> np.ndarray:
    """(L,2) exponent table, graded lexicographic: total degree, then p descending."""
    rows = []
    for g in range(deg + 1):
        for p in range(g, -1, -1):
            rows.append((p, g - p))
    e = np.array(rows, dtype=np.int64)
    assert len(e) == n_dofs(deg, 2)
    return e


@lru_cache(maxsize=None)
def st_exponents(deg: int) -> np.ndarray:
    """(L,3) space-time exponents (p,q,r): total degree, then r ascending, then p descending."""
    rows = []
    for g in range(deg + 1):
        for r in range(g + 1):
            for p in range(g - r, -1, -1):
                rows.append((p, g - r - p, r))
    e = np.array(rows, dtype=np.int64)
    assert len(e) == n_dofs(deg, 3)
    return e


@lru_cache(maxsize=None)
def spatial_mode_map(deg: int) -> np.ndarray:
    """Indices into st_exponents(deg) of the r=0 modes, ordered like spatial_exponents(deg)."""
    st = st_exponents(deg)
    sp = spatial_exponents(deg)
    lut = {(p, q, r): i for i, (p, q, r) in enumerate(map(tuple, st))}
    return np.array([lut[(p, q, 0)] for p, q in map(tuple, sp)], dtype=np.int64)


def _fact(n: np.ndarray) -> np.ndarray:
    return np.array([math.factorial(int(k)) for k in np.ravel(n)], dtype=float).reshape(np.shape(n))


def _power_table(z: np.ndarray, pmax: int) -> np.ndarray:
    """pw[..., p] = z**p / p! for p = 0..pmax."""
    out = np.empty(z.shape + (pmax + 1,))
    out[..., 0] = 1.0
    for p in range(1, pmax + 1):
        out[..., p] = out[..., p - 1] * z / p
    return out


def eval_spatial(pts, xb, h, deg: int, grad: bool = False):
    """Evaluate the spatial modal basis at pts.

    pts: (...,2); xb: (...,2) broadcastable anchor; h: (...) scalar lengths.
    Returns vals (..., L) and optionally gradients (..., L, 2).
    """
    ex = spatial_exponents(deg)
    zx = (pts[..., 0] - xb[..., 0]) / h
    zy = (pts[..., 1] - xb[..., 1]) / h
    px = _power_table(zx, deg)
    py = _power_table(zy, deg)
    vals = px[..., ex[:, 0]] * py[..., ex[:, 1]]
    if not grad:
        return vals
    # d/dx [z^p/p! h^p] = z^(p-1)/(p-1)! / h^p * ... -> pw[p-1]/h
    dpx = np.zeros_like(px)
    dpx[..., 1:] = px[..., :-1]
    dpy = np.zeros_like(py)
    dpy[..., 1:] = py[..., :-1]
    hh = h[..., None] if np.ndim(h) else h
    g = np.stack(
        [dpx[..., ex[:, 0]] * py[..., ex[:, 1]] / hh,
         px[..., ex[:, 0]] * dpy[..., ex[:, 1]] / hh],
        axis=-1,
    )
    return vals, g


def eval_st(pts_xyt, xb, h, t0, dt, deg: int, grad: bool = False):
    """Space-time modal basis theta at (x,y,t) points.

    pts_xyt: (...,3); anchor (xb, t0), scalings (h, dt).
    Returns vals (..., Q) and optionally space-time gradients (..., Q, 3).
    """
    ex = st_exponents(deg)
    zx = (pts_xyt[..., 0] - xb[..., 0]) / h
    zy = (pts_xyt[..., 1] - xb[..., 1]) / h
    zt = (pts_xyt[..., 2] - t0) / dt
    px = _power_table(zx, deg)
    py = _power_table(zy, deg)
    pt = _power_table(zt, deg)
    vals = px[..., ex[:, 0]] * py[..., ex[:, 1]] * pt[..., ex[:, 2]]
    if not grad:
        return vals
    dpx = np.zeros_like(px)
    dpx[..., 1:] = px[..., :-1]
    dpy = np.zeros_like(py)
    dpy[..., 1:] = py[..., :-1]
    dpt = np.zeros_like(pt)
    dpt[..., 1:] = pt[..., :-1]
    hh = h[..., None] if np.ndim(h) else h
    g = np.stack(
        [dpx[..., ex[:, 0]] * py[..., ex[:, 1]] * pt[..., ex[:, 2]] / hh,
         px[..., ex[:, 0]] * dpy[..., ex[:, 1]] * pt[..., ex[:, 2]] / hh,
         px[..., ex[:, 0]] * py[..., ex[:, 1]] * dpt[..., ex[:, 2]] / dt],
        axis=-1,
    )
    return vals, g


def eval_moving_test(pts_xyt, xb_n, xb_p, h, t0, dt, deg: int, grad: bool = False):
    """Moving modal test functions tied to the barycenter path xb(t).

    xb(t) interpolates linearly from xb_n at t0 to xb_p at t0+dt, so the
    functions coincide with the plain spatial basis at both endpoints.
    Space-time gradient carries the -xb'(t).grad chain-rule time component.
    """
    tau = (pts_xyt[..., 2] - t0) / dt
    xb = np.stack(
        [xb_n[..., 0] * (1.0 - tau) + xb_p[..., 0] * tau,
         xb_n[..., 1] * (1.0 - tau) + xb_p[..., 1] * tau],
        axis=-1,
    )
    if not grad:
        return eval_spatial(pts_xyt[..., :2], xb, h, deg, grad=False)
    vals, gxy = eval_spatial(pts_xyt[..., :2], xb, h, deg, grad=True)
    vdot = np.stack([(xb_p[..., 0] - xb_n[..., 0]) / dt,
                     (xb_p[..., 1] - xb_n[..., 1]) / dt], axis=-1)
    gt = -(gxy[..., 0] * vdot[..., None, 0] + gxy[..., 1] * vdot[..., None, 1])
    g = np.concatenate([gxy, gt[..., None]], axis=-1)
    return vals, g


# ---------------------------------------------------------------------------
# quadrature rules


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n, dim) reference coordinates
    weights: np.ndarray  # (n,)
    exactness: int


@lru_cache(maxsize=None)
def gl_rule(n: int) -> QuadratureRule:
    """Gauss-Legendre on [0,1]."""
    if n < 1 or n > 40:
        raise UnsupportedDegree(f"GL rule with {n} points")
    x, w = leggauss(n)
    return QuadratureRule(((x + 1.0) / 2.0)[:, None], w / 2.0, 2 * n - 1)


@lru_cache(maxsize=None)
def tri_rule(n: int) -> QuadratureRule:
    """Conical-product rule on the unit triangle, (n x n) points, exact to degree 2n-1."""
    if n < 1 or n > 20:
        raise UnsupportedDegree(f"triangle rule with {n}^2 points")
    xg, wg = leggauss(n)
    xg = (xg + 1.0) / 2.0
    wg = wg / 2.0
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    xj = (xj + 1.0) / 2.0
    wj = wj / 4.0  # interval map 1/2 and weight (1-x) scaling 1/2
    u = np.repeat(xj, n)
    v = np.tile(xg, n)
    pts = np.stack([u, (1.0 - u) * v], axis=-1)
    w = np.repeat(wj, n) * np.tile(wg, n)
    return QuadratureRule(pts, w, 2 * n - 1)


@lru_cache(maxsize=None)
def tet_rule(n: int) -> QuadratureRule:
    """Conical-product rule on the unit tetrahedron, n^3 points, exact to degree 2n-1."""
    if n < 1 or n > 15:
        raise UnsupportedDegree(f"tet rule with {n}^3 points")
    xg, wg = leggauss(n)
    xg = (xg + 1.0) / 2.0
    wg = wg / 2.0
    x1, w1 = roots_jacobi(n, 1.0, 0.0)
    x1 = (x1 + 1.0) / 2.0
    w1 = w1 / 4.0
    x2, w2 = roots_jacobi(n, 2.0, 0.0)
    x2 = (x2 + 1.0) / 2.0
    w2 = w2 / 8.0
    u = np.repeat(x2, n * n)
    v = np.repeat(np.tile(x1, n), n)
    s = np.tile(xg, n * n)
    pts = np.stack([u, (1.0 - u) * v, (1.0 - u) * (1.0 - v) * s], axis=-1)
    w = np.repeat(w2, n * n) * np.repeat(np.tile(w1, n), n) * np.tile(wg, n * n)
    return QuadratureRule(pts, w, 2 * n - 1)


@lru_cache(maxsize=None)
def square_rule(n: int) -> QuadratureRule:
    """Tensor Gauss-Legendre on the unit square (chi, tau)."""
    g = gl_rule(n)
    x = g.points[:, 0]
    pts = np.stack([np.repeat(x, n), np.tile(x, n)], axis=-1)
    w = np.repeat(g.weights, n) * np.tile(g.weights, n)
    return QuadratureRule(pts, w, 2 * n - 1)


def quadrature_prism(deg: int):
    """Reference rule for oblique triangular space-time prisms.

    Returns (tri QuadratureRule, tau QuadratureRule); combined they integrate
    basis products of degree deg exactly (deg+... the tau rule carries two
    extra orders for the quadratic-in-tau geometry factor).
    """
    n = deg // 2 + 1
    return tri_rule(n), gl_rule(n + 1)


def quadrature_sliver(deg: int) -> QuadratureRule:
    return tet_rule(deg // 2 + 1)


def quadrature_face(deg: int) -> QuadratureRule:
    return square_rule(deg // 2 + 2)


# ---------------------------------------------------------------------------
# bilinear space-time faces


def face_geometry(X, rule: QuadratureRule):
    """Quadrature data for a bilinear space-time patch.

    X: (...,4,3) patch nodes ordered (bottom A, bottom B, top B, top A);
    degenerate triangular faces carry two coincident nodes.
    Returns physical points (...,n,3) and the unnormalized outward normal
    times the area element, (...,n,3): integral f dS = sum w * f * |nrm|.
    """
    chi = rule.points[:, 0]
    tau = rule.points[:, 1]
    b = np.stack([(1 - chi) * (1 - tau), chi * (1 - tau), chi * tau, (1 - chi) * tau], axis=-1)
    db_chi = np.stack([-(1 - tau), (1 - tau), tau, -tau], axis=-1)
    db_tau = np.stack([-(1 - chi), -chi, chi, 1 - chi], axis=-1)
    pts = np.einsum("nk,...kd->...nd", b, X)
    t1 = np.einsum("nk,...kd->...nd", db_chi, X)
    t2 = np.einsum("nk,...kd->...nd", db_tau, X)
    nrm = np.cross(t1, t2)
    return pts, nrm


def face_normal_integral(X, rule: QuadratureRule):
    """Integral of the outward normal over the patch (closure checks)."""
    _, nrm = face_geometry(X, rule)
    return np.einsum("n,...nd->...d", rule.weights, nrm)


def face_area(X, rule: QuadratureRule) -> np.ndarray:
    _, nrm = face_geometry(X, rule)
    return np.einsum("n,...n->...", rule.weights, np.linalg.norm(nrm, axis=-1))


# ---------------------------------------------------------------------------
# moments and mass matrices


@lru_cache(maxsize=None)
def mono_exponents(deg: int) -> np.ndarray:
    return spatial_exponents(deg)


def mono_index(deg: int):
    ex = mono_exponents(deg)
    lut = np.full((deg + 1, deg + 1), -1, dtype=np.int64)
    for i, (p, q) in enumerate(ex):
        lut[p, q] = i
    return lut


def polygon_moments(verts: np.ndarray, anchor: np.ndarray, deg: int) -> np.ndarray:
    """Raw moments int (x-ax)^p (y-ay)^q dA of one CCW polygon, p+q <= deg."""
    ex = mono_exponents(deg)
    ngl = deg // 2 + 2
    g = gl_rule(ngl)
    s = g.points[:, 0]
    v0 = verts - anchor
    v1 = np.roll(verts, -1, axis=0) - anchor
    xs = v0[:, None, 0] * (1 - s) + v1[:, None, 0] * s
    ys = v0[:, None, 1] * (1 - s) + v1[:, None, 1] * s
    dy = v1[:, 1] - v0[:, 1]
    px = _power_table(xs, deg + 1) * _fact(np.arange(deg + 2))  # plain powers
    py = _power_table(ys, deg) * _fact(np.arange(deg + 1))
    out = np.empty(len(ex))
    for i, (p, q) in enumerate(ex):
        integ = np.einsum("es,s->e", px[:, :, p + 1] * py[:, :, q], g.weights)
        out[i] = np.sum(integ * dy) / (p + 1)
    return out


def shift_moments(moms: np.ndarray, d: np.ndarray, deg: int) -> np.ndarray:
    """Re-anchor raw moments by anchor displacement d = old_anchor - new_anchor.

    (x - new)^p = sum_a C(p,a) (x - old)^a d^(p-a).  Vectorized over leading dims.
    """
    ex = mono_exponents(deg)
    lut = mono_index(deg)
    dx = d[..., 0]
    dy = d[..., 1]
    pdx = _power_table(dx, deg) * _fact(np.arange(deg + 1))
    pdy = _power_table(dy, deg) * _fact(np.arange(deg + 1))
    out = np.zeros(moms.shape)
    for i, (p, q) in enumerate(ex):
        acc = np.zeros(moms.shape[:-1])
        for a in range(p + 1):
            ca = math.comb(p, a)
            for b in range(q + 1):
                acc = acc + (ca * math.comb(q, b)) * pdx[..., p - a] * pdy[..., q - b] \
                    * moms[..., lut[a, b]]
        out[..., i] = acc
    return out


def basis_integrals_from_moments(moms: np.ndarray, h, deg: int) -> np.ndarray:
    """int phi_l dA for each basis function from raw moments about the anchor."""
    ex = spatial_exponents(deg)
    lut = mono_index(deg)
    idx = lut[ex[:, 0], ex[:, 1]]
    scale = _fact(ex[:, 0]) * _fact(ex[:, 1])
    hh = np.asarray(h)[..., None] ** (ex[:, 0] + ex[:, 1]).astype(float)
    return moms[..., idx] / (scale * hh)


def mass_from_moments(moms: np.ndarray, h, deg_row: int, deg_col: int) -> np.ndarray:
    """Spatial mass matrix int phi_k phi_l dA (shared anchor and h) from raw moments.

    moms must cover degree deg_row + deg_col.
    """
    er = spatial_exponents(deg_row)
    ec = spatial_exponents(deg_col)
    lut = mono_index(deg_row + deg_col)
    idx = lut[er[:, None, 0] + ec[None, :, 0], er[:, None, 1] + ec[None, :, 1]]
    scale = (_fact(er[:, 0]) * _fact(er[:, 1]))[:, None] * (_fact(ec[:, 0]) * _fact(ec[:, 1]))[None, :]
    pw = (er[:, None, 0] + ec[None, :, 0] + er[:, None, 1] + ec[None, :, 1]).astype(float)
    hh = np.asarray(h)[..., None, None] ** pw
    return moms[..., idx] / (scale * hh)


def rescale_coeffs(coeffs: np.ndarray, h_old, h_new, deg: int) -> np.ndarray:
    """Coefficients of the same polynomial after changing the h normalization."""
    ex = spatial_exponents(deg)
    ratio = (np.asarray(h_new) / np.asarray(h_old))[..., None] ** (ex[:, 0] + ex[:, 1]).astype(float)
    return coeffs * ratio[..., None] if coeffs.ndim == ratio.ndim + 1 else coeffs * ratio


def project(func, verts: np.ndarray, anchor: np.ndarray, h: float, deg: int,
            quad_n: int | None = None) -> np.ndarray:
    """L2-project func(x) -> (...,nvar) onto the modal basis of one polygon.

    The polygon is fanned from the anchor into sub-triangles for quadrature.
    """
    n = quad_n if quad_n is not None else (deg + 2)
    rule = tri_rule(n)
    v0 = verts
    v1 = np.roll(verts, -1, axis=0)
    e1 = v0 - anchor
    e2 = v1 - anchor
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    pts = anchor + rule.points[None, :, 0:1] * e1[:, None, :] + rule.points[None, :, 1:2] * e2[:, None, :]
    w = det[:, None] * rule.weights[None, :]
    phi = eval_spatial(pts, np.asarray(anchor), h, deg)
    f = np.asarray(func(pts.reshape(-1, 2))).reshape(pts.shape[0], pts.shape[1], -1)
    rhs = np.einsum("ep,epl,epv->lv", w, phi, f)
    mm = np.einsum("ep,epk,epl->kl", w, phi, phi)
    try:
        return np.linalg.solve(mm, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMass("degenerate projection region") from exc
