"""Generator motion: local velocities, high-order trajectories, smoothing.

Trajectories are integrated with a truncated Taylor series whose time
derivatives come from the stationary-field chain rule
    x' = v,  x'' = (grad v) v,  ...
with velocity derivatives recovered either from a prescribed analytic field
or from the modal reconstruction of (rho v)/rho via the quotient rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import basis
from .errors import BadConfig
from .geometry import GeneratorSet, VoronoiMesh, build_delaunay


@dataclass
class MotionConfig:
    trajectory_order: int = 1
    smoothing: str = "none"  # none | lloyd | laplacian
    smoothing_F: float = 0.0
    cfl: float = 0.45
    dt_max: float = 1e30

    def __post_init__(self):
        if not 1 <= self.trajectory_order <= 4:
            raise BadConfig(f"trajectory_order {self.trajectory_order} not in 1..4")
        if self.smoothing not in ("none", "lloyd", "laplacian"):
            raise BadConfig(f"unknown smoothing '{self.smoothing}'")
        if self.smoothing_F < 0:
            raise BadConfig("smoothing_F must be >= 0")
        if not 0 < self.cfl < 0.5:
            raise BadConfig("CFL must satisfy 0 < CFL < 1/2 in two dimensions")


# ---------------------------------------------------------------------------
# prescribed velocity fields


class VelocityField:
    """Stationary prescribed velocity field with optional analytic derivatives."""

    def v(self, x):
        raise NotImplementedError

    def jac(self, x):  # (..., i, j) = dv_i/dx_j
        raise NotImplementedError

    def hess(self, x):  # (..., i, j, k)
        raise NotImplementedError

    def third(self, x):  # (..., i, j, k, l)
        raise NotImplementedError

    def max_order(self) -> int:
        for order, name in ((4, "third"), (3, "hess"), (2, "jac")):
            try:
                getattr(self, name)(np.zeros((1, 2)))
                return order
            except NotImplementedError:
                continue
        return 1


class RigidRotation(VelocityField):
    def __init__(self, center=(0.0, 0.0), omega: float = 1.0):
        self.center = np.asarray(center, dtype=float)
        self.omega = omega

    def v(self, x):
        r = x - self.center
        return self.omega * np.stack([-r[..., 1], r[..., 0]], axis=-1)

    def jac(self, x):
        J = np.zeros(x.shape[:-1] + (2, 2))
        J[..., 0, 1] = -self.omega
        J[..., 1, 0] = self.omega
        return J

    def hess(self, x):
        return np.zeros(x.shape[:-1] + (2, 2, 2))

    def third(self, x):
        return np.zeros(x.shape[:-1] + (2, 2, 2, 2))


class LinearField(VelocityField):
    def __init__(self, A):
        self.A = np.asarray(A, dtype=float)

    def v(self, x):
        return np.einsum("ij,...j->...i", self.A, x)

    def jac(self, x):
        return np.broadcast_to(self.A, x.shape[:-1] + (2, 2)).copy()

    def hess(self, x):
        return np.zeros(x.shape[:-1] + (2, 2, 2))

    def third(self, x):
        return np.zeros(x.shape[:-1] + (2, 2, 2, 2))


class SinusoidalVortexField(VelocityField):
    """Vortical field varying sinusoidally with exponential radial damping."""

    def __init__(self, x0=5.0, y0=5.0, ell=10.0, k=0.1):
        self.x0, self.y0, self.ell, self.k = x0, y0, ell, k

    def _parts(self, x):
        X = x[..., 0] - self.x0
        Y = x[..., 1] - self.y0
        r = np.sqrt(X * X + Y * Y)
        e = np.exp(-self.k * r)
        a = 2.0 * np.pi / self.ell
        b = np.pi / self.ell
        return X, Y, r, e, a, b

    def v(self, x):
        X, Y, r, e, a, b = self._parts(x)
        u = -np.sin(a * Y) * np.cos(b * X) * e
        w = np.cos(b * Y) * np.sin(a * X) * e
        return np.stack([u, w], axis=-1)

    def jac(self, x):
        X, Y, r, e, a, b = self._parts(x)
        rs = np.where(r > 1e-300, r, 1.0)
        drx = np.where(r > 1e-300, X / rs, 0.0)
        dry = np.where(r > 1e-300, Y / rs, 0.0)
        J = np.empty(x.shape[:-1] + (2, 2))
        sa, ca = np.sin(a * Y), np.cos(a * Y)
        sb, cb = np.sin(b * X), np.cos(b * X)
        J[..., 0, 0] = (sa * sb * b) * e + (-sa * cb) * e * (-self.k * drx)
        J[..., 0, 1] = (-a * ca * cb) * e + (-sa * cb) * e * (-self.k * dry)
        sa2, ca2 = np.sin(a * X), np.cos(a * X)
        sb2, cb2 = np.sin(b * Y), np.cos(b * Y)
        J[..., 1, 0] = (cb2 * a * ca2) * e + (cb2 * sa2) * e * (-self.k * drx)
        J[..., 1, 1] = (-b * sb2 * sa2) * e + (cb2 * sa2) * e * (-self.k * dry)
        return J


class IsentropicVortexField(VelocityField):
    """Exact velocity perturbation of the stationary isentropic vortex."""

    def __init__(self, center=(5.0, 5.0), eps: float = 5.0):
        self.center = np.asarray(center, dtype=float)
        self.eps = eps

    def v(self, x):
        r = x - self.center
        r2 = (r ** 2).sum(axis=-1)
        amp = self.eps / (2.0 * np.pi) * np.exp(0.5 * (1.0 - r2))
        return amp[..., None] * np.stack([-r[..., 1], r[..., 0]], axis=-1)

    def jac(self, x):
        r = x - self.center
        X, Y = r[..., 0], r[..., 1]
        r2 = X * X + Y * Y
        amp = self.eps / (2.0 * np.pi) * np.exp(0.5 * (1.0 - r2))
        J = np.empty(x.shape[:-1] + (2, 2))
        J[..., 0, 0] = amp * (X * Y)
        J[..., 0, 1] = amp * (Y * Y - 1.0)
        J[..., 1, 0] = amp * (1.0 - X * X)
        J[..., 1, 1] = amp * (-X * Y)
        return J


# ---------------------------------------------------------------------------
# fluid velocity and its spatial derivatives from modal data


def _poly_derivatives(mesh: VoronoiMesh, coeffs, deg: int, order: int, x):
    """Derivatives d^(a,b) of modal component arrays at per-cell points x.

    coeffs: (Nc, L, nvar); x: (Nc, 2).  Returns dict {(a,b): (Nc, nvar)}.
    """
    ex = basis.spatial_exponents(deg)
    zx = (x[:, 0] - mesh.bary[:, 0]) / mesh.h
    zy = (x[:, 1] - mesh.bary[:, 1]) / mesh.h
    px = basis._power_table(zx, deg)
    py = basis._power_table(zy, deg)
    out = {}
    for a in range(order + 1):
        for b in range(order + 1 - a):
            mask = (ex[:, 0] >= a) & (ex[:, 1] >= b)
            vals = np.zeros((mesh.n_cells, len(ex)))
            idx = np.where(mask)[0]
            vals[:, idx] = px[:, ex[idx, 0] - a] * py[:, ex[idx, 1] - b]
            scale = mesh.h ** float(a + b)
            out[(a, b)] = np.einsum("cl,clv->cv", vals, coeffs) / scale[:, None]
    return out


def fluid_velocity_derivatives(mesh: VoronoiMesh, w_coeffs, deg: int, order: int,
                               x=None):
    """Velocity v = (rho v)/rho and derivatives up to `order`-1 at generator points.

    Returns (v, jac, hess, third) arrays; entries above the requested order are
    None.  Quotient-rule (Leibniz) recursion; derivatives beyond the modal
    degree vanish automatically.
    """
    if x is None:
        x = mesh.points[mesh.gen_of_cell]
    nder = order - 1
    dQ = _poly_derivatives(mesh, w_coeffs[:, :, :3], deg, nder, x)
    rho0 = dQ[(0, 0)][:, 0]
    dv = {}
    for g in range(nder + 1):
        for a in range(g, -1, -1):
            b = g - a
            acc = dQ[(a, b)][:, 1:3].copy()
            for aa in range(a + 1):
                for bb in range(b + 1):
                    if aa == a and bb == b:
                        continue
                    cb = math.comb(a, aa) * math.comb(b, bb)
                    acc -= cb * dv[(aa, bb)] * dQ[(a - aa, b - bb)][:, 0:1]
            dv[(a, b)] = acc / rho0[:, None]
    v = dv[(0, 0)]
    jac = hess = third = None
    if nder >= 1:
        jac = np.stack([dv[(1, 0)], dv[(0, 1)]], axis=-1)  # (..., i, j)
    if nder >= 2:
        hess = np.empty((len(v), 2, 2, 2))
        for j, k in ((0, 0), (0, 1), (1, 0), (1, 1)):
            a = (j == 0) + (k == 0)
            b = (j == 1) + (k == 1)
            hess[:, :, j, k] = dv[(a, b)]
    if nder >= 3:
        third = np.empty((len(v), 2, 2, 2, 2))
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    a = (j == 0) + (k == 0) + (l == 0)
                    b = 3 - a
                    third[:, :, j, k, l] = dv[(a, b)]
    return v, jac, hess, third


def taylor_displacement(v, jac, hess, third, dt: float, order: int):
    """Truncated Taylor displacement for a stationary velocity field."""
    disp = dt * v
    if order >= 2:
        a2 = np.einsum("...ij,...j->...i", jac, v)
        disp = disp + (dt ** 2 / 2.0) * a2
    if order >= 3:
        a3 = np.einsum("...ijk,...j,...k->...i", hess, v, v) \
            + np.einsum("...ij,...jk,...k->...i", jac, jac, v)
        disp = disp + (dt ** 3 / 6.0) * a3
    if order >= 4:
        a4 = (np.einsum("...ijkl,...j,...k,...l->...i", third, v, v, v)
              + np.einsum("...ijk,...kl,...l,...j->...i", hess, jac, v, v)
              + 2.0 * np.einsum("...ijk,...k,...jl,...l->...i", hess, v, jac, v)
              + np.einsum("...ij,...jkl,...l,...k->...i", jac, hess, v, v)
              + np.einsum("...ij,...jk,...kl,...l->...i", jac, jac, jac, v))
        disp = disp + (dt ** 4 / 24.0) * a4
    return disp


def generator_velocity(mesh: VoronoiMesh, w_coeffs, deg: int, system):
    """Fluid velocity of w_h at each generator; cell-average fallback when the
    pointwise state is inadmissible."""
    x = mesh.points[mesh.gen_of_cell]
    phi = basis.eval_spatial(x[:, None, :], mesh.bary[:, None, :], mesh.h[:, None], deg)[:, 0]
    Q = np.einsum("cl,clv->cv", phi, w_coeffs)
    bad = ~system.is_admissible(Q)
    if np.any(bad):
        mean = cell_means(mesh, w_coeffs, deg)
        Q[bad] = mean[bad]
    return system.velocity(Q)


def cell_means(mesh: VoronoiMesh, coeffs, deg: int):
    moms = mesh.moments(deg)
    ints = basis.basis_integrals_from_moments(moms, mesh.h, deg)
    return np.einsum("cl,clv->cv", ints, coeffs) / mesh.area[:, None]


# ---------------------------------------------------------------------------
# mesh-quality smoothing


def smooth_positions(candidates: np.ndarray, free_mask: np.ndarray, kind: str):
    """Quality-optimal generator positions from one weighted-average pass.

    For each generator, x* is the weight-averaged midpoint of the opposite
    edges of its incident triangles in the candidate Delaunay triangulation;
    weights are the opposite-edge lengths (lloyd) or unity (laplacian).
    """
    simplices, _, hull = build_delaunay(candidates)
    pts = candidates
    acc = np.zeros_like(pts)
    wacc = np.zeros(len(pts))
    for j in range(3):
        tgt = simplices[:, j]
        o1 = pts[simplices[:, (j + 1) % 3]]
        o2 = pts[simplices[:, (j + 2) % 3]]
        if kind == "lloyd":
            w = np.linalg.norm(o1 - o2, axis=1)
        else:
            w = np.ones(len(simplices))
        np.add.at(acc, tgt, 0.5 * (o1 + o2) * w[:, None])
        np.add.at(wacc, tgt, w)
    out = candidates.copy()
    ok = free_mask & (wacc > 0)
    out[ok] = acc[ok] / wacc[ok, None]
    return out


def blend_factor(u_star: float, dt: float, ds: float, F: float) -> float:
    """Blending mu between Lagrangian and smoothed positions, in [0, 1]."""
    if F <= 0.0 or u_star <= 0.0:
        return 0.0
    return min(1.0, math.sqrt(u_star * dt * F / ds))


def advance_generators(gens: GeneratorSet, mesh: VoronoiMesh, velocities,
                       derivs, dt: float, cfg: MotionConfig) -> GeneratorSet:
    """One motion step: Taylor trajectories, optional smoothing, blending."""
    v, jac, hess, third = derivs
    disp = taylor_displacement(v, jac, hess, third, dt, cfg.trajectory_order)
    cand = gens.positions.copy()
    cells = mesh.gen_of_cell
    cand[cells] = cand[cells] + disp
    cand[gens.fixed] = gens.positions[gens.fixed]
    if cfg.smoothing == "none" or cfg.smoothing_F == 0.0:
        return gens.moved(cand)
    star = smooth_positions(cand, ~gens.fixed, cfg.smoothing)
    u_star = float(np.linalg.norm(velocities, axis=1).max(initial=0.0))
    ds = float((mesh.area / mesh.perim).min())
    mu = blend_factor(u_star, dt, ds, cfg.smoothing_F)
    return gens.moved((1.0 - mu) * cand + mu * star)


def compute_timestep(mesh: VoronoiMesh, means, system, N: int, cfg: MotionConfig):
    """Global CFL time step from the per-cell bound."""
    lam = system.max_signal_speed(means)
    lam = np.maximum(lam, 1e-300)
    bound = cfg.cfl * mesh.area / ((2 * N + 1) * lam * mesh.perim)
    return float(min(bound.min(), cfg.dt_max))
