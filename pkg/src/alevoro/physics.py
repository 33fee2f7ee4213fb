"""Hyperbolic systems: compressible Euler, Euler with gravity, ideal GLM-MHD.

All systems expose conserved-variable fluxes, signal speeds, primitive
conversions and admissibility in the common form Q_t + div F(Q) = S(Q).
MHD uses Gaussian units with the explicit 1/(4 pi), 1/(8 pi) factors and an
extra scalar psi transporting divergence errors at the cleaning speed c_h.
"""

from __future__ import annotations

import numpy as np

from .errors import NonAdmissibleState

ADMISSIBLE_EPS = 1e-12
_CS_H = 1e-200  # complex-step width; exact to machine precision


class HyperbolicSystem:
    """Abstract physics interface; states are arrays (..., nvar)."""

    nvar: int = 0
    name: str = ""

    def flux(self, Q):
        raise NotImplementedError

    def st_flux(self, Q):
        """Space-time flux tensor (f, g, Q), shape (..., nvar, 3)."""
        F = self.flux(Q)
        return np.concatenate([F, Q[..., None]], axis=-1)

    def source(self, Q, x=None):
        return np.zeros_like(Q)

    def has_source(self) -> bool:
        return False

    def max_signal_speed(self, Q, n=None, vn=0.0):
        raise NotImplementedError

    def jacobian_n(self, Q, n, vn=0.0):
        """ALE Jacobian d(F.n)/dQ - vn*I for unit spatial normal n."""
        return self._jacobian_cs(Q, n, vn)

    def _jacobian_cs(self, Q, n, vn):
        # complex-step differentiation of the directional flux
        Qc = Q.astype(complex)
        nv = self.nvar
        out = np.empty(Q.shape + (nv,))
        for k in range(nv):
            Qp = Qc.copy()
            Qp[..., k] += 1j * _CS_H
            Fn = np.einsum("...vd,...d->...v", self.flux(Qp), n)
            out[..., k] = Fn.imag / _CS_H
        out -= np.asarray(vn)[..., None, None] * np.eye(nv)
        return out

    def eigen_decomposition(self, Q, n, vn=0.0):
        """(R, lam, Rinv) of the ALE Jacobian; raises on complex spectra.

        Conjugate eigen-pairs produced for repeated real eigenvalues are
        replaced by the real/imaginary parts of one member, which spans the
        same invariant subspace with a well-conditioned real basis.
        """
        A = self.jacobian_n(Q, n, vn)
        lam, R = np.linalg.eig(A)
        scale = np.abs(lam).max() + 1.0
        if np.abs(lam.imag).max() > 1e-8 * scale:
            raise NonAdmissibleState("complex eigenvalue in flux Jacobian")
        first = lam.imag > 0
        second = np.zeros_like(first)
        second[..., 1:] = first[..., :-1]
        R = np.where(second[..., None, :], np.roll(R.imag, 1, axis=-1), R.real)
        lam = lam.real
        Rinv = np.linalg.inv(R)
        return R, lam, Rinv

    def cons_to_prim(self, Q):
        raise NotImplementedError

    def prim_to_cons(self, V):
        raise NotImplementedError

    def density_pressure(self, Q):
        raise NotImplementedError

    def is_admissible(self, Q):
        rho, p = self.density_pressure(Q)
        return (rho > ADMISSIBLE_EPS) & (p > ADMISSIBLE_EPS)

    def velocity(self, Q):
        return Q[..., 1:3] / Q[..., 0:1]

    def mirror_state(self, Q, n):
        raise NotImplementedError


class Euler(HyperbolicSystem):
    """Homogeneous compressible Euler equations, ideal-gas EOS."""

    nvar = 4
    name = "euler"

    def __init__(self, gamma: float = 1.4):
        self.gamma = gamma

    def pressure(self, Q):
        return (self.gamma - 1.0) * (Q[..., 3] - 0.5 * (Q[..., 1] ** 2 + Q[..., 2] ** 2) / Q[..., 0])

    def density_pressure(self, Q):
        return Q[..., 0], self.pressure(Q)

    def flux(self, Q):
        rho = Q[..., 0]
        u = Q[..., 1] / rho
        v = Q[..., 2] / rho
        p = self.pressure(Q)
        he = Q[..., 3] + p
        F = np.empty(Q.shape + (2,), dtype=Q.dtype)
        F[..., 0, 0] = Q[..., 1]
        F[..., 1, 0] = Q[..., 1] * u + p
        F[..., 2, 0] = Q[..., 2] * u
        F[..., 3, 0] = he * u
        F[..., 0, 1] = Q[..., 2]
        F[..., 1, 1] = Q[..., 1] * v
        F[..., 2, 1] = Q[..., 2] * v + p
        F[..., 3, 1] = he * v
        return F

    def sound_speed(self, Q):
        rho, p = self.density_pressure(Q)
        return np.sqrt(self.gamma * p / rho)

    def max_signal_speed(self, Q, n=None, vn=0.0):
        c = self.sound_speed(Q)
        u = Q[..., 1] / Q[..., 0]
        v = Q[..., 2] / Q[..., 0]
        if n is None:
            return np.hypot(u, v) + c
        un = u * n[..., 0] + v * n[..., 1]
        return np.abs(un - vn) + c

    def jacobian_n(self, Q, n, vn=0.0):
        g = self.gamma
        rho = Q[..., 0]
        u = Q[..., 1] / rho
        v = Q[..., 2] / rho
        nx = n[..., 0]
        ny = n[..., 1]
        un = u * nx + v * ny
        q2 = u * u + v * v
        phi = 0.5 * (g - 1.0) * q2
        p = self.pressure(Q)
        H = (Q[..., 3] + p) / rho
        A = np.zeros(Q.shape + (4,))
        A[..., 0, 1] = nx
        A[..., 0, 2] = ny
        A[..., 1, 0] = phi * nx - u * un
        A[..., 1, 1] = un + (2.0 - g) * u * nx
        A[..., 1, 2] = u * ny - (g - 1.0) * v * nx
        A[..., 1, 3] = (g - 1.0) * nx
        A[..., 2, 0] = phi * ny - v * un
        A[..., 2, 1] = v * nx - (g - 1.0) * u * ny
        A[..., 2, 2] = un + (2.0 - g) * v * ny
        A[..., 2, 3] = (g - 1.0) * ny
        A[..., 3, 0] = un * (phi - H)
        A[..., 3, 1] = H * nx - (g - 1.0) * u * un
        A[..., 3, 2] = H * ny - (g - 1.0) * v * un
        A[..., 3, 3] = g * un
        A -= np.asarray(vn)[..., None, None] * np.eye(4)
        return A

    def cons_to_prim(self, Q):
        V = np.empty_like(Q)
        V[..., 0] = Q[..., 0]
        V[..., 1] = Q[..., 1] / Q[..., 0]
        V[..., 2] = Q[..., 2] / Q[..., 0]
        V[..., 3] = self.pressure(Q)
        return V

    def prim_to_cons(self, V):
        Q = np.empty_like(V)
        Q[..., 0] = V[..., 0]
        Q[..., 1] = V[..., 0] * V[..., 1]
        Q[..., 2] = V[..., 0] * V[..., 2]
        Q[..., 3] = V[..., 3] / (self.gamma - 1.0) + 0.5 * V[..., 0] * (V[..., 1] ** 2 + V[..., 2] ** 2)
        return Q

    def mirror_state(self, Q, n):
        out = Q.copy()
        mn = Q[..., 1] * n[..., 0] + Q[..., 2] * n[..., 1]
        out[..., 1] = Q[..., 1] - 2.0 * mn * n[..., 0]
        out[..., 2] = Q[..., 2] - 2.0 * mn * n[..., 1]
        return out


class EulerGravity(Euler):
    """Euler equations with the gravity source S = (0, 0, -g rho, -g rho v)."""

    name = "euler_gravity"

    def __init__(self, gamma: float = 1.4, g: float = -0.1):
        super().__init__(gamma)
        self.g = g

    def has_source(self) -> bool:
        return True

    def source(self, Q, x=None):
        S = np.zeros_like(Q)
        S[..., 2] = -self.g * Q[..., 0]
        S[..., 3] = -self.g * Q[..., 2]
        return S


class IdealMHD(HyperbolicSystem):
    """Ideal classical MHD with GLM divergence cleaning (Gaussian units)."""

    nvar = 9
    name = "mhd"

    def __init__(self, gamma: float = 1.4, ch: float = 1.0):
        self.gamma = gamma
        self.ch = ch

    def pressure(self, Q):
        rho = Q[..., 0]
        kin = 0.5 * (Q[..., 1] ** 2 + Q[..., 2] ** 2 + Q[..., 3] ** 2) / rho
        mag = (Q[..., 5] ** 2 + Q[..., 6] ** 2 + Q[..., 7] ** 2) / (8.0 * np.pi)
        return (self.gamma - 1.0) * (Q[..., 4] - kin - mag)

    def density_pressure(self, Q):
        return Q[..., 0], self.pressure(Q)

    def flux(self, Q):
        rho = Q[..., 0]
        v = Q[..., 1:4] / rho[..., None]
        B = Q[..., 5:8]
        psi = Q[..., 8]
        p = self.pressure(Q)
        pt = p + (B ** 2).sum(axis=-1) / (8.0 * np.pi)
        vB = (v * B).sum(axis=-1)
        F = np.zeros(Q.shape + (2,), dtype=Q.dtype)
        for d in range(2):
            vd = v[..., d]
            Bd = B[..., d]
            F[..., 0, d] = rho * vd
            for i in range(3):
                F[..., 1 + i, d] = rho * v[..., i] * vd - B[..., i] * Bd / (4.0 * np.pi)
            F[..., 1 + d, d] += pt
            F[..., 4, d] = vd * (Q[..., 4] + pt) - Bd * vB / (4.0 * np.pi)
            for i in range(3):
                F[..., 5 + i, d] = vd * B[..., i] - Bd * v[..., i]
            F[..., 5 + d, d] += psi
            F[..., 8, d] = self.ch ** 2 * Bd
        return F

    def has_source(self) -> bool:
        return False

    def fast_speed(self, Q, n=None):
        """Fast magnetosonic speed along n (max over directions if n is None)."""
        rho, p = self.density_pressure(Q)
        c2 = self.gamma * p / rho
        b2 = (Q[..., 5:8] ** 2).sum(axis=-1) / (4.0 * np.pi * rho)
        if n is None:
            return np.sqrt(c2 + b2)
        bn2 = (Q[..., 5] * n[..., 0] + Q[..., 6] * n[..., 1]) ** 2 / (4.0 * np.pi * rho)
        s = c2 + b2
        disc = np.sqrt(np.maximum(s * s - 4.0 * c2 * bn2, 0.0))
        return np.sqrt(0.5 * (s + disc))

    def max_signal_speed(self, Q, n=None, vn=0.0):
        cf = self.fast_speed(Q, n)
        if n is None:
            spd = np.linalg.norm(Q[..., 1:3], axis=-1) / Q[..., 0] + cf
            return np.maximum(spd, self.ch)
        un = (Q[..., 1] * n[..., 0] + Q[..., 2] * n[..., 1]) / Q[..., 0]
        return np.maximum(np.abs(un - vn) + cf, self.ch + np.abs(np.asarray(vn)))

    def cons_to_prim(self, Q):
        V = Q.copy()
        V[..., 1:4] = Q[..., 1:4] / Q[..., 0:1]
        V[..., 4] = self.pressure(Q)
        return V

    def prim_to_cons(self, V):
        Q = V.copy()
        Q[..., 1:4] = V[..., 1:4] * V[..., 0:1]
        kin = 0.5 * V[..., 0] * (V[..., 1] ** 2 + V[..., 2] ** 2 + V[..., 3] ** 2)
        mag = (V[..., 5] ** 2 + V[..., 6] ** 2 + V[..., 7] ** 2) / (8.0 * np.pi)
        Q[..., 4] = V[..., 4] / (self.gamma - 1.0) + kin + mag
        return Q

    def mirror_state(self, Q, n):
        out = Q.copy()
        mn = Q[..., 1] * n[..., 0] + Q[..., 2] * n[..., 1]
        out[..., 1] = Q[..., 1] - 2.0 * mn * n[..., 0]
        out[..., 2] = Q[..., 2] - 2.0 * mn * n[..., 1]
        bn = Q[..., 5] * n[..., 0] + Q[..., 6] * n[..., 1]
        out[..., 5] = Q[..., 5] - 2.0 * bn * n[..., 0]
        out[..., 6] = Q[..., 6] - 2.0 * bn * n[..., 1]
        return out


def make_system(name: str, gamma: float = 1.4, gravity_g: float = -0.1,
                glm_ch: float = 1.0) -> HyperbolicSystem:
    if name == "euler":
        return Euler(gamma)
    if name == "euler_gravity":
        return EulerGravity(gamma, gravity_g)
    if name == "mhd":
        return IdealMHD(gamma, glm_ch)
    raise ValueError(f"unknown system '{name}'")
