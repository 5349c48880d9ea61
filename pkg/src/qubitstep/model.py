"""Qubit rotation model U(theta, gamma) = exp[-i gamma (cos theta sx + sin theta sz)].

The probe is |0>, measured in the Z basis. All array functions broadcast over
``theta`` and ``gamma``; the dataclass wrappers are thin conveniences for
single points.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PARAM_NAMES = ("theta", "gamma")
ORDERINGS = ("gamma-first", "theta-first")

# below this an outcome probability counts as zero (0/0 -> 0 in the CFIM)
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ParamPoint:
    """A (theta, gamma) pair in radians.

    Construction keeps the raw values: Bayesian grids and prior draws routinely
    step outside the canonical cell, and the model is analytic everywhere.
    Use :meth:`normalized` for the canonical representative.
    """

    theta: float
    gamma: float

    def normalized(self) -> "ParamPoint":
        """Map into theta in [0, pi), gamma in [-pi/2, pi/2).

        Uses U(theta + pi, gamma) = U(theta, -gamma) and
        U(theta, gamma + pi) = -U(theta, gamma) (a global phase). Branch cuts:
        theta = pi maps to theta = 0 with gamma negated, and gamma = pi/2 maps
        to -pi/2.
        """
        theta = float(np.mod(self.theta, 2 * np.pi))
        gamma = float(self.gamma)
        # mod of a tiny negative number can round up to the period itself
        if theta >= 2 * np.pi:
            theta = 0.0
        if theta >= np.pi:
            theta = max(theta - np.pi, 0.0)
            gamma = -gamma
        g = float(np.mod(gamma + np.pi / 2, np.pi))
        gamma = (0.0 if g >= np.pi else g) - np.pi / 2
        return ParamPoint(theta, gamma)

    def swapped(self) -> tuple[float, float]:
        return self.gamma, self.theta


@dataclass(frozen=True)
class QubitState:
    amp0: complex
    amp1: complex

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)


@dataclass(frozen=True)
class InfoMatrix:
    """Symmetric 2x2 information matrix; ``order`` names index 1 and index 2."""

    m11: float
    m12: float
    m22: float
    order: tuple[str, str] = PARAM_NAMES

    @classmethod
    def from_array(cls, a, order: tuple[str, str] = PARAM_NAMES) -> "InfoMatrix":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0, 0]), float(0.5 * (a[0, 1] + a[1, 0])), float(a[1, 1]), tuple(order))

    @property
    def array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m12, self.m22]])

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m12

    @property
    def trace(self) -> float:
        return self.m11 + self.m22

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.array)

    def swapped(self) -> "InfoMatrix":
        return InfoMatrix(self.m22, self.m12, self.m11, (self.order[1], self.order[0]))

    def in_order(self, first: str) -> "InfoMatrix":
        """Return the same matrix with ``first`` as index 1."""
        if first not in self.order:
            raise ValueError(f"unknown parameter {first!r}")
        return self if self.order[0] == first else self.swapped()

    def scaled(self, factor: float) -> "InfoMatrix":
        return InfoMatrix(self.m11 * factor, self.m12 * factor, self.m22 * factor, self.order)


def first_param(ordering: str) -> str:
    """Name of the parameter estimated in the first stage."""
    if ordering == "gamma-first":
        return "gamma"
    if ordering == "theta-first":
        return "theta"
    raise ValueError(f"ordering must be one of {ORDERINGS}, got {ordering!r}")


def _unpack(p) -> tuple:
    if isinstance(p, ParamPoint):
        return p.theta, p.gamma
    theta, gamma = p
    return theta, gamma


# ---------------------------------------------------------------------------
# vectorized core


def state_amplitudes(theta, gamma):
    """Amplitudes of U|0> using exp[-i g n.s] = cos g I - i sin g n.s."""
    theta = np.asarray(theta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    cg, sg = np.cos(gamma), np.sin(gamma)
    amp0 = cg - 1j * sg * np.sin(theta)
    amp1 = -1j * sg * np.cos(theta)
    return amp0, amp1


def state_derivatives(theta, gamma):
    """Analytic (d/dtheta, d/dgamma) of U|0>, each as an (amp0, amp1) pair."""
    theta = np.asarray(theta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    cg, sg = np.cos(gamma), np.sin(gamma)
    ct, st = np.cos(theta), np.sin(theta)
    d_theta = (-1j * sg * ct, 1j * sg * st)
    d_gamma = (-sg - 1j * cg * st, -1j * cg * ct)
    return d_theta, d_gamma


def prob0(theta, gamma):
    """p0 = 1 - sin^2(gamma) cos^2(theta), clamped to [0, 1]."""
    theta = np.asarray(theta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    return np.clip(1.0 - (np.sin(gamma) * np.cos(theta)) ** 2, 0.0, 1.0)


def prob_jacobian_array(theta, gamma):
    """Array of shape (..., 2, 2): rows are outcomes (0, 1), columns (theta, gamma)."""
    theta = np.asarray(theta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    # p1 = sin^2 g cos^2 t
    dp1_dt = -(np.sin(gamma) ** 2) * np.sin(2 * theta)
    dp1_dg = np.sin(2 * gamma) * np.cos(theta) ** 2
    dp1_dt, dp1_dg = np.broadcast_arrays(dp1_dt, dp1_dg)
    jac = np.empty(dp1_dt.shape + (2, 2))
    jac[..., 0, 0] = -dp1_dt
    jac[..., 0, 1] = -dp1_dg
    jac[..., 1, 0] = dp1_dt
    jac[..., 1, 1] = dp1_dg
    return jac


def qfim_array(theta, gamma):
    """Pure-state QFIM, shape (..., 2, 2), in (theta, gamma) order.

    Q_ij = 4 Re(<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>).
    """
    a0, a1 = state_amplitudes(theta, gamma)
    derivs = state_derivatives(theta, gamma)

    def inner(u, v):
        return np.conj(u[0]) * v[0] + np.conj(u[1]) * v[1]

    psi = (a0, a1)
    overlaps = [inner(d, psi) for d in derivs]
    shape = np.broadcast(a0, a1).shape
    q = np.empty(shape + (2, 2))
    for i in range(2):
        for j in range(i, 2):
            val = 4.0 * np.real(inner(derivs[i], derivs[j]) - overlaps[i] * np.conj(overlaps[j]))
            q[..., i, j] = val
            q[..., j, i] = val
    return q


def cfim_array(theta, gamma):
    """Classical FIM of the Z measurement, shape (..., 2, 2).

    Outcomes with probability below ``PROB_FLOOR`` contribute nothing.
    """
    p0 = prob0(theta, gamma)
    probs = np.stack([p0, 1.0 - p0], axis=-1)
    jac = prob_jacobian_array(theta, gamma)
    safe = probs >= PROB_FLOOR
    inv = np.where(safe, 1.0 / np.where(safe, probs, 1.0), 0.0)
    # F_ij = sum_k J_ki J_kj / p_k
    return np.einsum("...ki,...k,...kj->...ij", jac, inv, jac)


# ---------------------------------------------------------------------------
# point API


def evolve(p) -> QubitState:
    theta, gamma = _unpack(p)
    a0, a1 = state_amplitudes(theta, gamma)
    return QubitState(complex(a0), complex(a1))


def outcome_probs(p) -> tuple[float, float]:
    theta, gamma = _unpack(p)
    p0 = float(prob0(theta, gamma))
    return p0, 1.0 - p0


def prob_jacobian(p) -> np.ndarray:
    theta, gamma = _unpack(p)
    return prob_jacobian_array(theta, gamma)


def qfim(p) -> InfoMatrix:
    theta, gamma = _unpack(p)
    return InfoMatrix.from_array(qfim_array(theta, gamma))


def cfim_z(p) -> InfoMatrix:
    theta, gamma = _unpack(p)
    return InfoMatrix.from_array(cfim_array(theta, gamma))


def bloch_vector(theta, gamma):
    """Bloch vector of U|0> and its (theta, gamma) derivatives, each shape (..., 3)."""
    theta = np.asarray(theta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    s2g, c2g = np.sin(2 * gamma), np.cos(2 * gamma)
    sg2 = np.sin(gamma) ** 2
    ct, st = np.cos(theta), np.sin(theta)
    s2t, c2t = np.sin(2 * theta), np.cos(2 * theta)
    r = np.stack(np.broadcast_arrays(sg2 * s2t, -s2g * ct, 1 - 2 * sg2 * ct**2), axis=-1)
    dr_t = np.stack(np.broadcast_arrays(2 * sg2 * c2t, s2g * st, 2 * sg2 * s2t), axis=-1)
    dr_g = np.stack(np.broadcast_arrays(s2g * s2t, -2 * c2g * ct, -2 * s2g * ct**2), axis=-1)
    return r, dr_t, dr_g
