"""Holevo Cramer-Rao bound for two-parameter qubit models.

Each estimator observable is written in the Pauli basis, X = x0 I + x . sigma.
With rho = (I + r . sigma) / 2 the local-unbiasedness constraints
Tr[d_mu rho X_nu] = delta_mu_nu only involve x, so each x_nu is a particular
solution plus a multiple of the normal n = dr_1 x dr_2. That leaves four free
coordinates (x0_1, t_1, x0_2, t_2). For Pauli operators

    Z_mu_nu = a0 b0 + a.b + (a0 b + b0 a).r + i (a x b).r

so the objective Tr Re Z + ||Im Z||_1 is Z_11 + Z_22 + 2 |(x_1 x x_2).r|.
The kink is removed with an epigraph variable u >= |Im Z_12| and the smooth
problem is handed to SLSQP from several random starts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import OptimizerNotConverged, SingularInformation

DEFAULT_RESTARTS = 8
AGREEMENT_RTOL = 1e-6
# SLSQP exit modes that still leave a usable point: success, "positive
# directional derivative" (stalled at ftol) and iteration limit
_USABLE_STATUS = (0, 8, 9)


@dataclass(frozen=True)
class HolevoResult:
    value: float
    observables: np.ndarray  # shape (2, 4): rows (x0, x_x, x_y, x_z) for X_1, X_2
    z_matrix: np.ndarray  # complex 2x2
    restart_values: np.ndarray

    @property
    def spread(self) -> float:
        v = self.restart_values
        return float((v.max() - v.min()) / max(abs(v.min()), np.finfo(float).tiny))


def z_matrix(obs: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Z_mu_nu = Tr[rho X_mu X_nu] for Pauli-coefficient rows ``obs``."""
    z = np.empty((2, 2), dtype=complex)
    for m in range(2):
        for k in range(2):
            a0, a = obs[m, 0], obs[m, 1:]
            b0, b = obs[k, 0], obs[k, 1:]
            re = a0 * b0 + a @ b + (a0 * b + b0 * a) @ r
            z[m, k] = re + 1j * np.cross(a, b) @ r
    return z


def holevo_objective(obs: np.ndarray, r: np.ndarray) -> float:
    z = z_matrix(obs, r)
    # trace norm of [[0, c], [-c, 0]] is 2|c|
    return float(np.trace(z).real + 2.0 * abs(z[0, 1].imag))


def _triple(a, b, c) -> float:
    """(a x b) . c without the overhead of np.cross."""
    return float(
        (a[1] * b[2] - a[2] * b[1]) * c[0]
        + (a[2] * b[0] - a[0] * b[2]) * c[1]
        + (a[0] * b[1] - a[1] * b[0]) * c[2]
    )


class _Reduced:
    """Objective and constraints in the free coordinates z = (x0_1, t_1, x0_2, t_2, u).

    With x_nu = base_nu + t_nu n, Z_nu_nu is a quadratic in (x0_nu, t_nu) and,
    since n x n = 0, Im Z_12 is affine in (t_1, t_2).
    """

    def __init__(self, r: np.ndarray, dr: np.ndarray):
        self.r = r
        g = dr @ dr.T
        det = float(np.linalg.det(g))
        thresh = 1e-12 * float(np.sum(g * g))
        if det <= thresh:
            raise SingularInformation(det, thresh)
        # minimum-norm particular solutions of dr @ x_nu = e_nu
        self.base = (dr.T @ np.linalg.inv(g)).T
        n = np.cross(dr[0], dr[1])
        self.n = n / np.linalg.norm(n)
        b0, b1, n = self.base[0], self.base[1], self.n
        self.bb = np.array([b0 @ b0, b1 @ b1])
        self.bn = np.array([b0 @ n, b1 @ n])
        self.br = np.array([b0 @ r, b1 @ r])
        self.nr = float(n @ r)
        # Im Z_12 = h0 + h1 t_1 + h2 t_2
        self.h = np.array([_triple(b0, b1, r), _triple(n, b1, r), _triple(b0, n, r)])
        self.h_jac = np.array([0.0, self.h[1], 0.0, self.h[2], 0.0])

    def observables(self, z: np.ndarray) -> np.ndarray:
        obs = np.empty((2, 4))
        for nu in range(2):
            obs[nu, 0] = z[2 * nu]
            obs[nu, 1:] = self.base[nu] + z[2 * nu + 1] * self.n
        return obs

    def fun(self, z):
        x0 = z[0:4:2]
        t = z[1:4:2]
        total = x0 @ x0 + self.bb.sum() + 2 * t @ self.bn + t @ t + 2 * x0 @ self.br + 2 * self.nr * (x0 @ t)
        return float(total + 2.0 * z[4])

    def jac(self, z):
        x0 = z[0:4:2]
        t = z[1:4:2]
        g = np.empty(5)
        g[0:4:2] = 2 * x0 + 2 * self.br + 2 * self.nr * t
        g[1:4:2] = 2 * self.bn + 2 * t + 2 * self.nr * x0
        g[4] = 2.0
        return g

    def imag12(self, z):
        return float(self.h[0] + self.h[1] * z[1] + self.h[2] * z[3])


def holevo_qubit(
    r: np.ndarray,
    dr: np.ndarray,
    *,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    rtol: float = AGREEMENT_RTOL,
) -> HolevoResult:
    """Minimize the Holevo function for a qubit with Bloch vector ``r``.

    ``dr`` has shape (2, 3), the Bloch-vector derivatives for each parameter.
    Raises :class:`SingularInformation` if they are linearly dependent and
    :class:`OptimizerNotConverged` if restarts disagree beyond ``rtol``.
    """
    r = np.asarray(r, dtype=float)
    dr = np.asarray(dr, dtype=float)
    red = _Reduced(r, dr)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    scale = 1.0 + float(np.abs(red.base).max())
    constraints = [
        {"type": "ineq", "fun": lambda z: z[4] - red.imag12(z), "jac": lambda z: _E4 - red.h_jac},
        {"type": "ineq", "fun": lambda z: z[4] + red.imag12(z), "jac": lambda z: _E4 + red.h_jac},
    ]
    # pure states have a flat valley (n parallel to r); box it in so a restart
    # cannot wander off to where rounding swamps the objective
    box = 1e4 * scale
    box_bounds = [(-box, box)] * 4 + [(0.0, None)]
    values, points = [], []
    attempts = 0
    while len(values) < restarts and attempts < 4 * restarts:
        attempts += 1
        z0 = np.empty(5)
        z0[:4] = rng.normal(scale=scale, size=4)
        z0[4] = abs(red.imag12(z0)) + 1.0
        res = minimize(
            red.fun,
            z0,
            jac=red.jac,
            constraints=constraints,
            bounds=box_bounds,
            method="SLSQP",
            options={"ftol": 1e-12, "maxiter": 500},
        )
        if res.status not in _USABLE_STATUS or not np.all(np.isfinite(res.x)):
            continue
        obs = red.observables(res.x)
        # evaluate the true (kinked) objective, not the epigraph surrogate
        values.append(holevo_objective(obs, r))
        points.append(obs)
    if not values:
        raise OptimizerNotConverged("no Holevo restart finished cleanly", np.nan)
    values = np.array(values)
    best = int(np.argmin(values))
    result = HolevoResult(
        value=float(values[best]),
        observables=points[best],
        z_matrix=z_matrix(points[best], r),
        restart_values=values,
    )
    if result.spread > rtol:
        raise OptimizerNotConverged(
            f"Holevo restarts disagree: relative spread {result.spread:.3e} > {rtol:.1e}", result.value
        )
    return result


_E4 = np.array([0.0, 0.0, 0.0, 0.0, 1.0])
