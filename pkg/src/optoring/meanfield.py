"""Classical displaced frame: optical and mechanical mean fields.

The optical mean field obeys

    F_l - D_l alpha_l - i (gamma_c_l / 2) alpha_l - (J/2) sum_l' A_ll' alpha_l' = 0

with the shifted detuning ``D_l = delta_l + 2 g_l^2 |alpha_l|^2 / omega_m_l``
(high mechanical Q), and the mechanical displacement is
``beta_l = g_l |alpha_l|^2 / (omega_m_l - i gamma_m_l / 2)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SolverError
from .model import ModelParams

DEFAULT_TOL = 1e-12
DEFAULT_DAMPING = 0.5
DEFAULT_MAX_ITER = 10_000


@dataclass(frozen=True, eq=False)
class MeanFieldSolution:
    alpha: np.ndarray
    beta: np.ndarray
    delta_tilde: np.ndarray
    G: np.ndarray
    residual: float
    iterations: int = 0

    def __post_init__(self):
        for name in ("alpha", "beta", "delta_tilde", "G"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def to_dict(self) -> dict:
        def pairs(z):
            return [[float(v.real), float(v.imag)] for v in np.asarray(z, dtype=complex)]
        return {
            "alpha": pairs(self.alpha),
            "beta": pairs(self.beta),
            "delta_tilde": [float(v) for v in self.delta_tilde],
            "G": pairs(self.G),
            "residual": float(self.residual),
            "iterations": int(self.iterations),
        }


def effective_detuning(delta, g, alpha, omega_m) -> np.ndarray:
    """Mean-field detuning ``delta + 2 g^2 |alpha|^2 / omega_m`` (high-Q form)."""
    omega_m = np.asarray(omega_m, dtype=float)
    if np.any(omega_m == 0):
        raise DomainError("omega_m must be nonzero")
    return (np.asarray(delta, dtype=float)
            + 2.0 * np.asarray(g, dtype=float) ** 2 * np.abs(alpha) ** 2 / omega_m)


def mechanical_displacement(g, alpha, omega_m, gamma_m) -> np.ndarray:
    return np.asarray(g) * np.abs(alpha) ** 2 / (np.asarray(omega_m) - 0.5j * np.asarray(gamma_m))


def optical_residual(params: ModelParams, F, alpha) -> float:
    """Max-norm of the optical self-consistency equation at ``alpha``."""
    dt = effective_detuning(params.delta, params.g, alpha, params.omega_m)
    r = (F - dt * alpha - 0.5j * params.gamma_c * alpha
         - 0.5 * params.J * (params.lattice.adjacency @ alpha))
    return float(np.max(np.abs(r))) if r.size else 0.0


def _linear_alpha(params, delta_tilde, F):
    M = np.diag(delta_tilde + 0.5j * params.gamma_c) + 0.5 * params.J * params.lattice.adjacency
    try:
        return np.linalg.solve(M, F)
    except np.linalg.LinAlgError as exc:
        raise SolverError("singular mean-field linear system") from exc


def solve_mean_field(params: ModelParams, tol: float = DEFAULT_TOL,
                     damping: float = DEFAULT_DAMPING,
                     max_iter: int = DEFAULT_MAX_ITER) -> MeanFieldSolution:
    """Stationary mean fields for ``params``.

    With a prescribed mean field the optical amplitudes are taken as given and
    the residual is zero by construction. With an amplitude drive, a damped
    fixed-point iteration alternates a dense linear solve at frozen detuning
    with a detuning update until the optical residual drops below ``tol``.

    Raises
    ------
    SolverError
        If the iteration does not converge within ``max_iter`` steps, which
        usually signals proximity to a mean-field bistability.
    """
    L = params.L
    drive = params.drive
    if drive.mode == "alpha_prescribed":
        alpha = drive.amplitudes(L)
        residual, iterations = 0.0, 0
    else:
        F = drive.amplitudes(L)
        alpha = _linear_alpha(params, params.delta, F)
        residual = optical_residual(params, F, alpha)
        iterations = 0
        while residual > tol:
            if iterations >= max_iter:
                raise SolverError(f"mean field did not converge in {max_iter} iterations", residual)
            dt = effective_detuning(params.delta, params.g, alpha, params.omega_m)
            alpha = damping * _linear_alpha(params, dt, F) + (1.0 - damping) * alpha
            residual = optical_residual(params, F, alpha)
            iterations += 1
    dt = effective_detuning(params.delta, params.g, alpha, params.omega_m)
    return MeanFieldSolution(
        alpha=alpha,
        beta=mechanical_displacement(params.g, alpha, params.omega_m, params.gamma_m),
        delta_tilde=dt,
        G=params.g * alpha,
        residual=residual,
        iterations=iterations,
    )
