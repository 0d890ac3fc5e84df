"""Exact Gaussian benchmark of the linearized optomechanical lattice.

The fluctuations ``phi = [c_0, c_0^dag, ..., c_{L-1}^dag, d_0, d_0^dag, ...]``
obey ``d phi/dt = M phi + noise`` with the full coupling
``(G* c + G c^dag)(d + d^dag)`` (counter-rotating terms kept). The stationary
second moments ``C = <phi phi^T>`` solve ``M C + C M^T + D = 0``.

0-based index map: ``c_l -> 2l``, ``c_l^dag -> 2l+1``, ``d_l -> 2L+2l``,
``d_l^dag -> 2L+2l+1``, hence ``<d_l^dag d_l'> = C[2L+2l+1, 2L+2l']``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg as sla

from .elimination import effective_liouvillian, effective_steady_state
from .errors import DomainError, InstabilityError, NumericalError
from .meanfield import MeanFieldSolution, solve_mean_field
from .model import ModelParams
from .ring import RingParams, hopping_amplitudes, steady_state

STABILITY_TOL = 1e-12
RESIDUAL_TOL = 1e-10
COMMUTATOR_TOL = 1e-10


def basis_labels(L: int) -> List[str]:
    optics = [s for l in range(L) for s in (f"c_{l}", f"c_{l}^dag")]
    mech = [s for l in range(L) for s in (f"d_{l}", f"d_{l}^dag")]
    return optics + mech


def c_index(l: int) -> int:
    return 2 * l


def d_index(L: int, l: int) -> int:
    return 2 * L + 2 * l


def drift_eigenvalues(M) -> np.ndarray:
    return np.linalg.eigvals(M)


def build_linearized_system(params: ModelParams, mf: MeanFieldSolution, check: bool = True):
    """Drift ``M``, noise ``D`` and basis labels of the linearized model.

    Raises
    ------
    InstabilityError
        With ``check`` set, if some eigenvalue of ``M`` has real part
        ``>= -1e-12``.
    """
    L = params.L
    A = params.lattice.adjacency
    G = np.asarray(mf.G, dtype=complex)
    dt = np.asarray(mf.delta_tilde, dtype=float)
    N = 4 * L
    M = np.zeros((N, N), dtype=complex)
    D = np.zeros((N, N), dtype=complex)
    for l in range(L):
        c, cd = 2 * l, 2 * l + 1
        d, dd = 2 * L + 2 * l, 2 * L + 2 * l + 1
        M[c, c] = 1j * dt[l] - 0.5 * params.gamma_c[l]
        M[cd, cd] = -1j * dt[l] - 0.5 * params.gamma_c[l]
        for m in np.nonzero(A[l])[0]:
            M[c, 2 * m] += 0.5j * params.J
            M[cd, 2 * m + 1] += -0.5j * params.J
        M[c, d] = M[c, dd] = -1j * G[l]
        M[cd, d] = M[cd, dd] = 1j * np.conj(G[l])
        M[d, d] = -1j * params.omega_m[l] - 0.5 * params.gamma_m[l]
        M[dd, dd] = 1j * params.omega_m[l] - 0.5 * params.gamma_m[l]
        M[d, c] = -1j * np.conj(G[l])
        M[d, cd] = -1j * G[l]
        M[dd, c] = 1j * np.conj(G[l])
        M[dd, cd] = 1j * G[l]
        D[c, cd] = params.gamma_c[l]
        D[d, dd] = params.gamma_m[l] * (params.nbar[l] + 1)
        D[dd, d] = params.gamma_m[l] * params.nbar[l]
    if check:
        ev = drift_eigenvalues(M)
        bad = ev[ev.real >= -STABILITY_TOL]
        if bad.size:
            raise InstabilityError(
                f"linearized dynamics unstable: max Re(lambda) = {ev.real.max():.3e}", bad.tolist())
    return M, D, basis_labels(L)


def lyapunov_residual(M, C, D) -> float:
    return float(np.abs(M @ C + C @ M.T + D).max())


def steady_covariance(M, D, method: str = "schur") -> np.ndarray:
    """Solve ``M C + C M^T + D = 0``.

    ``method="schur"`` uses the Bartels-Stewart algorithm; ``"vectorized"``
    solves the ``(N^2) x (N^2)`` Kronecker system directly. Both verify the
    residual against ``1e-10 * max|D|``.
    """
    M = np.asarray(M, dtype=complex)
    D = np.asarray(D, dtype=complex)
    N = M.shape[0]
    if method == "schur":
        C = sla.solve_sylvester(M, M.T, -D)
    elif method == "vectorized":
        I = np.eye(N)
        K = np.kron(M, I) + np.kron(I, M)
        try:
            C = np.linalg.solve(K, -D.reshape(-1)).reshape(N, N)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular Lyapunov system (marginal stability)") from exc
    else:
        raise DomainError(f"unknown method {method!r}")
    if not np.all(np.isfinite(C)):
        raise NumericalError("non-finite steady covariance")
    res = lyapunov_residual(M, C, D)
    scale = float(np.abs(D).max())
    if res > RESIDUAL_TOL * max(scale, np.finfo(float).tiny):
        if scale == 0 and res == 0:
            return C
        raise NumericalError(f"Lyapunov residual {res:.3e} exceeds tolerance")
    return C


@dataclass(frozen=True, eq=False)
class CovarianceState:
    basis: List[str]
    M: np.ndarray
    D: np.ndarray
    C: np.ndarray

    @property
    def L(self) -> int:
        return self.M.shape[0] // 4

    @property
    def residual(self) -> float:
        return lyapunov_residual(self.M, self.C, self.D)

    def commutators(self) -> np.ndarray:
        """``<d_l d_l^dag> - <d_l^dag d_l>`` for every site (should be 1)."""
        L = self.L
        return np.array([self.C[d_index(L, l), d_index(L, l) + 1]
                         - self.C[d_index(L, l) + 1, d_index(L, l)] for l in range(L)])


def solve_covariance(params: ModelParams, mf: MeanFieldSolution,
                     method: str = "schur") -> CovarianceState:
    M, D, basis = build_linearized_system(params, mf)
    return CovarianceState(basis, M, D, steady_covariance(M, D, method))


def sigma_mf(C, L: int) -> np.ndarray:
    """Phonon density matrix ``<d_l^dag d_l'>`` read from the second moments.

    Raises
    ------
    NumericalError
        If the bosonic commutator read from the same block deviates from 1
        by more than 1e-10, which would indicate a misaligned index map.
    """
    C = np.asarray(C)
    off = 2 * L
    idx = off + 2 * np.arange(L)
    comm = C[idx, idx + 1] - C[idx + 1, idx]
    err = float(np.abs(comm - 1).max()) if L else 0.0
    if err > COMMUTATOR_TOL:
        raise NumericalError(f"commutator self-check failed (max deviation {err:.3e})")
    return C[np.ix_(idx + 1, idx)].copy()


def relative_error(sigma_eff, sigma_mf_) -> float:
    """Spectral-norm relative error ``|a - b|_2 / |(a + b)/2|_2``."""
    a = np.asarray(sigma_eff, dtype=complex)
    b = np.asarray(sigma_mf_, dtype=complex)
    if a.shape != b.shape:
        raise DomainError("matrices must have the same shape")
    den = np.linalg.norm(0.5 * (a + b), 2)
    if den == 0:
        raise DomainError("both matrices vanish; relative error undefined")
    return float(np.linalg.norm(a - b, 2) / den)


def current_from_sigma(sigma, J_p_plus, J_p_minus, phi: float, omega_m: float = 1.0):
    """Distance-resolved flows and net circulating current from a ring density matrix.

    ``<j_{l -> l+p}> = sum_pm J_p^pm Im(sigma[l+p, l] e^{-+ i phi p})`` and
    ``Q_p = omega_m sum_l <j_{l -> l+p}>`` for ``1 <= p < ceil(L/2)``.

    Returns ``(Q_p, Q_C)``.
    """
    flows = bond_currents(sigma, J_p_plus, J_p_minus, phi)
    Q_p = omega_m * flows.sum(axis=1)
    return Q_p, float(Q_p.sum())


def bond_currents(sigma, J_p_plus, J_p_minus, phi: float) -> np.ndarray:
    """Per-bond expectations ``<j_{l -> l+p}>`` as an array ``[p-1, l]``."""
    sigma = np.asarray(sigma, dtype=complex)
    L = sigma.shape[0]
    ps = np.arange(1, math.ceil(L / 2))
    out = np.zeros((ps.size, L))
    l = np.arange(L)
    for i, p in enumerate(ps):
        z = sigma[(l + p) % L, l]
        out[i] = (J_p_plus[p] * (z * np.exp(-1j * phi * p)).imag
                  + J_p_minus[p] * (z * np.exp(1j * phi * p)).imag)
    return out


def hermitian_bond_currents(sigma, h) -> np.ndarray:
    """Coherent particle flow from site ``m`` into site ``l``, as entry ``[l, m]``.

    For a Hermitian coefficient matrix ``h`` of ``d_l^dag d_m`` the flow is
    ``2 Im(h[l, m] sigma[l, m])``, the term it contributes to ``d<n_l>/dt``.
    Valid for any lattice. On a ring, :func:`bond_currents` equals half of
    this flow (the current operator is normalized per hopping amplitude).
    """
    sigma = np.asarray(sigma, dtype=complex)
    h = np.asarray(h, dtype=complex)
    return 2.0 * np.imag(h * sigma)


@dataclass(frozen=True, eq=False)
class BenchmarkReport:
    sigma_mf: np.ndarray
    sigma_eff: np.ndarray
    delta: float
    currents_mf: Optional[np.ndarray] = None
    currents_eff: Optional[np.ndarray] = None
    covariance: Optional[CovarianceState] = field(default=None, repr=False)

    @property
    def Q_C_mf(self) -> Optional[float]:
        return None if self.currents_mf is None else float(self.currents_mf.sum())

    @property
    def Q_C_eff(self) -> Optional[float]:
        return None if self.currents_eff is None else float(self.currents_eff.sum())


def benchmark_ring(rp: RingParams, method: str = "schur") -> BenchmarkReport:
    """Compare the ring closed forms against the exact covariance."""
    params = rp.to_model()
    mf = solve_mean_field(params)
    cov = solve_covariance(params, mf, method)
    s_mf = sigma_mf(cov.C, rp.L)
    rep = steady_state(rp)
    args = (rp.L, rp.G_mag, rp.delta_tilde, rp.J, rp.gamma_c, rp.omega_m)
    jp, jm = hopping_amplitudes(*args, +1), hopping_amplitudes(*args, -1)
    q_mf, _ = current_from_sigma(s_mf, jp, jm, rp.phi, rp.omega_m)
    return BenchmarkReport(s_mf, rep.sigma, relative_error(rep.sigma, s_mf), q_mf, rep.Q_p, cov)


def benchmark(params: ModelParams, mf: MeanFieldSolution | None = None,
              method: str = "schur") -> BenchmarkReport:
    """Compare the general effective steady state against the exact covariance.

    Works for any lattice; ring currents are not attached.
    """
    mf = solve_mean_field(params) if mf is None else mf
    cov = solve_covariance(params, mf, method)
    s_mf = sigma_mf(cov.C, params.L)
    s_eff = effective_steady_state(effective_liouvillian(params, mf))
    return BenchmarkReport(s_mf, s_eff, relative_error(s_eff, s_mf), covariance=cov)
