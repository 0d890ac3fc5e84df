r"""Adiabatic elimination of the driven-dissipative optical lattice.

The optical fluctuations obey ``i d/dt c = B c`` with

.. math::

    B = -\frac{J}{2} A - \mathrm{Diag}(\tilde\Delta_\ell + i\gamma_c^{(\ell)}/2),

and act on the phonons as a reservoir with spectrum

.. math::

    S_{\ell\ell'}(\omega) = G_\ell^* \left[\frac{i}{\omega - B}\right]_{\ell\ell'} G_{\ell'}.

The anti-Hermitian part of ``S`` gives coherent phonon hoppings, the Hermitian
part nonlocal cooling (``omega = +omega_m``) and heating (``omega = -omega_m``)
channels.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import scipy.linalg as sla

from .errors import DomainError, InstabilityError, NumericalError
from .meanfield import MeanFieldSolution
from .model import ModelParams

# Relative gap below which two eigenvalues count as degenerate for ordering.
_TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class PhotonGenerator:
    B: np.ndarray

    @property
    def L(self) -> int:
        return self.B.shape[0]


def build_generator(params: ModelParams, delta_tilde, check: bool = True) -> PhotonGenerator:
    """Single-photon generator ``B`` of the optical lattice.

    With ``check`` the decay guarantee is verified: every eigenvalue of
    ``-iB`` has real part at most ``-min(gamma_c)/2``.
    """
    delta_tilde = np.asarray(delta_tilde, dtype=float)
    if delta_tilde.shape != (params.L,):
        raise DomainError(f"delta_tilde must have length {params.L}")
    B = -0.5 * params.J * params.lattice.adjacency.astype(complex)
    B -= np.diag(delta_tilde + 0.5j * params.gamma_c)
    if check:
        rates = np.linalg.eigvals(-1j * B).real
        bound = -0.5 * params.gamma_c.min()
        scale = max(1.0, float(np.abs(B).max()))
        if rates.max() > bound + 1e-10 * scale:
            raise NumericalError(
                f"optical generator decay check failed: max Re = {rates.max():.3e} > {bound:.3e}")
    return PhotonGenerator(B)


def reservoir_spectrum_at(gen: PhotonGenerator, G, omega) -> np.ndarray:
    """Reservoir spectrum ``S(omega)``.

    ``omega`` is a scalar or a per-column vector: column ``l'`` is evaluated at
    ``omega[l']``, as needed for site-dependent mechanical frequencies.
    """
    B = gen.B
    L = B.shape[0]
    G = np.asarray(G, dtype=complex)
    omega = np.broadcast_to(np.asarray(omega, dtype=float), (L,))
    R = np.empty((L, L), dtype=complex)
    eye = np.eye(L)
    for w in np.unique(omega):
        cols = np.nonzero(omega == w)[0]
        K = w * eye - B
        if np.linalg.cond(K) > 1e14:
            raise DomainError(f"resolvent is singular at omega = {w}")
        R[:, cols] = np.linalg.solve(K, 1j * eye[:, cols])
    return np.conj(G)[:, None] * R * G[None, :]


def _canonical_phase(v):
    """Rotate an eigenvector so its first non-negligible entry is real positive."""
    idx = np.nonzero(np.abs(v) > 1e-12 * np.abs(v).max())[0][0]
    return v * (np.abs(v[idx]) / v[idx])


def decompose_spectrum(S) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split ``S`` into coherent couplings and diagonalized rates.

    Returns ``(Omega, Gamma, U)`` with ``Omega = (S - S^H) / 2i`` and
    ``U (S + S^H) U^H = Diag(Gamma)``. ``Gamma`` is sorted in descending
    order; degenerate rates are ordered lexicographically by the real parts and
    then the imaginary parts of their (phase-fixed) eigenvectors. Row ``l`` of
    ``U`` is the complex conjugate of the ``l``-th eigenvector, so the jump
    operator of channel ``l`` is ``sum_l' U[l, l'] d_l'``.
    """
    S = np.asarray(S, dtype=complex)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DomainError("S must be square")
    Omega = (S - S.conj().T) / 2j
    H = S + S.conj().T
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition of the Hermitian part failed") from exc
    V = np.column_stack([_canonical_phase(V[:, i]) for i in range(V.shape[1])]) if V.size else V
    scale = max(1.0, float(np.abs(w).max())) if w.size else 1.0
    # Snap nearly equal eigenvalues to a common key so ties fall through to the vector key.
    snapped = np.round(w / (scale * _TIE_RTOL)) if w.size else w
    order = sorted(range(len(w)), key=lambda i: (-snapped[i], tuple(V[:, i].real), tuple(V[:, i].imag)))
    Gamma = w[order]
    U = V[:, order].conj().T
    return Omega, Gamma, U


@dataclass(frozen=True, eq=False)
class ReservoirSpectrum:
    S_plus: np.ndarray
    S_minus: np.ndarray
    Omega_plus: np.ndarray
    Omega_minus: np.ndarray
    Gamma_plus: np.ndarray
    Gamma_minus: np.ndarray
    U_plus: np.ndarray
    U_minus: np.ndarray


def reservoir_spectrum(gen: PhotonGenerator, G, omega_m) -> ReservoirSpectrum:
    """Spectra at the cooling (``+omega_m``) and heating (``-omega_m``) frequencies."""
    omega_m = np.asarray(omega_m, dtype=float)
    S_plus = reservoir_spectrum_at(gen, G, omega_m)
    S_minus = reservoir_spectrum_at(gen, G, -omega_m)
    Om_p, Ga_p, U_p = decompose_spectrum(S_plus)
    Om_m, Ga_m, U_m = decompose_spectrum(S_minus)
    return ReservoirSpectrum(S_plus, S_minus, Om_p, Om_m, Ga_p, Ga_m, U_p, U_m)


@dataclass(frozen=True, eq=False)
class EffectiveLiouvillian:
    """Quadratic phonon Lindbladian obtained after eliminating the optics.

    ``h[l, l']`` is the coefficient of ``d_l^dag d_l'`` added to the bare
    mechanical Hamiltonian. ``down_channels`` are ``(rate, row)`` pairs with
    jump operator ``sum row[l'] d_l'``; ``up_channels`` use ``d_l'^dag``.
    """

    h: np.ndarray
    omega_m: np.ndarray
    gamma_m: np.ndarray
    nbar: np.ndarray
    down_channels: List[Tuple[float, np.ndarray]]
    up_channels: List[Tuple[float, np.ndarray]]
    spectrum: ReservoirSpectrum

    @property
    def L(self) -> int:
        return self.h.shape[0]

    @property
    def thermal_rates(self):
        return list(zip(self.gamma_m.tolist(), self.nbar.tolist()))

    def hamiltonian_matrix(self) -> np.ndarray:
        return np.diag(self.omega_m).astype(complex) + self.h

    def cooling_matrix(self) -> np.ndarray:
        """Rate matrix of the ``d`` jump channels, local thermal damping included."""
        sp = self.spectrum
        return sp.S_plus + sp.S_plus.conj().T + np.diag(self.gamma_m * (self.nbar + 1))

    def heating_matrix(self) -> np.ndarray:
        """Rate matrix of the ``d^dag`` jump channels, local thermal heating included."""
        sp = self.spectrum
        return sp.S_minus + sp.S_minus.conj().T + np.diag(self.gamma_m * self.nbar)


def effective_liouvillian(params: ModelParams, mf: MeanFieldSolution) -> EffectiveLiouvillian:
    gen = build_generator(params, mf.delta_tilde)
    sp = reservoir_spectrum(gen, mf.G, params.omega_m)
    h = sp.Omega_plus + sp.Omega_minus.T
    down = [(float(r), sp.U_plus[i].copy()) for i, r in enumerate(sp.Gamma_plus)]
    up = [(float(r), sp.U_minus[i].copy()) for i, r in enumerate(sp.Gamma_minus)]
    return EffectiveLiouvillian(h, params.omega_m.copy(), params.gamma_m.copy(),
                                params.nbar.copy(), down, up, sp)


def sigma_drift(eff: EffectiveLiouvillian):
    """Return ``(X, Y, Q)`` such that ``d sigma/dt = X sigma + sigma Y + Q``.

    ``sigma[m, n] = <d_m^dag d_n>``. Derived from the adjoint Lindbladian with
    Hamiltonian matrix ``H``, cooling rates ``K_down`` and heating rates ``K_up``:
    ``X = iH^T - K_down^T/2 + K_up/2``, ``Y = -iH^T - K_down^T/2 + K_up/2``,
    ``Q = K_up``.
    """
    H = eff.hamiltonian_matrix()
    down = eff.cooling_matrix()
    up = eff.heating_matrix()
    X = 1j * H.T - 0.5 * down.T + 0.5 * up
    Y = -1j * H.T - 0.5 * down.T + 0.5 * up
    return X, Y, up


def effective_steady_state(eff: EffectiveLiouvillian) -> np.ndarray:
    """Steady single-particle density matrix of a general effective Lindbladian."""
    X, Y, Q = sigma_drift(eff)
    ev = np.concatenate([np.linalg.eigvals(X), np.linalg.eigvals(Y)])
    if ev.real.max() >= -1e-12:
        raise InstabilityError("effective phonon dynamics is unstable",
                               ev[ev.real >= -1e-12].tolist())
    sigma = sla.solve_sylvester(X, Y, -Q)
    return 0.5 * (sigma + sigma.conj().T)


def spectrum_from_covariance(T, B_full, C0, omega) -> np.ndarray:
    """Gaussian-reservoir spectrum ``T^T [i / (omega - B_full)] C0 T``.

    ``B_full`` generates ``i d/dt A = B_full A`` for the interleaved ladder
    vector ``A = [a_1, a_1^dag, ...]``; ``C0 = <A A^T>`` is the equal-time
    second-moment matrix; column ``j`` of ``T`` holds the coefficients of the
    reservoir operator coupled to system operator ``j``.
    """
    B_full = np.asarray(B_full, dtype=complex)
    n = B_full.shape[0]
    K = omega * np.eye(n) - B_full
    if np.linalg.cond(K) > 1e14:
        raise DomainError(f"resolvent is singular at omega = {omega}")
    T = np.asarray(T, dtype=complex)
    return T.T @ np.linalg.solve(K, 1j * (np.asarray(C0, dtype=complex) @ T))


def bogoliubov_generator(B) -> np.ndarray:
    """Interleaved generator for ``[a_1, a_1^dag, ...]`` of a number-conserving ``B``."""
    B = np.asarray(B, dtype=complex)
    L = B.shape[0]
    full = np.zeros((2 * L, 2 * L), dtype=complex)
    full[0::2, 0::2] = B
    full[1::2, 1::2] = -B.conj()
    return full


def vacuum_covariance(L: int) -> np.ndarray:
    """``<A A^T>`` of the vacuum: only ``<a_i a_i^dag> = 1`` survives."""
    C = np.zeros((2 * L, 2 * L), dtype=complex)
    C[0::2, 1::2] = np.eye(L)
    return C


def coupling_matrix(t) -> np.ndarray:
    """``T`` for reservoir operators ``R_i = t_i^* a_i + t_i a_i^dag``."""
    t = np.asarray(t, dtype=complex)
    L = t.size
    T = np.zeros((2 * L, L), dtype=complex)
    T[0::2, :] = np.diag(np.conj(t))
    T[1::2, :] = np.diag(t)
    return T


@dataclass(frozen=True, eq=False)
class SqueezedEffectiveModel:
    """Effective phonon Hamiltonian from a two-tone (blue + red sideband) drive.

    ``beamsplitter_coeffs`` is the full Hermitian matrix ``K`` of
    ``sum_ij K_ij d_i^dag d_j``. ``pairing_coeffs`` is lower triangular: for
    ``i > j`` entry ``[i, j]`` multiplies ``d_i^dag d_j^dag`` (the ``(i, j)`` and
    ``(j, i)`` terms merged), the diagonal multiplies ``d_i^dag d_i^dag``; the
    Hermitian conjugate terms are implied.
    """

    G_plus: float
    G_minus: float
    r: float
    eta: float
    theta: np.ndarray
    varphi: np.ndarray
    Omega: np.ndarray
    beamsplitter_coeffs: np.ndarray
    pairing_coeffs: np.ndarray
    Gamma: np.ndarray
    U: np.ndarray

    @property
    def nu(self):
        """``theta_l - varphi_l`` when uniform across sites, else ``None``."""
        d = self.theta - self.varphi
        return float(d[0]) if np.allclose(d, d[0], atol=1e-12) else None


def two_tone_squeezing_model(params: ModelParams, G_plus: float, G_minus: float,
                             theta, varphi, delta_tilde=None) -> SqueezedEffectiveModel:
    """Multi-mode squeezing Hamiltonian from a two-tone-driven optical lattice.

    The Bogoliubov modes are ``beta_i = cosh r e^{i theta_i} d_i + sinh r e^{i varphi_i} d_i^dag``
    with ``tanh r = G_plus / G_minus``; they couple to the optics with strength
    ``eta = sqrt(G_minus^2 - G_plus^2)``. The resonant spectrum is
    ``S = -i eta^2 B^{-1}``. ``delta_tilde`` defaults to the bare detunings.
    """
    if not (G_minus > G_plus >= 0):
        raise DomainError(f"need G_minus > G_plus >= 0, got G_plus={G_plus}, G_minus={G_minus}")
    L = params.L
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (L,)).copy()
    varphi = np.broadcast_to(np.asarray(varphi, dtype=float), (L,)).copy()
    dt = params.delta if delta_tilde is None else np.broadcast_to(np.asarray(delta_tilde, float), (L,))
    gen = build_generator(params, np.array(dt, dtype=float))
    eta = float(np.sqrt(G_minus ** 2 - G_plus ** 2))
    r = float(np.arctanh(G_plus / G_minus))
    S = -1j * eta ** 2 * np.linalg.inv(gen.B)
    Omega, Gamma, U = decompose_spectrum(S)
    K, P = bogoliubov_coefficients(Omega, r, theta, varphi)
    return SqueezedEffectiveModel(float(G_plus), float(G_minus), r, eta, theta, varphi,
                                  Omega, K, P, Gamma, U)


def bogoliubov_coefficients(Omega, r, theta, varphi):
    r"""Expand ``sum_ij Omega_ij beta_i^dag beta_j`` into ``d`` operators.

    Off-diagonal entries use the closed forms, with
    ``a_ij = Arg Omega_ij``, half differences ``t_ij, f_ij`` and half sums
    ``T_ij, F_ij`` of ``theta`` and ``varphi``:

    ``K_ij = 2|Omega_ij| (sinh^2 r cos(f_ij + t_ij - a_ij) e^{i(f_ij - t_ij)}
    + e^{i a_ij - i(theta_i - theta_j)} / 2)``

    ``P_ij = 2|Omega_ij| e^{i(T_ij - F_ij)} cosh r sinh r cos(t_ij + f_ij - a_ij)``

    Diagonal entries: ``K_ii = Omega_ii cosh 2r`` and
    ``P_ii = Omega_ii cosh r sinh r e^{i(theta_i - varphi_i)}``.
    """
    Omega = np.asarray(Omega, dtype=complex)
    L = Omega.shape[0]
    ch, sh = np.cosh(r), np.sinh(r)
    mag = np.abs(Omega)
    a = np.angle(Omega)
    t = 0.5 * (theta[:, None] - theta[None, :])
    f = 0.5 * (varphi[:, None] - varphi[None, :])
    Ts = 0.5 * (theta[:, None] + theta[None, :])
    Fs = 0.5 * (varphi[:, None] + varphi[None, :])
    K = 2 * mag * (sh ** 2 * np.cos(f + t - a) * np.exp(1j * (f - t))
                   + 0.5 * np.exp(1j * a - 2j * t))
    P = 2 * mag * np.exp(1j * (Ts - Fs)) * ch * sh * np.cos(t + f - a)
    idx = np.arange(L)
    K[idx, idx] = Omega[idx, idx].real * (ch ** 2 + sh ** 2)
    P[idx, idx] = Omega[idx, idx].real * ch * sh * np.exp(1j * (theta - varphi))
    P = np.tril(P)
    return K, P


def direct_bogoliubov_expansion(Omega, r, theta, varphi):
    """Term-by-term expansion of ``sum_ij Omega_ij beta_i^dag beta_j``.

    Returns ``(K, P)`` in the same layout as :func:`bogoliubov_coefficients`
    (constant offsets dropped), computed without the closed forms.
    """
    Omega = np.asarray(Omega, dtype=complex)
    L = Omega.shape[0]
    ch, sh = np.cosh(r), np.sinh(r)
    K = np.zeros((L, L), dtype=complex)
    pair = np.zeros((L, L), dtype=complex)
    for i in range(L):
        for j in range(L):
            w = Omega[i, j]
            # beta_i^dag = ch e^{-i th_i} d_i^dag + sh e^{-i ph_i} d_i
            # beta_j     = ch e^{ i th_j} d_j     + sh e^{ i ph_j} d_j^dag
            K[i, j] += w * ch ** 2 * np.exp(-1j * (theta[i] - theta[j]))
            K[j, i] += w * sh ** 2 * np.exp(-1j * (varphi[i] - varphi[j]))  # d_i d_j^dag
            pair[i, j] += w * ch * sh * np.exp(-1j * (theta[i] - varphi[j]))
    P = np.zeros((L, L), dtype=complex)
    for i in range(L):
        P[i, i] = pair[i, i]
        for j in range(i):
            P[i, j] = pair[i, j] + pair[j, i]
    return K, P


def phase_matched_phases(Omega, nu: float):
    """Drive phases with ``theta_{l+1} - theta_l = Arg Omega_{l+1,l}`` and ``theta_l - varphi_l = nu``."""
    Omega = np.asarray(Omega)
    L = Omega.shape[0]
    theta = np.zeros(L)
    for l in range(L - 1):
        theta[l + 1] = theta[l] + np.angle(Omega[l + 1, l])
    return theta, theta - nu
