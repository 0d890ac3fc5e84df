r"""Closed-form analytics for a homogeneous, phase-graded ring.

With translation invariance the effective phonon theory is diagonal in the
quasi-momentum ``k = 2 pi n / L``, using ``d~_k = L^{-1/2} sum_l e^{-ikl} d_l``.
Everything here is built from the Lorentzian

.. math::

    \Gamma_k(\omega) = \frac{|G|^2 \gamma_c}{(\omega + J\cos(k+\phi) + \tilde\Delta)^2 + \gamma_c^2/4}

and its dispersive partner, whose Fourier coefficients are the real hopping
amplitudes ``J_p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InstabilityError
from .model import ModelParams, uniform_ring_params

# Populations above this value are flagged as close to the instability threshold.
NEAR_THRESHOLD_POPULATION = 1e6


@dataclass(frozen=True)
class RingParams:
    """Uniform ring parameters, parametrized by the mean-field detuning."""

    L: int
    phi: float
    g: float
    alpha_magnitude: float
    delta_tilde: float
    J: float
    gamma_c: float
    gamma_m: float
    nbar: float
    omega_m: float = 1.0

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise DomainError(f"L must be a positive integer, got {self.L!r}")
        for name in ("g", "alpha_magnitude", "J", "gamma_c", "gamma_m", "nbar"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be nonnegative")
        if self.omega_m <= 0:
            raise DomainError("omega_m must be strictly positive")

    @property
    def G_mag(self) -> float:
        return self.g * self.alpha_magnitude

    @property
    def k_grid(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.L) / self.L

    def replace(self, **changes) -> "RingParams":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return RingParams(**values)

    def to_model(self) -> ModelParams:
        return uniform_ring_params(
            self.L, g=self.g, alpha_magnitude=self.alpha_magnitude,
            delta_tilde=self.delta_tilde, J=self.J, gamma_c=self.gamma_c,
            gamma_m=self.gamma_m, nbar=self.nbar, phi=self.phi, omega_m=self.omega_m)

    @classmethod
    def from_model(cls, params: ModelParams, mf) -> "RingParams":
        """Extract uniform ring parameters; refuses anything non-uniform."""
        if params.lattice.topology_tag != "ring":
            raise DomainError("ring analytics need a ring lattice")
        for name in ("omega_m", "g", "gamma_c", "gamma_m", "nbar"):
            v = getattr(params, name)
            if not np.all(v == v[0]):
                raise DomainError(f"ring analytics need uniform {name}")
        dt = np.asarray(mf.delta_tilde)
        amag = np.abs(np.asarray(mf.alpha))
        if not (np.allclose(dt, dt[0], rtol=0, atol=1e-12 * max(1.0, abs(dt[0])))
                and np.allclose(amag, amag[0], rtol=1e-12, atol=0)):
            raise DomainError("ring analytics need a translation-invariant mean field")
        ph = np.angle(np.asarray(mf.alpha))
        phi = float(np.angle(np.exp(1j * (ph[1] - ph[0])))) if params.L > 1 else params.drive.phi
        steps = np.angle(np.exp(1j * (np.roll(ph, -1) - ph - phi)))
        if amag[0] > 0 and params.L > 1 and np.abs(steps).max() > 1e-9:
            raise DomainError("mean-field phases are not a uniform gradient")
        if amag[0] == 0:
            phi = params.drive.phi
        return cls(params.L, phi, float(params.g[0]), float(amag[0]), float(dt[0]), params.J,
                   float(params.gamma_c[0]), float(params.gamma_m[0]), float(params.nbar[0]),
                   float(params.omega_m[0]))


def _dispersive(x, G_mag, gamma_c):
    return G_mag ** 2 * x / (x ** 2 + 0.25 * gamma_c ** 2)


def hopping_amplitudes(L: int, G_mag: float, delta_tilde: float, J: float, gamma_c: float,
                       omega_m: float, sign: int) -> np.ndarray:
    """Real hopping amplitudes ``J_p`` for ``p = 0 .. L-1``.

    ``J_p = (1/L) sum_k cos(kp) F(k)`` with
    ``F(k) = |G|^2 x / (x^2 + gamma_c^2/4)`` and ``x = sign*omega_m + delta_tilde + J cos k``.
    Using the cosine makes the result real by construction (the summand is even in ``k``).
    """
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    if int(L) != L or L < 1:
        raise DomainError("L must be a positive integer")
    k = 2 * np.pi * np.arange(L) / L
    F = _dispersive(sign * omega_m + delta_tilde + J * np.cos(k), G_mag, gamma_c)
    p = np.arange(L)
    return np.cos(np.outer(p, k)) @ F / L


def k_rate(k, omega, phi, G_mag, delta_tilde, J, gamma_c):
    """Lorentzian rate ``Gamma_k(omega)`` of the engineered reservoir."""
    k = np.asarray(k, dtype=float)
    x = omega + J * np.cos(k + phi) + delta_tilde
    return G_mag ** 2 * gamma_c / (x ** 2 + 0.25 * gamma_c ** 2)


def dispersion(rp: RingParams, k=None) -> np.ndarray:
    """Renormalized phonon band ``omega_k``.

    ``omega_k = omega_m + F_+(k + phi) + F_-(k - phi)`` where ``F_+`` and ``F_-``
    are the dispersive responses at ``+omega_m`` and ``-omega_m``; the
    ``p = 0`` terms give the uniform frequency shift.
    """
    k = rp.k_grid if k is None else np.asarray(k, dtype=float)
    fp = _dispersive(rp.omega_m + rp.delta_tilde + rp.J * np.cos(k + rp.phi), rp.G_mag, rp.gamma_c)
    fm = _dispersive(-rp.omega_m + rp.delta_tilde + rp.J * np.cos(k - rp.phi), rp.G_mag, rp.gamma_c)
    return rp.omega_m + fp + fm


def dispersion_first_order(rp: RingParams, k=None) -> np.ndarray:
    """Leading-order band for ``gamma_c, J << |delta_tilde + omega_m|`` near the anti-Stokes sideband.

    ``omega_k ~ const + 4 (|G|/gamma_c)^2 J cos(k + phi)``, with ``const`` the
    ``J = 0`` band. Intended for regime checks only.
    """
    k = rp.k_grid if k is None else np.asarray(k, dtype=float)
    G2 = rp.G_mag ** 2
    xm = rp.delta_tilde - rp.omega_m
    const = (rp.omega_m + 4 * G2 * (rp.delta_tilde + rp.omega_m) / rp.gamma_c ** 2
             + G2 * xm / (xm ** 2 + 0.25 * rp.gamma_c ** 2))
    return const + 4 * G2 / rp.gamma_c ** 2 * rp.J * np.cos(k + rp.phi)


def _grid_trig(L: int):
    """``cos`` and ``sin`` of ``2 pi n / L`` with exact mirror symmetry.

    ``c[-n] == c[n]`` and ``s[-n] == -s[n]`` hold bit for bit (``s`` vanishes at
    ``n = 0`` and ``n = L/2``), so quantities at ``k`` and ``-k`` are evaluated
    by identical floating-point operations.
    """
    n = np.arange(L)
    m = np.where(n <= L // 2, n, L - n)
    ang = 2 * np.pi * m / L
    c = np.cos(ang)
    s = np.sin(ang)
    s[m == 0] = 0.0
    if L % 2 == 0:
        c[L // 2], s[L // 2] = -1.0, 0.0
    s = np.where(n <= L // 2, s, -s)
    return c, s


def _grid_rates(rp: RingParams):
    """Cooling rates at ``k`` and heating rates at ``-k`` on the grid."""
    c, s = _grid_trig(rp.L)
    cp, sp = math.cos(rp.phi), math.sin(rp.phi)
    cos_plus = c * cp - s * sp      # cos(k + phi)
    cos_mirror = c * cp + s * sp    # cos(-k + phi)
    G2g = rp.G_mag ** 2 * rp.gamma_c
    q = 0.25 * rp.gamma_c ** 2
    down = rp.gamma_m * (rp.nbar + 1) + G2g / ((rp.omega_m + rp.J * cos_plus + rp.delta_tilde) ** 2 + q)
    up_neg = rp.gamma_m * rp.nbar + G2g / ((-rp.omega_m + rp.J * cos_mirror + rp.delta_tilde) ** 2 + q)
    return down, up_neg


def effective_rates(rp: RingParams, k=None):
    """Cooling and heating rates ``(Gamma_down_k, Gamma_up_k)`` on the k grid."""
    k = rp.k_grid if k is None else np.asarray(k, dtype=float)
    args = (rp.phi, rp.G_mag, rp.delta_tilde, rp.J, rp.gamma_c)
    down = rp.gamma_m * (rp.nbar + 1) + k_rate(k, rp.omega_m, *args)
    up = rp.gamma_m * rp.nbar + k_rate(k, -rp.omega_m, *args)
    return down, up


def stability(rp: RingParams):
    """Per-k stability ``Gamma_down_k > Gamma_up_{-k}`` and the overall verdict."""
    down, up_neg = _grid_rates(rp)
    flags = down > up_neg
    return flags, bool(flags.all())


@dataclass(frozen=True, eq=False)
class RingSpectrum:
    L: int
    phi: float
    k_grid: np.ndarray
    J_p_plus: np.ndarray
    J_p_minus: np.ndarray
    omega_k: np.ndarray
    Gamma_down_k: np.ndarray
    Gamma_up_k: np.ndarray
    stable: np.ndarray

    @property
    def overall_stable(self) -> bool:
        return bool(self.stable.all())


def ring_spectrum(rp: RingParams) -> RingSpectrum:
    down, up = effective_rates(rp)
    flags, _ = stability(rp)
    args = (rp.L, rp.G_mag, rp.delta_tilde, rp.J, rp.gamma_c, rp.omega_m)
    return RingSpectrum(rp.L, rp.phi, rp.k_grid, hopping_amplitudes(*args, +1),
                        hopping_amplitudes(*args, -1), dispersion(rp), down, up, flags)


def current_range(L: int) -> np.ndarray:
    """Bond distances ``1 <= p < ceil(L/2)`` entering the circulating current."""
    return np.arange(1, math.ceil(L / 2))


def current_weights(rp: RingParams, J_p_plus=None, J_p_minus=None) -> np.ndarray:
    """Per-distance weights ``w[p-1, k] = -sum_pm J_p^pm sin(p (k pm phi))``."""
    args = (rp.L, rp.G_mag, rp.delta_tilde, rp.J, rp.gamma_c, rp.omega_m)
    jp = hopping_amplitudes(*args, +1) if J_p_plus is None else np.asarray(J_p_plus)
    jm = hopping_amplitudes(*args, -1) if J_p_minus is None else np.asarray(J_p_minus)
    c, s = _grid_trig(rp.L)
    n = np.arange(rp.L)
    ps = current_range(rp.L)
    w = np.empty((ps.size, rp.L))
    for i, p in enumerate(ps):
        idx = (p * n) % rp.L
        spk, cpk = s[idx], c[idx]
        cf, sf = math.cos(p * rp.phi), math.sin(p * rp.phi)
        # sin(p(k + phi)) and sin(p(k - phi)) by angle addition
        w[i] = -(jp[p] * (spk * cf + cpk * sf) + jm[p] * (spk * cf - cpk * sf))
    return w


def _mirror_sum(values) -> np.ndarray:
    """Sum over the last (k) axis pairing ``k`` with ``-k``."""
    values = np.asarray(values)
    L = values.shape[-1]
    total = values[..., 0].copy()
    for n in range(1, (L + 1) // 2):
        total = total + (values[..., n] + values[..., L - n])
    if L % 2 == 0 and L > 1:
        total = total + values[..., L // 2]
    return total


def current_operator_coefficients(rp: RingParams, J_p_plus=None, J_p_minus=None) -> np.ndarray:
    """Weights ``w_k`` with ``<j_C> = sum_k w_k n_k``."""
    w = current_weights(rp, J_p_plus, J_p_minus)
    return w.sum(axis=0) if w.size else np.zeros(rp.L)


def sigma_from_populations(n_k) -> np.ndarray:
    """``sigma[l, l'] = (1/L) sum_k e^{-ik(l-l')} n_k``."""
    n_k = np.asarray(n_k, dtype=float)
    L = n_k.size
    k = 2 * np.pi * np.arange(L) / L
    l = np.arange(L)
    phase = np.exp(-1j * np.einsum("ab,k->abk", (l[:, None] - l[None, :]).astype(float), k))
    return phase @ n_k / L


def coherence(sigma) -> np.ndarray:
    """Normalized first-order coherence ``sigma_ll' / sqrt(sigma_ll sigma_l'l')``.

    Entries involving an empty site are set to zero.
    """
    sigma = np.asarray(sigma, dtype=complex)
    pop = np.real(np.diag(sigma))
    norm = np.sqrt(np.outer(np.clip(pop, 0, None), np.clip(pop, 0, None)))
    g1 = np.zeros_like(sigma)
    mask = norm > 0
    g1[mask] = sigma[mask] / norm[mask]
    idx = np.nonzero(pop > 0)[0]
    g1[idx, idx] = 1.0
    return g1


@dataclass(frozen=True, eq=False)
class CurrentReport:
    """Steady state of the ring and its heat flows.

    ``Q_p`` (``p = 1 .. ceil(L/2)-1``) and ``Q_C`` are raw, in units of
    ``omega_m`` times phonons per unit time; the ``*_normalized`` properties
    divide by ``omega_m * gamma_m``. The antipodal distance ``p = L/2`` of even
    rings is excluded.
    """

    Q_p: np.ndarray
    Q_C: float
    populations_k: np.ndarray
    sigma: np.ndarray
    g1: np.ndarray
    omega_m: float
    gamma_m: float
    near_threshold: np.ndarray
    delta_err: Optional[float] = None

    @property
    def Q_p_normalized(self) -> np.ndarray:
        return self.Q_p / (self.omega_m * self.gamma_m)

    @property
    def Q_C_normalized(self) -> float:
        return self.Q_C / (self.omega_m * self.gamma_m)


def steady_state(rp: RingParams) -> CurrentReport:
    """Populations, density matrix, coherence and heat currents of a stable ring.

    Raises
    ------
    InstabilityError
        If some ``k`` has ``Gamma_down_k <= Gamma_up_{-k}``; the offending
        momenta are listed.
    """
    flags, ok = stability(rp)
    if not ok:
        bad = rp.k_grid[~flags]
        raise InstabilityError(
            "ring is dynamically unstable at k = " + ", ".join(f"{x:.6g}" for x in bad), bad)
    down, up_neg = _grid_rates(rp)
    n_k = up_neg / (down - up_neg)
    sigma = sigma_from_populations(n_k)
    Q_p = rp.omega_m * _mirror_sum(current_weights(rp) * n_k)
    return CurrentReport(Q_p, float(Q_p.sum()), n_k, sigma, coherence(sigma), rp.omega_m,
                         rp.gamma_m, n_k > NEAR_THRESHOLD_POPULATION)
