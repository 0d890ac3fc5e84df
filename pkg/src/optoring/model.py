"""Lattice geometry, physical parameters and regime checks.

All frequencies and rates are dimensionless, measured in units of the
mechanical frequency of site 0 (``UNIT_CONVENTION``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError

UNIT_CONVENTION = "frequencies and rates in units of omega_m[0]; angles in radians"

TOPOLOGIES = ("ring", "open_chain", "custom")
DRIVE_MODES = ("amplitude_driven", "alpha_prescribed")

# Weak-coupling margin: warn when gamma_c < WEAK_COUPLING_MARGIN * 2 g |alpha|.
WEAK_COUPLING_MARGIN = 5.0


def _frozen_array(values, dtype=float, shape=None, name="array"):
    arr = np.array(values, dtype=dtype)
    if shape is not None and arr.shape != shape:
        raise DomainError(f"{name} must have shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LatticeSpec:
    """Optical coupling graph of ``L`` sites given by a 0/1 adjacency matrix."""

    L: int
    adjacency: np.ndarray
    topology_tag: str = "custom"

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise DomainError(f"L must be a positive integer, got {self.L!r}")
        object.__setattr__(self, "L", int(self.L))
        if self.topology_tag not in TOPOLOGIES:
            raise DomainError(f"unknown topology {self.topology_tag!r}")
        A = _frozen_array(self.adjacency, float, (self.L, self.L), "adjacency")
        if not np.all((A == 0) | (A == 1)):
            raise DomainError("adjacency entries must be 0 or 1")
        if not np.array_equal(A, A.T):
            raise DomainError("adjacency must be symmetric")
        if np.any(np.diag(A) != 0):
            raise DomainError("adjacency must have a zero diagonal")
        if self.topology_tag == "ring" and not np.array_equal(A, _ring_adjacency(self.L)):
            raise DomainError("adjacency does not match the nearest-neighbour ring pattern")
        if self.topology_tag == "open_chain" and not np.array_equal(A, _chain_adjacency(self.L)):
            raise DomainError("adjacency does not match the open-chain pattern")
        object.__setattr__(self, "adjacency", A)

    def __eq__(self, other):
        if not isinstance(other, LatticeSpec):
            return NotImplemented
        return (self.L == other.L and self.topology_tag == other.topology_tag
                and np.array_equal(self.adjacency, other.adjacency))

    __hash__ = None


def _ring_adjacency(L):
    A = np.zeros((L, L))
    for l in range(L):
        m = (l + 1) % L
        if m != l:
            A[l, m] = A[m, l] = 1.0
    return A


def _chain_adjacency(L):
    A = np.zeros((L, L))
    for l in range(L - 1):
        A[l, l + 1] = A[l + 1, l] = 1.0
    return A


def build_ring(L: int) -> LatticeSpec:
    """Nearest-neighbour ring of ``L`` sites.

    ``L = 1`` has no bonds and ``L = 2`` a single bond (no doubled entries).
    """
    if int(L) != L or L < 1:
        raise DomainError(f"L must be a positive integer, got {L!r}")
    return LatticeSpec(int(L), _ring_adjacency(int(L)), "ring")


def build_open_chain(L: int) -> LatticeSpec:
    if int(L) != L or L < 1:
        raise DomainError(f"L must be a positive integer, got {L!r}")
    return LatticeSpec(int(L), _chain_adjacency(int(L)), "open_chain")


@dataclass(frozen=True, eq=False)
class DriveSpec:
    """Coherent optical drive.

    In ``amplitude_driven`` mode the drive amplitudes are
    ``F_l = F_magnitude * exp(i * phase_l)`` and the optical mean field is solved
    self-consistently. In ``alpha_prescribed`` mode the mean field itself is
    ``alpha_l = alpha_magnitude * exp(i * phase_l)``. Phases default to
    ``l * phi``; an explicit ``phases`` vector overrides them.
    """

    mode: str
    phi: float = 0.0
    F_magnitude: Optional[float] = None
    alpha_magnitude: Optional[float] = None
    phases: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mode not in DRIVE_MODES:
            raise DomainError(f"unknown drive mode {self.mode!r}")
        if self.mode == "amplitude_driven":
            if self.F_magnitude is None or self.alpha_magnitude is not None:
                raise DomainError("amplitude_driven drive needs F_magnitude and no alpha_magnitude")
            magnitude = self.F_magnitude
        else:
            if self.alpha_magnitude is None or self.F_magnitude is not None:
                raise DomainError("alpha_prescribed drive needs alpha_magnitude and no F_magnitude")
            magnitude = self.alpha_magnitude
        if not (math.isfinite(magnitude) and magnitude >= 0):
            raise DomainError(f"drive magnitude must be finite and >= 0, got {magnitude}")
        if not math.isfinite(self.phi):
            raise DomainError("phi must be finite")
        object.__setattr__(self, "phi", float(self.phi))
        if self.phases is not None:
            object.__setattr__(self, "phases", _frozen_array(self.phases, float, name="phases"))

    @property
    def magnitude(self) -> float:
        return self.F_magnitude if self.mode == "amplitude_driven" else self.alpha_magnitude

    def site_phases(self, L: int) -> np.ndarray:
        if self.phases is not None:
            if self.phases.shape != (L,):
                raise DomainError(f"phases must have length {L}")
            return np.array(self.phases)
        return self.phi * np.arange(L)

    def amplitudes(self, L: int) -> np.ndarray:
        """Complex per-site drive (F or alpha, depending on the mode)."""
        return self.magnitude * np.exp(1j * self.site_phases(L))

    def __eq__(self, other):
        if not isinstance(other, DriveSpec):
            return NotImplemented
        same_phases = (self.phases is None and other.phases is None) or (
            self.phases is not None and other.phases is not None
            and np.array_equal(self.phases, other.phases))
        return (self.mode == other.mode and self.phi == other.phi
                and self.F_magnitude == other.F_magnitude
                and self.alpha_magnitude == other.alpha_magnitude and same_phases)

    __hash__ = None


_VECTOR_FIELDS = ("omega_m", "delta", "g", "gamma_c", "gamma_m", "nbar")


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Full parameter set of the driven optomechanical lattice.

    Scalars passed for per-site quantities are broadcast to length ``L``.
    ``delta`` holds the *bare* detunings; use :func:`bare_detuning` to obtain
    them from a target mean-field detuning.
    """

    lattice: LatticeSpec
    omega_m: np.ndarray
    delta: np.ndarray
    g: np.ndarray
    J: float
    gamma_c: np.ndarray
    gamma_m: np.ndarray
    nbar: np.ndarray
    drive: DriveSpec

    def __post_init__(self):
        L = self.lattice.L
        for name in _VECTOR_FIELDS:
            raw = np.asarray(getattr(self, name), dtype=float)
            if raw.ndim == 0:
                raw = np.full(L, float(raw))
            arr = _frozen_array(raw, float, (L,), name)
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, arr)
        if not math.isfinite(self.J) or self.J < 0:
            raise DomainError(f"J must be finite and >= 0, got {self.J}")
        object.__setattr__(self, "J", float(self.J))
        for name in ("g", "gamma_c", "gamma_m", "nbar"):
            if np.any(getattr(self, name) < 0):
                raise DomainError(f"{name} must be nonnegative")
        if np.any(self.omega_m <= 0):
            raise DomainError("omega_m must be strictly positive")

    @property
    def L(self) -> int:
        return self.lattice.L

    @property
    def uniform_omega_m(self) -> bool:
        return bool(np.all(self.omega_m == self.omega_m[0]))

    def replace(self, **changes) -> "ModelParams":
        values = {name: getattr(self, name) for name in
                  ("lattice", "omega_m", "delta", "g", "J", "gamma_c", "gamma_m", "nbar", "drive")}
        values.update(changes)
        return ModelParams(**values)

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (self.lattice == other.lattice and self.J == other.J and self.drive == other.drive
                and all(np.array_equal(getattr(self, n), getattr(other, n)) for n in _VECTOR_FIELDS))

    __hash__ = None


def bare_detuning(delta_tilde, g, alpha_magnitude, omega_m):
    """Bare detuning giving the requested mean-field detuning (high-Q shift inverted)."""
    return (np.asarray(delta_tilde, dtype=float)
            - 2.0 * np.asarray(g, dtype=float) ** 2 * np.asarray(alpha_magnitude, dtype=float) ** 2
            / np.asarray(omega_m, dtype=float))


def uniform_ring_params(L, *, g, alpha_magnitude, delta_tilde, J, gamma_c, gamma_m, nbar,
                        phi, omega_m=1.0) -> ModelParams:
    """Homogeneous ring with a prescribed mean field, parametrized by the shifted detuning."""
    return ModelParams(
        lattice=build_ring(L),
        omega_m=omega_m,
        delta=bare_detuning(delta_tilde, g, alpha_magnitude, omega_m),
        g=g,
        J=J,
        gamma_c=gamma_c,
        gamma_m=gamma_m,
        nbar=nbar,
        drive=DriveSpec("alpha_prescribed", phi=phi, alpha_magnitude=alpha_magnitude),
    )


class RegimeWarning(UserWarning):
    """Advisory flag raised by :func:`validate_regime`; never blocks computation."""

    def __init__(self, kind: str, message: str, sites: Sequence[int] = ()):
        self.kind = kind
        self.sites = tuple(sites)
        super().__init__(message)


def phase_is_commensurate(phi: float, L: int, atol: float = 1e-9) -> bool:
    n = phi * L / (2 * np.pi)
    return abs(n - round(n)) <= atol


def validate_regime(params: ModelParams, mf, emit: bool = False) -> list:
    """Return advisory :class:`RegimeWarning` instances for ``params``.

    Checks the weak optomechanical coupling condition
    ``gamma_c >= 5 * 2 g |alpha|`` site by site, and, on rings, that the drive
    phase gradient is a multiple of ``2 pi / L``. With ``emit=True`` the
    warnings are also issued through :mod:`warnings`.
    """
    found = []
    coupling = 2.0 * params.g * np.abs(np.asarray(mf.alpha))
    bad = np.nonzero(params.gamma_c < WEAK_COUPLING_MARGIN * coupling)[0]
    if bad.size:
        found.append(RegimeWarning(
            "weak_coupling",
            f"gamma_c < {WEAK_COUPLING_MARGIN:g} * 2 g |alpha| on sites {bad.tolist()} "
            f"(max 2g|alpha| = {coupling.max():.3g}, min gamma_c = {params.gamma_c.min():.3g})",
            bad.tolist()))
    if (params.lattice.topology_tag == "ring" and params.drive.phases is None
            and not phase_is_commensurate(params.drive.phi, params.L)):
        found.append(RegimeWarning(
            "phase_gradient",
            f"ring drive phase gradient {params.drive.phi:.6g} is not a multiple of 2*pi/{params.L}"))
    if emit:
        for w in found:
            warnings.warn(w, stacklevel=2)
    return found
