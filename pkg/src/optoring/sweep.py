"""Parameter grids, per-point evaluators and the ridge search used by the CLI.

Every evaluator is a module-level function of plain data so that points can be
farmed out to worker processes; results are always reassembled in grid order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .benchmark import benchmark_ring, sigma_mf, solve_covariance
from .errors import DomainError, InstabilityError
from .meanfield import solve_mean_field
from .ring import RingParams, hopping_amplitudes, k_rate, stability, steady_state

AXIS_NAMES = ("delta_tilde", "J_over_gamma_c", "phi", "nbar", "g")
DERIVED = {
    "delta_tilde=-J-omega_m": lambda rp: -rp.J - rp.omega_m,
    "delta_tilde=-J-omega_m-gamma_c/2": lambda rp: -rp.J - rp.omega_m - 0.5 * rp.gamma_c,
    "delta_tilde=omega_m-J": lambda rp: rp.omega_m - rp.J,
}
RIDGE_STEP = 0.005
RIDGE_XATOL = 1e-6
RIDGE_WINDOW = 1.0
DELTA_FLAG = 0.05


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    steps: int

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise DomainError(f"unknown grid axis {self.name!r}; expected one of {AXIS_NAMES}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise DomainError(f"axis {self.name}: steps must be a positive integer")
        if not (math.isfinite(self.min) and math.isfinite(self.max)) or self.min > self.max:
            raise DomainError(f"axis {self.name}: need finite min <= max")

    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, int(self.steps))


@dataclass(frozen=True)
class GridSpec:
    axes: Tuple[Axis, ...]
    derived: Tuple[str, ...] = ()

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise DomainError("a grid has one or two axes")
        if len({a.name for a in self.axes}) != len(self.axes):
            raise DomainError("grid axes must be distinct")
        for d in self.derived:
            if d not in DERIVED:
                raise DomainError(f"unknown derived constraint {d!r}; expected one of {sorted(DERIVED)}")
        if self.derived and any(a.name == "delta_tilde" for a in self.axes):
            raise DomainError("a derived detuning constraint conflicts with a delta_tilde axis")
        if len(self.derived) > 1:
            raise DomainError("at most one derived constraint")

    @property
    def names(self) -> List[str]:
        return [a.name for a in self.axes]

    def points(self) -> List[Dict[str, float]]:
        """Grid points in row-major order (first axis slowest)."""
        grids = [a.values() for a in self.axes]
        mesh = np.meshgrid(*grids, indexing="ij")
        flat = [m.ravel() for m in mesh]
        return [{a.name: float(f[i]) for a, f in zip(self.axes, flat)} for i in range(flat[0].size)]

    def describe(self) -> dict:
        return {"axes": [asdict(a) for a in self.axes], "derived": list(self.derived)}


def parse_grid(text: str, derived: Sequence[str] = ()) -> GridSpec:
    """Parse ``"name:min:max:steps[,name:min:max:steps]"``."""
    axes = []
    for chunk in text.split(","):
        parts = chunk.strip().split(":")
        if len(parts) != 4:
            raise DomainError(f"bad grid axis {chunk!r}; expected name:min:max:steps")
        name, lo, hi, steps = parts
        try:
            axes.append(Axis(name.strip(), float(lo), float(hi), int(steps)))
        except ValueError as exc:
            raise DomainError(f"bad grid axis {chunk!r}: {exc}") from exc
    return GridSpec(tuple(axes), tuple(derived))


def grid_from_run(run: dict) -> Optional[GridSpec]:
    grid = run.get("grid")
    if not grid:
        return None
    axes = tuple(Axis(a["name"], float(a["min"]), float(a["max"]), a["steps"]) for a in grid["axes"])
    return GridSpec(axes, tuple(grid.get("derived", ())))


def apply_point(base: RingParams, point: Dict[str, float], derived: Sequence[str] = ()) -> RingParams:
    changes = {}
    for name, v in point.items():
        if name == "J_over_gamma_c":
            changes["J"] = v * base.gamma_c
        else:
            changes[name] = v
    rp = base.replace(**changes)
    for d in derived:
        rp = rp.replace(delta_tilde=DERIVED[d](rp))
    return rp


def point_columns(rp: RingParams) -> List[float]:
    return [rp.J / rp.gamma_c, rp.delta_tilde, rp.phi, rp.nbar, rp.g]


POINT_HEADER = ["J_over_gamma_c[1]", "delta_tilde[omega_m]", "phi[rad]", "nbar[1]", "g[omega_m]"]


# -- per-point evaluators ---------------------------------------------------------------

def eval_hoppings(rp: RingParams):
    args = (rp.L, rp.G_mag, rp.delta_tilde, rp.J, rp.gamma_c, rp.omega_m)
    jp, jm = hopping_amplitudes(*args, +1), hopping_amplitudes(*args, -1)
    rows = []
    for p in range(rp.L):
        rows.append(point_columns(rp) + [p, jp[p], abs(jp[p]), int(np.sign(jp[p])), jm[p], "ok"])
    return rows, "ok"


HOPPINGS_HEADER = POINT_HEADER + ["p[sites]", "J_p_plus[omega_m]", "abs_J_p_plus[omega_m]",
                                  "sign_J_p_plus[1]", "J_p_minus[omega_m]", "status"]


def eval_phase_diagram(rp: RingParams):
    _, ok = stability(rp)
    if not ok:
        nan = float("nan")
        return [point_columns(rp) + [nan, nan, nan, 0, "unstable"]], "unstable"
    rep = steady_state(rp)
    status = "warned" if rep.near_threshold.any() else "ok"
    q = rep.Q_C_normalized
    return [point_columns(rp) + [rep.Q_C, q, abs(q), int(np.sign(q)), status]], status


PHASE_HEADER = POINT_HEADER + ["Q_C[omega_m*phonons/time]", "Q_C[omega_m*gamma_m]",
                               "abs_Q_C[omega_m*gamma_m]", "sign_Q_C[1]", "status"]


def eval_benchmark(rp: RingParams):
    nan = float("nan")
    _, ok = stability(rp)
    if not ok:
        return [point_columns(rp) + [nan, 0, nan, nan, "unstable"]], "unstable"
    try:
        rep = benchmark_ring(rp)
    except InstabilityError:
        return [point_columns(rp) + [nan, 0, nan, nan, "unstable"]], "unstable"
    norm = rp.omega_m * rp.gamma_m
    flag = int(rep.delta >= DELTA_FLAG)
    status = "warned" if flag else "ok"
    return [point_columns(rp) + [rep.delta, flag, rep.Q_C_eff / norm, rep.Q_C_mf / norm, status]], status


BENCHMARK_HEADER = POINT_HEADER + ["delta[1]", "delta_ge_5pct[1]", "Q_C_eff[omega_m*gamma_m]",
                                   "Q_C_mf[omega_m*gamma_m]", "status"]


def eval_coherence(rp: RingParams):
    ps = list(range(1, rp.L // 2 + 1))
    nan = float("nan")
    _, ok = stability(rp)
    if not ok:
        return [point_columns(rp) + [nan] * (2 * len(ps)) + ["unstable"]], "unstable"
    rep = steady_state(rp)
    eff = [abs(rep.g1[0, p]) for p in ps]
    try:
        params = rp.to_model()
        cov = solve_covariance(params, solve_mean_field(params))
        s = sigma_mf(cov.C, rp.L)
        pop = np.real(np.diag(s))
        mf = [abs(s[0, p]) / math.sqrt(pop[0] * pop[p]) for p in ps]
        status = "ok"
    except InstabilityError:
        mf = [nan] * len(ps)
        status = "warned"
    return [point_columns(rp) + eff + mf + [status]], status


def coherence_header(L: int) -> List[str]:
    ps = range(1, L // 2 + 1)
    return (POINT_HEADER + [f"abs_g1_p{p}_eff[1]" for p in ps]
            + [f"abs_g1_p{p}_mf[1]" for p in ps] + ["status"])


def ridge_detuning(rp: RingParams, step: float = RIDGE_STEP, xatol: float = RIDGE_XATOL,
                   window: float = RIDGE_WINDOW) -> Optional[float]:
    """Detuning maximizing ``|Q_C|`` at fixed ``J`` across the anti-Stokes band.

    The search covers ``[-omega_m - J - w, -omega_m + J + w]`` with
    ``w = window * gamma_c``, first on a grid of spacing ``step`` (stable
    points only), then by bounded scalar refinement between the neighbours of
    the best grid point. Returns ``None`` if the whole window is unstable.
    """
    half = rp.J + window * rp.gamma_c
    lo, hi = -rp.omega_m - half, -rp.omega_m + half
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    grid = lo + step * np.arange(n)

    def score(dt):
        q = rp.replace(delta_tilde=float(dt))
        if not stability(q)[1]:
            return math.inf
        return -abs(steady_state(q).Q_C)

    vals = np.array([score(d) for d in grid])
    if not np.isfinite(vals).any():
        return None
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
    if b <= a:
        return float(grid[i])
    res = minimize_scalar(lambda d: score(d) if math.isfinite(score(d)) else 0.0,
                          bounds=(a, b), method="bounded", options={"xatol": xatol})
    best = float(res.x) if res.fun <= vals[i] else float(grid[i])
    return best


def eval_ridge(rp: RingParams, step: float = RIDGE_STEP, xatol: float = RIDGE_XATOL,
               window: float = RIDGE_WINDOW, n_p: int = 3):
    nan = float("nan")
    dt = ridge_detuning(rp, step, xatol, window)
    if dt is None:
        return [point_columns(rp) + [nan] * (2 * n_p + 3) + ["unstable"]], "unstable"
    rp = rp.replace(delta_tilde=dt)
    norm = rp.omega_m * rp.gamma_m
    rep = steady_state(rp)
    q_eff = list(_pad(rep.Q_p / norm, n_p))
    try:
        bm = benchmark_ring(rp)
        q_mf = list(_pad(bm.currents_mf / norm, n_p))
        qc_mf, delta, status = bm.Q_C_mf / norm, bm.delta, "ok"
    except InstabilityError:
        q_mf, qc_mf, delta, status = [nan] * n_p, nan, nan, "warned"
    return [point_columns(rp) + q_eff + [rep.Q_C_normalized] + q_mf + [qc_mf, delta, status]], status


def _pad(values, n):
    out = np.full(n, np.nan)
    m = min(n, len(values))
    out[:m] = values[:m]
    return out


def ridge_header(n_p: int = 3) -> List[str]:
    return (POINT_HEADER + [f"Q_{p}_eff[omega_m*gamma_m]" for p in range(1, n_p + 1)]
            + ["Q_C_eff[omega_m*gamma_m]"]
            + [f"Q_{p}_mf[omega_m*gamma_m]" for p in range(1, n_p + 1)]
            + ["Q_C_mf[omega_m*gamma_m]", "delta[1]", "status"])


def eval_rates(rp: RingParams):
    """Gain ``Gamma_{-k}(-omega_m)`` at ``delta_tilde = omega_m - J`` and loss
    ``Gamma_k(+omega_m)`` at ``delta_tilde = -omega_m - J``, per ``k``."""
    rows = []
    for n, k in enumerate(rp.k_grid):
        gain = float(k_rate(-k, -rp.omega_m, rp.phi, rp.G_mag, rp.omega_m - rp.J, rp.J, rp.gamma_c))
        loss = float(k_rate(k, rp.omega_m, rp.phi, rp.G_mag, -rp.omega_m - rp.J, rp.J, rp.gamma_c))
        rows.append([rp.J / rp.gamma_c, rp.phi, rp.g, n, k, gain, loss, "ok"])
    return rows, "ok"


RATES_HEADER = ["J_over_gamma_c[1]", "phi[rad]", "g[omega_m]", "n[1]", "k[rad]",
                "gain_Gamma_minus_k_at_minus_omega_m[omega_m]",
                "loss_Gamma_k_at_plus_omega_m[omega_m]", "status"]


EVALUATORS = {
    "hoppings": eval_hoppings,
    "phase-diagram": eval_phase_diagram,
    "benchmark": eval_benchmark,
    "coherence": eval_coherence,
    "rates": eval_rates,
}


def _run_one(task):
    name, rp_dict, kwargs = task
    fn = eval_ridge if name == "ridge" else EVALUATORS[name]
    return fn(RingParams(**rp_dict), **kwargs)


def run_points(name: str, points: Sequence[RingParams], threads: int = 1, **kwargs):
    """Evaluate ``points`` in order, optionally across ``threads`` processes."""
    tasks = [(name, asdict(rp), kwargs) for rp in points]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    return [_run_one(t) for t in tasks]
