"""Conservative finite-volume radial solver for u_t = div(|grad u^q|^{p-2} grad u^q).

Scheme: cell averages u_i on a uniform radial grid, face fluxes

    F_{i+1/2} = S(r_{i+1/2}) * phi(g),   g = (u_{i+1}^q - u_i^q)/dr,
    phi(g) = (g^2 + eps^2)^{(p-2)/2} g,

zero flux at r=0 (symmetry) and r=R (domain truncation), explicit Euler in
time with an adaptive step bounded by cfl * dr^2 / max local diffusivity.
Telescoping fluxes conserve the discrete mass sum(u_i S(r_i) dr) exactly up
to roundoff; undershoots are clipped to zero with the clipped mass recorded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .exponents import INF, Params
from .fields import RadialField, grad_power_energy, lp_norm
from .geometry import ModelGeometry, RadialGrid, surface_density


class SolverError(RuntimeError):
    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


try:  # jitted inner loop; the numpy ops below stay as the reference path
    from numba import njit as _njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def _njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap if not (args and callable(args[0])) else args[0]


@_njit(cache=True)
def _advance_kernel(u, t, target, t_end, dr, cfl, eps2, p, q,
                    dens_c, dens_f, dt_min, max_steps):
    """Advance explicit steps while the next step stays below `target`.

    Returns (t, steps, clip_mass, dt_sum, hit_cap). dens_f holds interior
    face densities (length N-1). Squares and square roots replace pow for
    the common exponents; the generic branch uses pow.
    """
    N = u.shape[0]
    w = np.empty(N)
    phi = np.empty(N - 1)
    steps = 0
    clip = 0.0
    dt_sum = 0.0
    pm2h = (p - 2.0) / 2.0
    qm1 = q - 1.0
    while t < target * (1.0 - 1e-16):
        umax = 0.0
        for i in range(N):
            if u[i] > umax:
                umax = u[i]
            if q == 1.0:
                w[i] = u[i]
            elif q == 2.0:
                w[i] = u[i] * u[i]
            elif q == 0.5:
                w[i] = math.sqrt(u[i])
            elif q == 1.5:
                w[i] = u[i] * math.sqrt(u[i])
            else:
                w[i] = u[i] ** q
        floor = 1e-30 * umax
        dmax = 0.0
        for i in range(N - 1):
            g = (w[i + 1] - w[i]) / dr
            if p == 2.0:
                reg = 1.0
            elif p == 3.0:
                reg = math.sqrt(g * g + eps2)
            else:
                reg = (g * g + eps2) ** pm2h
            phi[i] = reg * g
            if g != 0.0:
                uf = u[i] if u[i] > u[i + 1] else u[i + 1]
                if uf < floor:
                    uf = floor
                if qm1 == 0.0:
                    upow = 1.0
                elif qm1 == 1.0:
                    upow = uf
                elif qm1 == 0.5:
                    upow = math.sqrt(uf)
                elif qm1 == -0.5:
                    upow = 1.0 / math.sqrt(uf)
                else:
                    upow = uf ** qm1
                de = (p - 1.0) * q * upow * reg
                if de > dmax:
                    dmax = de
        if dmax <= 0.0:
            dt = t_end - t
            if dt <= 0.0:
                break
        else:
            dt = cfl * dr * dr / dmax
            if dt < dt_min:
                dt = dt_min
            if dt > t_end - t:
                dt = t_end - t
        if t + dt >= target:
            break
        prev_flux = 0.0
        for i in range(N):
            nxt_flux = dens_f[i] * phi[i] if i < N - 1 else 0.0
            un = u[i] + dt * (nxt_flux - prev_flux) / (dens_c[i] * dr)
            if un < 0.0:
                clip -= un * dens_c[i] * dr
                un = 0.0
            u[i] = un
            prev_flux = nxt_flux
        t += dt
        steps += 1
        dt_sum += dt
        if steps >= max_steps:
            return t, steps, clip, dt_sum, True
    return t, steps, clip, dt_sum, False


@dataclass(frozen=True)
class SolverConfig:
    grid: RadialGrid
    geom: ModelGeometry
    params: Params
    t0: float
    t_end: float
    sample_times: tuple
    cfl: float = 0.25
    eps_reg: float = 1e-12
    dt_min: float = 1e-14
    max_steps: int = 50_000_000
    norm_lambdas: tuple = ()

    def __post_init__(self):
        if not self.t0 < self.t_end:
            raise ValueError("need t0 < t_end")
        if not 0.0 < self.cfl < 1.0:
            raise ValueError("cfl safety factor must lie in (0, 1)")
        if self.eps_reg < 0.0:
            raise ValueError("eps_reg must be >= 0")
        ts = tuple(float(t) for t in self.sample_times)
        if any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
            raise ValueError("sample times must be strictly increasing")
        if ts and (ts[0] < self.t0 or ts[-1] > self.t_end + 1e-12 * self.t_end):
            raise ValueError("sample times must lie in [t0, t_end]")
        object.__setattr__(self, "sample_times", ts)
        lams = self.norm_lambdas or (1.0, 1.0 + self.params.q, 2.0, INF)
        object.__setattr__(self, "norm_lambdas", tuple(lams))


def default_sample_times(t0: float, t_end: float, per_decade: int = 32) -> tuple:
    """Log-spaced sampling, per_decade points per decade, endpoints included."""
    decades = math.log10(t_end / t0)
    num = max(2, int(math.ceil(per_decade * decades)) + 1)
    return tuple(np.geomspace(t0, t_end, num))


@dataclass
class Trajectory:
    config: SolverConfig
    times: np.ndarray
    fields: list
    diagnostics: dict
    clip_mass_total: float
    steps_total: int

    def field_at(self, k: int) -> RadialField:
        return self.fields[k]

    def norm_series(self, lam: float) -> np.ndarray:
        key = _lambda_key(lam)
        if key not in self.diagnostics:
            raise KeyError(f"norm index {lam} was not recorded")
        return self.diagnostics[key]


def _lambda_key(lam: float) -> str:
    return "linf" if lam == INF else f"l{lam:g}"


def face_flux(config: SolverConfig, u: np.ndarray) -> np.ndarray:
    """Facewise flux S(r_face) * phi(g); zero at r=0 and r=R."""
    q, p, eps = config.params.q, config.params.p, config.eps_reg
    grid = config.grid
    w = u ** q
    flux = np.zeros(grid.N + 1)
    g = np.diff(w) / grid.dr
    phi = (g * g + eps * eps) ** ((p - 2.0) / 2.0) * g
    dens = surface_density(config.geom, grid.faces[1:-1])
    flux[1:-1] = dens * phi
    return flux


def _face_diffusivity(config: SolverConfig, u: np.ndarray) -> np.ndarray:
    """Local effective diffusivity (p-1) q u_face^{q-1} (g^2+eps^2)^{(p-2)/2} at interior faces."""
    q, p, eps = config.params.q, config.params.p, config.eps_reg
    g = np.diff(u ** q) / config.grid.dr
    u_face = np.maximum(u[:-1], u[1:])
    floor = 1e-30 * float(np.max(u)) if np.max(u) > 0 else 0.0
    base = np.maximum(u_face, floor)
    with np.errstate(divide="ignore"):
        upow = np.where(base > 0.0, base ** (q - 1.0), 0.0)
    d_eff = (p - 1.0) * q * upow * (g * g + eps * eps) ** ((p - 2.0) / 2.0)
    # faces with no gradient carry no flux and impose no constraint
    return np.where(g != 0.0, d_eff, 0.0)


def stable_dt(config: SolverConfig, u: np.ndarray, t: float) -> float:
    """cfl * dr^2 / max face diffusivity, clamped to [dt_min, t_end - t]."""
    remaining = config.t_end - t
    d_max = float(np.max(_face_diffusivity(config, u))) if config.grid.N > 1 else 0.0
    if d_max <= 0.0:
        return max(remaining, config.dt_min) if remaining > 0 else config.dt_min
    dt = config.cfl * config.grid.dr ** 2 / d_max
    dt = max(dt, config.dt_min)
    if remaining > 0:
        dt = min(dt, remaining)
    return dt


def step(config: SolverConfig, u: np.ndarray, dt: float,
         dens_centers: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """One explicit conservative update; returns (new cell values, clipped mass)."""
    grid = config.grid
    if dens_centers is None:
        dens_centers = surface_density(config.geom, grid.centers)
    flux = face_flux(config, u)
    u_new = u + dt * np.diff(flux) / (dens_centers * grid.dr)
    neg = u_new < 0.0
    clip = 0.0
    if np.any(neg):
        clip = float(-np.sum(u_new[neg] * dens_centers[neg]) * grid.dr)
        u_new = np.where(neg, 0.0, u_new)
    return u_new, clip


def run(config: SolverConfig, u0: RadialField) -> Trajectory:
    """Advance t0 -> t_end, capturing the state nearest each sample time.

    The step sequence is set by stability alone; samples record the state of
    whichever step lands closest.  Bulk advancement between samples runs in
    the jitted kernel when numba is present, with single reference steps
    across each sample time.
    """
    grid, geom = config.grid, config.geom
    if u0.grid is not grid and (u0.grid.N != grid.N or u0.grid.R != grid.R):
        raise ValueError("initial field lives on a different grid")
    dens = surface_density(geom, grid.centers)
    dens_faces = surface_density(geom, grid.faces[1:-1])

    samples = list(config.sample_times) or [config.t_end]
    t = config.t0
    u = u0.values.copy()
    mass0 = float(np.sum(u * dens) * grid.dr)
    clip_total = 0.0
    steps_total = 0

    captured: list[tuple[float, np.ndarray]] = []
    dt_hist: list[list[float]] = [[0.0, 0]]
    next_idx = 0
    if samples[0] <= t:
        captured.append((t, u.copy()))
        dt_hist.append([0.0, 0])
        next_idx = 1

    def check_mass():
        mass_now = float(np.sum(u * dens) * grid.dr)
        if abs(mass_now - mass0 - clip_total) > 1e-6 * max(mass0, 1e-300):
            raise SolverError("mass leak exceeds 1e-6 relative", {
                "t": t, "mass0": mass0, "mass": mass_now,
                "clipped": clip_total, "steps": steps_total})

    t_final = config.t_end
    while t < t_final * (1.0 - 1e-15) and next_idx < len(samples):
        target = samples[next_idx]
        if _HAVE_NUMBA:
            t, ksteps, kclip, kdt_sum, hit_cap = _advance_kernel(
                u, t, target, t_final, grid.dr, config.cfl,
                config.eps_reg ** 2, config.params.p, config.params.q,
                dens, dens_faces, config.dt_min,
                config.max_steps - steps_total)
            steps_total += ksteps
            clip_total += kclip
            dt_hist[-1][0] += kdt_sum
            dt_hist[-1][1] += ksteps
            if hit_cap:
                raise SolverError("max step count exceeded",
                                  {"t": t, "steps": steps_total})
        # single steps across the sample time (also the numpy-only path)
        dt = stable_dt(config, u, t)
        u_new, clip = step(config, u, dt, dens)
        t_prev, u_prev = t, u
        t, u = t + dt, u_new
        clip_total += clip
        steps_total += 1
        dt_hist[-1][0] += dt
        dt_hist[-1][1] += 1
        if steps_total > config.max_steps:
            raise SolverError("max step count exceeded",
                              {"t": t, "steps": steps_total, "dt": dt})
        while next_idx < len(samples) and samples[next_idx] <= t:
            s = samples[next_idx]
            if abs(t - s) <= abs(s - t_prev):
                captured.append((t, u.copy()))
            else:
                captured.append((t_prev, u_prev.copy()))
            dt_hist.append([0.0, 0])
            next_idx += 1
        check_mass()

    while next_idx < len(samples):     # samples at/after the final reached time
        captured.append((t, u.copy()))
        dt_hist.append([0.0, 0])
        next_idx += 1
    check_mass()

    # drop duplicate capture times (two samples resolved to the same step)
    times, fields_v, dt_groups = [], [], []
    for k, (tc, uc) in enumerate(captured):
        if times and tc <= times[-1]:
            continue
        times.append(tc)
        fields_v.append(uc)
        dt_groups.append(dt_hist[k])

    q, p = config.params.q, config.params.p
    fields = [RadialField(grid, geom, v) for v in fields_v]
    diag: dict[str, np.ndarray] = {}
    for lam in config.norm_lambdas:
        diag[_lambda_key(lam)] = np.array([lp_norm(f, lam) for f in fields])
    diag["grad_energy"] = np.array([grad_power_energy(f, q, p) for f in fields])
    diag["mass"] = np.array([float(np.sum(v * dens) * grid.dr) for v in fields_v])
    diag["dt_mean"] = np.array([g[0] / g[1] if g[1] else 0.0 for g in dt_groups])

    return Trajectory(config=config, times=np.array(times), fields=fields,
                      diagnostics=diag, clip_mass_total=clip_total,
                      steps_total=steps_total)


def fit_decay_exponent(traj: Trajectory, lam: float,
                       window: tuple[float, float]) -> tuple[float, float]:
    """Least-squares slope of log ||u(t)||_lam against log t over a time window."""
    t_lo, t_hi = window
    norms = traj.norm_series(lam)
    mask = (traj.times >= t_lo) & (traj.times <= t_hi) & (norms > 0.0)
    if int(np.sum(mask)) < 10:
        raise ValueError(f"need >= 10 samples in window, have {int(np.sum(mask))}")
    x = np.log(traj.times[mask])
    y = np.log(norms[mask])
    (slope, _), cov = np.polyfit(x, y, 1, cov=True)
    return float(slope), float(math.sqrt(max(cov[0, 0], 0.0)))


def trajectory_csv(traj: Trajectory) -> str:
    """CSV export: time, linf, l1, l1q, l2, grad_energy, mass, dt_mean."""
    q = traj.config.params.q
    cols = {
        "linf": traj.norm_series(INF),
        "l1": traj.norm_series(1.0),
        "l1q": traj.norm_series(1.0 + q),
        "l2": traj.norm_series(2.0),
        "grad_energy": traj.diagnostics["grad_energy"],
        "mass": traj.diagnostics["mass"],
        "dt_mean": traj.diagnostics["dt_mean"],
    }
    lines = ["time," + ",".join(cols)]
    for k, t in enumerate(traj.times):
        lines.append(",".join(f"{v:.17g}" for v in
                              [t] + [cols[c][k] for c in cols]))
    return "\n".join(lines) + "\n"
