"""Experiment configuration, orchestration and bit-stable artifact emission.

Configs are strict JSON: unknown keys are rejected with their location, all
floats in emitted CSV/JSON carry 17 significant digits, files are written
atomically (tmp + rename) and listed in a manifest with content hashes, so
identical config + seed reproduces byte-identical output trees.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import barenblatt, geometry, moser, solver
from .exponents import INF, Params, derive_params, interp_exponents, sobolev_chain_exponents
from .fields import (RadialField, bump_field, estimate_sobolev_constant,
                     gaussian_field, lp_norm, rayleigh_quotient, talenti_field)
from .geometry import RadialGrid
from .solver import SolverConfig, Trajectory, default_sample_times, fit_decay_exponent

KINDS = ("simulate", "fit_decay", "barenblatt_table", "verify_identities",
         "moser_constants", "sobolev_estimate", "sweep")

INITIAL_KINDS = ("barenblatt", "bump", "gaussian")


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    """17-significant-digit float formatting shared by every emitter."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        s = f"{x:.17g}"
        if not any(c in s for c in ".eE"):
            s += ".0"
        return s
    return str(x)


class _Checker:
    """Walks a JSON object against a nested schema of allowed keys."""

    def __init__(self, data: dict, location: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{location}: expected an object")
        self.data = data
        self.loc = location
        self.seen: set[str] = set()

    def get(self, key, default=None, required=False, types=None):
        self.seen.add(key)
        if key not in self.data:
            if required:
                raise ConfigError(f"{self.loc}.{key}: required key missing")
            return default
        val = self.data[key]
        if types is not None and not isinstance(val, types):
            raise ConfigError(f"{self.loc}.{key}: wrong type {type(val).__name__}")
        return val

    def number(self, key, default=None, required=False):
        val = self.get(key, default, required, (int, float))
        return None if val is None else float(val)

    def sub(self, key, required=False):
        val = self.get(key, None, required)
        return None if val is None else _Checker(val, f"{self.loc}.{key}")

    def finish(self):
        unknown = set(self.data) - self.seen
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"{self.loc}.{key}: unknown key")


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    params: dict
    geometry: str
    grid: dict
    time: dict
    initial: dict
    solver: dict
    fit: dict
    sobolev: dict
    sweep_cases: list
    out_dir: str | None
    raw: dict


def _check_params_block(c: _Checker | None, required: bool) -> dict:
    if c is None:
        if required:
            raise ConfigError("$.params: required block missing")
        return {}
    p = c.number("p", required=True)
    q = c.number("q", required=True)
    n = c.get("n", required=True, types=int)
    kappa = c.number("kappa")
    a = c.number("a", 1.0)
    lambdas = c.get("lambdas", None, types=list)
    c.finish()
    if not p > 1.0:
        raise ConfigError("$.params.p: p must exceed 1")
    if not q > 0.0:
        raise ConfigError("$.params.q: q must be positive")
    if n < 1:
        raise ConfigError("$.params.n: n must be >= 1")
    if kappa is not None and not kappa > 1.0:
        raise ConfigError("$.params.kappa: kappa must exceed 1")
    return {"p": p, "q": q, "n": n, "kappa": kappa, "a": a,
            "lambdas": [float(x) for x in lambdas] if lambdas else None}


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment config; unknown keys are rejected."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")

    root = _Checker(data, "$")
    kind = root.get("kind", required=True, types=str)
    if kind not in KINDS:
        raise ConfigError(f"$.kind: unknown experiment kind {kind!r}")
    seed = root.get("seed", 0, types=int)
    out_dir = root.get("output", None, types=str)

    needs_run = kind in ("simulate", "fit_decay")
    params = _check_params_block(root.sub("params"),
                                 required=kind not in ("sweep", "verify_identities"))
    geom_str = root.get("geometry", "euclidean", types=str)

    grid = {}
    gc = root.sub("grid", required=needs_run or kind in
                  ("barenblatt_table", "sobolev_estimate", "moser_constants"))
    if gc is not None:
        grid = {"R": gc.number("R", required=True), "N": gc.get("N", required=True, types=int)}
        gc.finish()
        if not grid["R"] > 0 or grid["N"] < 1:
            raise ConfigError("$.grid: need R > 0 and N >= 1")

    time_block = {}
    tc = root.sub("time", required=needs_run)
    if tc is not None:
        time_block = {
            "t0": tc.number("t0", required=True),
            "t_end": tc.number("t_end", required=True),
            "samples_per_decade": tc.get("samples_per_decade", 32, types=int),
        }
        tc.finish()
        if not time_block["t0"] < time_block["t_end"]:
            raise ConfigError("$.time: need t0 < t_end")
        if not time_block["t0"] > 0:
            raise ConfigError("$.time.t0: start time must be positive (log sampling)")

    initial = {}
    ic = root.sub("initial", required=needs_run)
    if ic is not None:
        ikind = ic.get("kind", required=True, types=str)
        if ikind not in INITIAL_KINDS:
            raise ConfigError(f"$.initial.kind: unknown initial data kind {ikind!r}")
        initial = {
            "kind": ikind,
            "mass": ic.number("mass", 1.0),
            "radius": ic.number("radius", 1.0),
            "sigma": ic.number("sigma", 1.0),
            "profile_constant": ic.number("profile_constant"),
            "perturb_amp": ic.number("perturb_amp", 0.0),
        }
        ic.finish()
        if not initial["mass"] > 0:
            raise ConfigError("$.initial.mass: mass must be positive")
        if abs(initial["perturb_amp"]) >= 1.0:
            raise ConfigError("$.initial.perturb_amp: |amp| must be < 1")

    solver_block = {"cfl": 0.25, "eps_reg": 1e-12, "dt_min": 1e-14,
                    "max_steps": 50_000_000}
    sc = root.sub("solver")
    if sc is not None:
        solver_block["cfl"] = sc.number("cfl", solver_block["cfl"])
        solver_block["eps_reg"] = sc.number("eps_reg", solver_block["eps_reg"])
        solver_block["dt_min"] = sc.number("dt_min", solver_block["dt_min"])
        solver_block["max_steps"] = sc.get("max_steps", solver_block["max_steps"], types=int)
        sc.finish()

    fit_block = {}
    fc = root.sub("fit", required=(kind == "fit_decay"))
    if fc is not None:
        lam = fc.get("lambda", "inf")
        fit_block = {
            "lambda": INF if lam == "inf" else float(lam),
            "window": fc.get("window", None, types=list),
        }
        fc.finish()

    sobolev_block = {}
    sbc = root.sub("sobolev")
    if sbc is not None:
        sobolev_block = {
            "sigmas": sbc.get("sigmas", [0.5, 1.0, 2.0, 4.0], types=list),
            "include_talenti": sbc.get("include_talenti", True, types=bool),
        }
        sbc.finish()

    sweep_cases = []
    swc = root.get("sweep", None, types=list)
    root.seen.add("sweep")
    if kind == "sweep":
        if swc is None:
            raise ConfigError("$.sweep: sweep experiments need a case list")
        for i, case in enumerate(swc):
            if not isinstance(case, dict):
                raise ConfigError(f"$.sweep[{i}]: expected an object")
            sweep_cases.append(case)

    root.finish()
    return ExperimentConfig(kind=kind, seed=seed, params=params, geometry=geom_str,
                            grid=grid, time=time_block, initial=initial,
                            solver=solver_block, fit=fit_block, sobolev=sobolev_block,
                            sweep_cases=sweep_cases, out_dir=out_dir, raw=data)


# ---------------------------------------------------------------- builders

def build_params(block: dict) -> Params:
    return derive_params(block["p"], block["q"], block["n"], block.get("kappa"))


def build_geometry(config: ExperimentConfig):
    return geometry.from_config_string(config.geometry, config.params["n"])


def build_grid(block: dict) -> RadialGrid:
    return RadialGrid(block["R"], block["N"])


def build_initial_field(config: ExperimentConfig, grid: RadialGrid, geom,
                        params: Params) -> RadialField:
    blk = config.initial
    kind = blk["kind"]
    if kind == "bump":
        return bump_field(grid, geom, radius=blk["radius"], mass=blk["mass"])
    if kind == "gaussian":
        return gaussian_field(grid, geom, sigma=blk["sigma"], mass=blk["mass"])
    if blk.get("profile_constant"):
        prof = barenblatt.make_profile(params, blk["profile_constant"])
    else:
        prof = barenblatt.fit_mass_constant(params, blk["mass"], geom)
    values = barenblatt.evaluate(prof, grid.centers, config.time["t0"])
    amp = blk["perturb_amp"]
    if amp:
        r = grid.centers
        mid = 0.15 * grid.R
        width = 0.35 * grid.R
        values = values * (1.0 + amp * np.cos(1.5 * np.log1p(r))
                           * np.exp(-((r - mid) / width) ** 2))
    return RadialField(grid, geom, values)


def simulate_trajectory(config: ExperimentConfig) -> tuple[Trajectory, Params]:
    params = build_params(config.params)
    geom = build_geometry(config)
    grid = build_grid(config.grid)
    u0 = build_initial_field(config, grid, geom, params)
    tb, sb = config.time, config.solver
    scfg = SolverConfig(grid, geom, params, tb["t0"], tb["t_end"],
                        default_sample_times(tb["t0"], tb["t_end"],
                                             tb["samples_per_decade"]),
                        cfl=sb["cfl"], eps_reg=sb["eps_reg"],
                        dt_min=sb["dt_min"], max_steps=sb["max_steps"])
    return solver.run(scfg, u0), params


# ---------------------------------------------------------------- emitters

def json_bytes(obj) -> bytes:
    """Canonical JSON: sorted keys, floats at 17 significant digits.

    Hand-rolled emitter because the stdlib encoder pins float formatting to
    float.__repr__; non-finite floats become the strings "nan"/"inf".
    """

    def emit(x, indent: str) -> str:
        if isinstance(x, dict):
            if not x:
                return "{}"
            inner = indent + " "
            items = (f'{inner}{json.dumps(str(k))}: {emit(v, inner)}'
                     for k, v in sorted(x.items()))
            return "{\n" + ",\n".join(items) + "\n" + indent + "}"
        if isinstance(x, (list, tuple, np.ndarray)):
            seq = x.tolist() if isinstance(x, np.ndarray) else list(x)
            if not seq:
                return "[]"
            inner = indent + " "
            return ("[\n" + ",\n".join(f"{inner}{emit(v, inner)}" for v in seq)
                    + "\n" + indent + "]")
        if isinstance(x, bool):
            return "true" if x else "false"
        if x is None:
            return "null"
        if isinstance(x, (float, np.floating)):
            f = float(x)
            if math.isnan(f) or math.isinf(f):
                return json.dumps(fmt(f))
            return fmt(f)
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        return json.dumps(str(x))

    return (emit(obj, "") + "\n").encode()


def csv_bytes(header: list[str], rows: list[list]) -> bytes:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return ("\n".join(lines) + "\n").encode()


def write_artifacts(out_dir, artifacts: dict[str, bytes]) -> dict:
    """Atomic writes plus a manifest of content hashes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name, blob in sorted(artifacts.items()):
        tmp = out / f".tmp-{name.replace('/', '_')}"
        tmp.write_bytes(blob)
        os.replace(tmp, out / name)
        hashes[name] = hashlib.sha256(blob).hexdigest()
    manifest = json_bytes({"files": hashes})
    tmp = out / ".tmp-manifest.json"
    tmp.write_bytes(manifest)
    os.replace(tmp, out / "manifest.json")
    return hashes


# ---------------------------------------------------------------- experiment kinds

def _trajectory_artifacts(traj: Trajectory, snapshots: bool = True) -> dict[str, bytes]:
    arts = {"trajectory.csv": solver.trajectory_csv(traj).encode()}
    if snapshots:
        for k, f in enumerate(traj.fields):
            arts[f"snapshot_{k:03d}.csv"] = f.to_csv().encode()
    return arts


def run_simulate(config: ExperimentConfig) -> dict[str, bytes]:
    traj, params = simulate_trajectory(config)
    arts = _trajectory_artifacts(traj)
    arts["report.json"] = json_bytes({
        "kind": "simulate", "seed": config.seed,
        "params": {"p": params.p, "q": params.q, "n": params.n,
                   "kappa": params.kappa, "D": params.D, "nu": params.nu},
        "steps": traj.steps_total,
        "clip_mass_total": traj.clip_mass_total,
        "mass_initial": float(traj.diagnostics["mass"][0]),
        "mass_final": float(traj.diagnostics["mass"][-1]),
        "samples": len(traj.times),
    })
    return arts


def decay_target(params: Params, a: float) -> float:
    """Sup-norm decay rate n/(p - nD) for a = 1; equals 1/(a nu - D) at the
    default kappa and stays defined when n <= p."""
    if a == 1.0:
        return params.n / (params.p - params.n * params.D)
    return 1.0 / (a * params.nu - params.D)


def run_fit_decay(config: ExperimentConfig) -> dict[str, bytes]:
    traj, params = simulate_trajectory(config)
    lam = config.fit["lambda"]
    window = config.fit.get("window")
    if window is None:
        window = [float(traj.times[0]), float(traj.times[-1])]
    slope, stderr = fit_decay_exponent(traj, lam, (window[0], window[1]))
    a = config.params.get("a", 1.0)
    if lam == INF:
        target = -decay_target(params, a)
    else:
        target = -interp_exponents(params, a, lam).alpha
    rel_error = abs(slope - target) / abs(target) if target else math.inf
    arts = _trajectory_artifacts(traj, snapshots=False)
    arts["report.json"] = json_bytes({
        "kind": "fit_decay", "seed": config.seed,
        "lambda": "inf" if lam == INF else lam,
        "window": window, "slope": slope, "stderr": stderr,
        "target": target, "rel_error": rel_error,
        "steps": traj.steps_total, "clip_mass_total": traj.clip_mass_total,
    })
    return arts


def run_barenblatt_table(config: ExperimentConfig) -> dict[str, bytes]:
    params = build_params(config.params)
    geom = build_geometry(config)
    grid = build_grid(config.grid)
    blk = config.initial or {"mass": 1.0, "profile_constant": None}
    if blk.get("profile_constant"):
        prof = barenblatt.make_profile(params, blk["profile_constant"])
    else:
        prof = barenblatt.fit_mass_constant(params, blk.get("mass", 1.0), geom)
    ode_res, pde_res = barenblatt.residual_oracle(prof, grid)
    xi = grid.centers
    values = barenblatt.profile_value(prof, xi)
    arts = {
        "profile.csv": csv_bytes(["xi", "F"], [[x, v] for x, v in zip(xi, values)]),
        "report.json": json_bytes({
            "kind": "barenblatt_table", "seed": config.seed,
            "regime": prof.regime, "profile_constant": prof.profile_constant,
            "ss_rate": prof.ss_rate, "coeff": prof.coeff,
            "support_edge": prof.support_edge if math.isfinite(prof.support_edge) else "inf",
            "mass": barenblatt.mass(prof, geom),
            "ode_residual": ode_res, "pde_residual": pde_res,
        }),
    }
    return arts


def sample_admissible_tuples(seed: int, count: int) -> list[dict]:
    """Seeded random admissible (p, q, n, kappa, a, lambda) tuples."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        p = float(rng.uniform(1.05, 4.5))
        q = float(rng.uniform(0.1, 3.0))
        n = int(rng.integers(1, 7))
        if n > p and rng.random() < 0.5:
            kappa = n / (n - p)
        else:
            kappa = float(rng.uniform(1.05, 5.0))
        params = derive_params(p, q, n, kappa)
        a = max(1.0, params.D / params.nu + float(rng.uniform(0.05, 2.0)))
        lam = max(1.0 + q, a) + float(rng.uniform(0.05, 4.0))
        out.append({"p": p, "q": q, "n": n, "kappa": kappa, "a": a, "lam": lam})
    return out


def exponent_identity_deviations(tup: dict) -> dict:
    """Relative deviations of the exponent-chain identities for one tuple.

    Both identities cancel O(1) summands, so deviations are measured against
    the summand scale rather than the (possibly tiny) identity value.
    """
    params = derive_params(tup["p"], tup["q"], tup["n"], tup["kappa"])
    a, lam, q = tup["a"], tup["lam"], params.q
    rep = interp_exponents(params, a, lam)
    beta, zeta = rep.beta_chain, rep.zeta
    lhs1 = (1.0 + q) * (beta + 1.0) - beta * q * params.p
    scale1 = max((1.0 + q) * (beta + 1.0), abs(beta * q * params.p), abs(zeta * a))
    dev1 = abs(lhs1 - zeta * a) / scale1
    # the theta/omega identity lives on the lambda = 1+q chain
    if a < 1.0 + q:
        chain = sobolev_chain_exponents(params, a)
        lhs2 = chain.theta / chain.omega
        rhs2 = 1.0 / chain.r_gni - (1.0 - chain.theta) / chain.s_gni
        scale2 = max(1.0 / chain.r_gni, (1.0 - chain.theta) / chain.s_gni, abs(lhs2))
        dev2 = abs(lhs2 - rhs2) / scale2
        dev_omega = abs(chain.omega - params.p * params.kappa) / (params.p * params.kappa)
    else:
        dev2 = 0.0
        dev_omega = 0.0
    return {"identity_chain": dev1, "identity_gni": dev2, "identity_omega": dev_omega}


def run_verify_identities(config: ExperimentConfig) -> dict[str, bytes]:
    count = 1000
    tuples = sample_admissible_tuples(config.seed, count)
    devs = [exponent_identity_deviations(t) for t in tuples]
    max_dev = {k: max(d[k] for d in devs) for k in devs[0]}
    worked = sobolev_chain_exponents(derive_params(2.0, 2.0, 3), 1.0)
    report = {
        "kind": "verify_identities", "seed": config.seed, "count": count,
        "max_deviation": max_dev,
        "tolerance": 1e-12,
        "pass": bool(all(v <= 1e-12 for v in max_dev.values())),
        "worked_tuple": {
            "p": 2.0, "q": 2.0, "n": 3, "a": 1.0,
            "beta": worked.beta_chain, "zeta": worked.zeta,
            "theta": worked.theta, "omega": worked.omega,
            "r": worked.r_gni, "s": worked.s_gni,
        },
    }
    rows = [[t["p"], t["q"], t["n"], t["kappa"], t["a"], t["lam"],
             d["identity_chain"], d["identity_gni"]]
            for t, d in zip(tuples, devs)]
    return {
        "report.json": json_bytes(report),
        "tuples.csv": csv_bytes(
            ["p", "q", "n", "kappa", "a", "lambda", "dev_chain", "dev_gni"], rows),
    }


def build_sobolev_family(grid: RadialGrid, geom, params: Params,
                         sigmas, include_talenti: bool) -> dict[str, RadialField]:
    family = {}
    for s in sigmas:
        family[f"gaussian_{fmt(float(s))}"] = gaussian_field(grid, geom, sigma=float(s))
    family["bump"] = bump_field(grid, geom, radius=0.4 * grid.R)
    if include_talenti and params.n > params.p:
        family["talenti"] = talenti_field(grid, geom, params)
    return family


def run_sobolev_estimate(config: ExperimentConfig) -> dict[str, bytes]:
    params = build_params(config.params)
    geom = build_geometry(config)
    grid = build_grid(config.grid)
    blk = config.sobolev or {"sigmas": [0.5, 1.0, 2.0, 4.0], "include_talenti": True}
    family = build_sobolev_family(grid, geom, params, blk["sigmas"],
                                  blk["include_talenti"])
    quotients = {name: rayleigh_quotient(f, params) for name, f in family.items()}
    estimate = estimate_sobolev_constant(geom, params, list(family.values()))
    return {"report.json": json_bytes({
        "kind": "sobolev_estimate", "seed": config.seed,
        "quotients": quotients, "estimate": estimate,
        "note": "max Rayleigh quotient over the family; lower estimate of the Sobolev constant",
    })}


def run_moser_constants(config: ExperimentConfig) -> dict[str, bytes]:
    params = build_params(config.params)
    geom = build_geometry(config)
    grid = build_grid(config.grid)
    a = config.params.get("a", 1.0)
    blk = config.sobolev or {"sigmas": [0.5, 1.0, 2.0, 4.0], "include_talenti": True}
    family = build_sobolev_family(grid, geom, params, blk["sigmas"],
                                  blk["include_talenti"])
    S = 1.01 * estimate_sobolev_constant(geom, params, list(family.values()))
    parts = moser.decay_constant_parts(params, a, S)
    run_obj = moser.MoserRun(params=params, a=a, t=1.0, S=S)
    margins = [{"s": frac * run_obj.t,
                "ode_residual": moser.psi_ode_residual(run_obj, frac * run_obj.t)}
               for frac in (0.1, 0.5, 0.9)]
    lam_probe = 1e6
    s_probe = run_obj.t * (1.0 - a / lam_probe)
    intf_quad = moser.int_f_closed(run_obj, s_probe)
    report = {
        "kind": "moser_constants", "seed": config.seed,
        "inputs": {"p": params.p, "q": params.q, "n": params.n,
                   "kappa": params.kappa, "a": a, "S": S},
        "exponents": {"D": params.D, "nu": params.nu,
                      "time_rate": parts["time_rate"],
                      "mass_power": parts["mass_power"]},
        "I1": parts["I1"], "I2": parts["I2"], "constant_C": parts["C"],
        "exp_C": parts["exp_C"],
        "int_f_at_lambda_1e6": intf_quad,
        "int_f_limit": moser.int_f_limit(params, a),
        "margins": margins,
        "schedule_starts_below_dissipation_index": run_obj.starts_below_dissipation_index,
    }
    return {"report.json": json_bytes(report)}


def _sweep_case_config(base: ExperimentConfig, case: dict) -> ExperimentConfig:
    c = _Checker(case, "$.sweep[case]")
    p = c.number("p", required=True)
    q = c.number("q", required=True)
    n = c.get("n", required=True, types=int)
    raw = {
        "kind": "fit_decay",
        "seed": base.seed,
        "params": {"p": p, "q": q, "n": n},
        "geometry": c.get("geometry", base.geometry, types=str),
        "grid": {"R": c.number("R", required=True),
                 "N": c.get("N", required=True, types=int)},
        "time": {"t0": c.number("t0", 1.0), "t_end": c.number("t_end", required=True),
                 "samples_per_decade": c.get("samples_per_decade", 32, types=int)},
        "initial": case.get("initial", {"kind": "bump", "mass": 1.0}),
        "fit": {"lambda": "inf",
                "window": c.get("window", None, types=list)},
        "solver": case.get("solver", {}),
    }
    c.seen.update(("initial", "solver"))
    kappa = c.number("kappa")
    if kappa is not None:
        raw["params"]["kappa"] = kappa
    tol = c.number("tolerance", 0.05)
    c.finish()
    import tempfile
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(raw, fh)
        tmp_path = fh.name
    try:
        cfg = load_config(tmp_path)
    finally:
        os.unlink(tmp_path)
    return cfg, tol


def _run_one_sweep_case(args):
    base, case = args
    key = (case.get("p"), case.get("q"), case.get("n"))
    try:
        cfg, tol = _sweep_case_config(base, case)
        arts = run_fit_decay(cfg)
        report = json.loads(arts["report.json"])
        return key, {"slope": report["slope"], "target": report["target"],
                     "rel_error": report["rel_error"], "tolerance": tol,
                     "status": "ok" if report["rel_error"] <= tol else "out_of_tolerance"}
    except Exception as exc:  # partial failures become marked rows
        return key, {"slope": math.nan, "target": math.nan,
                     "rel_error": math.nan, "tolerance": math.nan,
                     "status": f"failed:{type(exc).__name__}"}


def run_sweep(config: ExperimentConfig, jobs: int = 1) -> dict[str, bytes]:
    seen = set()
    cases, dups = [], 0
    for case in config.sweep_cases:
        key = (case.get("p"), case.get("q"), case.get("n"))
        if key in seen:
            dups += 1
            continue
        seen.add(key)
        cases.append(case)
    results = {}
    work = [(config, case) for case in cases]
    if jobs > 1 and len(work) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            for key, row in pool.map(_run_one_sweep_case, work):
                results[key] = row
    else:
        for item in work:
            key, row = _run_one_sweep_case(item)
            results[key] = row
    header = ["p", "q", "n", "slope", "target", "rel_error", "tolerance", "status"]
    rows = []
    for key in sorted(results, key=lambda k: (k[0], k[1], k[2])):
        r = results[key]
        rows.append([key[0], key[1], key[2], r["slope"], r["target"],
                     r["rel_error"], r["tolerance"], r["status"]])
    arts = {"sweep.csv": csv_bytes(header, rows)}
    if dups:
        arts["warnings.json"] = json_bytes({"duplicate_tuples_skipped": dups})
    return arts


RUNNERS = {
    "simulate": run_simulate,
    "fit_decay": run_fit_decay,
    "barenblatt_table": run_barenblatt_table,
    "verify_identities": run_verify_identities,
    "moser_constants": run_moser_constants,
    "sobolev_estimate": run_sobolev_estimate,
}


def run_experiment(config: ExperimentConfig, out_dir, seed: int | None = None,
                   jobs: int = 1) -> dict:
    """Execute one experiment and write its artifact tree; returns the manifest."""
    if seed is not None:
        config.seed = seed
    if config.kind == "sweep":
        artifacts = run_sweep(config, jobs=jobs)
    else:
        artifacts = RUNNERS[config.kind](config)
    return write_artifacts(out_dir, artifacts)


def resolve_out_dir(cli_out: str | None, config: ExperimentConfig) -> str:
    """Precedence: LEIBLAB_OUT env var, then --out, then the config's output dir."""
    env = os.environ.get("LEIBLAB_OUT")
    if env:
        return env
    if cli_out:
        return cli_out
    if config.out_dir:
        return config.out_dir
    raise ConfigError("no output directory: set LEIBLAB_OUT, pass --out, "
                      "or add an 'output' key to the config")
