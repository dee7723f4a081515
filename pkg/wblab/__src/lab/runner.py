import logging
import os
import time
import jax.numpy as jnp
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from wblab.__src.balance.scalar import (
    bressan_demo,
    bressan_inflow,
    burgers_law,
    run_scalar,
    temple_state,
    traffic_law,
)
from wblab.__src.device.solver import device_run, iv_curve, sonic_diagnostics
from wblab.__src.device.state import device_config, rest_state
from wblab.__src.kinetic.coupling import burgers_field, maxwellian_density, periodic_cells, run_burgers_vfp
from wblab.__src.kinetic.vfp import VfpParams, gauss_hermite_grid, scattering_matrix, vfp_eigenvalue
from wblab.__src.lab.config import ScenarioConfig
from wblab.__src.spectral.fourier import PeriodicGrid
from wblab.__src.waves.babenko import babenko_solitary
from wblab.__src.waves.conformal import (
    evolve,
    linear_wave_state,
    mean_current,
    solitary_surface_state,
    surface_abscissa,
    track_crest,
)
from wblab.__src.waves.serre import (
    dispersion_curve,
    dispersion_mismatch,
    esgn_solitary,
    sgn_solitary,
    shallow_state,
    speed_amplitude_sweep,
)
from wblab.__src.utils.persistence import save_state, write_csv, write_json, write_manifest

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    """Output directory, produced files (manifest included) and wall time of a run."""
    out_dir: str
    files: List[str] = field(default_factory=list)
    wall_time: float = 0.0


def _cells(domain, n_cells: int):
    lo, hi = domain
    dx = (hi - lo) / n_cells
    return lo + (jnp.arange(n_cells) + 0.5) * dx


def _scalar(config: ScenarioConfig, out: str) -> List[str]:
    p = config.parameters
    if p["action"] == "bressan":
        a_left, a_right = p["lanes"]
        u0 = bressan_inflow(a_left, a_right, p["margin"])
        report = bressan_demo(a_left, a_right, u0, p["n_cells"], tuple(p["domain"]), p["t_end"],
                              p["delta"], p["cfl"])
        rows = zip(report.x.tolist(), report.a.tolist(), report.u_base.tolist(),
                   report.u_perturbed.tolist(), report.eigenvalues[:, 1].tolist())
        write_csv(os.path.join(out, "bressan.csv"),
                  [("x", "length"), ("a", "lanes"), ("u", "density"), ("u_perturbed", "density"),
                   ("lambda", "speed")], list(rows))
        history = [(t, xi, lam) for t, speeds in zip(report.times.tolist(), report.eigenvalue_history[..., 1].tolist())
                   for xi, lam in zip(report.x.tolist(), speeds)]
        write_csv(os.path.join(out, "eigenvalues.csv"), [("t", "time"), ("x", "length"), ("lambda", "speed")],
                  history)
        write_json(os.path.join(out, "summary.json"), {
            "u_inflow": report.u_inflow, "sensitivity": report.sensitivity, "delta": report.delta,
            "min_convective_speed": report.min_convective_speed, "steps": report.steps,
            "sensitivity_history": report.sensitivity_history.tolist(),
        })
        return ["bressan.csv", "eigenvalues.csv", "summary.json"]

    x = _cells(p["domain"], p["n_cells"])
    if p["flux"] == "traffic":
        law = traffic_law()
        a_left, a_right = p["lanes"]
        state = temple_state(x, p["u0"], law, a=jnp.where(x < 0.0, a_left, a_right))
    else:
        sources: Dict[str, Optional[Callable]] = {
            "none": None,
            "unit": lambda u, a: 1.0 + 0.0 * u,
            "damping": lambda u, a: -u,
        }
        k_lo, k_hi = p["k_support"]
        k_value = p["k_value"]
        law = burgers_law(sources[p["source"]], lambda s: jnp.where((s >= k_lo) & (s <= k_hi), k_value, 0.0))
        state = temple_state(x, p["u0"], law)
    run = run_scalar(state, law, p["t_end"], cfl=p["cfl"], snapshot_times=p["snapshots"],
                     boundary=p["boundary"])
    rows = []
    for t, snap in run.snapshots + [(run.time, run.state)]:
        rows += [(t, xi, ui, ai) for xi, ui, ai in zip(snap.x.tolist(), snap.u.tolist(), snap.a.tolist())]
    write_csv(os.path.join(out, "profile.csv"), [("t", "time"), ("x", "length"), ("u", "-"), ("a", "-")], rows)
    write_json(os.path.join(out, "summary.json"), {
        "time": run.time, "steps": run.steps, "boundary_mass": run.boundary_mass,
        "min_sonic_distance": run.min_sonic_distance, "law": law.name,
    })
    save_state(os.path.join(out, "state.msgpack"), run.state)
    return ["profile.csv", "summary.json", "state.msgpack"]


def _device(config: ScenarioConfig, out: str) -> List[str]:
    p = config.parameters
    cfg = device_config(n_cells=p["n_cells"], bias=p.get("bias", 0.0), debye=p["debye"],
                        damping_tau=p["damping_tau"], cfl=p["cfl"], literal_damping=p["literal_damping"])
    if p["action"] == "iv":
        rows = iv_curve(cfg, p["biases"], tol=p["tol"], max_steps=p["max_steps"], continuation=p["continuation"])
        write_csv(os.path.join(out, "iv.csv"),
                  [("bias", "V"), ("current", "rho u"), ("oscillation", "rho u"), ("converged", "-"),
                   ("steps", "-"), ("sonic_points", "-"), ("sonic_shocks", "-")],
                  [(r.bias, r.current, r.oscillation, r.converged, r.steps, r.sonic_points, r.sonic_shocks)
                   for r in rows])
        return ["iv.csv"]

    steady = p["steady"]
    run = device_run(rest_state(cfg), cfg, t_end=None if steady else p["t_end"], steady=steady,
                     tol=p["tol"], max_steps=p["max_steps"])
    if steady and not run.converged:
        logger.warning("device run stopped after %d steps without reaching a steady state", run.steps)
    s = run.state
    write_csv(os.path.join(out, "profile.csv"),
              [("x", "length"), ("rho", "density"), ("u", "velocity"), ("momentum", "rho u"),
               ("phi", "potential"), ("mach", "-")],
              list(zip(cfg.x.tolist(), s.rho.tolist(), s.velocity.tolist(), s.momentum.tolist(),
                       run.potential.phi.tolist(), s.mach.tolist())))
    sonic = sonic_diagnostics(s, cfg)
    write_json(os.path.join(out, "summary.json"), {
        "time": run.time, "steps": run.steps, "converged": run.converged, "boundary_mass": run.boundary_mass,
        "current": float(jnp.median(s.momentum)), "sonic_points": sonic.x_points,
        "sonic_shocks": sonic.shocks,
    })
    save_state(os.path.join(out, "state.msgpack"), s)
    return ["profile.csv", "summary.json", "state.msgpack"]


def _vfp(config: ScenarioConfig, out: str) -> List[str]:
    p = config.parameters
    if p["action"] == "eigen":
        params = VfpParams(p["u"], p["kappa"], p["n_modes"])
        write_csv(os.path.join(out, "eigen.csv"), [("n", "-"), ("mu_plus", "1/length"), ("mu_minus", "1/length")],
                  [(n, vfp_eigenvalue(n, +1, params), vfp_eigenvalue(n, -1, params))
                   for n in range(p["n_modes"] + 1)])
        grid = gauss_hermite_grid(p["n_ordinates"], p["kappa"])
        scattering = scattering_matrix(params, p["length"], grid)
        columns = [("v", "velocity")] + [(f"s{j}", "-") for j in range(grid.size)]
        write_csv(os.path.join(out, "scattering.csv"), columns,
                  [[v] + row for v, row in zip(grid.velocities.tolist(), scattering.matrix.tolist())])
        write_json(os.path.join(out, "summary.json"), {
            "condition": scattering.condition, "min_entry": scattering.min_entry,
        })
        return ["eigen.csv", "scattering.csv", "summary.json"]

    x = periodic_cells(p["n_cells"])
    wave = jnp.sin(2.0 * jnp.pi * x)
    state = burgers_field(x, p["u"] + p["amplitude"] * wave)
    density = maxwellian_density(x, 1.0 + p["amplitude"] * jnp.cos(2.0 * jnp.pi * x), 0.0,
                                 kappa=p["kappa"], n_ordinates=p["n_ordinates"])
    run = run_burgers_vfp(state, density, p["kappa"], p["t_end"], cfl=p["cfl"], kinetic=p["kinetic"])
    rho, current = run.density.moments()
    write_csv(os.path.join(out, "relax.csv"), [("x", "length"), ("u", "velocity"), ("rho", "density"),
                                                ("J", "current")],
              list(zip(x.tolist(), run.state.u.tolist(), rho.tolist(), current.tolist())))
    write_csv(os.path.join(out, "ledger.csv"), [("t", "time"), ("momentum", "-")], run.ledger)
    write_json(os.path.join(out, "summary.json"), {
        "time": run.time, "steps": run.steps, "momentum_drift": run.momentum_drift,
        "mass": run.density.total_mass(),
    })
    save_state(os.path.join(out, "state.msgpack"), {"burgers": run.state, "kinetic": run.density})
    return ["relax.csv", "ledger.csv", "summary.json", "state.msgpack"]


def _surface_rows(t, state):
    x = surface_abscissa(state)
    return [(t, xi, xx, g, ph) for xi, xx, g, ph in zip(state.grid.nodes.tolist(), x.tolist(),
                                                         state.gamma.samples.tolist(),
                                                         state.phi_s.samples.tolist())]


_SURFACE_COLUMNS = [("t", "time"), ("xi", "length"), ("x", "length"), ("gamma", "length"), ("phi", "-")]


def _waterwave(config: ScenarioConfig, out: str) -> List[str]:
    p = config.parameters
    n_points = p["n_points"] or None
    wave = None
    if p["action"] == "solitary" or p["initial"] == "solitary":
        wave = babenko_solitary(p["amplitude"], n_points=n_points)
        state = solitary_surface_state(wave)
    else:
        grid = PeriodicGrid(n_points or 64, p["length"])
        state = linear_wave_state(grid, p["wavenumber"], p["eps"], p["depth"], 1.0, p["kind"])

    if p["action"] == "solitary":
        write_csv(os.path.join(out, "wave.csv"), _SURFACE_COLUMNS[1:], [r[1:] for r in _surface_rows(0.0, state)])
        write_json(os.path.join(out, "summary.json"), {
            "amplitude_ratio": wave.amplitude_ratio, "speed_ratio": wave.speed_ratio,
            "iterations": wave.iterations, "residual": wave.residual,
            "n_points": state.grid.n_points, "window": state.grid.length,
        })
        return ["wave.csv", "summary.json"]

    x0, a0 = track_crest(state) if wave is not None else (0.0, 0.0)
    run = evolve(state, p["t_end"], dt=p["dt"], snapshot_times=p["snapshots"], filtered=p["filter"])
    rows = []
    for t, snap in run.snapshots + [(run.time, run.state)]:
        rows += _surface_rows(t, snap)
    write_csv(os.path.join(out, "surface.csv"), _SURFACE_COLUMNS, rows)
    write_csv(os.path.join(out, "conservation.csv"), [("t", "time"), ("mass", "-"), ("energy", "-")],
              list(zip(run.times, run.mass, run.energy)))
    summary = {"time": run.time, "steps": run.steps, "mass_drift": run.mass_drift,
               "energy_drift": run.energy_drift}
    if wave is not None and run.time > 0:
        x1, a1 = track_crest(run.state)
        summary.update({
            "steady_speed": wave.speed,
            "measured_speed": (x1 - x0) / run.time + mean_current(state, wave),
            "amplitude_drift": abs(a1 - a0) / a0,
        })
    write_json(os.path.join(out, "summary.json"), summary)
    save_state(os.path.join(out, "state.msgpack"), run.state)
    return ["surface.csv", "conservation.csv", "summary.json", "state.msgpack"]


def _serre(config: ScenarioConfig, out: str) -> List[str]:
    p = config.parameters
    alpha = p["alpha"]
    if p["action"] == "dispersion":
        curve = dispersion_curve(p["kd"], alpha)
        mismatch = dispersion_mismatch(curve.kd_samples, alpha)
        write_csv(os.path.join(out, "dispersion.csv"),
                  [("kd", "-"), ("c2_esgn", "gd"), ("c2_exact", "gd"), ("mismatch", "gd")],
                  list(zip(curve.kd_samples.tolist(), curve.c2_over_gd.tolist(), curve.exact.tolist(),
                           mismatch.tolist())))
        return ["dispersion.csv"]

    if p["action"] == "solitary":
        n_points = p["n_points"] or None
        if p["model"] == "sgn":
            wave = sgn_solitary(p["amplitude"], n_points=n_points)
        else:
            wave = esgn_solitary(p["amplitude"], alpha, n_points=n_points)
        shallow = shallow_state(wave)
        write_csv(os.path.join(out, "solitary.csv"), [("x", "d"), ("h", "d"), ("u", "sqrt(gd)")],
                  list(zip(wave.profile.grid.nodes.tolist(), shallow.h.samples.tolist(),
                           shallow.u_bar.samples.tolist())))
        write_json(os.path.join(out, "summary.json"), {
            "model": wave.source_model, "alpha": wave.alpha, "amplitude_ratio": wave.amplitude_ratio,
            "speed_ratio": wave.speed_ratio, "residual": wave.residual, "iterations": wave.iterations,
        })
        return ["solitary.csv", "summary.json"]

    models = p["models"]
    rows = speed_amplitude_sweep(p["amplitudes"], alpha, models)
    write_csv(os.path.join(out, "sweep.csv"), [("amplitude", "d")] + [(f"c_{m}", "sqrt(gd)") for m in models],
              [[row.amplitude_ratio] + [row.speeds[m] for m in models] for row in rows])
    failures = {f"{row.amplitude_ratio!r}": row.failures for row in rows if row.failures}
    write_json(os.path.join(out, "summary.json"), {"alpha": alpha, "models": models, "failures": failures})
    return ["sweep.csv", "summary.json"]


HANDLERS: Dict[str, Callable[[ScenarioConfig, str], List[str]]] = {
    "scalar": _scalar,
    "device": _device,
    "vfp": _vfp,
    "waterwave": _waterwave,
    "serre": _serre,
}


def run(config: ScenarioConfig, out_dir: Optional[str] = None) -> RunResult:
    """
    Runs a validated scenario and writes its artifacts.

    Besides the module's CSV/JSON files, every run writes `config.resolved` (the
    configuration with all defaults) and `manifest.json` (SHA-256 and size of each file,
    tool version, configuration hash, wall time).

    Args:
        config (ScenarioConfig): Output of `parse_config`.
        out_dir (str, optional): Overrides `config.output`.

    Returns:
        RunResult: Directory and file names.

    Example usage:
    ```
        >>> result = run(parse_config("module = serre\\nserre.action = dispersion"), "out")
        >>> result.files
        ['dispersion.csv', 'config.resolved', 'manifest.json']
    ```
    """
    out = out_dir or config.output
    os.makedirs(out, exist_ok=True)
    logger.info("running %s scenario into %s", config.module, out)
    start = time.perf_counter()
    files = HANDLERS[config.module](config, out)
    with open(os.path.join(out, "config.resolved"), "w", encoding="utf-8") as f:
        f.write(config.resolved_text())
    files.append("config.resolved")
    wall = time.perf_counter() - start
    write_manifest(out, files, config.metadata.get("version", ""), config.metadata.get("config_sha256", ""), wall)
    return RunResult(out, files + ["manifest.json"], wall)
