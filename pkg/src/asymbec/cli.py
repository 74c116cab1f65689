"""``asymbec <command> --config <path> [--out <dir>] [--format csv|json]``."""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .config import COMMANDS, ConfigError, RunConfig, read_config
from .extended import (
    ExtendedParams, Grid1D, bdg_extended, evolve_extended, gram_schmidt_basis, bloch_project,
    linear_states, norm_rate_extended, project_trajectory, state_at_norm, states_at_gamma, trace_branch,
)
from .io import GridMismatchError, RunOutput, WavefunctionFormatError, plot_script, read_wavefunction
from .numerics import NumericalError
from .scan import (
    CONVERGENT, DIVERGENT, EXTENDED, TWO_MODE, UNDECIDED, ClassifierConfig, SweepSpec, branch_crossings,
    onset_radius, separatrix_scan, sweep_spectrum,
)
from .stability import classify
from .two_mode import (
    BlochPoint, LabScale, TwoModeParams, bdg_two_mode, bloch_from_state, evolve_two_mode, lab_loss_rate,
    norm_rate, state_from_bloch, stationary_norm,
)

log = logging.getLogger("asymbec")

OUTPUT_ROOT_ENV = "ASYMBEC_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

SPECTRUM_HEADER = ("gamma", "branch", "mu_re", "mu_im", "norm")
BDG_HEADER = ("gamma", "omega_re", "omega_im", "class")
TRAJECTORY_HEADER = ("t", "R", "theta", "phi", "norm")
NORM_LAW_HEADER = ("t", "rate_fd", "rate_law", "rel_error")
BLOCH_HEADER = ("t", "R", "theta", "phi", "norm", "residual", "distance")
SEPARATRIX_HEADER = ("R", "theta", "phi", "verdict", "decision_time")
LAB_HEADER = ("gamma", "tau", "rate")


def _grid(cfg: RunConfig) -> Grid1D:
    return Grid1D(cfg["x_min"], cfg["x_max"], cfg["n"])


def _two_params(cfg: RunConfig, gamma: float = 0.0) -> TwoModeParams:
    return TwoModeParams(cfg.get("gamma", gamma), a_I=cfg["a_I"], a_R=cfg["a_R"], U=cfg["U"])


def _ext_params(cfg: RunConfig) -> ExtendedParams:
    return ExtendedParams(0.0, a_R=cfg["a_R"], a_I=cfg["a_I"], g=cfg["g"])


def _trace_norms(cfg: RunConfig, upto: float = 0.0) -> np.ndarray:
    top = max(cfg["norm_max"], upto + cfg["norm_step"])
    return np.arange(1, int(round(top / cfg["norm_step"])) + 1) * cfg["norm_step"]


def _sweep_spec(cfg: RunConfig) -> SweepSpec:
    common = dict(model=cfg.model, a_R=cfg["a_R"], a_I=cfg["a_I"], descending=cfg["descending"])
    if cfg.model == TWO_MODE:
        return SweepSpec(cfg["gamma_min"], cfg["gamma_max"], cfg["steps"], interaction=cfg["U"],
                         norm=cfg["norm"], **common)
    return SweepSpec(cfg["gamma_min"], cfg["gamma_max"], cfg["steps"], interaction=cfg["g"], grid=_grid(cfg),
                     norm_step=cfg["norm_step"], norm_max=cfg["norm_max"], **common)


def _gaps(spec: SweepSpec, rows) -> list:
    have = {r.gamma for r in rows}
    return [float(g) for g in spec.gammas if float(g) not in have]


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(cfg: RunConfig, out: RunOutput) -> None:
    spec = _sweep_spec(cfg)
    rows = sweep_spectrum(spec)
    name = out.table("spectrum", SPECTRUM_HEADER, [(r.gamma, r.branch, r.mu_re, r.mu_im, r.norm) for r in rows])
    branches = sorted({r.branch for r in rows})
    out.metadata["branches"] = branches
    out.metadata["gaps"] = _gaps(spec, rows)
    if spec.model == TWO_MODE:
        out.metadata["crossings"] = {b: branch_crossings(rows, b) for b in branches}
    else:
        lower = [r.gamma for r in rows if r.branch == "lower"]
        out.metadata["lower_gamma_range"] = [min(lower), max(lower)] if lower else None
        out.metadata["grid"] = [spec.grid.x_min, spec.grid.x_max, spec.grid.n]
    if out.fmt == "csv":
        out.text("plot_spectrum.py", plot_script("spectrum", name, "spectrum"))


def cmd_bdg(cfg: RunConfig, out: RunOutput) -> None:
    spec = _sweep_spec(cfg)
    rows, states = sweep_spectrum(spec, return_states=True)
    branch = cfg["branch"]
    table, skipped = [], []
    for g in spec.gammas:
        st = states.get((float(g), branch))
        if st is None:
            skipped.append(float(g))
            continue
        try:
            sp = bdg_two_mode(st) if spec.model == TWO_MODE else bdg_extended(st)
        except (ValueError, NumericalError) as exc:
            log.warning("bdg failed at gamma=%g: %s", g, exc)
            skipped.append(float(g))
            continue
        if spec.model == EXTENDED and cfg["modes"] == "smallest4":
            omegas = sp.smallest(4)
        else:
            omegas = sp.omegas
        table.extend((float(g), w.real, w.imag, sp.classification) for w in omegas)
    name = out.table("bdg", BDG_HEADER, table)
    out.metadata["branch"] = branch
    out.metadata["gaps"] = skipped
    if out.fmt == "csv":
        out.text("plot_bdg.py", plot_script("bdg", name, f"BdG spectrum of branch {branch}"))


def _norm_law_rows(times, n2, law):
    # central differences of the recorded squared norm
    if len(times) < 3:
        return []
    fd = (n2[2:] - n2[:-2]) / (times[2:] - times[:-2])
    scale = max(float(np.max(np.abs(law[1:-1]))), 1e-300)
    rel = np.abs(fd - law[1:-1]) / scale
    return list(zip(times[1:-1], fd, law[1:-1], rel))


def cmd_evolve(cfg: RunConfig, out: RunOutput) -> None:
    if cfg.model == TWO_MODE:
        _evolve_two_mode(cfg, out)
    else:
        _evolve_extended(cfg, out)


def _evolve_two_mode(cfg: RunConfig, out: RunOutput) -> None:
    params = _two_params(cfg)
    initial = state_from_bloch(BlochPoint(cfg["R"], cfg["theta"], cfg["phi"]))
    cap = cfg["norm_cap"] or None
    tr = evolve_two_mode(initial, params, cfg["t_final"], cfg["dt"], cfg["stride"], cap)
    R, theta, phi = tr.bloch
    norms = tr.norms
    name = out.table("trajectory", TRAJECTORY_HEADER, list(zip(tr.times, R, theta, phi, norms)))
    law_rows = _norm_law_rows(tr.times, norms ** 2, norm_rate(params, tr.c1, tr.c2))
    out.table("norm_law", NORM_LAW_HEADER, law_rows)
    out.metadata["diverged"] = tr.diverged
    out.metadata["divergence_time"] = tr.divergence_time
    out.metadata["norm_law_max_rel_error"] = max((r[3] for r in law_rows), default=None)
    if out.fmt == "csv":
        out.text("plot_trajectory.py", plot_script("trajectory", name, "two-mode trajectory"))


def _evolve_extended(cfg: RunConfig, out: RunOutput) -> None:
    params0 = _ext_params(cfg)
    grid = _grid(cfg)
    need = max(cfg["target_norm"], cfg["initial_norm"])
    branch = trace_branch(params0, grid, _trace_norms(cfg, need))
    if not branch.states:
        raise NumericalError("ground-state branch could not be traced")
    if cfg["target_norm"] > 0:
        target = state_at_norm(branch, cfg["target_norm"])
    else:
        found = states_at_gamma(branch, cfg["gamma"])
        if "lower" not in found:
            raise NumericalError(f"no lower-branch stationary state at gamma={cfg['gamma']}")
        target = found["lower"]
    params = target.params
    if cfg["initial_norm"] > 0:
        initial = state_at_norm(branch, cfg["initial_norm"]).psi
    else:
        initial = read_wavefunction(cfg["initial_file"], grid)
    _, (_, excited) = linear_states(grid, params)
    basis = gram_schmidt_basis(target.psi, excited)
    anchor, _ = bloch_project(target.psi, basis)
    out.metadata["gamma"] = params.gamma
    out.metadata["attractor"] = {"norm": target.norm, "mu": target.mu,
                                 "bloch": [anchor.R, anchor.theta, anchor.phi]}
    out.metadata["grid"] = [grid.x_min, grid.x_max, grid.n]
    sp = bdg_extended(target)
    osc = sp.oscillation_mode()
    out.metadata["omega_norm_mode"] = sp.norm_mode()
    out.metadata["omega_oscillation"] = osc
    period = 2 * math.pi / abs(osc.real)
    out.metadata["oscillation_period"] = period

    tr = evolve_extended(initial, params, cfg["t_final"], cfg["dt"], cfg["stride"])
    R, theta, phi, resid = project_trajectory(tr, basis)
    dist = np.array([BlochPoint(R[i], theta[i], phi[i]).distance(anchor) for i in range(len(R))])
    out.table("bloch", BLOCH_HEADER, list(zip(tr.times, R, theta, phi, tr.norms, resid, dist)))
    law = np.array([norm_rate_extended(tr.wavefunction(i), params) for i in range(len(tr.times))])
    out.table("norm_law", NORM_LAW_HEADER, _norm_law_rows(tr.times, tr.norms ** 2, law))
    k = cfg["snapshot_stride"]
    picks = sorted({0, len(tr.times) - 1} | (set(range(0, len(tr.times), k)) if k else set()))
    for i in picks:
        out.wavefunction(f"snapshots/psi_{i:06d}.txt", tr.wavefunction(i))
    far = np.nonzero(dist >= 1e-2)[0]
    settle = None if far.size == 0 else float(tr.times[far[-1]])
    converged = bool(dist[-1] < 1e-2)
    out.metadata["diverged"] = tr.diverged
    out.metadata["converged"] = converged
    out.metadata["convergence_time"] = settle if converged else None
    out.metadata["convergence_periods"] = (settle / period if settle is not None else 0.0) if converged else None
    out.metadata["max_projection_residual"] = float(np.max(resid))
    out.metadata["snapshot_times"] = [float(tr.times[i]) for i in picks]
    if out.fmt == "csv":
        out.text("plot_bloch.py", plot_script("trajectory", "bloch.csv", "projected Bloch coordinates"))
    if tr.diverged:
        raise NumericalError(f"evolution diverged at t={tr.divergence_time}")


def cmd_separatrix(cfg: RunConfig, out: RunOutput) -> None:
    params = _two_params(cfg)
    if cfg["attractor"] == "none" or (params.a_R == 0 and params.a_I == 0):
        attractor = None
    else:
        attractor = stationary_norm(params)
        p = bloch_from_state(attractor.state)
        out.metadata["attractor"] = {"norm": attractor.norm, "bloch": [p.R, p.theta, p.phi]}
    config = ClassifierConfig(eps_conv=cfg["eps_conv"], dwell=cfg["dwell"], norm_cap=cfg["norm_cap"],
                              t_max=cfg["t_max"], dt=cfg["dt"])
    resolution = (cfg["n_theta"], cfg["n_phi"])
    if cfg["onset_search"]:
        res = onset_radius(params, attractor, resolution, config, cfg["coarse_step"], cfg["fine_step"], cfg["r_max"])
        maps = [res.maps[r] for r in sorted(res.maps)]
        out.metadata["onset_radius"] = res.radius
        out.metadata["monotonicity_violations"] = res.monotonicity_violations
    else:
        maps = separatrix_scan(cfg["radii"], resolution, params, attractor, config)
    rows = []
    for m in maps:
        for i, th in enumerate(m.theta):
            for j, ph in enumerate(m.phi):
                rows.append((m.R, float(th), float(ph), str(m.verdicts[i, j]), float(m.decision_times[i, j])))
    name = out.table("separatrix", SEPARATRIX_HEADER, rows)
    out.metadata["resolution"] = list(resolution)
    out.metadata["t_max"] = config.t_max
    out.metadata["dt"] = config.dt
    out.metadata["radii"] = {
        "%.10g" % m.R: {"convergent": m.count(CONVERGENT), "divergent": m.count(DIVERGENT),
                        "undecided": m.count(UNDECIDED), "mirror_symmetric": m.is_mirror_symmetric()}
        for m in maps
    }
    out.metadata["undecided_total"] = sum(m.count(UNDECIDED) for m in maps)
    if out.fmt == "csv":
        out.text("plot_separatrix.py", plot_script("separatrix", name, "separatrix maps"))


def cmd_stationary(cfg: RunConfig, out: RunOutput) -> None:
    if cfg.model == TWO_MODE:
        st = stationary_norm(_two_params(cfg))
        out.table("stationary", SPECTRUM_HEADER, [(st.params.gamma, st.branch_label, st.mu.real, st.mu.imag, st.norm)])
        p = bloch_from_state(st.state)
        out.metadata["bloch"] = [p.R, p.theta, p.phi]
        if st.norm > 0:
            sp = bdg_two_mode(st)
            out.metadata["stability"] = sp.classification
            out.metadata["omegas"] = list(sp.omegas)
        return
    grid = _grid(cfg)
    branch = trace_branch(_ext_params(cfg), grid, _trace_norms(cfg, cfg["target_norm"]))
    if not branch.states:
        raise NumericalError("ground-state branch could not be traced")
    label = cfg["branch"]
    if cfg["target_norm"] > 0:
        st = state_at_norm(branch, cfg["target_norm"])
        fold = branch.fold
        label = "upper" if fold is not None and st.norm > fold[0] else "lower"
    else:
        st = states_at_gamma(branch, cfg["gamma"]).get(label)
        if st is None:
            raise NumericalError(f"no {label}-branch stationary state at gamma={cfg['gamma']}")
    out.table("stationary", SPECTRUM_HEADER, [(st.params.gamma, label, st.mu, 0.0, st.norm)])
    out.wavefunction("psi.txt", st.psi)
    sp = bdg_extended(st)
    out.metadata["stability"] = sp.classification
    out.metadata["smallest_omegas"] = list(sp.smallest(4))
    out.metadata["residual"] = st.residual
    out.metadata["fold"] = list(branch.fold) if branch.fold is not None else None
    out.metadata["grid"] = [grid.x_min, grid.x_max, grid.n]


def cmd_lab_rate(cfg: RunConfig, out: RunOutput) -> None:
    rate = lab_loss_rate(cfg["gamma"], LabScale(cfg["tau"]))
    out.table("lab_rate", LAB_HEADER, [(cfg["gamma"], cfg["tau"], rate)])
    out.metadata["units"] = {"tau": "s", "rate": "1/s"}


COMMAND_FUNCS = {
    "spectrum": cmd_spectrum,
    "bdg": cmd_bdg,
    "evolve": cmd_evolve,
    "separatrix": cmd_separatrix,
    "stationary": cmd_stationary,
    "lab-rate": cmd_lab_rate,
}


# ---------------------------------------------------------------------------
# entry point


def default_output_dir(command: str, config_path: str) -> Path:
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "asymbec-output"))
    return root / f"{command}-{Path(config_path).stem}"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asymbec", description="Asymmetric gain-loss condensate simulations")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="flat 'key = value' config file")
    ap.add_argument("--out", help=f"output directory (default: ${OUTPUT_ROOT_ENV}/<command>-<config name>)")
    ap.add_argument("--format", choices=("csv", "json"), help="table format (overrides the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(command: str, config_path: str, out_dir: Optional[str] = None, fmt: Optional[str] = None) -> int:
    try:
        cfg = read_config(config_path, command)
    except ConfigError as exc:
        print(f"asymbec: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if fmt is not None:
        cfg.values["format"] = fmt
    directory = Path(out_dir) if out_dir else default_output_dir(command, config_path)
    out = RunOutput(directory, command, cfg.resolved(), cfg.format)
    try:
        COMMAND_FUNCS[command](cfg, out)
    except (GridMismatchError, WavefunctionFormatError, OSError) as exc:
        print(f"asymbec: input error: {exc}", file=sys.stderr)
        out.manifest("failed", f"{type(exc).__name__}: {exc}")
        return EXIT_CONFIG
    except (NumericalError, ValueError) as exc:
        print(f"asymbec: numerical failure: {exc}", file=sys.stderr)
        out.manifest("failed", f"{type(exc).__name__}: {exc}")
        return EXIT_NUMERICAL
    out.manifest()
    log.info("wrote %s", directory)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(args.command, args.config, args.out, args.format)


if __name__ == "__main__":
    sys.exit(main())
