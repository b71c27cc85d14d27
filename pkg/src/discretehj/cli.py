"""Command-line driver.

Each subcommand reads one JSON config, runs an experiment and writes CSV
tables plus a ``report.json`` into the output directory.  Run metadata (config
hash, version, wall time) goes to a separate ``run.json`` so that the numeric
outputs of repeated runs are byte-identical.

Exit status: 0 on success, 1 on an invalid config, 2 on a numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .core import GeneratingFunctionSequence, PhasePoint
from .dhj import (
    hj_generate_trajectory,
    jacobi_solution,
    ldhj_residual,
    rdhj_residual,
)
from .dmech import (
    integrate,
    left_equations_residual,
    right_equations_residual,
    symplecticity_defect,
    step_left,
    step_right,
)
from .docp import (
    BellmanConfig,
    GridSpec,
    LQProblem,
    bellman_backward,
    costate_from_value,
    lq_optimal_solution,
    lq_value_analytic,
    rollout,
)
from .exceptions import DiscreteHJError
from .galerkin import (
    TABLEAUS,
    build_docp,
    discrete_dynamics,
    heisenberg_fd_closed_form,
    heisenberg_system,
    step_errors,
)
from .linhj import (
    LagrangianAffineSpace,
    QuadraticGeneratingFunction,
    QuadraticLeftHamiltonian,
    extract_generating,
    propagate_affine,
    riccati_fractional_step,
    riccati_sequence,
    step_matrix,
)
from .systems import BUILTIN_HAMILTONIANS, builtin_hamiltonian

log = logging.getLogger("discretehj")

__all__ = ["main", "run", "report_convergence", "write_csv", "read_csv", "write_json",
           "read_json", "SCHEMAS"]

# --------------------------------------------------------------------- schemas

_NUM = {"type": "number"}
_VEC = {"anyOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 1}]}
_MAT = {"anyOf": [_NUM, {"type": "array", "minItems": 1,
                         "items": {"type": "array", "items": _NUM, "minItems": 1}}]}
_POS = {"type": "number", "exclusiveMinimum": 0}
_QUADRATIC = {"type": "object", "required": ["type", "M", "K", "L"],
              "additionalProperties": False,
              "properties": {"type": {"const": "quadratic"}, "M": _MAT, "K": _MAT, "L": _MAT}}
_SYSTEM = {"anyOf": [{"enum": sorted(BUILTIN_HAMILTONIANS)}, _QUADRATIC]}
_GRID = {"type": "object", "required": ["lower", "upper", "points"],
         "additionalProperties": False,
         "properties": {"lower": _VEC, "upper": _VEC,
                        "points": {"anyOf": [{"type": "integer", "minimum": 2},
                                             {"type": "array", "minItems": 1,
                                              "items": {"type": "integer", "minimum": 2}}]}}}
_BOX = {"type": "array", "minItems": 1,
        "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}}
_HORIZON = {"type": "integer", "minimum": 0}


def _schema(required, props):
    return {"type": "object", "required": required, "additionalProperties": False,
            "properties": props}


SCHEMAS = {
    "integrate": _schema(["system", "N", "q0", "p0"], {
        "system": _SYSTEM, "h": _POS, "N": _HORIZON, "q0": _VEC, "p0": _VEC,
        "tol": _POS}),
    "riccati": _schema(["M", "K", "L", "N"], {
        "M": _MAT, "K": _MAT, "L": _MAT, "N": _HORIZON,
        "A0": _MAT, "b0": _VEC, "c0": _NUM}),
    "hj-check": _schema(["system", "N", "q0", "p0"], {
        "system": _SYSTEM, "h": _POS, "N": _HORIZON, "q0": _VEC, "p0": _VEC, "tol": _POS}),
    "bellman": _schema(["A", "B", "Q", "R", "N", "grid", "control_box"], {
        "A": _MAT, "B": _MAT, "Q": _MAT, "R": _MAT, "d": _VEC,
        "N": {"type": "integer", "minimum": 1},
        "grid": _GRID, "control_box": _BOX,
        "terminal": _schema(["P"], {"P": _MAT, "b": _VEC, "c": _NUM}),
        "order": {"enum": ["linear", "cubic"]},
        "scan_points": {"type": "integer", "minimum": 1},
        "escape_margin": {"type": "number", "minimum": 0}, "q0": _VEC}),
    "galerkin-bellman": _schema(["tableau", "h", "N", "grid", "control_box"], {
        "tableau": {"enum": sorted(TABLEAUS)}, "h": _POS,
        "N": {"type": "integer", "minimum": 1},
        "grid": _GRID, "control_box": _BOX,
        "q0": _VEC, "q_final": _VEC,
        "terminal_weight": {"type": "number", "minimum": 0},
        "order": {"enum": ["linear", "cubic"]},
        "scan_points": {"type": "integer", "minimum": 1},
        "escape_margin": {"type": "number", "minimum": 0}}),
    "heisenberg": _schema(["h", "q0", "stage_controls"], {
        "h": _POS, "q0": _VEC,
        "stage_controls": {"type": "array", "minItems": 1,
                           "items": {"type": "array", "items": _NUM,
                                     "minItems": 4, "maxItems": 4}}}),
    "convergence": _schema(["q0", "h0"], {
        "tableaus": {"type": "array", "minItems": 1, "items": {"enum": sorted(TABLEAUS)}},
        "q0": _VEC, "h0": _POS, "T": _POS,
        "levels": {"type": "integer", "minimum": 3},
        "kind": {"enum": ["global", "local"]},
        "signal": _schema([], {"amplitude": _VEC, "frequency": _VEC, "phase": _VEC})}),
}


class ConfigError(ValueError):
    """The config file is unreadable, schema-invalid or dimensionally inconsistent."""


def load_config(path, command):
    """Read and validate a config; raises :class:`ConfigError` with the field path."""
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from None
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config field {where}: {err.message}")
    return cfg


# ------------------------------------------------------------------------- I/O

def write_csv(path, header, rows):
    """Write a header row and ``%.17g`` decimals; the format reloads exactly."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size and not np.all(np.isfinite(rows)):
        raise ValueError(f"refusing to write non-finite values to {path}")
    np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=",".join(header), comments="")


def read_csv(path):
    """Return ``(header, rows)`` from a file written by :func:`write_csv`."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, rows


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        val = float(obj)
        if not math.isfinite(val):
            raise ValueError("refusing to write a non-finite number to JSON")
        return val
    return obj


def write_json(path, obj):
    # repr of a float is the shortest string that round-trips exactly
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# --------------------------------------------------------------- convergence

def report_convergence(hs, errors, floor=None):
    """Observed orders from errors at successively refined step sizes.

    Parameters
    ----------
    hs : sequence of float
        At least three step sizes, decreasing.
    errors : sequence of float
    floor : float, optional
        Errors at or below this level count as machine precision; defaults to
        ``1e3 * eps``.

    Returns
    -------
    dict
        ``slopes`` holds ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})`` or the
        string ``"saturated"``; ``monotone`` is false when some error failed
        to decrease; ``order`` is the last numeric slope (``None`` if all
        saturated).
    """
    hs = [float(h) for h in hs]
    errors = [float(e) for e in errors]
    if len(hs) < 3 or len(hs) != len(errors):
        raise ValueError("need at least three (h, error) pairs")
    floor = 1e3 * np.finfo(float).eps if floor is None else floor
    slopes = []
    for i in range(len(hs) - 1):
        e0, e1 = errors[i], errors[i + 1]
        if e0 <= floor or e1 <= floor:
            slopes.append("saturated")
        else:
            slopes.append(math.log(e0 / e1) / math.log(hs[i] / hs[i + 1]))
    monotone = all(e1 < e0 or e0 <= floor for e0, e1 in zip(errors, errors[1:]))
    numeric = [s for s in slopes if s != "saturated"]
    return {"h": hs, "error": errors, "slopes": slopes, "monotone": monotone,
            "order": numeric[-1] if numeric else None}


# ---------------------------------------------------------------- commands

def _mat(x, n=None):
    a = np.asarray(x, dtype=float)
    a = a.reshape(1, 1) if a.ndim == 0 else a
    if a.ndim != 2 or (n is not None and a.shape != (n, n)):
        raise ConfigError(f"expected a {n}x{n} matrix, got shape {a.shape}")
    return a


def _vec(x, n=None, name="vector"):
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if n is not None and v.size != n:
        raise ConfigError(f"{name} must have length {n}, got {v.size}")
    return v


def _system(cfg):
    """Return ``(H, n, kind)`` with kind ``"right"`` or ``"left"``."""
    spec = cfg["system"]
    if isinstance(spec, str):
        H, n = builtin_hamiltonian(spec, cfg.get("h", 0.1))
        return H, n, "right", None
    M = _mat(spec["M"])
    n = M.shape[0]
    qdh = QuadraticLeftHamiltonian(M, _mat(spec["K"], n), _mat(spec["L"], n))
    return qdh.left_hamiltonian(), n, "left", qdh


def _phase_columns(n):
    if n == 1:
        return ["q"], ["p"]
    return [f"q{i}" for i in range(n)], [f"p{i}" for i in range(n)]


def _traj_rows(traj):
    k = np.arange(len(traj))[:, None]
    return np.hstack([k, traj.q, traj.p])


def cmd_integrate(cfg, out, threads):
    H, n, kind, _ = _system(cfg)
    z0 = PhasePoint(_vec(cfg["q0"], n, "q0"), _vec(cfg["p0"], n, "p0"))
    traj = integrate(H, z0, cfg["N"])
    qc, pc = _phase_columns(n)
    write_csv(out / "trajectory.csv", ["k"] + qc + pc, _traj_rows(traj))
    stepper = step_right if kind == "right" else step_left
    residual = (right_equations_residual if kind == "right" else left_equations_residual)(H, traj)
    defect = max(symplecticity_defect(lambda z: stepper(H, z), z) for z in traj.points[:5])
    return {"steps": cfg["N"], "hamiltonian": kind, "equations_residual": residual,
            "symplecticity_defect": defect}


def cmd_riccati(cfg, out, threads):
    M = _mat(cfg["M"])
    n = M.shape[0]
    H = QuadraticLeftHamiltonian(M, _mat(cfg["K"], n), _mat(cfg["L"], n))
    A0 = _mat(cfg.get("A0", np.zeros((n, n))), n)
    S0 = QuadraticGeneratingFunction(A0, _vec(cfg.get("b0", np.zeros(n)), n, "b0"),
                                     cfg.get("c0", 0.0))
    seq = riccati_sequence(S0, H, cfg["N"])
    header = (["k"] + [f"A{i}{j}" for i in range(n) for j in range(n)]
              + [f"b{i}" for i in range(n)] + ["c"])
    rows = [np.concatenate([[k], S.A.ravel(), S.b, [S.c]]) for k, S in enumerate(seq)][1:]
    write_csv(out / "riccati.csv", header, np.array(rows).reshape(-1, len(header)))
    phi = step_matrix(H)
    frac = max((float(np.max(np.abs(riccati_fractional_step(seq[k].A, H) - seq[k + 1].A)))
                for k in range(cfg["N"])), default=0.0)
    space = LagrangianAffineSpace.graph(S0)
    affine = 0.0
    for k in range(1, cfg["N"] + 1):
        space = propagate_affine(space, phi)
        G = extract_generating(space)
        affine = max(affine, float(np.max(np.abs(G.A - seq[k].A))),
                     float(np.max(np.abs(G.b - seq[k].b))))
    return {"steps": cfg["N"], "step_matrix": phi.matrix,
            "step_matrix_symplectic_defect": phi.symplectic_defect(),
            "fractional_step_difference": frac, "affine_propagation_difference": affine}


def cmd_hj_check(cfg, out, threads):
    H, n, kind, qdh = _system(cfg)
    q0 = _vec(cfg["q0"], n, "q0")
    p0 = _vec(cfg["p0"], n, "p0")
    N = cfg["N"]
    report = {"steps": N}
    qc, pc = _phase_columns(n)
    if kind == "right":
        table = jacobi_solution(H, PhasePoint(q0, p0), N)
        S = table.as_sequence()
        q = table.trajectory.q
        res = max((abs(rdhj_residual(S, H, k, q[k], q[k + 1])) for k in range(N)), default=0.0)
        write_csv(out / "jacobi.csv", ["k"] + qc + pc + ["S"],
                  np.hstack([_traj_rows(table.trajectory), table.values[:, None]]))
        report.update(rdhj_residual_max=res, momentum_residual=table.right_residual(H))
        return report
    # quadratic system: Riccati-built S seeded with dS^0(q0) = p0 and S^0(q0) = 0
    S0 = QuadraticGeneratingFunction(np.zeros((n, n)), p0, -float(p0 @ q0))
    seq = riccati_sequence(S0, qdh, N)
    S = GeneratingFunctionSequence(seq)
    hj = hj_generate_trajectory(S, H, q0, N)
    direct = integrate(H, PhasePoint(q0, p0), N)
    q = hj.q
    ldhj = max((abs(ldhj_residual(S, H, k, q[k], q[k + 1])) for k in range(N)), default=0.0)
    write_csv(out / "hj_trajectory.csv", ["k"] + qc + pc + ["S"],
              np.hstack([_traj_rows(hj), np.array([seq[k](q[k]) for k in range(N + 1)])[:, None]]))
    report.update(ldhj_residual_max=ldhj,
                  left_equations_residual=left_equations_residual(H, hj),
                  integrate_difference=float(np.max(np.abs(hj.q - direct.q)))
                  if N else 0.0)
    return report


def _grid(spec):
    return GridSpec(_vec(spec["lower"]), _vec(spec["upper"]), spec["points"])


def _grid_rows(values, policy):
    nodes = values.grid.nodes()
    vrows, prows = [], []
    for k in range(values.N + 1):
        vrows.append(np.hstack([np.full((len(nodes), 1), k), nodes,
                                values.tables[k].reshape(-1, 1)]))
    for k in range(policy.N):
        prows.append(np.hstack([np.full((len(nodes), 1), k), nodes,
                                policy.tables[k].reshape(len(nodes), -1)]))
    return np.vstack(vrows), np.vstack(prows)


def _state_cols(n):
    return ["q"] if n == 1 else [f"q{i}" for i in range(n)]


def _control_cols(m):
    return ["u"] if m == 1 else [f"u{i}" for i in range(m)]


def cmd_bellman(cfg, out, threads):
    d = cfg.get("d")
    lq = LQProblem(_mat(cfg["A"]), np.atleast_2d(np.asarray(cfg["B"], dtype=float)),
                   _mat(cfg["Q"]), _mat(cfg["R"]), None if d is None else _vec(d))
    grid = _grid(cfg["grid"])
    if grid.n != lq.n:
        raise ConfigError(f"grid has {grid.n} axes but A is {lq.n}x{lq.n}")
    box = np.asarray(cfg["control_box"], dtype=float)
    if box.shape[0] != lq.m:
        raise ConfigError(f"control_box needs {lq.m} rows")
    term = cfg.get("terminal")
    terminal = QuadraticGeneratingFunction.zero(lq.n) if term is None else \
        QuadraticGeneratingFunction(_mat(term["P"], lq.n),
                                    _vec(term.get("b", np.zeros(lq.n)), lq.n, "terminal.b"),
                                    term.get("c", 0.0))
    bcfg = BellmanConfig(order=cfg.get("order", "linear"),
                         scan_points=cfg.get("scan_points", 17),
                         escape_margin=cfg.get("escape_margin", 0.1), n_jobs=threads)
    ocp = lq.to_ocp(cfg["N"], box)
    values, policy = bellman_backward(ocp, grid, terminal, bcfg)
    analytic = lq_value_analytic(lq, cfg["N"], terminal)
    nodes = grid.nodes()
    err = 0.0
    for k, J in enumerate(analytic):
        exact = 0.5 * np.einsum("ni,ij,nj->n", nodes, J.A, nodes) + nodes @ J.b + J.c
        err = max(err, float(np.max(np.abs(values.tables[k].ravel() - exact))))
    vrows, prows = _grid_rows(values, policy)
    write_csv(out / "values.csv", ["k"] + _state_cols(lq.n) + ["J"], vrows)
    write_csv(out / "policy.csv", ["k"] + _state_cols(lq.n) + _control_cols(lq.m), prows)
    report = {"stages": cfg["N"], "max_value_error_vs_analytic": err,
              "analytic_J0": {"P": analytic[0].A, "b": analytic[0].b, "c": analytic[0].c}}
    if "q0" in cfg:
        q0 = _vec(cfg["q0"], lq.n, "q0")
        states, controls, cost = rollout(ocp, policy, q0)
        _, _, p_exact = lq_optimal_solution(lq, analytic, q0)
        p_grid = costate_from_value(values, states)
        report.update(rollout_cost=cost, J0_at_q0=values(0, q0),
                      rollout_cost_with_terminal=cost + terminal(states[-1]),
                      rollout_states=states, rollout_controls=controls,
                      costate_grid=p_grid,
                      costate_difference=float(np.max(np.abs(p_grid - p_exact))))
    return report


def cmd_galerkin_bellman(cfg, out, threads):
    sysm = heisenberg_system()
    tab = TABLEAUS[cfg["tableau"]]()
    grid = _grid(cfg["grid"])
    if grid.n != 3:
        raise ConfigError("the Heisenberg grid needs 3 axes")
    box = np.asarray(cfg["control_box"], dtype=float)
    q_final = cfg.get("q_final")
    ocp = build_docp(sysm, tab, cfg["h"], cfg["N"], box,
                     q0=cfg.get("q0"), q_final=None if q_final is None else _vec(q_final, 3))
    bcfg = BellmanConfig(order=cfg.get("order", "linear"),
                         scan_points=cfg.get("scan_points", 5 if tab.s > 1 else 17),
                         terminal_weight=cfg.get("terminal_weight", 1e3),
                         escape_margin=cfg.get("escape_margin", 0.1), n_jobs=threads)
    values, policy = bellman_backward(ocp, grid, None, bcfg)
    vrows, prows = _grid_rows(values, policy)
    ucols = [f"{a}{i + 1}" for i in range(tab.s) for a in ("u", "v")]
    write_csv(out / "values.csv", ["k", "x", "y", "z", "J"], vrows)
    write_csv(out / "policy.csv", ["k", "x", "y", "z"] + ucols, prows)
    report = {"stages": cfg["N"], "tableau": tab.name, "stage_count": tab.s,
              "control_dimension": ocp.m}
    if "q0" in cfg:
        states, controls, cost = rollout(ocp, policy, ocp.q0)
        report.update(rollout_states=states, rollout_controls=controls, rollout_cost=cost,
                      rollout_cost_with_terminal=cost + values(cfg["N"], states[-1]),
                      J0_at_q0=values(0, ocp.q0))
    return report


def cmd_heisenberg(cfg, out, threads):
    sysm = heisenberg_system()
    tab = TABLEAUS["stormer_verlet"]()
    h = cfg["h"]
    q = _vec(cfg["q0"], 3, "q0")
    qc = q.copy()
    rows = [np.concatenate([[0], q, qc])]
    worst = 0.0
    for k, U in enumerate(cfg["stage_controls"]):
        U = np.asarray(U, dtype=float).reshape(2, 2)
        q = discrete_dynamics(sysm, tab, q, U, h)
        qc = heisenberg_fd_closed_form(qc, U[0], U[1], h)
        worst = max(worst, float(np.max(np.abs(q - qc))))
        rows.append(np.concatenate([[k + 1], q, qc]))
    write_csv(out / "heisenberg.csv",
              ["k", "x", "y", "z", "x_closed", "y_closed", "z_closed"], np.array(rows))
    return {"steps": len(cfg["stage_controls"]), "h": h, "max_pipeline_difference": worst}


def _signal(spec):
    amp = _vec(spec.get("amplitude", [1.0, 1.0]), 2, "amplitude")
    freq = _vec(spec.get("frequency", [1.0, 1.0]), 2, "frequency")
    phase = _vec(spec.get("phase", [0.0, -math.pi / 2]), 2, "phase")
    return lambda t: amp * np.cos(freq * t + phase)


def cmd_convergence(cfg, out, threads):
    names = cfg.get("tableaus", ["euler", "stormer_verlet"])
    q0 = _vec(cfg["q0"], 3, "q0")
    kind = cfg.get("kind", "global")
    T = cfg.get("T", 1.0)
    levels = cfg.get("levels", 4)
    hs = [cfg["h0"] / 2 ** i for i in range(levels)]
    if kind == "global":
        steps = T / cfg["h0"]
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigError("T must be an integer multiple of h0")
    control = _signal(cfg.get("signal", {}))
    rows, report = [], {"kind": kind, "T": T if kind == "global" else None, "tableaus": {}}
    for idx, name in enumerate(names):
        errs = step_errors(TABLEAUS[name](), q0, control, hs, T=T, kind=kind)
        rows += [[idx, h, e] for h, e in zip(hs, errs)]
        report["tableaus"][name] = report_convergence(hs, errs)
    write_csv(out / "convergence.csv", ["tableau", "h", "error"], np.array(rows))
    report["tableau_index"] = names
    return report


COMMANDS = {
    "integrate": cmd_integrate,
    "riccati": cmd_riccati,
    "hj-check": cmd_hj_check,
    "bellman": cmd_bellman,
    "galerkin-bellman": cmd_galerkin_bellman,
    "heisenberg": cmd_heisenberg,
    "convergence": cmd_convergence,
}


def run(command, config, out, threads=0, verbose=False, stderr=None):
    """Run one experiment; returns the exit status."""
    stderr = sys.stderr if stderr is None else stderr
    if command not in COMMANDS:
        print(f"error: unknown command {command!r}", file=stderr)
        return 1
    threads = (os.cpu_count() or 1) if threads == 0 else threads
    start = time.perf_counter()
    try:
        cfg = load_config(config, command)
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        log.info("running %s with %s", command, config)
        report = COMMANDS[command](cfg, out, threads)
        write_json(out / "report.json", report)
    except DiscreteHJError as err:
        print(f"numerical failure in {command}: {type(err).__name__}: {err}", file=stderr)
        return 2
    except (ConfigError, ValueError, jsonschema.ValidationError) as err:
        print(f"config error: {err}", file=stderr)
        return 1
    except (np.linalg.LinAlgError, ArithmeticError) as err:
        print(f"numerical failure in {command}: {type(err).__name__}: {err}", file=stderr)
        return 2
    digest = hashlib.sha256(Path(config).read_bytes()).hexdigest()
    write_json(out / "run.json", {"command": command, "config_sha256": digest,
                                  "version": __version__, "threads": threads,
                                  "wall_time_s": time.perf_counter() - start})
    return 0


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON experiment config")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=0, help="worker threads (0 = auto)")
    common.add_argument("--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="discretehj", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 0:
        print("config error: --threads must be >= 0", file=sys.stderr)
        return 1
    return run(args.command, args.config, args.out, args.threads, args.verbose)


if __name__ == "__main__":
    sys.exit(main())
