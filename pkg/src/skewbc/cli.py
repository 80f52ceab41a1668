"""Command line entry point: run, check-bc, verify-sbp, scenarios.

Every subcommand prints a fixed-order report of ``KEY: value`` lines and
returns exit status 0 iff all of its certifications passed.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .boundary import check_R_condition, check_S_smallness, resolve_formulation
from .config import ConfigError, parse_config
from .core import DegenerateRotation, SkewBCError
from .sbp import EDGES, assemble_grid
from .solver import (
    AdmissibilityLoss,
    EnergyLedger,
    SemiDiscreteSystem,
    cfl_dt,
    rk4_advance,
    stable_dt,
)

log = logging.getLogger(__name__)

SBP_TOL = 1e-12
SWEEP_SAMPLES = 64
SWEEP_SPREAD = 0.2
SCENARIOS = {
    1: ("u_form", "u_form"),
    2: ("w_form", "w_form"),
    3: ("u_form", "w_form"),
    4: ("w_form", "u_form"),
}
VERDICT_RANK = {"ADMISSIBLE": 0, "MARGINAL": 1, "INADMISSIBLE": 2}


@dataclass
class CommandResult:
    status: int
    lines: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    @property
    def text(self):
        return "\n".join(self.lines) + "\n"


def _fmt(x):
    return repr(float(x))


# ---------------------------------------------------------------- check-bc


@dataclass
class EdgeCheck:
    edge: str
    verdict: str = "ADMISSIBLE"
    r_margin: float = math.inf
    s_margin: float = math.inf
    counts: dict = field(default_factory=dict)
    sampled: int = 0
    glancing: int = 0


def _sweep_states(cfg, model, grid, edge, rng, n_samples):
    """Boundary states of the initial field on ``edge`` plus random perturbations."""
    U0 = cfg.initial_field(model, grid).flat()
    idx = np.flatnonzero(grid.edges == edge)
    states = [U0[:, grid.boundary_nodes[j]] for j in idx]
    normal = grid.normals[idx[0]]
    for _ in range(n_samples):
        base = states[rng.integers(len(idx))]
        # additive so that states at rest also sample inflow and outflow
        U = base + SWEEP_SPREAD * np.max(np.abs(base)) * rng.uniform(-1.0, 1.0, base.shape)
        states.append(U)
    return states, normal


def check_edge(cfg, model, grid, edge, rng, n_samples=SWEEP_SAMPLES):
    out = EdgeCheck(edge)
    bc = cfg.boundary_condition(model, edge)
    states, normal = _sweep_states(cfg, model, grid, edge, rng, n_samples)
    for U in states:
        try:
            model.check_admissible(U)
        except SkewBCError:
            continue
        if bc is None:
            form = model.default_formulation(U, normal)
        else:
            form = resolve_formulation(bc, model, U, normal)
        try:
            split = model.split(U, normal, form)
        except DegenerateRotation:
            out.glancing += 1
            continue
        out.sampled += 1
        key = f"{form}/{'inflow' if model.normal_velocity(U, normal) < 0 else 'outflow'}"
        out.counts.setdefault(key, set()).add(split.n_minus)
        if bc is None or split.n_minus == 0:
            continue
        R = bc.R_matrix(split)
        loose = check_R_condition(split, R)
        strict = check_R_condition(split, R, strict=True)
        out.r_margin = min(out.r_margin, loose.margin)
        if not loose.passed:
            verdict = "INADMISSIBLE"
        elif not strict.passed:
            verdict = "MARGINAL"
        else:
            verdict = "ADMISSIBLE"
            S = check_S_smallness(split, R, bc.S_tilde_matrix(split), inhomogeneous=not bc.homogeneous)
            out.s_margin = min(out.s_margin, S.margin)
            if not S.passed:
                verdict = "INADMISSIBLE"
        if VERDICT_RANK[verdict] > VERDICT_RANK[out.verdict]:
            out.verdict = verdict
    return out


def cmd_check_bc(cfg, seed=0, n_samples=SWEEP_SAMPLES):
    model = cfg.build_model()
    grid = assemble_grid(cfg.order, cfg.nx, cfg.ny, cfg.domain)
    rng = np.random.default_rng(seed)
    lines = ["COMMAND: check-bc", f"MODEL: {cfg.model}", f"SEED: {seed}"]
    overall = "ADMISSIBLE"
    checks = {}
    for edge in EDGES:
        chk = check_edge(cfg, model, grid, edge, rng, n_samples)
        checks[edge] = chk
        counts = ";".join(f"{k}={','.join(str(c) for c in sorted(v))}" for k, v in sorted(chk.counts.items()))
        s_m = "n/a" if math.isinf(chk.s_margin) else _fmt(chk.s_margin)
        lines.append(
            f"EDGE_{edge.upper()}: verdict={chk.verdict} r_margin={_fmt(chk.r_margin)} "
            f"s_margin={s_m} sigma=|Lambda^-| counts={counts or 'none'} "
            f"sampled={chk.sampled} glancing={chk.glancing}"
        )
        if VERDICT_RANK[chk.verdict] > VERDICT_RANK[overall]:
            overall = chk.verdict
    lines.append(f"VERDICT: {overall}")
    return CommandResult(1 if overall == "INADMISSIBLE" else 0, lines, {"verdict": overall, "edges": checks})


# ---------------------------------------------------------------- run


def _build_system(cfg, model, grid, bcs=None):
    if bcs is None:
        bcs = {e: cfg.boundary_condition(model, e) for e in EDGES}
    return SemiDiscreteSystem(model, grid, bcs)


def _time_steps(cfg, system, U):
    dt = cfg.dt if cfg.dt is not None else stable_dt(system, U, cfg.cfl)
    if cfg.t_end is not None:
        n = max(1, int(math.ceil(cfg.t_end / dt - 1e-12))) if cfg.t_end > 0 else 0
        dt = cfg.t_end / n if n else dt
    else:
        n = cfg.steps
    return dt, n


def _integrate(system, U, dt, n, cfl):
    """Run RK4 and return ``(ledger, final, loss)``; warnings go to stderr."""
    ledger = EnergyLedger()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            final, ledger = rk4_advance(U, system, dt, n, ledger, cfl=cfl, check_identity=True)
            loss = None
        except AdmissibilityLoss as exc:
            final, loss = exc.snapshot, exc
    for w in caught:
        print(f"WARNING: {w.message}", file=sys.stderr)
    return ledger, final, loss


def cmd_run(cfg, out=".", force=False, seed=0):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["COMMAND: run", f"MODEL: {cfg.model}", f"GRID: order={cfg.order} nx={cfg.nx} ny={cfg.ny}"]
    model = cfg.build_model()
    if cfg.model == "iee":
        lines += ["STATUS: REJECTED", "REASON: singular P, the incompressible system cannot be time-integrated"]
        return CommandResult(2, lines)
    check = cmd_check_bc(cfg, seed=seed)
    lines.append(f"BC_VERDICT: {check.data['verdict']}")
    if check.data["verdict"] == "INADMISSIBLE" and not force:
        lines += ["STATUS: REFUSED", "REASON: inadmissible boundary conditions (use --force)"]
        return CommandResult(2, lines)
    grid = assemble_grid(cfg.order, cfg.nx, cfg.ny, cfg.domain)
    system = _build_system(cfg, model, grid)
    U0 = cfg.initial_field(model, grid)
    dt, n = _time_steps(cfg, system, U0.values)
    limit = cfl_dt(system, U0.values, cfg.cfl)
    lines += [f"DT: {_fmt(dt)}", f"CFL_DT: {_fmt(limit)}", f"STEPS: {n}"]
    ledger, final, loss = _integrate(system, U0, dt, n, cfg.cfl)
    ledger.write_csv(out / cfg.ledger)
    violations = sum(not v for v in ledger.verdicts)
    lines += [
        f"HOMOGENEOUS: {str(system.homogeneous).lower()}",
        f"INITIAL_ENERGY: {_fmt(ledger.energy[0]) if ledger.energy else 'n/a'}",
        f"FINAL_ENERGY: {_fmt(ledger.energy[-1]) if ledger.energy else 'n/a'}",
        f"DATA_INTEGRAL: {_fmt(ledger.data_integral[-1]) if ledger.energy else 'n/a'}",
        f"MAX_IDENTITY_RESIDUAL: {_fmt(ledger.max_identity_residual)}",
        f"BOUND_VIOLATIONS: {violations}",
        f"BOUND_VERDICT: {'PASS' if violations == 0 else 'FAIL'}",
    ]
    status = 0 if violations == 0 else 1
    if loss is not None:
        snap = out / "snapshot.npy"
        np.save(snap, loss.snapshot.values)
        lines += ["STATUS: ADMISSIBILITY_LOSS", f"DETAIL: {loss}", f"SNAPSHOT: {snap}"]
        status = 3
    else:
        lines.append("STATUS: COMPLETED")
    lines.append(f"LEDGER: {out / cfg.ledger}")
    (out / cfg.report).write_text("\n".join(lines) + "\n")
    return CommandResult(status, lines, {"ledger": ledger, "final": final})


# ---------------------------------------------------------------- scenarios


def scenario_counts(model, U, inflow_form, outflow_form):
    """Conditions required with 1D normals against and along the velocity."""
    _, un, ut = model.to_primitive(U)
    speed = math.hypot(un, ut)
    if speed == 0.0:
        raise ValueError("scenario counts need a nonzero background velocity")
    d = np.array([un, ut]) / speed
    cin = model.split(U, -d, inflow_form).n_minus
    cout = model.split(U, d, outflow_form).n_minus
    return cin, cout


def cmd_scenarios(cfg, out=".", seed=0):
    if cfg.model != "swe":
        raise ValueError("scenarios are defined for the shallow water model only")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    model = cfg.build_model()
    grid = assemble_grid(cfg.order, cfg.nx, cfg.ny, cfg.domain)
    Ubg = model.from_primitive(np.array(cfg.background_primitive(), dtype=float))
    U0 = cfg.initial_field(model, grid)
    lines = ["COMMAND: scenarios", f"MODEL: {cfg.model}"]
    results = {}
    status = 0
    for k, (fin, fout) in SCENARIOS.items():
        cin, cout = scenario_counts(model, Ubg, fin, fout)
        sub = replace(cfg, boundaries={
            e: replace(spec, formulation=[fin, fout]) for e, spec in cfg.boundaries.items()
        })
        system = _build_system(sub, model, grid)
        dt, n = _time_steps(sub, system, U0.values)
        ledger, _, loss = _integrate(system, U0, dt, n, cfg.cfl)
        ledger.write_csv(out / f"scenario_{k}.csv")
        if loss is not None:
            verdict = "ABORTED"
            status = max(status, 1)
        else:
            verdict = "PASS" if ledger.all_passed else "FAIL"
            if verdict == "FAIL":
                status = 1
        results[k] = {"counts": (cin, cout), "verdict": verdict, "ledger": ledger}
        lines.append(
            f"SCENARIO_{k}: inflow={fin} outflow={fout} count_inflow={cin} count_outflow={cout} "
            f"total={cin + cout} steps={len(ledger.times) - 1} dt={_fmt(dt)} "
            f"final_energy={_fmt(ledger.energy[-1])} max_energy={_fmt(max(ledger.energy))} "
            f"data_integral={_fmt(ledger.data_integral[-1])} verdict={verdict}"
        )
    lines.append("NOTE: comparative only, no well-posedness claim is made")
    return CommandResult(status, lines, results)


# ---------------------------------------------------------------- verify-sbp


def cmd_verify_sbp(order=2, nx=17, ny=17, corrupt=False):
    grid = assemble_grid(order, nx, ny)
    if corrupt:
        Dx = grid.Dx.tolil()
        Dx[nx // 2, nx // 2] += 1e-3
        grid = replace(grid, Dx=Dx.tocsr())
    res = {}
    for name, s in (("x", grid.sbp_x), ("y", grid.sbp_y)):
        B = np.zeros((s.n_nodes, s.n_nodes))
        B[0, 0], B[-1, -1] = -1.0, 1.0
        res[f"1d_{name}"] = float(np.max(np.abs(s.Q + s.Q.T - B)))
    for k, v in grid.sbp_residuals().items():
        res[f"2d_{k}"] = v
    ok = all(v < SBP_TOL for v in res.values())
    lines = ["COMMAND: verify-sbp", f"GRID: order={order} nx={nx} ny={ny}"]
    lines += [f"RESIDUAL_{k.upper()}: {_fmt(v)}" for k, v in res.items()]
    lines.append(f"VERDICT: {'PASS' if ok else 'FAIL'}")
    return CommandResult(0 if ok else 1, lines, res)


# ---------------------------------------------------------------- entry point


def build_parser():
    p = argparse.ArgumentParser(prog="skewbc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "check-bc", "scenarios"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--out", type=Path, default=Path("."))
        if name == "run":
            s.add_argument("--force", action="store_true", help="run even with inadmissible conditions")
    s = sub.add_parser("verify-sbp")
    s.add_argument("--order", type=int, default=2, choices=(2, 4))
    s.add_argument("--nx", type=int, default=17)
    s.add_argument("--ny", type=int, default=17)
    s.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify-sbp":
            result = cmd_verify_sbp(args.order, args.nx, args.ny, args.corrupt)
        else:
            cfg = parse_config(args.config)
            if args.command == "run":
                result = cmd_run(cfg, args.out, args.force, args.seed)
            elif args.command == "check-bc":
                result = cmd_check_bc(cfg, args.seed)
            else:
                result = cmd_scenarios(cfg, args.out, args.seed)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(result.text)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
