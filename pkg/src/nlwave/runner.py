"""Scenario execution shared by the CLI subcommands."""

from __future__ import annotations

import time
import warnings
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .errors import BlowupSuspected, ConfigError, NonContraction, SingularModeSystem, WindowExceeded
from .grid import lp_norm
from .linear import check_invertibility, solve_linear
from .picard import solve_nonlinear, timeline_y_norm
from .report import dumps, text_table, write_csv, write_snapshot
from .scenario import BuiltScenario, build, load_scenario

CALIBRATION_NOTE = ("all thresholds are implementation-level calibrations; "
                    "no published numerical results exist to reproduce")

COMMANDS = ("solve-linear", "solve-nonlinear", "verify", "bench")


class _Clock:
    def __init__(self):
        self.marks = {}

    def __call__(self, label):
        clock = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                clock.marks[label] = clock.marks.get(label, 0.0) + time.perf_counter() - self.t0
        return _Ctx()


def _problem_summary(built: BuiltScenario) -> dict:
    p = built.problem
    fam = p.family

    def measure(m):
        return {"atoms": len(m.atoms),
                "density_samples": 0 if m.density is None else int(m.density.size)}
    return {
        "grid": p.grid.describe(),
        "operator": {"kind": fam.kind, "N": fam.dim, "eigenvector_condition": fam.condition,
                     **({"wentzell_integrability": fam.meta["integrability"]} if fam.kind == "wentzell" else {})},
        "time": {"T": p.horizon, "K": p.K},
        "alpha": measure(p.alpha),
        "beta": measure(p.beta),
        "forced": p.forcing is not None,
        "nonlinearity": None if p.nonlinearity is None else {"kind": p.nonlinearity.kind, **p.nonlinearity.params},
        "norms": {"s": p.norms.s, "p": p.norms.p, "q": p.norms.q, "sigma": p.norms.sigma, "gamma": p.gamma},
    }


def _solution_summary(prob, sol) -> dict:
    sup_u = lp_norm(prob.grid, sol.u, np.inf)
    return {"y_norm": timeline_y_norm(prob, sol.u, sol.u_hat),
            "max_abs_u": float(np.max(sup_u)),
            "final_abs_u": float(sup_u[-1]),
            "samples": int(sol.times.size)}


def _relative_pde(prob, sol, res):
    scale = lp_norm(prob.grid, sol.u, np.inf)
    fam_scale = lp_norm(prob.grid, prob.family.apply(sol.u), np.inf)
    s = max(1.0, float(np.max(scale)), float(np.max(fam_scale)))
    return None if res is None else res / s


def run_built(built: BuiltScenario, command: str, threads: int = 1, oracle_fine: int | None = None,
              out: Path | None = None) -> tuple[dict, int]:
    """Run one subcommand on an already built scenario.

    Returns the report dictionary and the process exit code (0 pass, 1 failure).
    Warnings raised during the run are recorded in the report.
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report, code, payload = _run(built, command, threads, oracle_fine)
    messages = []
    for w in caught:
        text = f"{w.category.__name__}: {w.message}"
        if text not in messages:
            messages.append(text)
    report["warnings"] = messages
    _emit(report, out, payload, built)
    return report, code


def _run(built, command, threads, oracle_fine):
    sc, prob = built.scenario, built.problem
    tol = sc.tolerances
    clock = _Clock()
    report = {
        "scenario": {"name": sc.name, "mode": sc.mode},
        "command": command,
        "seed": built.seed,
        "problem": _problem_summary(built),
        "calibration_note": CALIBRATION_NOTE,
    }
    checks = {}
    nonlinear = sc.mode == "nonlinear" and command != "solve-linear"

    with clock("invertibility"):
        report["invertibility"] = check_invertibility(prob, threads)

    if command == "bench":
        report["bench"] = _bench(built, threads, clock)
        report["status"] = "pass"
        report["timings"] = {"threads": threads, **clock.marks}
        return report, 0, None

    sol = None
    try:
        if nonlinear:
            pic = built.picard
            with clock("solve"):
                sol, prep = solve_nonlinear(
                    prob, threads=threads, atol=pic.get("atol", 1e-10), rtol=pic.get("rtol", 1e-8),
                    max_iter=pic.get("max_iter", 100), C0=pic.get("C0", 1.0), C1=pic.get("C1", 1.0),
                    ceiling=pic.get("ceiling", 1e8), initial=pic.get("initial", "linear"),
                    enforce_window=pic.get("enforce_window", True))
            report["picard"] = prep.to_dict()
            checks["picard_converged"] = prep.status == "converged"
        else:
            with clock("solve"):
                sol = solve_linear(prob.replace(nonlinearity=None), threads=threads)
    except SingularModeSystem as exc:
        report["error"] = {"type": "SingularModeSystem", "message": str(exc),
                           "offenders": [[m, c, abs(d)] for m, c, d in exc.offenders[:32]],
                           "offender_count": len(exc.offenders)}
    except (NonContraction, BlowupSuspected, WindowExceeded) as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
    if sol is None:
        report["status"] = "error"
        report["timings"] = {"threads": threads, **clock.marks}
        return report, 1, None

    solved_prob = prob if nonlinear else prob.replace(nonlinearity=None)
    report["solution"] = _solution_summary(solved_prob, sol)
    report["solution"].update({k: v for k, v in sol.diagnostics.items()})

    if built.exact is not None:
        u_ex, ut_ex = built.exact(sol.times)
        err = float(np.max(np.abs(sol.u - u_ex)))
        err_t = float(np.max(np.abs(sol.ut - ut_ex)))
        report["manufactured"] = {"max_error": err, "max_error_velocity": err_t,
                                  "tolerance": tol["manufactured"]}
        checks["manufactured"] = err <= tol["manufactured"]

    with clock("residuals"):
        res = dg.residual_suite(solved_prob, sol, threads)
    timeline = res.pop("pde_residual_timeline")
    res["pde_residual_relative"] = _relative_pde(solved_prob, sol, res["pde_residual"])
    report["residuals"] = res
    if res["pde_residual_relative"] is not None:
        checks["pde_residual"] = res["pde_residual_relative"] <= tol["pde_residual"]
    checks["condition_residuals"] = max(res["condition_residual_displacement"],
                                        res["condition_residual_velocity"]) <= tol["condition_residual"] * max(
        1.0, report["solution"]["max_abs_u"])
    if "fixed_point_residual" in res:
        pic = built.picard
        stop = pic.get("atol", 1e-10) + pic.get("rtol", 1e-8) * res["solution_y_norm"]
        res["fixed_point_tolerance"] = tol["fixed_point_factor"] * stop
        checks["fixed_point_residual"] = res["fixed_point_residual"] <= res["fixed_point_tolerance"]

    if command == "verify":
        with clock("identity"):
            ident = dg.identity_suite(prob.family, built.identity["xi2"], built.identity["t"])
        report["identity"] = ident
        checks["identities"] = dg.identity_passes(ident, tol["identity_zero"], tol["identity_pythagorean"],
                                                  tol["identity_derivative"])
        fine = oracle_fine or built.oracle["fine"]
        with clock("oracle"):
            orc = dg.oracle_suite(solved_prob, sol, fine, built.oracle["max_modes"])
        orc["tolerance"] = tol["oracle"]
        report["oracle"] = orc
        if not orc["forced"]:
            checks["oracle"] = max(orc["max_relative_u0"], orc["max_relative_u1"]) <= tol["oracle"]
        with clock("estimates"):
            est = dg.estimate_monitor(solved_prob, sol)
        report["estimates"] = est
        checks["estimates_finite"] = all(v is None or np.isfinite(v) for v in est.values())

    report["checks"] = checks
    report["status"] = "pass" if all(checks.values()) else "fail"
    report["timings"] = {"threads": threads, **clock.marks}
    return report, 0 if report["status"] == "pass" else 1, (sol, timeline, solved_prob)


def _bench(built, threads, clock):
    prob = built.problem.replace(nonlinearity=None)
    counts = sorted({1, 2, 4, max(1, threads)})
    rows = []
    for n in counts:
        t0 = time.perf_counter()
        solve_linear(prob, threads=n, check_leak=False)
        rows.append({"threads": n, "modes": prob.grid.size, "seconds": time.perf_counter() - t0})
    clock.marks["bench_rows"] = rows
    return {"modes": prob.grid.size, "thread_counts": counts}


def _emit(report, out, payload, built):
    if out is None:
        return
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{built.scenario.name}.{report['command']}"
    (out / f"{stem}.json").write_text(dumps(report))
    (out / f"{stem}.txt").write_text(text_table(report))
    if payload is None:
        return
    sol, timeline, prob = payload
    opts = built.scenario.section("output")
    if opts.get("csv", True):
        cols = {
            "sup_u": lp_norm(prob.grid, sol.u, np.inf),
            "sup_ut": lp_norm(prob.grid, sol.ut, np.inf),
            "l2_u": lp_norm(prob.grid, sol.u, 2.0),
            "pde_residual": timeline,
        }
        write_csv(out / f"{stem}.csv", sol.times, cols)
    if opts.get("snapshots", False):
        write_snapshot(out / f"{stem}.u.bin", sol.u, prob.grid, prob.horizon)
        write_snapshot(out / f"{stem}.ut.bin", sol.ut, prob.grid, prob.horizon)


def run_scenario(path_or_name: str, command: str = "verify", threads: int = 1, oracle_fine: int | None = None,
                 seed: int | None = None, out: Path | None = None) -> tuple[dict, int]:
    """Load, build and run a scenario; config problems raise :class:`ConfigError`."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    sc = load_scenario(path_or_name)
    built = build(sc, seed)
    if command == "solve-nonlinear" and sc.mode != "nonlinear":
        raise ConfigError("solve-nonlinear needs a scenario with mode 'nonlinear'", field="mode")
    return run_built(built, command, threads, oracle_fine, out)


__all__ = ["run_scenario", "run_built", "COMMANDS", "dumps"]
