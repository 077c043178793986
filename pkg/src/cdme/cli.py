"""Command-line entry point: ``cdme <command> --config <path> [--out DIR] [--threads K]``.

Exit codes
----------
0  success (comparison reports with failures still exit 0)
1  numerical abort, exceeded budget or failed self-test
2  invalid configuration
3  degradation rate outside the basis span without ``force_run_assumption2``
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import math
import platform
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import galerkin as gal
from . import oup
from . import particles
from . import reconstruction as rec
from .basis import build_basis, check_assumption2, spectral_coefficients
from .chaos import multi_indices, multiplicities
from .config import RunConfig, load_config
from .errors import Assumption2Violation, BudgetExceeded, ConfigError, NumericalAbort
from .selfcheck import chaos_identity_suite

log = logging.getLogger("cdme")

COMMANDS = ("eigen", "direct", "fk", "fd", "reconstruct", "simulate", "compare", "selftest")


class _Context:
    """Basis, coefficients and OU parameters shared by every pipeline."""

    def __init__(self, cfg: RunConfig, out: Path, threads: int, gate: bool = True):
        self.cfg, self.out, self.threads = cfg, out, threads
        self.basis = build_basis(cfg.rates.lambda_d, cfg.N, cfg.section("basis").get("grid_size"))
        self.coeffs = spectral_coefficients(cfg.rates, self.basis)
        self.assumption2 = check_assumption2(cfg.rates, self.basis, cfg.assumption2_tol)
        if gate and not self.assumption2["satisfied"]:
            if not cfg.force_run_assumption2:
                raise Assumption2Violation(
                    f"lambda_d is not in the span of {cfg.N} modes (residual {self.assumption2['residual']:.3e}); "
                    "set force_run_assumption2 to proceed"
                )
            log.warning("proceeding without Assumption 2; results carry an unquantified projection error")
        self.params = oup.OUParams.from_spectral(self.basis, self.coeffs)

    def path(self, name: str) -> Path:
        return self.out / name

    def dump(self, name: str, obj) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
        return p

    def csv(self, name: str, header, rows) -> Path:
        p = self.path(name)
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
        return p


def _fmt_index(idx) -> str:
    return " ".join(str(int(i)) for i in idx)


# ---------------------------------------------------------------------------
# pipelines


def run_eigen(ctx: _Context) -> None:
    b = ctx.basis
    ctx.csv("basis.csv", ["k", "alpha_k", "m_k"], ([r["k"], float(r["alpha_k"]), float(r["m_k"])] for r in b.to_rows()))
    ctx.csv("modes.csv", ["x"] + [f"xi_{k + 1}" for k in range(b.N)], ([x, *col] for x, col in zip(b.grid, b.values.T)))
    ctx.dump("coefficients.json", {**ctx.coeffs.to_dict(), "assumption2": ctx.assumption2})


def _direct_states(ctx: _Context):
    g = ctx.cfg.section("galerkin")
    init = gal.initial_state(ctx.coeffs.zeta_hat, ctx.cfg.n_max)
    cps = ctx.cfg.t_checkpoints
    return gal.integrate_hierarchy(init, ctx.coeffs, ctx.basis.alphas, cps[-1], g["dt"], g["scheme"], cps)


def run_direct(ctx: _Context) -> None:
    states = _direct_states(ctx)
    ctx.csv(
        "trajectory.csv",
        ["t", "n", "multi_index", "value"],
        ((t, n, _fmt_index(idx), v) for st in states for t, n, idx, v in st.rows()),
    )
    masses = [gal.level_mass(st, ctx.basis) for st in states]
    ctx.csv("level_mass.csv", ["t", "n", "P_n"], ((st.t, n, float(p)) for st, m in zip(states, masses) for n, p in enumerate(m)))
    ctx.dump(
        "direct_summary.json",
        {
            "n_max": ctx.cfg.n_max,
            "checkpoints": [
                {"t": st.t, "total_mass": float(m.sum()), "tail_mass": float(m[-1]), "min_level_mass": float(m.min())}
                for st, m in zip(states, masses)
            ],
        },
    )


def _targets(N: int, orders):
    return [tuple(k) for n in orders for k in multi_indices(N, n).tolist()]


def run_fk(ctx: _Context) -> None:
    cfg, sec = ctx.cfg, ctx.cfg.section("fk")
    targets = _targets(cfg.N, cfg.orders)
    records = []
    for t in cfg.t_checkpoints:
        if sec["estimator"] == "hermite":
            est = oup.hermite_weighted_expectations(
                ctx.params, targets, t, sec["paths"], cfg.seed, sec["inner_paths"], ctx.threads
            )
        else:
            est = oup.fk_derivative_expectations(ctx.params, targets, t, sec["paths"], cfg.seed, ctx.threads)
        records += [e.to_record("deriv", j, t) for e, j in zip(est, targets)]
        for z in sec["points"]:
            if len(z) != cfg.N:
                raise ConfigError(f"fk point {z} does not have {cfg.N} coordinates")
            rec_u = oup.fk_u(ctx.params, z, t, sec["paths"], cfg.seed, ctx.threads).to_record("u", [], t)
            rec_u["z"] = list(map(float, z))
            records.append(rec_u)
    ctx.dump("estimates.json", {"estimator": sec["estimator"], "records": records})


def run_fd(ctx: _Context) -> None:
    cfg, sec = ctx.cfg, ctx.cfg.section("fd")
    if cfg.N > 2:
        raise ConfigError("the fd command supports N <= 2")
    targets = [j for j in _targets(cfg.N, cfg.orders) if max(np.bincount(np.asarray(j, dtype=np.intp), minlength=1)) <= 2]
    records = []
    for i, t in enumerate(cfg.t_checkpoints):
        sol = oup.fd_solve(ctx.params, t, sec["dt"], sec["L"], sec.get("M_grid"))
        for j in targets:
            records.append(oup.FKEstimate(oup.fd_expectation(sol, j), 0.0, 0, cfg.seed).to_record("deriv", j, t))
        grids = np.meshgrid(*([sol.axis] * cfg.N), indexing="ij")
        ctx.csv(
            f"fd_u_t{i}.csv",
            [f"z{k + 1}" for k in range(cfg.N)] + ["u"],
            zip(*(g.ravel().tolist() for g in grids), sol.values.ravel().tolist()),
        )
    ctx.dump("fd_estimates.json", {"L": sec["L"], "dt": sec["dt"], "records": records})


def _backend_options(ctx: _Context, backend: str) -> dict:
    fk, fd = ctx.cfg.section("fk"), ctx.cfg.section("fd")
    if backend in ("fk", "hermite"):
        opts = {"paths": fk["paths"], "seed": ctx.cfg.seed, "threads": ctx.threads}
        if backend == "hermite":
            opts["inner_paths"] = fk["inner_paths"]
        return opts
    if backend == "fd":
        return {"fd_options": {"dt": fd["dt"], "L": fd["L"], "M_grid": fd.get("M_grid")}}
    return {}


def run_reconstruct(ctx: _Context) -> None:
    cfg, sec = ctx.cfg, ctx.cfg.section("reconstruct")
    backend = sec["backend"]
    opts = _backend_options(ctx, backend)
    summary = []
    for i, t in enumerate(cfg.t_checkpoints):
        masses = {}
        for n in cfg.orders:
            field = rec.reconstruct_kernel(ctx.params, n, t, backend, sec["budget"], **opts)
            rec.write_field_csv(field, ctx.path(f"kernel_t{i}_n{n}.csv"))
            if n <= 2:
                rec.write_density_grid(field, ctx.basis, ctx.path(f"density_t{i}_n{n}.csv"), sec["grid_points"])
            w = multiplicities(cfg.N, n) * np.prod(ctx.basis.masses[field.kernel.keys], axis=1) if n else np.ones(1)
            masses[str(n)] = {
                "P_n": float(np.dot(w, field.kernel.values)),
                "std_err_bound": float(np.dot(np.abs(w), field.std_err)),
            }
        summary.append({"t": t, "level_mass": masses})
    ctx.dump("reconstruct_summary.json", {"backend": backend, "checkpoints": summary})


def _simulate(ctx: _Context):
    sec = ctx.cfg.section("simulate")
    return particles.simulate_ensemble(
        ctx.cfg.rates, None, ctx.cfg.t_checkpoints, sec["runs"], sec["dt"], ctx.cfg.seed, sec["bins"], sec["n_track"], ctx.threads
    )


def run_simulate(ctx: _Context) -> None:
    stats = _simulate(ctx)
    stats.write_counts_csv(ctx.path("counts.csv"))
    stats.write_positions_csv(ctx.path("positions.csv"))


def run_compare(ctx: _Context) -> None:
    cfg = ctx.cfg
    sec, g, rsec = cfg.section("compare"), cfg.section("galerkin"), cfg.section("reconstruct")
    backend = rsec["backend"]
    tol = {"atol": sec["atol"], "dt": g["dt"], "scheme": g["scheme"], "n_max": cfg.n_max, "backend": backend, "budget": rsec["budget"]}
    tol.update(_backend_options(ctx, backend))
    report = {"reconstruction_vs_direct": rec.compare_with_direct(ctx.params, ctx.basis, ctx.coeffs, cfg.t_checkpoints, cfg.orders, tol)}
    rates = cfg.rates
    if rates.lambda_d.is_constant and rates.lambda_c.is_constant:
        report["birth_death"] = _compare_birth_death(ctx, sec)
    failures = list(report["reconstruction_vs_direct"]["failures"])
    for key in ("birth_death",):
        if key in report:
            failures += report[key]["failures"]
    report["all_pass"] = not failures
    ctx.dump("report.json", report)


def _compare_birth_death(ctx: _Context, sec: dict) -> dict:
    cfg = ctx.cfg
    ld, lc = cfg.rates.lambda_d.value, cfg.rates.lambda_c.value
    p0 = np.zeros(sec["cme_n_max"] + 1)
    p0[1] = 1.0
    cme = gal.cme_integrate(ld, lc, p0, cfg.t_checkpoints[-1], cfg.section("galerkin")["dt"], cfg.t_checkpoints)
    states = _direct_states(ctx)
    stats = _simulate(ctx)
    entries = []
    for i, (st, ch) in enumerate(zip(states, cme)):
        mass = gal.level_mass(st, ctx.basis)
        n_cmp = cfg.n_max - 2
        exact = gal.immigration_death_analytic(ld, lc, st.t, np.arange(n_cmp + 1)) if ld > 0 else None
        p_hat, se = stats.probabilities(i)
        for n in range(n_cmp + 1):
            e = {"t": st.t, "n": n, "hierarchy": float(mass[n]), "cme": float(ch.p[n])}
            e["hierarchy_vs_cme"] = abs(e["hierarchy"] - e["cme"])
            ok = e["hierarchy_vs_cme"] <= 1e-6
            if exact is not None:
                e["analytic"] = float(exact[n])
                e["cme_vs_analytic"] = abs(e["cme"] - e["analytic"])
                ok = ok and e["cme_vs_analytic"] <= 1e-8
                expected = e["analytic"] * stats.runs
                if expected >= 5:
                    sim = float(p_hat[n]) if n < p_hat.size else 0.0
                    sigma = math.sqrt(e["analytic"] * (1 - e["analytic"]) / stats.runs)
                    e["simulated"] = sim
                    if sigma > 0:
                        e["sim_z"] = (sim - e["analytic"]) / sigma
                        ok = ok and abs(e["sim_z"]) <= 3.0
                    else:
                        ok = ok and sim == e["analytic"]
            e["pass"] = bool(ok)
            entries.append(e)
    return {"entries": entries, "failures": [e for e in entries if not e["pass"]], "runs": stats.runs}


def run_selftest(ctx: _Context) -> None:
    sec = ctx.cfg.section("selftest")
    report = chaos_identity_suite(sec["instances"], ctx.cfg.seed, tol=sec["tol"])
    ctx.dump("selftest.json", report.to_dict())
    if not report.passed:
        raise _SelfTestFailed(json.dumps(report.max_deviation))


class _SelfTestFailed(RuntimeError):
    pass


_PIPELINES = {
    "eigen": run_eigen,
    "direct": run_direct,
    "fk": run_fk,
    "fd": run_fd,
    "reconstruct": run_reconstruct,
    "simulate": run_simulate,
    "compare": run_compare,
    "selftest": run_selftest,
}

# pipelines that do not depend on the basis span condition
_UNGATED = {"eigen", "simulate", "selftest"}


# ---------------------------------------------------------------------------
# manifest and entry point


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest(cfg: RunConfig, command: str, threads: int, files) -> dict:
    return {
        "command": command,
        "config_sha256": cfg.sha256,
        "seed": cfg.seed,
        "threads": threads,
        "versions": {
            "cdme": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "files": {p.name: _sha256(p) for p in sorted(files)},
    }


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cdme", description="Birth-death diffusion master equation laboratory.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="path to the JSON run configuration")
    p.add_argument("--out", default=None, help="output directory (default: output_dir from the config)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo and simulation")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(command: str, cfg: RunConfig, out: Path, threads: int = 1) -> int:
    """Execute one pipeline; artifacts appear in ``out`` only on success."""
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".cdme-", dir=out.parent))
    try:
        ctx = _Context(cfg, staging, threads, gate=command not in _UNGATED)
        try:
            _PIPELINES[command](ctx)
            status = 0
        except _SelfTestFailed as exc:
            log.error("self-test failed: %s", exc)
            status = 1
        out.mkdir(parents=True, exist_ok=True)
        moved = []
        for f in sorted(staging.iterdir()):
            dest = out / f.name
            shutil.move(str(f), dest)
            moved.append(dest)
        (out / "manifest.json").write_text(json.dumps(_manifest(cfg, command, threads, moved), indent=2, sort_keys=True) + "\n")
        return status
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        out = Path(args.out or cfg.output_dir)
        return run(args.command, cfg, out, args.threads)
    except Assumption2Violation as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return 3
    except (NumericalAbort, BudgetExceeded, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # ConfigError and argument checks in the solvers; every input comes from the config
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
