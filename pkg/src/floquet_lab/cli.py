"""Experiment driver: named runs with JSON configs and manifest output.

Subcommands: spectrum, newton, evolve, verify-all.  Every run writes its
outputs plus a manifest.json (config echo, per-step pass/fail, file index
with content hashes) into the output directory.  Exit codes: 0 pass,
1 acceptance failure, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, acceptance, localization
from .errors import FloquetLabError
from .evolution import FourierState, bloch_reconstruct, build_bloch_basis, evolve
from .feshbach import verify_h1
from .newton import LambdaBox, dense_eigenpairs_in_window, eigenvalue_asymptotics, solve_local_eigenpair

__all__ = ["ExperimentConfig", "RunManifest", "main"]

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = ""
    delta: float = 0.1
    j_max: int = 30
    j_values: str = ""  # "10..40" or "12"; empty means derived from j_max
    L_rule: str = "minimal"
    L0: int = 3
    J: int = 64
    N: int | None = None
    tol: float | None = None
    periods: int = 10000
    steps_per_period: int = 64
    s_values: tuple = (1.0, 2.0)
    p: float = 2.0
    support_radius: int | None = None
    outdir: str = "runs"
    seed: int = 0
    quick: bool = False
    compare_dense: bool = False
    bloch_check: bool = False

    def validate(self) -> None:
        if self.delta < 0:
            raise UsageError("delta: must be nonnegative")
        if self.j_max < 2:
            raise UsageError("j_max: must be at least 2")
        if self.L_rule not in ("minimal", "maximal"):
            raise UsageError("L_rule: must be 'minimal' or 'maximal'")
        if self.L0 < 2:
            raise UsageError("L0: must be at least 2")
        if self.J < 1:
            raise UsageError("J: must be positive")
        if self.periods < 1:
            raise UsageError("periods: must be positive")
        if self.steps_per_period < 64:
            raise UsageError("steps_per_period: must be at least 64")
        if any(s < 0 for s in self.s_values):
            raise UsageError("s_values: must be nonnegative")
        if self.tol is not None and self.tol <= 0:
            raise UsageError("tol: must be positive when given")

    def parsed_j_values(self) -> list[int]:
        if not self.j_values:
            return list(range(2, self.j_max + 1))
        txt = self.j_values
        try:
            if ".." in txt:
                lo, hi = txt.split("..")
                return list(range(int(lo), int(hi) + 1))
            return [int(x) for x in txt.split(",")]
        except ValueError as exc:
            raise UsageError(f"j_values: cannot parse {txt!r}") from exc


@dataclass
class RunManifest:
    experiment: str
    config: dict
    version: str = __version__
    started: str = ""
    wall_seconds: float = 0.0
    steps: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def add_step(self, name: str, passed: bool, **detail) -> None:
        self.steps.append({"name": name, "passed": bool(passed), **detail})

    def add_output(self, path: Path) -> None:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.outputs[path.name] = digest

    @property
    def all_passed(self) -> bool:
        return all(s["passed"] for s in self.steps)

    def write(self, outdir: Path) -> Path:
        path = outdir / "manifest.json"
        with open(path, "w") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
        return path


def worker_count() -> int:
    raw = os.environ.get("FLOQUET_LAB_THREADS", "")
    try:
        n = int(raw) if raw else 1
    except ValueError:
        n = 1
    return max(n, 1)


def _start_manifest(cfg: ExperimentConfig, name: str) -> tuple[RunManifest, Path]:
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    man = RunManifest(
        experiment=name,
        config=dataclasses.asdict(cfg),
        started=datetime.now(timezone.utc).isoformat(),
    )
    if cfg.delta >= 0.25:
        man.warnings.append(
            f"delta={cfg.delta} is at or above 1/4: outside the perturbative "
            "regime the guarantees assume"
        )
    return man, outdir


def cmd_spectrum(cfg: ExperimentConfig) -> RunManifest:
    man, outdir = _start_manifest(cfg, "spectrum")
    rep = verify_h1(cfg.delta, cfg.L0)
    p = outdir / "h1_report.json"
    rep.to_json(p)
    man.add_output(p)
    man.add_step("h1_gap", rep.passed, dist=rep.dist_to_nonzero,
                 multiplicity=rep.zero_multiplicity)

    if cfg.delta == 0:
        # trivial spectrum {n + j^2}: every local eigenvalue is exactly 0
        p = outdir / "eigenvalues.csv"
        with open(p, "w") as fh:
            fh.write("j,lambda,lambda_scaled\n")
            for j in range(2, cfg.j_max + 1):
                fh.write(f"{j},0.0,0.0\n")
        man.add_output(p)
        man.add_step("local_scan", True, note="delta=0: vacuous")
        man.add_step("spacing", True, note="delta=0: vacuous")
        return man

    scan = localization.local_spectrum_scan(cfg.delta, cfg.j_max, L0=cfg.L0,
                                            L_rule=cfg.L_rule)
    p = outdir / "eigenvalues.csv"
    scan.export_csv(p)
    man.add_output(p)
    man.add_step("local_scan", not scan.failures,
                 n_eigenvalues=len(scan.local_pairs),
                 failures=[list(f) for f in scan.failures])

    spacing = localization.spacing_report(cfg.delta, cfg.j_max, scan=scan)
    p = outdir / "spacing.json"
    spacing.to_json(p)
    man.add_output(p)
    man.add_step("spacing", spacing.min_gap_scaled >= 1.0,
                 min_gap_scaled=spacing.min_gap_scaled)
    return man


def cmd_newton(cfg: ExperimentConfig) -> RunManifest:
    man, outdir = _start_manifest(cfg, "newton")
    js = [j for j in cfg.parsed_j_values() if abs(j) > 1]
    if not js:
        raise UsageError("j_values: need at least one |j| > 1")

    def solve(j):
        L = abs(j) if cfg.L_rule == "minimal" else 2 * (abs(j) - 1)
        return solve_local_eigenpair(LambdaBox(j, L), cfg.delta, tol=cfg.tol)

    if cfg.compare_dense:
        rows = []
        for j in js:
            pair, cert = solve(j)
            dense = dense_eigenpairs_in_window(pair.box, cfg.delta)
            diff = min(abs(p.E - pair.E) for p in dense)
            rows.append({"j": j, "E_newton": pair.E,
                         "E_dense": min(dense, key=lambda p: abs(p.E - pair.E)).E,
                         "diff": diff, "iterations": cert.iterations})
            man.add_step(f"compare_dense_j{j}", diff <= 1e-10, diff=diff)
        p = outdir / "newton_vs_dense.json"
        with open(p, "w") as fh:
            json.dump(rows, fh, indent=2)
        man.add_output(p)
        return man

    nw = min(worker_count(), len(js))
    if nw > 1:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            solved = list(pool.map(solve, js))
    else:
        solved = [solve(j) for j in js]

    p = outdir / "certificates.json"
    with open(p, "w") as fh:
        json.dump([cert.as_dict() for _, cert in solved], fh, indent=2)
    man.add_output(p)
    bad = [c.j for _, c in solved if not c.converged]
    man.add_step("newton_sweep", not bad, n=len(js), unconverged=bad)

    if cfg.delta > 0 and len(js) >= 3:
        fit = eigenvalue_asymptotics(cfg.delta, js, L_rule=cfg.L_rule, tol=cfg.tol)
        p = outdir / "asymptotics_fit.json"
        with open(p, "w") as fh:
            json.dump(fit.as_dict(), fh, indent=2)
        man.add_output(p)
        man.add_step("asymptotics_fit", not fit.failures,
                     leading_coeff=fit.leading_coeff,
                     scaled_leading=fit.scaled_leading,
                     a4_estimate=fit.a4_estimate)
    return man


def cmd_evolve(cfg: ExperimentConfig) -> RunManifest:
    man, outdir = _start_manifest(cfg, "evolve")
    u0 = FourierState.power_law(cfg.p, cfg.J, support_radius=cfg.support_radius)
    T = 2 * math.pi * cfg.periods
    store = 1 if cfg.bloch_check else 0
    traj = evolve(u0, cfg.delta, T, steps_per_period=cfg.steps_per_period,
                  s_values=tuple(cfg.s_values), store_states_every=store)
    p = outdir / "norms.csv"
    traj.export_csv(p)
    man.add_output(p)
    man.add_step("unitarity", traj.l2_drift <= 1e-8, l2_drift=traj.l2_drift)
    verdict = {}
    for s in cfg.s_values:
        first, last, ratio = traj.boundedness(s)
        ok = ratio <= 1.1 and traj.apriori_envelope_ok(s)
        verdict[s] = {"first_decade_max": first, "last_decade_max": last,
                      "ratio": ratio, "passed": ok}
        man.add_step(f"bounded_s{s}", ok, ratio=ratio)
    p = outdir / "boundedness.json"
    with open(p, "w") as fh:
        json.dump({"delta": cfg.delta, "periods": cfg.periods,
                   "flags": list(traj.flags),
                   "verdict": {str(k): v for k, v in verdict.items()}},
                  fh, indent=2)
    man.add_output(p)

    if cfg.bloch_check:
        J = min(cfg.J, 16)
        basis = build_bloch_basis(cfg.delta, J, N=cfg.N if cfg.N else 40)
        u0_small = FourierState.power_law(cfg.p, J, support_radius=cfg.support_radius)
        n_check = min(cfg.periods, 10)
        rows = []
        import numpy as np

        for k in range(1, n_check + 1):
            rec = bloch_reconstruct(basis, u0_small, 2 * math.pi * k)
            st = traj.states[k] if traj.states else None
            a = np.array([st.coeff(j) for j in range(-J, J + 1)])
            err = float(np.linalg.norm(a - rec.coeffs) / np.linalg.norm(a))
            rows.append({"period": k, "rel_err": err})
        p = outdir / "bloch_check.json"
        with open(p, "w") as fh:
            json.dump(rows, fh, indent=2)
        man.add_output(p)
        worst = max(r["rel_err"] for r in rows)
        man.add_step("bloch_check", worst <= 1e-4, max_rel_err=worst)
    return man


def cmd_verify_all(cfg: ExperimentConfig) -> RunManifest:
    man, outdir = _start_manifest(cfg, "verify-all")
    results = acceptance.run_all(quick=cfg.quick, verbose=False)
    for r in results:
        man.add_step(r.name, r.passed, seconds=round(r.seconds, 2))
    p = outdir / "acceptance.json"
    with open(p, "w") as fh:
        json.dump(
            [{"name": r.name, "passed": r.passed, "seconds": r.seconds,
              "details": _jsonable(r.details)} for r in results],
            fh, indent=2)
    man.add_output(p)
    return man


def _jsonable(obj):
    try:
        json.dumps(obj)
        return obj
    except (TypeError, ValueError):
        if isinstance(obj, dict):
            return {str(k): _jsonable(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [_jsonable(v) for v in obj]
        return repr(obj)


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "newton": cmd_newton,
    "evolve": cmd_evolve,
    "verify-all": cmd_verify_all,
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="floquet-lab",
        description="Spectral and dynamical experiments for the resonant "
        "Floquet lattice operator.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file; flags override its fields")
        sp.add_argument("--delta", type=float)
        sp.add_argument("--j-max", type=int, dest="j_max")
        sp.add_argument("--j", dest="j_values", help="range '10..40' or list '8,12'")
        sp.add_argument("--L-rule", dest="L_rule", choices=("minimal", "maximal"))
        sp.add_argument("--L0", type=int)
        sp.add_argument("--J", type=int)
        sp.add_argument("--N", type=int)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--periods", type=int)
        sp.add_argument("--steps-per-period", type=int, dest="steps_per_period")
        sp.add_argument("--s", dest="s_values", help="comma list, e.g. '1,2'")
        sp.add_argument("--p", type=float)
        sp.add_argument("--support-radius", type=int, dest="support_radius")
        sp.add_argument("--outdir")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--quick", action="store_true", default=None)
        sp.add_argument("--compare-dense", action="store_true", default=None,
                        dest="compare_dense")
        sp.add_argument("--bloch-check", action="store_true", default=None,
                        dest="bloch_check")
    return ap


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    data: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"config: {exc}") from exc
        unknown = set(data) - fields
        if unknown:
            raise UsageError(f"config: unknown fields {sorted(unknown)}")
    for name in fields:
        val = getattr(args, name, None)
        if val is not None:
            data[name] = val
    if isinstance(data.get("s_values"), str):
        try:
            data["s_values"] = tuple(float(x) for x in data["s_values"].split(","))
        except ValueError as exc:
            raise UsageError(f"s_values: cannot parse {data['s_values']!r}") from exc
    elif isinstance(data.get("s_values"), list):
        data["s_values"] = tuple(data["s_values"])
    data["experiment"] = args.command
    cfg = ExperimentConfig(**data)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    man = None
    t0 = time.time()
    try:
        man = _COMMANDS[args.command](cfg)
        code = EXIT_OK if man.all_passed else EXIT_FAIL
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FloquetLabError as exc:
        man, outdir = _start_manifest(cfg, args.command)
        man.add_step("numerical", False, error=repr(exc))
        print(f"numerical failure: {exc}", file=sys.stderr)
        code = EXIT_NUMERICAL
    man.wall_seconds = time.time() - t0
    path = man.write(Path(cfg.outdir))
    for s in man.steps:
        flag = "PASS" if s["passed"] else "FAIL"
        print(f"[{flag}] {s['name']}")
    for w in man.warnings:
        print(f"warning: {w}")
    print(f"manifest: {path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
