"""Command-line driver: moment validation, cubature building/verification,
single recoveries, certificate diagnostics, and phase-transition sweeps.

Subcommands: moments, build, verify, recover, certify, sweep.  All runs
are seeded and reproducible; sweeps write CSV with a fixed column order
and deterministic row order, byte-identical for identical seeds.
Failures print one line starting with ``error:`` and exit nonzero
(2 for usage problems, 1 for operational failures).
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._seeding import derive_seed, rng_for
from .symcore import SymMatrix, Spectrum, rank1, fro_norm
from .moments import rank1_general_moment, trace_moment
from .cubature import (
    CubatureResidualError,
    construct_cubature,
    draw_iid_stack,
    haar_batch,
    load_ensemble,
    pol_dim_bounds,
    save_ensemble,
    verify_strength,
    verify_tight_fusion,
)
from .recover import (
    GolfingParams,
    GolfingStageError,
    InfeasibleError,
    check_certificate,
    deterministic_guarantee,
    golfing_certificate,
    isometry_constants,
    measure,
    solve_feasibility,
)


class UsageError(Exception):
    pass


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _parse_spectrum(text: str, d: int | None, k: int = 1) -> Spectrum:
    text = text.strip()
    if text in ("e1", "projector"):
        if d is None:
            raise UsageError("spectrum 'e1'/'projector' needs --d")
        return Spectrum.projector(d, k if text == "projector" else 1)
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse spectrum {text!r}") from exc
    if d is not None and len(vals) != d:
        raise UsageError(f"spectrum has {len(vals)} entries but --d is {d}")
    try:
        return Spectrum(np.array(vals))
    except ValueError as exc:
        raise UsageError(f"invalid spectrum: {exc}") from exc


def cmd_moments(args) -> int:
    lam = _parse_spectrum(args.lam, args.d)
    d = lam.dim
    t = args.t
    rank1_spec = lam.rank == 1 and abs(lam.values[0] - 1.0) <= 1e-12
    if t > 8 or t < 1:
        raise UsageError("t must lie in 1..8")
    if t > 3 and not rank1_spec:
        raise UsageError("t > 3 supported only for the rank-1 projector spectrum e1")
    if t >= 2 and d < t and t <= 3:
        raise UsageError(f"degenerate dimension: need d >= t, got d={d}, t={t}")
    rng = rng_for(args.seed, 1)

    probes = []
    e1 = np.zeros(d)
    e1[0] = 1.0
    probes.append(("e1 lift", rank1(e1)))
    xr = rng.standard_normal(d)
    xr /= np.linalg.norm(xr)
    probes.append(("random unit lift", rank1(xr)))
    g = rng.standard_normal((d, d))
    sym = 0.5 * (g + g.T)
    sym /= np.linalg.norm(sym)
    probes.append(("random symmetric", SymMatrix(sym)))
    probes.append(("identity scaled", SymMatrix(np.eye(d) / d)))

    n_mc = args.n_mc
    chunk = 100000
    sums = np.zeros(len(probes))
    sq = np.zeros(len(probes))
    left = n_mc
    while left > 0:
        take = min(chunk, left)
        left -= take
        ps = haar_batch(lam, take, rng)
        for i, (_, X) in enumerate(probes):
            vals = _backend.inner_batch(ps, X.entries) ** t
            sums[i] += vals.sum()
            sq[i] += (vals**2).sum()

    ok = True
    print(f"moment check: d={d} t={t} spectrum={list(lam.values)} n_mc={n_mc}")
    for i, (name, X) in enumerate(probes):
        mean = sums[i] / n_mc
        var = max(sq[i] / n_mc - mean * mean, 0.0)
        se = np.sqrt(var / n_mc)
        if t <= 3:
            ref = trace_moment(lam, t, X)
        else:
            ev = np.linalg.eigvalsh(X.entries)
            ref = rank1_general_moment(d, t, ev)
        gap = abs(mean - ref)
        line_ok = gap <= 3.0 * se + 1e-12
        ok = ok and line_ok
        print(
            f"  {name:18s} analytic {_fmt(ref)}  mc {_fmt(mean)}  "
            f"se {se:.3e}  {'ok' if line_ok else 'OFF'}"
        )
    return 0 if ok else 1


def cmd_build(args) -> int:
    lam = _parse_spectrum(args.lam, args.d, k=args.k)
    rng = rng_for(args.seed, 2)
    try:
        ens = construct_cubature(lam, args.t, args.pool, args.residual, rng)
    except CubatureResidualError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    save_ensemble(args.out, ens, args.t)
    full_bound, diag_bound = pol_dim_bounds(lam.dim, args.t)
    print(
        f"built strength-{args.t} ensemble: support {ens.size} of pool {args.pool} "
        f"(degree-{args.t} dimension bounds: full {full_bound}, rank-1 {diag_bound})"
    )
    print(f"wrote {args.out}")
    return 0


def cmd_verify(args) -> int:
    ens, t_claimed = load_ensemble(args.path)
    t = args.t if args.t is not None else t_claimed
    rng = rng_for(args.seed, 3)
    if args.fusion:
        report = verify_tight_fusion(ens, t, args.tol, n_probes=args.probes, rng=rng)
    else:
        report = verify_strength(
            ens, t, args.tol, mode=args.mode, n_probes=args.probes, rng=rng
        )
    print(
        f"strength {report.claimed_strength} mode {report.mode}: "
        f"max residual {report.max_residual:.3e} over {report.probes_used} checks "
        f"-> {'pass' if report.passed else 'fail'}"
    )
    return 0 if report.passed else 1


# constructed ensembles keyed by everything that determines them; the build
# rng is fixed per cell, so reuse across trials changes no output
_BUILD_CACHE: dict = {}


def _measurement_stack(source: str, lam: Spectrum, n: int, rng, master_seed: int):
    """Measurement atoms plus the claimed strength of their source."""
    if source == "haar":
        return haar_batch(lam, n, rng), 0
    if source.startswith("build:"):
        spec = dict(kv.split("=") for kv in source[len("build:") :].split(","))
        t = int(spec.get("t", 3))
        pool = int(spec.get("pool", 400))
        residual = float(spec.get("residual", 1e-8))
        key = (tuple(lam.values), t, pool, residual, master_seed)
        ens = _BUILD_CACHE.get(key)
        if ens is None:
            build_rng = rng_for(master_seed, 97, lam.dim, lam.rank, t)
            ens = construct_cubature(lam, t, pool, residual, build_rng)
            _BUILD_CACHE[key] = ens
        return draw_iid_stack(ens, n, rng), t
    ens, t_claimed = load_ensemble(source)
    if ens.spectrum.dim != lam.dim or ens.spectrum.rank != lam.rank:
        raise UsageError(
            f"ensemble file is d={ens.spectrum.dim} k={ens.spectrum.rank}, "
            f"run wants d={lam.dim} k={lam.rank}"
        )
    return draw_iid_stack(ens, n, rng), t_claimed


def cmd_recover(args) -> int:
    lam = Spectrum.projector(args.d, args.k)
    rng = rng_for(args.seed, 4)
    x = rng.standard_normal(args.d)
    x /= np.linalg.norm(x)
    stack, _ = _measurement_stack(args.source, lam, args.n, rng, args.seed)
    m = measure(x, stack)
    res = solve_feasibility(m, tol=args.tol, max_iter=args.max_iter)
    err = fro_norm(SymMatrix(res.X_hat.entries - np.outer(x, x)))
    success = err <= args.success_tol
    print(f"recover: d={args.d} k={args.k} n={args.n} source={args.source}")
    print(
        f"  converged {res.converged} in {res.iterations} iterations, "
        f"feasibility residual {res.feasibility_residual:.3e}"
    )
    print(f"  spectral gap {res.spectral_gap:.6f}, recovery error {err:.3e}")
    print(f"  success {success}")
    return 0 if success else 1


def cmd_certify(args) -> int:
    lam = Spectrum.projector(args.d, args.k)
    rng = rng_for(args.seed, 5)
    x = rng.standard_normal(args.d)
    x /= np.linalg.norm(x)
    params = GolfingParams(c0=args.c0, batch_mult=args.batch_mult)
    try:
        report = golfing_certificate(x, lam, params, rng)
    except GolfingStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    iso = isometry_constants(report.atoms, x)
    check = check_certificate(report.Y, x, report.atoms, args.gamma, args.delta)
    verdict = deterministic_guarantee(
        iso.alpha, iso.beta_exact, report.gamma_measured, report.delta_measured
    )
    m = measure(x, report.atoms)
    res = solve_feasibility(m, tol=args.tol, max_iter=args.max_iter)
    err = fro_norm(SymMatrix(res.X_hat.entries - np.outer(x, x)))
    print(f"certify: d={args.d} k={args.k} c0={args.c0} atoms={report.atoms.shape[0]}")
    print(
        f"  stages {report.batches_used} repeats {list(report.repeats)} "
        f"residual norms {[f'{q:.3e}' for q in report.q_norms]}"
    )
    print(
        f"  gamma {report.gamma_measured:.6e} delta {report.delta_measured:.6e} "
        f"in_span {report.in_span} (targets gamma<={args.gamma} delta<={args.delta}: "
        f"{'pass' if check.passes else 'fail'})"
    )
    print(f"  isometry alpha {iso.alpha:.6e} beta_exact {iso.beta_exact:.6e}")
    print(f"  guarantee verdict {verdict}")
    print(f"  recovery error {err:.3e} (solver residual {res.feasibility_residual:.3e})")
    return 0


@dataclass(frozen=True)
class SweepConfig:
    """Grid description for phase-transition sweeps."""

    d_list: tuple
    k_list: tuple
    n_list: tuple
    lambda_profile: str
    trials: int
    seed: int
    solver_tol: float
    ensemble_source: str
    success_tol: float = 1e-4
    max_iter: int = 20000
    timing: bool = False

    def __post_init__(self):
        if not self.d_list or not self.k_list or not self.n_list:
            raise ValueError("d_list, k_list, n_list must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(n < 1 for n in self.n_list):
            raise ValueError("n entries must be >= 1")


_CONFIG_KEYS = {
    "d_list",
    "k_list",
    "n_list",
    "lambda_profile",
    "trials",
    "seed",
    "solver_tol",
    "ensemble_source",
    "success_tol",
    "max_iter",
    "timing",
}


def parse_sweep_config(path) -> SweepConfig:
    """Flat ``key = value`` file; lists comma-separated; '#' comments."""
    raw = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            raw[key] = val
    missing = {"d_list", "k_list", "n_list", "trials", "seed"} - raw.keys()
    if missing:
        raise UsageError(f"config missing keys: {sorted(missing)}")
    try:
        return SweepConfig(
            d_list=tuple(int(v) for v in raw["d_list"].split(",")),
            k_list=tuple(int(v) for v in raw["k_list"].split(",")),
            n_list=tuple(int(v) for v in raw["n_list"].split(",")),
            lambda_profile=raw.get("lambda_profile", "projector"),
            trials=int(raw["trials"]),
            seed=int(raw["seed"]),
            solver_tol=float(raw.get("solver_tol", "1e-7")),
            ensemble_source=raw.get("ensemble_source", "haar"),
            success_tol=float(raw.get("success_tol", "1e-4")),
            max_iter=int(raw.get("max_iter", "20000")),
            timing=raw.get("timing", "off").strip().lower() in ("on", "true", "1"),
        )
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad config value: {exc}") from exc


def _cell_spectrum(cfg: SweepConfig, d: int, k: int) -> Spectrum:
    if cfg.lambda_profile == "projector":
        if k > d:
            raise UsageError(f"k={k} exceeds d={d}")
        return Spectrum.projector(d, k)
    lam = _parse_spectrum(cfg.lambda_profile, None)
    if lam.dim != d or lam.rank != k:
        raise UsageError(
            f"explicit lambda_profile is d={lam.dim} k={lam.rank}; "
            f"grid cell wants d={d} k={k}"
        )
    return lam


CSV_COLUMNS = "d,k,n,t,trial,seed,success,residual,iterations,alpha,beta_exact,wall_ms"


def run_sweep(cfg: SweepConfig):
    """All grid trials in deterministic (d, k, n, trial) order.

    Returns a list of dict rows matching ``CSV_COLUMNS``.  The
    per-trial seed derives from the master seed and the grid indices, so
    any single cell can be reproduced in isolation.  ``residual`` is the
    matrix recovery error |X_hat - xx*|_F / |x|^2 (the success metric);
    ``wall_ms`` is 0 unless timing is enabled (timing breaks
    byte-reproducibility between runs).
    """
    rows = []
    cells = {}
    for di, d in enumerate(cfg.d_list):
        for ki, k in enumerate(cfg.k_list):
            lam = _cell_spectrum(cfg, d, k)
            cells[(di, ki)] = lam
    for di, d in enumerate(cfg.d_list):
        for ki, k in enumerate(cfg.k_list):
            lam = cells[(di, ki)]
            for ni, n in enumerate(cfg.n_list):
                for trial in range(cfg.trials):
                    seed = derive_seed(cfg.seed, di, ki, ni, trial)
                    rng = np.random.default_rng(seed)
                    t0 = time.perf_counter()
                    x = rng.standard_normal(d)
                    x /= np.linalg.norm(x)
                    stack, t_claimed = _measurement_stack(
                        cfg.ensemble_source, lam, n, rng, cfg.seed
                    )
                    m = measure(x, stack)
                    res = solve_feasibility(
                        m, tol=cfg.solver_tol, max_iter=cfg.max_iter
                    )
                    err = fro_norm(
                        SymMatrix(res.X_hat.entries - np.outer(x, x))
                    )
                    iso = isometry_constants(stack, x)
                    wall_ms = (time.perf_counter() - t0) * 1e3 if cfg.timing else 0.0
                    rows.append(
                        {
                            "d": d,
                            "k": k,
                            "n": n,
                            "t": t_claimed,
                            "trial": trial,
                            "seed": seed,
                            "success": int(err <= cfg.success_tol),
                            "residual": err,
                            "iterations": res.iterations,
                            "alpha": iso.alpha,
                            "beta_exact": iso.beta_exact,
                            "wall_ms": wall_ms,
                        }
                    )
    return rows


def write_csv(rows, path) -> None:
    cols = CSV_COLUMNS.split(",")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(CSV_COLUMNS + "\n")
        for row in rows:
            cells = []
            for c in cols:
                v = row[c]
                cells.append(_fmt(v) if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")


def cmd_sweep(args) -> int:
    cfg = parse_sweep_config(args.config)
    rows = run_sweep(cfg)
    write_csv(rows, args.out)
    by_cell = {}
    for row in rows:
        key = (row["d"], row["k"], row["n"])
        got = by_cell.setdefault(key, [0, 0])
        got[0] += row["success"]
        got[1] += 1
    print(f"sweep: {len(rows)} trials -> {args.out}")
    for key in sorted(by_cell):
        s, tot = by_cell[key]
        print(f"  d={key[0]} k={key[1]} n={key[2]}: success {s}/{tot}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="psdlift",
        description="rank-1 recovery from PSD measurements: moments, "
        "cubatures, feasibility recovery, certificates, sweeps",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("moments", help="analytic vs Monte Carlo moments")
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--lam", "--lambda", dest="lam", required=True)
    sp.add_argument("--t", type=int, required=True)
    sp.add_argument("--n-mc", type=int, default=200000)
    sp.add_argument("--seed", type=int, default=12345)
    sp.set_defaults(func=cmd_moments)

    sp = sub.add_parser("build", help="construct a cubature and write it")
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--lam", "--lambda", dest="lam", required=True)
    sp.add_argument("--t", type=int, required=True)
    sp.add_argument("--pool", type=int, required=True)
    sp.add_argument("--residual", type=float, default=1e-8)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=12345)
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("verify", help="verify a stored ensemble")
    sp.add_argument("--path", required=True)
    sp.add_argument("--t", type=int, default=None)
    sp.add_argument("--mode", choices=["exact", "randomized"], default="exact")
    sp.add_argument("--fusion", action="store_true", help="rank-1 probes only")
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--probes", type=int, default=200)
    sp.add_argument("--seed", type=int, default=12345)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("recover", help="single seeded recovery")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--source", default="haar", help="haar | build:... | ensemble file")
    sp.add_argument("--seed", type=int, default=12345)
    sp.add_argument("--tol", type=float, default=1e-7)
    sp.add_argument("--max-iter", type=int, default=20000)
    sp.add_argument("--success-tol", type=float, default=1e-4)
    sp.set_defaults(func=cmd_recover)

    sp = sub.add_parser("certify", help="golfing certificate diagnostics")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--c0", type=float, default=10.0)
    sp.add_argument("--batch-mult", type=float, default=1.0)
    sp.add_argument("--gamma", type=float, default=0.1)
    sp.add_argument("--delta", type=float, default=0.5)
    sp.add_argument("--seed", type=int, default=12345)
    sp.add_argument("--tol", type=float, default=1e-7)
    sp.add_argument("--max-iter", type=int, default=20000)
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("sweep", help="phase-transition grid to CSV")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_sweep)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0,) else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, InfeasibleError, CubatureResidualError, GolfingStageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
