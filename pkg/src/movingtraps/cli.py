"""Command-line entry point.

Subcommands write CSV (tabular sweeps) and JSON (nested reports) into the
output directory. Every CSV row and JSON report carries the seed, the
config hash and the package version. Progress goes to stderr.

Exit status: 0 success, 1 validation failure, 2 usage error, 3 config
error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from collections.abc import Sequence
from typing import Any

from . import analytics, oracles
from ._parallel import set_default_threads
from .conditional import conditional_statistics, theorem_trend_report
from .config import VERSION, ConfigError, ExperimentConfig, load
from .params import combined_se
from .rng import StreamKey
from .sausage import annealed_survival_estimate
from .survival import optimize_confinement_radius, survival_report
from .trapfield import direct_survival_estimate

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3, 4

SURVIVAL_COLUMNS = (
    "seed", "config_hash", "version", "lam", "a", "t", "n_steps", "mode",
    "direct", "direct_se", "annealed", "annealed_se", "annealed_uncorrected",
    "bias_diagnostic", "lower_bound", "r_star", "direct_annealed_agree",
)

ANALYTICS = {
    "expected_range": (analytics.expected_range, 1),
    "argmax_density": (analytics.argmax_density, 2),
    "argmax_cdf": (analytics.argmax_cdf, 2),
    "max_argmax_density": (analytics.max_argmax_density, 3),
    "first_passage_density": (analytics.first_passage_density, 2),
    "stay_positive_prob": (analytics.stay_positive_prob, 2),
    "conditioned_positive_transition": (analytics.conditioned_positive_transition, 4),
    "confinement_prob": (analytics.confinement_prob, 2),
    "displacement_median": (analytics.displacement_median, 1),
    "range_tail_asymptotic": (analytics.range_tail_asymptotic, 2),
}


class OutputError(OSError):
    pass


def heartbeat(msg: str) -> None:
    print(f"[movingtraps {time.strftime('%H:%M:%S')}] {msg}", file=sys.stderr, flush=True)


def _num(v: Any) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def _stamp(cfg: ExperimentConfig) -> dict[str, Any]:
    return {"seed": cfg.seed, "config_hash": cfg.hash(), "version": VERSION}


def prepare_output(path: str) -> None:
    """Create ``path`` and prove it is writable, before any computation."""
    try:
        os.makedirs(path, exist_ok=True)
        probe = os.path.join(path, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as e:
        raise OutputError(f"output directory {path!r} is not writable: {e}") from e


def write_csv(path: str, columns: Sequence[str], rows: Sequence[dict[str, Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_num(r.get(c, math.nan)) for c in columns])


def write_json(path: str, obj: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


# -- validate ----------------------------------------------------------------


def _check(name: str, value: float, reference: float, tol: float, kind: str) -> dict[str, Any]:
    if kind == "abs":
        passed = abs(value - reference) <= tol
    elif kind == "rel":
        passed = abs(value - reference) <= tol * abs(reference)
    else:  # tol is an absolute allowance already scaled by SE
        passed = abs(value - reference) <= tol
    return {"name": name, "value": value, "reference": reference, "tol": tol, "kind": kind, "passed": bool(passed)}


def run_validate(cfg: ExperimentConfig) -> tuple[bool, dict[str, Any], dict[str, float]]:
    """Oracle suite at the configured budgets; returns (all passed, report, timings)."""
    key = StreamKey(cfg.seed)
    checks: list[dict[str, Any]] = []
    timings: dict[str, float] = {}

    def timed(name, fn):
        t0 = time.perf_counter()
        out = fn()
        timings[name] = time.perf_counter() - t0
        heartbeat(f"validate: {name} done in {timings[name]:.1f}s")
        return out

    masses = timed("densities", oracles.density_masses)
    for name, mass in masses.items():
        checks.append(_check(f"mass_{name}", mass, 1.0, 1e-6, "abs"))
    checks.append(_check("joint_marginal_vs_arcsine", timed("marginal", oracles.joint_marginal_error), 0.0, 1e-8, "abs"))

    rng_est = timed("expected_range", lambda: oracles.mc_expected_range(1.0, cfg.n_paths, 4096, key.child(0)))
    checks.append(_check("expected_range_t1", rng_est.value, analytics.expected_range(1.0), 0.01, "rel"))

    conf = timed("confinement", lambda: oracles.mc_confinement(1.0, 1.0, cfg.n_paths, 1024, key.child(1)))
    checks.append(_check("confinement_r1_t1", conf.value, analytics.confinement_prob(1.0, 1.0), 0.02, "rel"))
    checks.append(_check("confinement_log_slope", oracles.confinement_log_slope(), -math.pi**2 / 8, 0.01, "rel"))

    p = cfg.params()
    direct = timed(
        "direct",
        lambda: direct_survival_estimate(p, cfg.n_paths, key.child(2), cfg.mode, cfg.batch_size),
    )
    annealed = timed(
        "annealed",
        lambda: annealed_survival_estimate(
            p, cfg.n_outer, cfg.m_inner, key.child(3), cfg.debias, cfg.continuity_correction
        ),
    )
    tol = 3.0 * combined_se(direct, annealed)
    checks.append(_check("direct_vs_annealed", direct.value, annealed.value, tol, "se"))
    _, bound = optimize_confinement_radius(p)
    checks.append(
        {
            "name": "bound_below_direct",
            "value": bound.value,
            "reference": direct.value + 3 * direct.std_err,
            "tol": 0.0,
            "kind": "le",
            "passed": bool(bound.value <= direct.value + 3 * direct.std_err),
        }
    )
    ok = all(c["passed"] for c in checks)
    report = {
        **_stamp(cfg),
        "passed": ok,
        "checks": checks,
        "estimates": {"direct": direct.as_dict(), "annealed": annealed.as_dict(), "lower_bound": bound.as_dict()},
    }
    return ok, report, timings


# -- survival ----------------------------------------------------------------


def survival_rows(cfg: ExperimentConfig, method: str = "all") -> list[dict[str, Any]]:
    rows = []
    key = StreamKey(cfg.seed)
    for j, t in enumerate(cfg.t_grid):
        p = cfg.params(t_end=t)
        k = key.child(j)
        t0 = time.perf_counter()
        row: dict[str, Any] = {**_stamp(cfg), "lam": p.lam, "a": p.a, "t": t, "n_steps": p.n_steps, "mode": cfg.mode}
        if method == "all":
            rep = survival_report(
                p,
                cfg.n_paths,
                cfg.n_outer,
                cfg.m_inner,
                k,
                cfg.mode,
                cfg.debias,
                cfg.continuity_correction,
                batch_size=cfg.batch_size,
            )
            direct, annealed, bound, r_star = rep.direct, rep.annealed, rep.lower_bound, rep.r_star
        else:
            direct = annealed = None
            if method == "direct":
                direct = direct_survival_estimate(p, cfg.n_paths, k.child(0), cfg.mode, cfg.batch_size)
            elif method == "annealed":
                annealed = annealed_survival_estimate(
                    p, cfg.n_outer, cfg.m_inner, k.child(1), cfg.debias, cfg.continuity_correction
                )
            r_star, bound = optimize_confinement_radius(p)
        if direct is not None:
            row.update(direct=direct.value, direct_se=direct.std_err)
        if annealed is not None:
            shift = annealed.extras.get("grid_shift", 0.0)
            row.update(
                annealed=annealed.value,
                annealed_se=annealed.std_err,
                annealed_uncorrected=annealed.value * math.exp(p.lam * shift),
                bias_diagnostic=annealed.extras.get("bias_diagnostic", 0.0),
            )
        if direct is not None and annealed is not None:
            row["direct_annealed_agree"] = abs(direct.value - annealed.value) <= 3 * combined_se(direct, annealed)
        row.update(lower_bound=bound.value, r_star=r_star)
        rows.append(row)
        heartbeat(f"survival t={t:g} done in {time.perf_counter() - t0:.1f}s")
    return rows


# -- conditional / trend -----------------------------------------------------


def _event_columns(cfg: ExperimentConfig) -> list[str]:
    names = ["A", "A_traversal", "A_occupation", "B"]
    names += [f"A_c3={c:g}" for c in cfg.c3_values] + [f"B_k={k:g}" for k in cfg.b_k_sweep]
    cols = []
    for n in names:
        cols += [f"p_{n}", f"se_{n}", f"free_p_{n}", f"free_se_{n}"]
    return cols


def conditional_columns(cfg: ExperimentConfig) -> list[str]:
    qs = ("q10", "q25", "q50", "q75", "q90")
    return (
        ["seed", "config_hash", "version", "lam", "a", "t", "n_steps", "n", "n_eff"]
        + list(qs)
        + [f"free_{q}" for q in qs]
        + ["median_se", "free_median_se", "median_gap_se"]
        + _event_columns(cfg)
    )


def _summary_row(cfg: ExperimentConfig, s, n_steps: int) -> dict[str, Any]:
    qs = ("q10", "q25", "q50", "q75", "q90")
    row = {**_stamp(cfg), "lam": s.lam, "a": cfg.a, "t": s.t, "n_steps": n_steps, "n": s.n, "n_eff": s.n_eff}
    for name, q in zip(qs, sorted(s.quantiles)):
        row[name] = s.quantiles[q]
        row[f"free_{name}"] = s.free_quantiles[q]
    row.update(median_se=s.median_se, free_median_se=s.free_median_se, median_gap_se=s.median_gap_se)
    for n, (pv, se) in s.events.items():
        fp, fse = s.free_events[n]
        row.update({f"p_{n}": pv, f"se_{n}": se, f"free_p_{n}": fp, f"free_se_{n}": fse})
    return row


def conditional_rows(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    key = StreamKey(cfg.seed)
    rows = []
    for j, t in enumerate(cfg.t_grid):
        t0 = time.perf_counter()
        p = cfg.params(t_end=t, n_steps=cfg.cond_n_steps)
        summ, _ = conditional_statistics(
            p,
            cfg.n_outer,
            cfg.m_inner,
            cfg.event_a(),
            cfg.event_b(),
            key.child(j),
            cfg.c3_values,
            cfg.greedy_b,
            cfg.debias,
            b_k_sweep=cfg.b_k_sweep,
        )
        rows.append(_summary_row(cfg, summ, p.n_steps))
        heartbeat(f"conditional t={t:g} done in {time.perf_counter() - t0:.1f}s (n_eff {summ.n_eff:.0f})")
    return rows


def run_trend(cfg: ExperimentConfig) -> tuple[list[dict[str, Any]], dict[str, Any]]:
    if len(cfg.t_grid) < 3:
        raise ConfigError("trend needs a t_grid of at least three horizons")
    t0 = time.perf_counter()
    rep = theorem_trend_report(
        cfg.params(t_end=cfg.t_grid[0], n_steps=cfg.cond_n_steps),
        cfg.t_grid,
        cfg.n_outer,
        cfg.m_inner,
        StreamKey(cfg.seed),
        cfg.event_a(),
        cfg.event_b(),
        cfg.c3_values,
        cfg.cond_n_steps,
        cfg.greedy_b,
        cfg.debias,
        b_k_sweep=cfg.b_k_sweep,
    )
    heartbeat(f"trend done in {time.perf_counter() - t0:.1f}s")
    rows = [_summary_row(cfg, s, cfg.cond_n_steps) for s in rep.summaries]
    record = {**_stamp(cfg), "fit": rep.fit.as_dict(), "trends": rep.trends, "reference_window": [1 / 3, 5 / 11]}
    return rows, record


# -- argument handling -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int, help="64-bit seed (overrides the file)")
    common.add_argument("--threads", type=int, help="worker thread cap")
    common.add_argument("--out", help="output directory (overrides the file)")
    common.add_argument("--mode", choices=("naive", "bridge"), help="kill detection mode")
    common.add_argument("--debias", action="store_true", default=None, help="first-order convexity correction")

    ap = argparse.ArgumentParser(prog="movingtraps", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=VERSION)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="run the oracle suite")
    sv = sub.add_parser("survival", parents=[common], help="survival probability over t_grid")
    sv.add_argument("--method", choices=("all", "direct", "annealed", "bound"), default="all")
    sub.add_parser("conditional", parents=[common], help="conditional statistics per t")
    sub.add_parser("trend", parents=[common], help="event trends and exponent fit over t_grid")
    an = sub.add_parser("analytics", help="evaluate a closed form")
    an.add_argument("function", choices=sorted(ANALYTICS))
    an.add_argument("args", nargs="*", type=float)
    an.add_argument("--full", action="store_true", help="print 17 significant digits")
    return ap


def _config_from(ns: argparse.Namespace) -> ExperimentConfig:
    cfg = load(ns.config) if ns.config else ExperimentConfig()
    changes = {}
    for name, field_name in (("seed", "seed"), ("threads", "threads"), ("out", "output_dir"), ("mode", "mode"), ("debias", "debias")):
        v = getattr(ns, name)
        if v is not None:
            changes[field_name] = v
    return cfg.with_(**changes) if changes else cfg


def _analytics(ns: argparse.Namespace) -> int:
    fn, arity = ANALYTICS[ns.function]
    if len(ns.args) != arity:
        print(f"{ns.function} takes {arity} argument(s)", file=sys.stderr)
        return EXIT_USAGE
    try:
        value = float(fn(*ns.args))
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    print(("%.17g" if ns.full else "%.6g") % value)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    if ns.command == "analytics":
        return _analytics(ns)
    try:
        cfg = _config_from(ns)
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    set_default_threads(cfg.threads)
    out = cfg.output_dir
    try:
        prepare_output(out)
        status = EXIT_OK
        if ns.command == "validate":
            ok, report, timings = run_validate(cfg)
            write_json(os.path.join(out, "validate.json"), report)
            write_json(os.path.join(out, "validate_timings.json"), timings)
            for c in report["checks"]:
                print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']:.10g} vs {c['reference']:.10g}")
            status = EXIT_OK if ok else EXIT_FAIL
        elif ns.command == "survival":
            write_csv(os.path.join(out, "survival.csv"), SURVIVAL_COLUMNS, survival_rows(cfg, ns.method))
        elif ns.command == "conditional":
            write_csv(os.path.join(out, "conditional.csv"), conditional_columns(cfg), conditional_rows(cfg))
        elif ns.command == "trend":
            rows, record = run_trend(cfg)
            write_csv(os.path.join(out, "trend.csv"), conditional_columns(cfg), rows)
            write_json(os.path.join(out, "trend.json"), record)
            f = record["fit"]
            print(f"slope {f['slope']:.4f} CI [{f['ci_low']:.4f}, {f['ci_high']:.4f}]")
        return status
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
