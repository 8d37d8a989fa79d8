"""Experiment runner: parse a config file, build the problem, run one or
several solvers, write per-iteration CSV traces, summaries and diagnostic
check reports.

Config files are flat INI-style text: a ``[problem]`` section, one or more
``[solver:NAME]`` sections and an optional ``[output]`` section.  Commands::

    initik run CONFIG        # run every solver, write <name>.csv + summary
    initik compare CONFIG    # >= 2 solvers on one problem, work comparison
    initik selftest          # diagnostics battery on built-in problems

``--seed``, ``--out-dir`` and ``--max-outer`` override the config; the
``INITIK_OUT_DIR`` environment variable overrides the output directory.
Exit codes: 0 success, 1 usage/config error, 2 run failure, 3 diagnostic
failure.
"""

import argparse
import configparser
import os
import sys
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from . import problems as prob_mod
from .solvers import (
    METHODS,
    InertialIteratedTikhonov,
    normalize_lambda_schedule,
    tikhonov_step,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUN = 2
EXIT_CHECK = 3

OUT_DIR_ENV = "INITIK_OUT_DIR"

CSV_HEADER = "k,rel_error,rel_residual,alpha_k,lambda_k,inner_iters"

DIAGNOSTIC_NAMES = (
    "residual_monotonicity",
    "inertia_summability",
    "series_plateau",
    "kstar_bound",
    "sequence_lemma",
)


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


# ---------------------------------------------------------------------------
# config parsing


def _parse_bool(text, field_name):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{field_name}: expected a boolean, got {text!r}")


def _typed(section, items, spec):
    """Convert raw strings with per-key converters; reject unknown keys."""
    unknown = set(items) - set(spec)
    if unknown:
        raise ConfigError(
            f"[{section}] has unknown keys: {', '.join(sorted(unknown))}"
        )
    out = {}
    for key, raw in items.items():
        kind = spec[key]
        try:
            if kind is bool:
                out[key] = _parse_bool(raw, f"[{section}] {key}")
            elif kind is str:
                out[key] = raw.strip()
            else:
                out[key] = kind(raw)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from exc
    return out


_PROBLEM_SPECS = {
    "deblurring": {
        "kind": str, "height": int, "width": int, "psf_size": int,
        "psf_sigma": float, "noise_level": float, "noise_kind": str,
        "seed": int, "image": str,
    },
    "ipp": {
        "kind": str, "cells": int, "grid": int, "noise_level": float,
        "noise_kind": str, "seed": int, "background": float,
        "inclusion": float, "inclusion_rect": str,
    },
    "dense": {
        "kind": str, "rows": int, "cols": int, "decay": float,
        "noise_level": float, "noise_kind": str, "seed": int,
    },
}

_SOLVER_SPECS = {
    "init": {
        "method": str, "tau": float, "alpha_bar": float, "alpha_mode": str,
        "theta_exponent": float, "lambda": str, "inner_tol": float,
        "inner_solver": str, "warm_start": bool, "max_outer": int,
        "exact_data_tol": float, "x0": float,
    },
    "it": {
        "method": str, "tau": float, "lambda": str, "inner_tol": float,
        "inner_solver": str, "warm_start": bool, "max_outer": int,
        "exact_data_tol": float, "x0": float,
    },
    "nesterov": {
        "method": str, "tau": float, "momentum_alpha": float, "gamma": float,
        "norm_iters": int, "seed": int, "max_outer": int,
        "exact_data_tol": float, "x0": float,
    },
    "fista": {
        "method": str, "tau": float, "gamma": float, "norm_iters": int,
        "seed": int, "max_outer": int, "exact_data_tol": float, "x0": float,
    },
}


@dataclass
class SolverEntry:
    name: str
    method: str
    estimator: object
    x0: float = 0.0


@dataclass
class ExperimentConfig:
    problem: dict
    solvers: list
    out_dir: Path = Path("out")
    diagnostics: tuple = ()
    source: str = ""

    def problem_seed(self):
        return self.problem.get("seed", 0)


def _resolve_config_path(name):
    """Accept a filesystem path or the name of a bundled config."""
    path = Path(name)
    if path.is_file():
        return path, None
    stem = path.name if path.name.endswith(".cfg") else path.name + ".cfg"
    bundle = resources.files("initik").joinpath("configs", stem)
    if bundle.is_file():
        return None, bundle
    raise ConfigError(f"config file not found: {name}")


def load_config(name):
    """Parse and validate an experiment config file."""
    path, bundle = _resolve_config_path(name)
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#",), interpolation=None
    )
    try:
        if path is not None:
            with open(path, encoding="utf-8") as handle:
                parser.read_file(handle, source=str(path))
            source = str(path)
        else:
            parser.read_string(bundle.read_text(encoding="utf-8"), source=str(bundle))
            source = str(bundle)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    if "problem" not in parser:
        raise ConfigError("missing required [problem] section")
    problem = _parse_problem_section(dict(parser["problem"]))

    solvers = []
    for section in parser.sections():
        if section.startswith("solver:"):
            name_part = section.split(":", 1)[1].strip()
            if not name_part:
                raise ConfigError(f"[{section}]: empty solver name")
            solvers.append(_parse_solver_section(name_part, dict(parser[section])))
        elif section not in ("problem", "output"):
            raise ConfigError(f"unknown section [{section}]")
    if not solvers:
        raise ConfigError("no [solver:NAME] sections found")
    names = [entry.name for entry in solvers]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate solver names: {names}")

    out_dir = Path("out")
    checks = ()
    if "output" in parser:
        out = _typed("output", dict(parser["output"]),
                     {"directory": str, "diagnostics": str})
        if "directory" in out:
            out_dir = Path(out["directory"])
        if "diagnostics" in out:
            requested = tuple(
                item.strip() for item in out["diagnostics"].split(",")
                if item.strip()
            )
            bad = set(requested) - set(DIAGNOSTIC_NAMES)
            if bad:
                raise ConfigError(
                    f"[output] diagnostics: unknown checks {sorted(bad)}; "
                    f"known: {', '.join(DIAGNOSTIC_NAMES)}"
                )
            checks = requested
    return ExperimentConfig(problem, solvers, out_dir, checks, source)


def _parse_problem_section(items):
    kind = items.get("kind", "").strip()
    if kind not in _PROBLEM_SPECS:
        raise ConfigError(
            f"[problem] kind must be one of {sorted(_PROBLEM_SPECS)}, "
            f"got {kind!r}"
        )
    parsed = _typed("problem", items, _PROBLEM_SPECS[kind])
    parsed["kind"] = kind
    if parsed.get("noise_level", 0.0) < 0:
        raise ConfigError("[problem] noise_level must be nonnegative")
    return parsed


def _parse_solver_section(name, items):
    method = items.get("method", "").strip()
    if method not in METHODS:
        raise ConfigError(
            f"[solver:{name}] method must be one of {sorted(METHODS)}, "
            f"got {method!r}"
        )
    parsed = _typed(f"solver:{name}", items, _SOLVER_SPECS[method])
    parsed.pop("method")
    x0 = parsed.pop("x0", 0.0)
    if "lambda" in parsed:
        parsed["lam"] = parsed.pop("lambda")
    estimator = METHODS[method](**parsed)
    try:
        estimator._validate()
    except ValueError as exc:
        raise ConfigError(f"[solver:{name}] {exc}") from exc
    return SolverEntry(name, method, estimator, x0)


def build_problem(config):
    """Instantiate the Problem described by the config's [problem] section."""
    spec = dict(config.problem)
    kind = spec.pop("kind")
    if kind == "deblurring":
        image_path = spec.pop("image", None)
        if image_path:
            image = prob_mod.load_pgm(image_path)
        else:
            image = prob_mod.make_phantom_image(
                spec.pop("height", 256), spec.pop("width", 256)
            )
        spec.pop("height", None)
        spec.pop("width", None)
        psf = prob_mod.gaussian_psf(
            spec.pop("psf_size", 257), spec.pop("psf_sigma", 4.0)
        )
        return prob_mod.make_deblurring_problem(
            image, psf,
            noise_level=spec.pop("noise_level", 0.0),
            seed=spec.pop("seed", 0),
            noise_kind=spec.pop("noise_kind", "gaussian"),
        )
    if kind == "ipp":
        cells = spec.pop("cells", 16)
        phantom_keys = {"background", "inclusion", "inclusion_rect"}
        phantom = None
        if phantom_keys & set(spec):
            rect_text = spec.pop("inclusion_rect", "0.25,0.625,0.3125,0.6875")
            try:
                rect = tuple(float(v) for v in rect_text.split(","))
                if len(rect) != 4:
                    raise ValueError("need 4 comma-separated values")
            except ValueError as exc:
                raise ConfigError(f"[problem] inclusion_rect: {exc}") from exc
            phantom = prob_mod.default_ipp_phantom(
                cells,
                background=spec.pop("background", 1.0),
                inclusion=spec.pop("inclusion", 2.0),
                rect=rect,
            )
        return prob_mod.make_ipp_problem(
            n_cells_per_side=cells,
            fd_grid_m=spec.pop("grid", 64),
            noise_level=spec.pop("noise_level", 0.0),
            noise_kind=spec.pop("noise_kind", "uniform"),
            seed=spec.pop("seed", 0),
            phantom=phantom,
        )
    return prob_mod.make_dense_problem(
        rows=spec.pop("rows", 12),
        cols=spec.pop("cols", 10),
        decay=spec.pop("decay", 0.65),
        noise_level=spec.pop("noise_level", 0.0),
        noise_kind=spec.pop("noise_kind", "gaussian"),
        seed=spec.pop("seed", 0),
    )


# ---------------------------------------------------------------------------
# outputs


def write_trace_csv(trace, path):
    """Write a per-iterate CSV (17 significant digits, LF endings)."""
    rel_err = trace.rel_error()
    rel_res = trace.rel_residual()
    lines = [CSV_HEADER]
    for i, k in enumerate(trace.k):
        err = float("nan") if rel_err is None else rel_err[i]
        lines.append(
            f"{int(k)},{err:.17g},{rel_res[i]:.17g},"
            f"{trace.alpha[i]:.17g},{trace.lam[i]:.17g},"
            f"{int(trace.inner_iterations[i])}"
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="\n")
    os.replace(tmp, path)


def _summary_line(entry, trace, wall_time):
    rel_err = trace.rel_error()
    final_err = float("nan") if rel_err is None else rel_err[-1]
    return (
        f"{entry.name}: method={entry.method} k_star={trace.stop_index} "
        f"stop={trace.stop_reason} inner_total={trace.total_inner_iterations} "
        f"final_rel_error={final_err:.6g} wall_time={wall_time:.3f}s"
    )


def _lambda_floor(estimator, trace):
    """Positive multiplier floor of the schedule, or 0 if it decays to 0."""
    lam = getattr(estimator, "lam", None)
    if lam is None:
        return 0.0
    kind, value = normalize_lambda_schedule(lam)
    if kind == "constant":
        return value
    if kind == "geometric":
        ratio, base = value if isinstance(value, tuple) else (value, 1.0)
        return base if ratio >= 1.0 else 0.0
    return min(value)


def run_diagnostics(names, problem, entry, trace, x0):
    """Run the requested checks against one finished solver run."""
    reports = []
    for name in names:
        if name == "residual_monotonicity":
            reports.append(diag.check_residual_monotonicity(
                trace, problem.operator, problem.noisy_data))
        elif name == "inertia_summability":
            reports.append(diag.check_inertia_summability(trace))
        elif name == "series_plateau":
            reports.append(diag.check_series_plateau(trace))
        elif name == "kstar_bound":
            if problem.delta <= 0:
                reports.append(diag.CheckReport.skipped(
                    "kstar_bound", "exact-data run (delta = 0)"))
                continue
            x0_vec = np.full(problem.operator.domain_dim, float(x0))
            reports.append(diag.check_kstar_bound(
                trace,
                lambda_floor=_lambda_floor(entry.estimator, trace),
                tau=entry.estimator.tau,
                delta=problem.delta,
                x0_err_sq=float(
                    np.linalg.norm(x0_vec - problem.ground_truth) ** 2),
            ))
        elif name == "sequence_lemma":
            if trace.error_norm is None or trace.n_steps < 1:
                reports.append(diag.CheckReport.skipped(
                    "sequence_lemma", "no error history recorded"))
                continue
            cap = getattr(entry.estimator, "alpha_bar", 0.0)
            cap = cap if 0.0 < cap < 1.0 else 0.5
            reports.append(diag.check_sequence_lemma(
                alphas=trace.alpha[: trace.n_steps],
                phis=trace.error_norm**2,
                etas=trace.term_eta,
                alpha_cap=cap,
            ))
    return reports


# ---------------------------------------------------------------------------
# commands


def _resolve_out_dir(config, override):
    if override:
        return Path(override)
    env = os.environ.get(OUT_DIR_ENV)
    if env:
        return Path(env)
    return config.out_dir


def _apply_overrides(config, seed=None, max_outer=None):
    if seed is not None:
        config.problem["seed"] = seed
        for entry in config.solvers:
            if hasattr(entry.estimator, "seed"):
                entry.estimator.seed = seed
    if max_outer is not None:
        for entry in config.solvers:
            entry.estimator.max_outer = max_outer


def run_experiment(config_name, seed=None, out_dir=None, max_outer=None,
                   stream=None):
    """Run every configured solver; returns a process exit code."""
    stream = stream or sys.stdout
    config = load_config(config_name)
    _apply_overrides(config, seed, max_outer)
    target = _resolve_out_dir(config, out_dir)
    problem = build_problem(config)

    summary_lines = []
    all_reports = []
    for entry in config.solvers:
        start = time.perf_counter()
        entry.estimator.fit_problem(problem, x0=entry.x0)
        wall = time.perf_counter() - start
        trace = entry.estimator.trace_
        write_trace_csv(trace, target / f"{entry.name}.csv")
        line = _summary_line(entry, trace, wall)
        summary_lines.append(line)
        print(line, file=stream)
        if config.diagnostics:
            reports = run_diagnostics(
                config.diagnostics, problem, entry, trace, entry.x0)
            for report in reports:
                print(f"  [{entry.name}] {report.to_text()}", file=stream)
            all_reports.extend(reports)

    _atomic_write(target / "summary.txt", "\n".join(summary_lines) + "\n")
    if all_reports:
        _atomic_write(target / "checks.txt", diag.reports_to_text(all_reports))
        _atomic_write(target / "checks.jsonl", diag.reports_to_jsonl(all_reports))
        if any(r.status == "failed" for r in all_reports):
            print("diagnostic failure detected", file=stream)
            return EXIT_CHECK
    return EXIT_OK


def compare_methods(config_name, seed=None, out_dir=None, max_outer=None,
                    stream=None):
    """Run >= 2 solvers on one shared problem instance and compare work."""
    stream = stream or sys.stdout
    config = load_config(config_name)
    if len(config.solvers) < 2:
        raise ConfigError(
            "compare needs at least 2 [solver:NAME] sections, got "
            f"{len(config.solvers)}"
        )
    _apply_overrides(config, seed, max_outer)
    target = _resolve_out_dir(config, out_dir)
    problem = build_problem(config)

    rows = []
    for entry in config.solvers:
        start = time.perf_counter()
        entry.estimator.fit_problem(problem, x0=entry.x0)
        wall = time.perf_counter() - start
        trace = entry.estimator.trace_
        rel_err = trace.rel_error()
        rows.append({
            "name": entry.name,
            "method": entry.method,
            "k_star": trace.stop_index,
            "stop": trace.stop_reason,
            "inner_total": trace.total_inner_iterations,
            "final_rel_error":
                float("nan") if rel_err is None else float(rel_err[-1]),
            "wall_time": wall,
        })
    # exact (spectral) inner solves report 0 iterations; fall back to
    # outer-iteration counts as the work measure in that case
    work = [row["inner_total"] for row in rows]
    if max(work) == 0:
        work = [row["k_star"] for row in rows]
    floor = max(min(work), 1)
    for row, amount in zip(rows, work):
        row["extra_work_pct"] = 100.0 * (amount - min(work)) / floor

    header = (f"{'name':<12} {'method':<9} {'k*':>4} {'inner':>7} "
              f"{'rel_error':>12} {'extra_work':>11}")
    print(header, file=stream)
    csv_lines = ["name,method,k_star,stop,inner_total,final_rel_error,extra_work_pct"]
    for row in rows:
        print(
            f"{row['name']:<12} {row['method']:<9} {row['k_star']:>4} "
            f"{row['inner_total']:>7} {row['final_rel_error']:>12.6g} "
            f"{row['extra_work_pct']:>10.1f}%",
            file=stream,
        )
        csv_lines.append(
            f"{row['name']},{row['method']},{row['k_star']},{row['stop']},"
            f"{row['inner_total']},{row['final_rel_error']:.17g},"
            f"{row['extra_work_pct']:.17g}"
        )
    _atomic_write(target / "compare.csv", "\n".join(csv_lines) + "\n")
    return EXIT_OK


def run_selftest(seed=0, inject_fault=False, stream=None):
    """Diagnostics battery over built-in small problems; 0 iff all pass."""
    stream = stream or sys.stdout
    rng = np.random.default_rng(seed)
    reports = []

    # extrapolation identity on random triples
    singles = []
    for _ in range(100):
        alpha = rng.uniform(0.0, 0.9)
        singles.append(diag.check_extrapolation_identity(
            rng.standard_normal(7), rng.standard_normal(7),
            rng.standard_normal(7), alpha))
    reports.append(diag.merge_reports("extrapolation_identity", singles))

    # step identity on random dense exact-data steps (tightly solved)
    singles = []
    for i in range(30):
        problem = prob_mod.make_dense_problem(
            rows=8, cols=6, decay=0.7, noise_level=0.0, seed=seed + 100 + i)
        w = rng.standard_normal(6)
        lam = rng.uniform(0.2, 3.0)
        x_next, _ = tikhonov_step(
            problem.operator, w, lam, problem.exact_data, tol=1e-14)
        singles.append(diag.check_step_identity(
            problem.operator, x_next, w, problem.ground_truth,
            problem.exact_data, lam))
    reports.append(diag.merge_reports("step_identity", singles))

    # residual monotonicity on a small deblurring run
    image = prob_mod.make_phantom_image(32, 32)
    psf = prob_mod.gaussian_psf(9, 1.5)
    deblur = prob_mod.make_deblurring_problem(image, psf, 0.01, seed=seed)
    solver = InertialIteratedTikhonov(
        tau=1.1, alpha_bar=0.45, lam=("geometric", 1.5), max_outer=60)
    solver.fit_problem(deblur, x0=0.0)
    trace = solver.trace_
    if inject_fault:
        # debug hook: corrupt one stored iterate to demonstrate detection
        trace.iterates[3] = -trace.iterates[3]
    reports.append(diag.check_residual_monotonicity(
        trace, deblur.operator, deblur.noisy_data))

    # inertia summability and k* bound on a noisy dense run
    dense = prob_mod.make_dense_problem(
        rows=12, cols=10, decay=0.65, noise_level=0.05, seed=seed)
    solver = InertialIteratedTikhonov(
        tau=1.5, alpha_bar=0.45, lam=("constant", 1.0), max_outer=200,
        inner_tol=1e-10)
    solver.fit_problem(dense, x0=0.0)
    reports.append(diag.check_inertia_summability(solver.trace_))
    x0_vec = np.zeros(dense.operator.domain_dim)
    reports.append(diag.check_kstar_bound(
        solver.trace_, lambda_floor=1.0, tau=1.5, delta=dense.delta,
        x0_err_sq=float(np.linalg.norm(x0_vec - dense.ground_truth) ** 2)))

    # series plateau and sequence lemma on an exact-data run
    exact = prob_mod.make_dense_problem(
        rows=12, cols=10, decay=0.65, noise_level=0.0, seed=seed)
    solver = InertialIteratedTikhonov(
        tau=1.5, alpha_bar=0.45, lam=("constant", 1.0), max_outer=80,
        inner_tol=1e-12, exact_data_tol=1e-9)
    solver.fit_problem(exact, x0=0.0)
    trace = solver.trace_
    reports.append(diag.check_series_plateau(trace))
    reports.append(diag.check_sequence_lemma(
        alphas=trace.alpha[: trace.n_steps],
        phis=trace.error_norm**2,
        etas=trace.term_eta,
        alpha_cap=0.45,
    ))

    for report in reports:
        print(report.to_text(), file=stream)
    return EXIT_OK if all(r.status == "passed" for r in reports) else EXIT_CHECK


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _build_parser():
    parser = _Parser(
        prog="initik",
        description="Inertial iterated Tikhonov experiment runner.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_config=True):
        if with_config:
            p.add_argument("config", help="config file path or bundled name")
            p.add_argument("--out-dir", default=None,
                           help="output directory (overrides config and "
                                f"${OUT_DIR_ENV})")
            p.add_argument("--max-outer", type=int, default=None,
                           help="override every solver's outer-iteration cap")
        p.add_argument("--seed", type=int, default=None,
                       help="override the problem seed")

    add_common(sub.add_parser("run", help="run all configured solvers"))
    add_common(sub.add_parser("compare", help="compare >= 2 solvers"))
    self_parser = sub.add_parser("selftest", help="run the diagnostics battery")
    add_common(self_parser, with_config=False)
    self_parser.add_argument("--inject-fault", action="store_true",
                             help="debug hook: corrupt one iterate so a "
                                  "check fails")
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_CONFIG
    try:
        if args.command == "run":
            return run_experiment(args.config, seed=args.seed,
                                  out_dir=args.out_dir,
                                  max_outer=args.max_outer)
        if args.command == "compare":
            return compare_methods(args.config, seed=args.seed,
                                   out_dir=args.out_dir,
                                   max_outer=args.max_outer)
        return run_selftest(seed=args.seed if args.seed is not None else 0,
                            inject_fault=args.inject_fault)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - surface run failures as exit 2
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
