"""Command-line runner.

Two subcommands::

    heatlattice run <config.yaml> [--seed S] [--replicas R]
                                  [--out-dir DIR] [--workers W]
    heatlattice validate <config.yaml>

``run`` executes the configured experiment and writes a ``summary.json``
plus experiment-specific CSV files into the output directory. Re-running
the same resolved config produces byte-identical CSVs. All files are
written atomically (temp file in the target directory, then rename).

``validate`` checks the config without running anything and prints the
resolved view plus diagnostics as JSON on stdout.

Exit codes: 0 success, 2 invalid config, 3 I/O failure, 4 any other
experiment error. Failures print a machine-readable object to stderr::

    {"error": {"code": "...", "message": "...", ...}}
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np
from scipy import stats as sps

from . import __version__
from .config import config_hash, load_config, resolve_config
from .dual import DualRunConfig, hitting_records, pair_sticking_time_sample
from .errors import ConfigInvalidError, HeatLatticeError, IoFailureError
from .forward import (
    CountSeries,
    EnergySeries,
    ForwardRunConfig,
    JointAtSite,
    OccupancySnapshots,
    simulate_ness,
)
from .harmonic import hitting_estimate_ssrw, solve_discrete_harmonic
from .rng import Rng
from .stats import (
    conditional_energy_moments,
    duality_check,
    empirical_moments,
    exponential_moment_distance,
    poisson_count_test,
)

TOOL_NAME = "heatlattice"


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _atomic_write(path: str, data: bytes) -> None:
    """Write bytes to ``path`` via a same-directory temp file and rename."""
    directory = os.path.dirname(path) or "."
    tmp = None
    try:
        fd, tmp = tempfile.mkstemp(
            dir=directory, prefix=os.path.basename(path) + ".", suffix=".tmp"
        )
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
        tmp = None
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc
    finally:
        if tmp is not None:
            try:
                os.unlink(tmp)
            except OSError:
                pass


def _scalar(value):
    """Plain Python value for CSV/JSON output."""
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _scrub(value):
    """Recursively convert to plain JSON values; non-finite floats to null."""
    if isinstance(value, dict):
        return {k: _scrub(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_scrub(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_scrub(v) for v in value.tolist()]
    if isinstance(value, (float, np.floating)):
        f = float(value)
        return f if math.isfinite(f) else None
    return _scalar(value)


_written: list[str] = []  # files produced by the current run command


def write_csv(path: str, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_scalar(cell) for cell in row])
    _atomic_write(path, buf.getvalue().encode("utf-8"))
    _written.append(path)


def write_json(path: str, obj: dict) -> None:
    text = json.dumps(_scrub(obj), indent=2, allow_nan=False) + "\n"
    _atomic_write(path, text.encode("utf-8"))
    _written.append(path)


def _coord_header(dimension: int) -> list[str]:
    return [f"v{i}" for i in range(dimension)]


def _summary_envelope(resolved: dict, results: dict) -> dict:
    config_echo = {
        k: v for k, v in resolved.items() if k not in ("objects",)
    }
    return {
        "tool": {"name": TOOL_NAME, "version": __version__},
        "experiment": resolved["experiment"],
        "config_hash": config_hash(resolved),
        "seed": resolved["seed"],
        "config": config_echo,
        "results": results,
    }


# ---------------------------------------------------------------------------
# experiment runners (each returns the results dict and writes its CSVs)
# ---------------------------------------------------------------------------


def _forward_config(resolved: dict, observables) -> ForwardRunConfig:
    obj = resolved["objects"]
    return ForwardRunConfig(
        lattice=obj["lattice"],
        temperature=obj["temp"],
        particles=resolved["particles"],
        seed=resolved["seed"],
        sample_events=resolved["sample_events"],
        burn_in_events=resolved["burn_in_events"],
        thinning=resolved["thinning"],
        observables=tuple(observables),
        batches=resolved["batches"],
    )


def _run_forward_ness(resolved: dict, out_dir: str) -> dict:
    obj = resolved["objects"]
    lattice, temp = obj["lattice"], obj["temp"]
    observables = [EnergySeries()] if resolved["record_energies"] else []
    sample = simulate_ness(_forward_config(resolved, observables))
    field = solve_discrete_harmonic(lattice, temp)

    dev = np.abs(sample.site_mean - field.values)
    se = sample.site_mean_se
    coords = _coord_header(lattice.dimension)
    write_csv(
        os.path.join(out_dir, "profile.csv"),
        coords + ["mean_energy", "std_error", "harmonic_reference",
                  "abs_deviation"],
        (
            list(site) + [sample.site_mean[i], se[i], field.values[i], dev[i]]
            for i, site in enumerate(lattice.sites)
        ),
    )
    write_csv(
        os.path.join(out_dir, "bath_flux.csv"),
        coords + ["interactions", "injected", "discarded"],
        (
            list(point) + [
                sample.bath_interactions[b],
                sample.bath_injected[b],
                sample.bath_discarded[b],
            ]
            for b, point in enumerate(lattice.bath)
        ),
    )
    if sample.energy_series is not None:
        labels = [
            "e_" + "_".join(str(c) for c in site) for site in lattice.sites
        ]
        write_csv(
            os.path.join(out_dir, "series.csv"),
            ["record"] + labels,
            (
                [r] + [sample.energy_series[r, i] for i in range(lattice.n_sites)]
                for r in range(sample.records)
            ),
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        sigmas = np.where(dev > 0, dev / se, 0.0)
    return {
        "records": sample.records,
        "max_abs_deviation": float(dev.max()),
        "max_deviation_sigmas": float(sigmas.max()),
        "bath": {
            "interactions": int(sample.bath_interactions.sum()),
            "injected": float(sample.bath_injected.sum()),
            "discarded": float(sample.bath_discarded.sum()),
        },
        "harmonic": {"residual": field.residual, "sweeps": field.sweeps},
    }


def _run_equilibrium_check(resolved: dict, out_dir: str) -> dict:
    obj = resolved["objects"]
    lattice = obj["lattice"]
    theta = resolved["temperature"]["value"]
    sample = simulate_ness(
        _forward_config(resolved, [EnergySeries(), OccupancySnapshots()])
    )
    orders = [tuple(o) for o in resolved["orders"]]
    coords = _coord_header(lattice.dimension)

    rows = []
    worst = 0.0
    per_site_worst = np.zeros(lattice.n_sites)
    for i, site in enumerate(lattice.sites):
        report = empirical_moments(sample.energy_series[:, i], orders,
                                   batches=resolved["batches"])
        dist = exponential_moment_distance(report, theta)
        per_site_worst[i] = dist
        worst = max(worst, dist)
        for order in report.orders:
            emp = report.empirical[order]
            ref = report.reference[order]
            rows.append(
                list(site)
                + [order[0], emp, ref, report.std_errors[order],
                   abs(emp - ref) / ref]
            )
    write_csv(
        os.path.join(out_dir, "moments.csv"),
        coords + ["order", "empirical", "reference", "std_error",
                  "rel_deviation"],
        rows,
    )

    occ = sample.occupancy
    expected = occ.sum() / lattice.n_sites
    write_csv(
        os.path.join(out_dir, "occupancy.csv"),
        coords + ["visits", "expected"],
        (
            list(site) + [occ[i], expected]
            for i, site in enumerate(lattice.sites)
        ),
    )
    occupancy_result = {"snapshots": sample.occupancy_snapshots}
    if occ.sum() > 0:
        chi2, pvalue = sps.chisquare(occ)
        occupancy_result.update(
            chi2=float(chi2), pvalue=float(pvalue), dof=lattice.n_sites - 1
        )
    return {
        "theta": theta,
        "records": sample.records,
        "max_rel_deviation": float(worst),
        "worst_site": list(lattice.sites[int(per_site_worst.argmax())]),
        "occupancy": occupancy_result,
    }


def _run_dual_hitting(resolved: dict, out_dir: str) -> dict:
    obj = resolved["objects"]
    lattice = obj["lattice"]
    config = DualRunConfig(
        lattice=lattice,
        temperature=obj["temp"],
        particles=resolved["particles"],
        packets=tuple(obj["packets"]),
        seed=resolved["seed"],
        replicas=resolved["replicas"],
        step_cap=resolved["step_cap"],
    )
    recs = hitting_records(config, workers=resolved["workers"])
    coords = _coord_header(lattice.dimension)
    write_csv(
        os.path.join(out_dir, "hits.csv"),
        ["replica", "packet"] + coords + ["t_value"],
        (
            [r, n] + list(lattice.bath[recs.bath_indices[r, n]])
            + [recs.t_values[r, n]]
            for r in range(config.replicas)
            for n in range(config.n_packets)
        ),
    )
    products = recs.products
    est = float(products.mean())
    se = float(products.std(ddof=1) / np.sqrt(len(products)))
    return {
        "estimate": est,
        "std_error": se,
        "replicas": config.replicas,
        "packet_mean_t": [
            float(recs.t_values[:, n].mean()) for n in range(config.n_packets)
        ],
    }


def _run_harmonic(resolved: dict, out_dir: str) -> dict:
    obj = resolved["objects"]
    lattice, temp = obj["lattice"], obj["temp"]
    field = solve_discrete_harmonic(lattice, temp, tol=resolved["tol"])
    coords = _coord_header(lattice.dimension)
    write_csv(
        os.path.join(out_dir, "field.csv"),
        coords + ["value"],
        (
            list(site) + [field.values[i]]
            for i, site in enumerate(lattice.sites)
        ),
    )
    results = {
        "residual": field.residual,
        "sweeps": field.sweeps,
        "min_value": float(field.values.min()),
        "max_value": float(field.values.max()),
    }
    if "site" in obj:
        site = obj["site"]
        rng = Rng.from_seed(resolved["seed"], 0)
        est, se = hitting_estimate_ssrw(
            lattice, temp, site, resolved["replicas"], rng
        )
        solved = field.value_at(site)
        results["cross_check"] = {
            "site": list(site),
            "walks": resolved["replicas"],
            "walk_estimate": est,
            "std_error": se,
            "field_value": solved,
            "deviation_sigmas": abs(est - solved) / se if se > 0 else None,
        }
    return results


def _run_duality_check(resolved: dict, out_dir: str) -> dict:
    obj = resolved["objects"]
    lhs, rhs, se = duality_check(
        lattice=obj["lattice"],
        temperature=obj["temp"],
        M=resolved["particles"],
        n_star=obj["packets"],
        x_star=obj["energies"],
        t_events=resolved["t_events"],
        replicas=resolved["replicas"],
        seed=resolved["seed"],
    )
    write_csv(
        os.path.join(out_dir, "sides.csv"),
        ["side", "estimate"],
        [["forward", lhs], ["dual", rhs]],
    )
    diff = abs(lhs - rhs)
    return {
        "forward_side": lhs,
        "dual_side": rhs,
        "combined_std_error": se,
        "abs_difference": diff,
        "difference_sigmas": diff / se if se > 0 else None,
        "t_events": resolved["t_events"],
        "replicas": resolved["replicas"],
    }


def _run_poisson_check(resolved: dict, out_dir: str) -> dict:
    obj = resolved["objects"]
    lattice = obj["lattice"]
    sites = obj["count_sites"]
    sample = simulate_ness(
        _forward_config(resolved, [CountSeries(tuple(sites))])
    )
    report = poisson_count_test(sample.count_series, resolved["alpha"])
    coords = _coord_header(lattice.dimension)
    rows = []
    for k, site in enumerate(sites):
        for count in range(report.cap + 1):
            rows.append(
                list(site)
                + [count, report.distribution[k, count],
                   report.reference_pmf[count]]
            )
    write_csv(
        os.path.join(out_dir, "counts.csv"),
        coords + ["count", "empirical_pmf", "reference_pmf"],
        rows,
    )
    corr = report.correlations
    off_diag = corr[~np.eye(len(sites), dtype=bool)] if len(sites) > 1 else np.array([])
    finite_off = off_diag[np.isfinite(off_diag)]
    return {
        "alpha": report.alpha,
        "cap": report.cap,
        "records": report.n_samples,
        "tv_distance": [float(t) for t in report.tv],
        "max_tv_distance": float(report.tv.max()),
        "tail_mass": [float(t) for t in report.tail_mass],
        "correlations": corr,
        "max_abs_correlation": (
            float(np.abs(finite_off).max()) if finite_off.size else None
        ),
    }


def _run_conditional_lte(resolved: dict, out_dir: str) -> dict:
    obj = resolved["objects"]
    lattice, temp = obj["lattice"], obj["temp"]
    site = obj["site"]
    K = resolved["K"]
    max_slots = max(8, K + 4)
    sample = simulate_ness(
        _forward_config(resolved, [JointAtSite(site, max_particles=max_slots)])
    )
    report = conditional_energy_moments(
        sample, site, K, resolved["orders"], batches=resolved["batches"]
    )
    field = solve_discrete_harmonic(lattice, temp)
    u_site = field.value_at(site)
    worst = exponential_moment_distance(report, u_site)
    write_csv(
        os.path.join(out_dir, "moments.csv"),
        ["order", "empirical", "reference", "std_error", "rel_deviation"],
        (
            [
                "_".join(str(c) for c in order),
                report.empirical[order],
                report.reference[order],
                report.std_errors[order],
                abs(report.empirical[order] - report.reference[order])
                / report.reference[order],
            ]
            for order in report.orders
        ),
    )
    return {
        "site": list(site),
        "K": K,
        "occurrences": report.samples,
        "records": sample.records,
        "local_temperature": u_site,
        "max_rel_deviation": float(worst),
        "method": report.method,
    }


def _run_sticking_tail(resolved: dict, out_dir: str) -> dict:
    obj = resolved["objects"]
    lattice = obj["lattice"]
    rng = Rng.from_seed(resolved["seed"], 0)
    kappas = pair_sticking_time_sample(
        lattice,
        resolved["particles"],
        rng,
        episodes=resolved["episodes"],
        start=obj.get("start"),
        step_cap=resolved["step_cap"],
    )
    write_csv(
        os.path.join(out_dir, "kappa.csv"),
        ["episode", "kappa"],
        ([i, int(k)] for i, k in enumerate(kappas)),
    )
    n = len(kappas)
    never = kappas < 0  # pair absorbed jointly: never separated
    tail = []
    for k in range(1, 11):
        exceed = float(((kappas > k) | never).sum()) / n
        se = float(np.sqrt(exceed * (1 - exceed) / n))
        bound = (2.0 / 3.0) ** ((k - 1) / 2.0)
        tail.append({
            "k": k,
            "empirical": exceed,
            "std_error": se,
            "bound": bound,
            "excess_sigmas": (exceed - bound) / se if se > 0 else None,
        })
    finite = kappas[~never]
    return {
        "episodes": n,
        "joint_absorptions": int(never.sum()),
        "mean_kappa": float(finite.mean()) if finite.size else None,
        "tail": tail,
    }


EXPERIMENTS = {
    "forward-ness": _run_forward_ness,
    "equilibrium-check": _run_equilibrium_check,
    "dual-hitting": _run_dual_hitting,
    "harmonic": _run_harmonic,
    "duality-check": _run_duality_check,
    "poisson-check": _run_poisson_check,
    "conditional-lte": _run_conditional_lte,
    "sticking-tail": _run_sticking_tail,
}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _apply_overrides(raw: dict, args: argparse.Namespace) -> dict:
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.replicas is not None:
        raw["replicas"] = args.replicas
    if args.workers is not None:
        raw["workers"] = args.workers
    if args.out_dir is not None:
        out = raw.get("output")
        if not isinstance(out, dict):
            out = {}
        out["dir"] = args.out_dir
        raw["output"] = out
    return raw


def cmd_run(args: argparse.Namespace) -> int:
    raw = _apply_overrides(load_config(args.config), args)
    resolved = resolve_config(raw)
    out_dir = resolved["output"]["dir"]
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise IoFailureError(f"cannot create {out_dir}: {exc}") from exc

    _written.clear()
    results = EXPERIMENTS[resolved["experiment"]](resolved, out_dir)
    summary_path = os.path.join(out_dir, "summary.json")
    write_json(summary_path, _summary_envelope(resolved, results))
    for path in _written:
        print(path)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    raw = _apply_overrides(load_config(args.config), args)
    try:
        resolved = resolve_config(raw)
    except (ConfigInvalidError, IoFailureError):
        raise
    except HeatLatticeError as exc:
        # domain construction failures are config problems here
        raise ConfigInvalidError(f"config does not build: {exc}") from exc
    echo = {k: v for k, v in resolved.items() if k != "objects"}
    diagnostics = [
        f"{resolved['derived']['n_sites']} interior sites, "
        f"{resolved['derived']['n_bath']} bath vertices",
        f"{resolved['particles']} particles "
        f"(density {resolved['density']:.6g})",
    ]
    print(json.dumps(
        _scrub({
            "valid": True,
            "config_hash": config_hash(resolved),
            "resolved": echo,
            "diagnostics": diagnostics,
        }),
        indent=2,
        allow_nan=False,
    ))
    return 0


def _emit_error(exc: HeatLatticeError) -> None:
    payload = {"code": exc.code, "message": str(exc)}
    field = getattr(exc, "field", None)
    if field:
        payload["field"] = field
    print(json.dumps({"error": payload}), file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="Stochastic heat-lattice experiments from YAML configs.",
    )
    parser.add_argument(
        "--version", action="version", version=f"{TOOL_NAME} {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_text in (
        ("run", cmd_run, "run an experiment and write its outputs"),
        ("validate", cmd_validate, "check a config without running it"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to the YAML config")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--replicas", type=int, default=None,
                       help="override the replica count")
        p.add_argument("--out-dir", default=None,
                       help="override the output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="thread count for replica runs")
        p.set_defaults(fn=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigInvalidError as exc:
        _emit_error(exc)
        return 2
    except IoFailureError as exc:
        _emit_error(exc)
        return 3
    except HeatLatticeError as exc:
        _emit_error(exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
