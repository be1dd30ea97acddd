"""Command-line surface: theory | simulate | validate | optimize.

Every run is described by a manifest (command, config, seed, sweep axes,
budgets) that is hashed and echoed into the output header, so a result file
pins down exactly what produced it. Sweep points fan out over a worker pool
at point granularity; each point draws its seed from the master seed and the
point's own parameters, so adding points never changes existing rows.

Exit codes: 0 ok, 1 configuration error, 2 validation failure, 3 all
simulated points censored.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import multiprocessing
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, dump_config, load_config, parse_config
from .optimizer import optimize_frontier
from .params import ChainTopology, RgsParams, photon_count
from .results import write_trial_log
from .sim_ape import ApeChain, estimate_ape
from .sim_ion import HOP_BY_HOP, TWO_STEP, IonChain, estimate
from .theory_ape import egr_ape, fidelity_ape
from .theory_ion import egr_1g, expected_cycle_time, expected_fidelity_1g

__all__ = ["main", "RunManifest"]

FORMAT_VERSION = 1


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce one CLI invocation."""

    command: str
    paradigm: str
    config_path: str | None
    seed: int
    distances_km: tuple[float, ...]
    repeaters: tuple[int, ...]
    rgs_shapes: tuple[tuple[int, int, int], ...]
    protocol: str
    iterations: int
    success_target: int
    max_iterations: int
    photon_budget: int
    out_path: str | None
    trial_log_path: str | None
    workers: int

    def to_json(self) -> str:
        # output locations and worker fan-out do not influence results, so
        # they stay out of the reproducibility echo and its hash
        payload = dataclasses.asdict(self)
        for key in ("out_path", "trial_log_path", "workers"):
            payload.pop(key)
        return json.dumps(payload, sort_keys=True)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def point_seed(master_seed: int, *key) -> int:
    """Stable per-point seed: independent of sweep composition and order."""
    material = json.dumps([master_seed, *key], sort_keys=True).encode()
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok)


def _parse_ints(text: str) -> tuple[int, ...]:
    out: list[int] = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "-" in tok[1:]:
            lo, hi = tok.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(tok))
    return tuple(out)


def _parse_rgs(values: list[str] | None) -> tuple[tuple[int, int, int], ...]:
    if not values:
        return ()
    shapes = []
    for text in values:
        parts = [int(tok) for tok in text.split(",")]
        if len(parts) != 3:
            raise ConfigError(f"--rgs expects m,b0,b1 triples, got '{text}'")
        shapes.append(tuple(parts))
    return tuple(shapes)


def _write_csv(path, manifest: RunManifest, header: list[str], rows: list[list]):
    out = sys.stdout if path is None else open(path, "w", newline="")
    try:
        out.write(f"# repeatersim {__version__} format={FORMAT_VERSION}\n")
        out.write(f"# seed: {manifest.seed}\n")
        out.write(f"# manifest_hash: {manifest.digest}\n")
        out.write(f"# manifest: {manifest.to_json()}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if path is not None:
            out.close()


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _topology(config: RunConfig, distance_km: float, n: int) -> ChainTopology:
    return dataclasses.replace(
        config.topology, chain_length_km=distance_km, n_repeaters=n
    )


# --- subcommands -------------------------------------------------------------


def cmd_theory(manifest: RunManifest, config: RunConfig) -> tuple[list[str], list[list]]:
    rows = []
    if manifest.paradigm == "ion":
        header = [
            "paradigm", "distance_km", "n", "egr_hz", "fidelity",
            "p_suc", "t_exp_s",
        ]
        for distance in manifest.distances_km:
            for n in manifest.repeaters:
                topo = _topology(config, distance, n)
                breakdown = expected_cycle_time(config.trapped_ion, topo)
                rows.append([
                    "ion", _fmt(distance), n,
                    _fmt(egr_1g(config.trapped_ion, topo)),
                    _fmt(expected_fidelity_1g(config.trapped_ion, topo)),
                    _fmt(breakdown.p_suc), _fmt(breakdown.t_exp_total),
                ])
        return header, rows
    header = [
        "paradigm", "distance_km", "n", "m", "b0", "b1", "photons",
        "egr_hz", "fidelity", "p_rgs", "t_rgs_s", "mq_e",
    ]
    for distance in manifest.distances_km:
        for n in manifest.repeaters:
            for shape in manifest.rgs_shapes:
                rgs = RgsParams(*shape)
                topo = _topology(config, distance, n)
                rate = egr_ape(config.ape, topo, rgs)
                fid = fidelity_ape(config.ape, topo, rgs)
                rows.append([
                    "ape", _fmt(distance), n, rgs.m, rgs.b0, rgs.b1,
                    photon_count(rgs), _fmt(rate.egr), _fmt(fid.fbar),
                    _fmt(rate.p_rgs), _fmt(rate.t_rgs_s), rate.mq_e,
                ])
    return header, rows


def _simulate_ion_point(args):
    config_blob, distance, n, protocol, iterations, seed, keep_trials = args
    config = parse_config(json.loads(config_blob))
    topo = _topology(config, distance, n)
    chain = IonChain.build(config.trapped_ion, topo)
    result, records = estimate(
        chain,
        iterations=iterations,
        seed=seed,
        protocol=protocol,
        keep_trials=keep_trials,
    )
    row = [
        _fmt(result.distance_km), result.n, result.protocol,
        _fmt(result.egr_hz), _fmt(result.egr_sem), _fmt(result.fidelity),
        _fmt(result.fidelity_sem), result.iterations, result.successes,
        result.seed,
    ]
    return row, records, False


def _simulate_ape_point(args):
    config_blob, distance, n, shape, success_target, max_iterations, seed, keep_trials = args
    config = parse_config(json.loads(config_blob))
    topo = _topology(config, distance, n)
    chain = ApeChain.build(config.ape, topo, RgsParams(*shape))
    result, records = estimate_ape(
        chain,
        seed=seed,
        success_target=success_target,
        max_iterations=max_iterations,
        keep_trials=keep_trials,
    )
    row = [
        _fmt(result.distance_km), result.n, result.m, result.b0, result.b1,
        _fmt(result.egr_hz), _fmt(result.success_prob), _fmt(result.fidelity),
        _fmt(result.fidelity_sem), result.iterations, result.successes,
        _fmt(result.censored), result.seed,
    ]
    return row, records, result.censored


ION_SIM_HEADER = [
    "distance_km", "n", "protocol", "egr_hz", "egr_sem", "fidelity",
    "fidelity_sem", "iterations", "successes", "seed",
]
APE_SIM_HEADER = [
    "distance_km", "n", "m", "b0", "b1", "egr_hz", "success_prob", "fidelity",
    "fidelity_sem", "iterations", "successes", "censored", "seed",
]


def cmd_simulate(manifest: RunManifest, config: RunConfig):
    config_blob = json.dumps(dump_config(config))
    keep = manifest.trial_log_path is not None
    if manifest.paradigm == "ion":
        header = ION_SIM_HEADER
        points = [
            (
                config_blob, distance, n, manifest.protocol, manifest.iterations,
                point_seed(manifest.seed, "ion", manifest.protocol, distance, n),
                keep,
            )
            for distance in manifest.distances_km
            for n in manifest.repeaters
        ]
        worker = _simulate_ion_point
    else:
        header = APE_SIM_HEADER
        points = [
            (
                config_blob, distance, n, shape, manifest.success_target,
                manifest.max_iterations,
                point_seed(manifest.seed, "ape", distance, n, list(shape)),
                keep,
            )
            for distance in manifest.distances_km
            for n in manifest.repeaters
            for shape in manifest.rgs_shapes
        ]
        worker = _simulate_ape_point
    if manifest.workers > 1:
        with multiprocessing.Pool(manifest.workers) as pool:
            outcomes = pool.map(worker, points)
    else:
        outcomes = [worker(point) for point in points]
    rows = [row for row, _, _ in outcomes]
    censored_flags = [censored for _, _, censored in outcomes]
    if manifest.trial_log_path is not None:
        records = [rec for _, recs, _ in outcomes for rec in recs]
        write_trial_log(manifest.trial_log_path, records)
    all_censored = bool(censored_flags) and all(censored_flags)
    return header, rows, all_censored


def _z_score(measured: float, expected: float, sem: float | None) -> float:
    """(measured - expected)/sem; a zero sem passes only an exact match."""
    diff = measured - expected
    if not sem:
        return 0.0 if abs(diff) < 1e-9 else float("inf")
    return diff / sem


def validate_points(
    manifest: RunManifest,
    config: RunConfig,
    sim_config: RunConfig | None = None,
) -> dict:
    """Cross-validate simulation against theory, point by point.

    ``sim_config`` lets tests inject a deliberate mismatch (negative
    control); the CLI always passes the same config to both sides.
    """
    import math

    sim_config = sim_config or config
    report_points = []
    for distance in manifest.distances_km:
        for n in manifest.repeaters:
            if manifest.paradigm == "ion":
                topo = _topology(config, distance, n)
                sim_topo = _topology(sim_config, distance, n)
                chain = IonChain.build(sim_config.trapped_ion, sim_topo)
                seed = point_seed(manifest.seed, "ion", manifest.protocol, distance, n)
                result, _ = estimate(
                    chain, iterations=manifest.iterations, seed=seed,
                    protocol=manifest.protocol,
                )
                th_egr = egr_1g(config.trapped_ion, topo)
                th_fid = expected_fidelity_1g(config.trapped_ion, topo)
                z_rate = _z_score(result.egr_hz, th_egr, result.egr_sem)
                z_fid = _z_score(
                    result.fidelity if result.fidelity is not None else float("nan"),
                    th_fid,
                    result.fidelity_sem,
                )
                point = {
                    "paradigm": "ion", "distance_km": distance, "n": n,
                    "sim_egr_hz": result.egr_hz, "theory_egr_hz": th_egr,
                    "z_rate": z_rate,
                    "sim_fidelity": result.fidelity, "theory_fidelity": th_fid,
                    "z_fidelity": z_fid,
                }
            else:
                for shape in manifest.rgs_shapes:
                    rgs = RgsParams(*shape)
                    topo = _topology(config, distance, n)
                    sim_topo = _topology(sim_config, distance, n)
                    chain = ApeChain.build(sim_config.ape, sim_topo, rgs)
                    seed = point_seed(manifest.seed, "ape", distance, n, list(shape))
                    result, _ = estimate_ape(
                        chain, seed=seed,
                        success_target=manifest.success_target,
                        max_iterations=manifest.max_iterations,
                    )
                    rate = egr_ape(config.ape, topo, rgs)
                    th_fid = fidelity_ape(config.ape, topo, rgs).fbar
                    p_sem = math.sqrt(
                        result.success_prob * (1.0 - result.success_prob)
                        / result.iterations
                    )
                    z_rate = _z_score(result.success_prob, rate.p_rgs, p_sem)
                    z_fid = _z_score(
                        result.fidelity if result.fidelity is not None else float("nan"),
                        th_fid,
                        result.fidelity_sem,
                    )
                    point = {
                        "paradigm": "ape", "distance_km": distance, "n": n,
                        "rgs": list(shape),
                        "sim_success_prob": result.success_prob,
                        "theory_p_rgs": rate.p_rgs, "z_rate": z_rate,
                        "sim_fidelity": result.fidelity,
                        "theory_fidelity": th_fid, "z_fidelity": z_fid,
                        "censored": result.censored,
                    }
                    point["pass"] = (
                        abs(point["z_rate"]) <= 3.0
                        and abs(point["z_fidelity"]) <= 3.0
                        and not result.censored
                    )
                    report_points.append(point)
                continue
            point["pass"] = abs(point["z_rate"]) <= 3.0 and abs(point["z_fidelity"]) <= 3.0
            report_points.append(point)
    return {
        "manifest_hash": manifest.digest,
        "points": report_points,
        "all_pass": all(p["pass"] for p in report_points),
    }


def cmd_validate(manifest: RunManifest, config: RunConfig) -> dict:
    return validate_points(manifest, config)


def cmd_optimize(manifest: RunManifest, config: RunConfig):
    header = ["n", "m", "b0", "b1", "photons", "egr", "baseline_egr", "crossover_n"]
    rows = []
    for distance in manifest.distances_km:
        topo = _topology(config, distance, 0)
        result = optimize_frontier(
            config.ape, topo, manifest.photon_budget, manifest.repeaters
        )
        for entry in result.frontier:
            rows.append([
                entry.n_repeaters, entry.rgs.m, entry.rgs.b0, entry.rgs.b1,
                entry.photons, _fmt(entry.egr), _fmt(result.baseline_egr),
                _fmt(result.crossover_n),
            ])
    return header, rows


# --- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repeatersim",
        description="Rate/fidelity models and Monte Carlo simulation of quantum repeater chains",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("theory", "simulate", "validate", "optimize"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=1, help="master seed (u64)")
        p.add_argument("--iterations", type=int, default=1500,
                       help="iteration budget per trapped-ion sweep point")
        p.add_argument("--out", type=str, default=None, help="output path (stdout if omitted)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--paradigm", choices=("ion", "ape"), default="ion")
        p.add_argument("--protocol", choices=(TWO_STEP, HOP_BY_HOP), default=TWO_STEP)
        p.add_argument("--distances", type=str, default=None, help="comma list of km")
        p.add_argument("--repeaters", type=str, default=None,
                       help="comma list / a-b ranges of repeater counts")
        p.add_argument("--rgs", action="append", default=None, help="m,b0,b1 (repeatable)")
        p.add_argument("--success-target", type=int, default=3000,
                       help="success budget per all-photonic sweep point")
        p.add_argument("--max-iterations", type=int, default=2_000_000,
                       help="iteration cap per all-photonic sweep point (censoring)")
        p.add_argument("--budget", type=int, default=300, help="photon budget (optimize)")
        p.add_argument("--trial-log", type=str, default=None, help="JSONL trial log path")
    return parser


def manifest_from_args(args, config: RunConfig) -> RunManifest:
    distances = (
        _parse_floats(args.distances)
        if args.distances
        else (config.topology.chain_length_km,)
    )
    repeaters = (
        _parse_ints(args.repeaters) if args.repeaters else (config.topology.n_repeaters,)
    )
    shapes = _parse_rgs(args.rgs) or (config.rgs.as_tuple(),)
    return RunManifest(
        command=args.command,
        paradigm=args.paradigm,
        config_path=args.config,
        seed=args.seed,
        distances_km=distances,
        repeaters=repeaters,
        rgs_shapes=shapes,
        protocol=args.protocol,
        iterations=args.iterations,
        success_target=args.success_target,
        max_iterations=args.max_iterations,
        photon_budget=args.budget,
        out_path=args.out,
        trial_log_path=args.trial_log,
        workers=args.workers,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else parse_config({})
        manifest = manifest_from_args(args, config)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "theory":
            header, rows = cmd_theory(manifest, config)
            _write_csv(manifest.out_path, manifest, header, rows)
            return 0
        if args.command == "simulate":
            header, rows, all_censored = cmd_simulate(manifest, config)
            _write_csv(manifest.out_path, manifest, header, rows)
            return 3 if all_censored else 0
        if args.command == "validate":
            report = cmd_validate(manifest, config)
            blob = json.dumps(report, indent=2, sort_keys=True)
            if manifest.out_path:
                Path(manifest.out_path).write_text(blob + "\n")
            else:
                print(blob)
            return 0 if report["all_pass"] else 2
        if args.command == "optimize":
            header, rows = cmd_optimize(manifest, config)
            _write_csv(manifest.out_path, manifest, header, rows)
            return 0
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
