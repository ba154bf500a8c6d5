"""Command-line driver.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .atomic import SingularSystemError, coupled_mode_matrix, write_coefficients_csv
from .detection import (ChannelError, ChannelModel, CoincidenceHistogram, analyze_histogram,
                        expected_counts, params_hash, synthesize_histogram)
from .observables import GridError, bin_average, run_point
from .params import (ConfigError, DetectionParams, FrequencyGrid, PhysicalParams, UnitSystem,
                     derived_times, load_config, params_from_dict, params_to_dict)
from .presets import PRESETS, SWEEP_DELTA_C, SWEEP_PRESETS, preset, scenario_delta_k_L
from .propagation import OscillationThresholdError, scattering_matrix, write_scattering_csv
from .validate import run_validate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
NUMERIC_ERRORS = (SingularSystemError, OscillationThresholdError, GridError, FloatingPointError,
                  np.linalg.LinAlgError)
SWEEPABLE = ("od", "omega_c", "omega_d", "delta_c", "delta_d", "gamma21", "delta_k_L")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class Setup:
    phys: PhysicalParams
    det: DetectionParams
    grid: FrequencyGrid
    units: UnitSystem
    source: str


def load_setup(args) -> Setup:
    if args.config and args.preset:
        raise UsageError("give either --config or --preset, not both")
    if args.preset:
        try:
            doc = preset(args.preset)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
        return Setup(*params_from_dict(doc), source=f"preset:{args.preset}")
    if args.config:
        try:
            return Setup(*load_config(args.config), source=str(args.config))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    raise UsageError("one of --config or --preset is required")


def _prepare_out(out: str, names: list[str], force: bool) -> Path:
    d = Path(out)
    if d.exists() and not d.is_dir():
        raise UsageError(f"--out {out} exists and is not a directory")
    clash = [n for n in names if (d / n).exists()]
    if clash and not force:
        raise UsageError(f"refusing to overwrite {', '.join(clash)} in {out} (use --force)")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _clean(x):
    """JSON-safe value: NaN/inf become null, numpy scalars become Python."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n",
                    encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating))
                                               else v) for v in row])


def point_summary(setup: Setup, phys: PhysicalParams | None = None):
    phys = setup.phys if phys is None else phys
    sp, wp = run_point(phys, setup.grid, setup.units, bin_s=setup.det.time_bin_s)
    times = derived_times(phys, setup.units)
    summary = dict(wp.summary())
    summary.update(
        r_b_times_r_p=wp.r_b * wp.r_p,
        r_p_frequency=wp.r_p_frequency,
        tau_EIT_s=times["tau_EIT"],
        tau_R_s=times["tau_R"],
        edge_ratio=sp.edge_ratio,
    )
    return sp, wp, summary


def cmd_wavepacket(args) -> int:
    setup = load_setup(args)
    names = ["summary.json", "wavepacket.csv", "spectra.csv"]
    if args.debug_dump:
        names += ["coefficients.csv", "scattering.csv"]
    out = _prepare_out(args.out, names, args.force)
    sp, wp, summary = point_summary(setup)
    summary["config"] = params_to_dict(setup.phys, setup.det, setup.grid, setup.units)
    summary["source"] = setup.source
    _write_json(out / "summary.json", summary)
    _write_csv(out / "wavepacket.csv", ["tau_s", "g2", "R_C"], zip(wp.tau_s, wp.g2, wp.r_c))
    _write_csv(out / "spectra.csv",
               ["omega_over_Gamma", "Rs_spec", "Ras_spec", "fwm_part_s", "fwm_part_as",
                "noise_part_s", "noise_part_as"],
               zip(sp.omega, sp.r_tilde_s, sp.r_tilde_as, sp.fwm_s, sp.fwm_as, sp.noise_s,
                   sp.noise_as))
    if args.debug_dump:
        cm = coupled_mode_matrix(setup.phys, sp.omega)
        write_coefficients_csv(cm, out / "coefficients.csv")
        write_scattering_csv(scattering_matrix(cm), out / "scattering.csv")
    print(json.dumps(_clean(wp.summary()), sort_keys=True))
    return EXIT_OK


def parse_sweep(text: str) -> tuple[str, list[float]]:
    """``name=start:stop:step`` (stop inclusive) or ``name=v1,v2,...``."""
    name, sep, spec = text.partition("=")
    name = name.strip()
    if not sep:
        raise UsageError(f"--sweep must look like name=start:stop:step, got {text!r}")
    if name not in SWEEPABLE:
        raise UsageError(f"cannot sweep {name!r}; choose from {', '.join(SWEEPABLE)}")
    spec = spec.strip()
    try:
        if ":" in spec:
            parts = [float(x) for x in spec.split(":")]
            if len(parts) != 3 or parts[2] == 0:
                raise ValueError
            start, stop, step = parts
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [round(start + k * step, 12) for k in range(max(n, 0))]
        else:
            values = [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"malformed sweep values {spec!r}") from None
    if not values:
        raise UsageError("sweep value list is empty")
    return name, values


def _sweep_point(job):
    setup, name, value, dkl = job
    changes = {name: value}
    if dkl is not None:
        changes["delta_k_L"] = dkl
    try:
        phys = setup.phys.with_(**changes)
        _, wp, s = point_summary(setup, phys)
        return [s["tau_delay_s"], s["r_p"], s["r_b"], s["r_b_times_r_p"], s["sbr"], ""]
    except NUMERIC_ERRORS + (ConfigError,) as exc:
        return [None] * 5 + [f"{type(exc).__name__}: {exc}"]


def cmd_sweep(args) -> int:
    setup = load_setup(args)
    if args.sweep is None:
        if args.preset in SWEEP_PRESETS:
            name, values = "delta_c", list(SWEEP_DELTA_C)
        else:
            raise UsageError("--sweep is required unless a sweep preset (fig3, fig5) is used")
    else:
        name, values = parse_sweep(args.sweep)
    if args.scenarios and name == "delta_k_L":
        raise UsageError("--scenarios already varies delta_k_L")
    out = _prepare_out(args.out, ["sweep.csv"], args.force)
    scen = list(scenario_delta_k_L()) if args.scenarios else [None]
    jobs = [(setup, name, v, dkl) for dkl in scen for v in values]
    workers = max(1, min(args.workers or os.cpu_count() or 1, len(jobs)))
    if workers == 1:
        results = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    header = [name, "tau_delay_s", "r_p", "r_b", "r_b_times_r_p", "sbr", "error"]
    rows = []
    for (_, _, v, dkl), res in zip(jobs, results):
        row = [v] + res
        if args.scenarios:
            row = [round(dkl / math.pi, 12)] + row
        rows.append(row)
    if args.scenarios:
        header = ["delta_k_L_over_pi"] + header
    _write_csv(out / "sweep.csv", header, rows)
    failed = sum(1 for r in results if r[-1])
    print(f"{len(rows)} rows written to {out / 'sweep.csv'}" + (f", {failed} failed" if failed else ""))
    return EXIT_NUMERIC if failed == len(rows) else EXIT_OK


def _binned_model(setup: Setup):
    _, wp, _ = point_summary(setup)
    starts, r_c = bin_average(wp.tau_s, wp.r_c, setup.det.time_bin_s)
    ch = ChannelModel(setup.det, wp.r_s, wp.r_b)
    return starts, r_c, ch


def cmd_histogram_synth(args) -> int:
    setup = load_setup(args)
    out = _prepare_out(args.out, ["histogram.csv", "expected.csv"], args.force)
    starts, r_c, ch = _binned_model(setup)
    mean = expected_counts(r_c, ch)
    digest = params_hash(params_to_dict(setup.phys, setup.det, setup.grid, setup.units))
    h = synthesize_histogram(mean, args.seed, starts, setup.det.receptions, setup.det.time_bin_s,
                             digest)
    h.write_csv(out / "histogram.csv")
    _write_csv(out / "expected.csv", ["bin_start_s", "R_C", "expected_counts"], zip(starts, r_c, mean))
    print(f"{len(starts)} bins written to {out / 'histogram.csv'} (seed {args.seed})")
    return EXIT_OK


def cmd_histogram_analyze(args) -> int:
    setup = load_setup(args)
    try:
        h = CoincidenceHistogram.read_csv(args.histogram)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read histogram: {exc}") from None
    out = _prepare_out(args.out, ["analysis.csv", "analysis.json"], args.force)
    _, wp, _ = point_summary(setup)
    ch = ChannelModel(setup.det, wp.r_s, wp.r_b)
    res = analyze_histogram(h, ch, args.r_env)
    _write_csv(out / "analysis.csv", ["bin_start_s", "counts", "R_C_exp", "sigma"],
               zip(res.bin_start_s, h.counts, res.r_c_exp, res.sigma))
    tail = res.r_c_exp[int(0.8 * len(res.r_c_exp)):]
    _write_json(out / "analysis.json", {
        "r_env": res.r_env,
        "purity": ch.purity,
        "background_estimate": float(np.mean(tail)) if tail.size else None,
        "model_r_as": wp.r_as,
        "receptions": h.receptions,
        "delta_tau_s": h.delta_tau_s,
        "seed": h.seed,
    })
    print(f"R_env = {res.r_env:.6g} counts/s; analysis written to {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    report = run_validate(args.level)
    if args.out:
        out = _prepare_out(args.out, ["validate.json"], args.force)
        _write_json(out / "validate.json", report)
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}  ({c['value']:.3g})")
    print(f"{'all checks passed' if report['passed'] else 'some checks failed'} "
          f"in {report['elapsed_s']:.1f} s")
    return EXIT_OK if report["passed"] else EXIT_CONFIG


def cmd_presets(args) -> int:
    if args.name:
        try:
            print(json.dumps(preset(args.name), indent=2, sort_keys=True))
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
    else:
        for name in sorted(PRESETS):
            phys = PRESETS[name]["physical"]
            print(f"{name}\tomega_c={phys['omega_c']:g}\tdelta_c={phys['delta_c']:+g}")
    return EXIT_OK


def _source_args(p):
    p.add_argument("--config", metavar="PATH", help="JSON config file")
    p.add_argument("--preset", metavar="NAME", help="named preset (see 'presets')")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="biphoton", description="Biphoton generation by backward SFWM in cold atoms.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("wavepacket", help="single-point spectra, wavepacket and summary")
    _source_args(p)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.add_argument("--debug-dump", action="store_true", help="also write M(omega) and A,B,C,D")
    p.set_defaults(func=cmd_wavepacket)

    p = sub.add_parser("sweep", help="summary rows over a swept parameter")
    _source_args(p)
    p.add_argument("--sweep", metavar="SPEC", help='e.g. "delta_c=-3:3:0.5" or "delta_c=0,1,-1"')
    p.add_argument("--scenarios", action="store_true",
                   help="repeat the sweep for delta_k_L = 0, 0.37 pi and 0.74 pi")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: CPUs)")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("histogram", help="synthesize or analyze coincidence histograms")
    hs = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    q = hs.add_parser("synth", help="Poisson histogram from the model")
    _source_args(q)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True, metavar="DIR")
    q.add_argument("--force", action="store_true")
    q.set_defaults(func=cmd_histogram_synth)
    q = hs.add_parser("analyze", help="recover R_C from a histogram file")
    _source_args(q)
    q.add_argument("--histogram", required=True, metavar="PATH")
    q.add_argument("--r-env", type=float, default=None, help="measured R_env in counts/s")
    q.add_argument("--out", required=True, metavar="DIR")
    q.add_argument("--force", action="store_true")
    q.set_defaults(func=cmd_histogram_analyze)

    p = sub.add_parser("validate", help="run the invariant suite")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.add_argument("--out", metavar="DIR", help="also write validate.json here")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("presets", help="list presets or print one as JSON config")
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_presets)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, ChannelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
