"""Command-line pipelines: ``hypersource {homi-scan,qst,joint,sweep,validate-config}``.

Every run writes a result bundle to ``--out``: ``resolved_config.json``,
experiment CSV/JSON artifacts and ``summary.json``.  Artifacts depend only on
the resolved configuration, never on the worker count.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import Executor, ProcessPoolExecutor
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import __version__, homi, qmath, rng, source, spectral, tomo
from .config import ConfigError, RunConfig, load_config, parse_config
from .homi import HomiParams, HomiScan

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

NUMERIC_ERRORS = (
    homi.FitError,
    homi.GridTooCoarseError,
    source.PostSelectionError,
    source.SweepCellError,
    qmath.NonPhysicalStateError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


class NumericalFailure(RuntimeError):
    pass


# ------------------------------------------------------------------ writing


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _num(v) for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _clean(obj):
    """Plain-Python JSON value with floats kept at full precision."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def matrix_json(rho, labels=None) -> dict:
    """Row-major nested ``[re, im]`` pairs plus the basis order."""
    arr = rho.data if isinstance(rho, qmath.DensityMatrix) else np.asarray(rho)
    labels = list(labels if labels is not None else getattr(rho, "basis_labels", ()))
    return {"basis": labels,
            "data": [[[float(z.real), float(z.imag)] for z in row] for row in arr]}


def matrix_from_json(obj) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in obj["data"]])


class Bundle:
    def __init__(self, out: Path):
        self.out = Path(out)
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def write(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        for name, text in sorted(self.files.items()):
            (self.out / name).write_text(text, encoding="utf-8")


def scan_csv(scan: HomiScan) -> str:
    return _csv_text(["tau_ps", "counts", "expected_pairs"],
                     ((t / homi.PS, c, scan.pairs_per_point) for t, c in zip(scan.delays, scan.counts)))


def read_scan_csv(path) -> HomiScan:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    tau = np.array([float(r["tau_ps"]) for r in rows]) * homi.PS
    counts = np.array([float(r["counts"]) for r in rows])
    return HomiScan(tau, counts, float(rows[0]["expected_pairs"]))


def qst_csv(ds: tomo.QstDataset) -> str:
    return _csv_text(["setting_a", "setting_b", "counts", "expected_pairs"],
                     ((a, b, c, ds.pairs_per_setting) for (a, b), c in zip(ds.settings, ds.counts)))


def read_qst_csv(path) -> tomo.QstDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return tomo.QstDataset(tuple((r["setting_a"], r["setting_b"]) for r in rows),
                           np.array([float(r["counts"]) for r in rows]),
                           float(rows[0]["expected_pairs"]))


def _deg_tag(deg: float) -> str:
    return f"{deg:g}".replace("-", "m").replace(".", "p")


# ------------------------------------------------------------- experiments


def _grid(filt, cfg: RunConfig):
    return spectral.make_grid(filt, cfg.grid_points)


def _homi_job(args):
    delays, params, n, seed, noiseless, path = args
    scan = homi.simulate_scan(delays, params, n, seed, noiseless=noiseless, path=path)
    return scan, homi.fit_scan(scan, params.omega0, params.delta_omega)


def cmd_homi_scan(cfg: RunConfig, bundle: Bundle, executor: Executor | None = None) -> dict:
    sec = cfg.homi_scan
    delays = sec.delays.delays()
    filt = spectral.channel(sec.channel)
    jobs = []
    for deg in sec.phases_deg:
        params = HomiParams(sec.visibility, math.radians(deg), filt.omega0, filt.delta_omega)
        jobs.append((delays, params, sec.pairs_per_point, cfg.seed, cfg.noiseless, f"homi-scan/phi={deg!r}"))
    results = list((executor.map if executor else map)(_homi_job, jobs))
    table = []
    fits = []
    for deg, (scan, fit) in zip(sec.phases_deg, results):
        tag = _deg_tag(deg)
        bundle.add(f"homi_scan_phi{tag}.csv", scan_csv(scan))
        bundle.add(f"homi_fit_phi{tag}.json", _json_text(_clean(fit.report())))
        table.append((deg, fit.V, fit.V_sigma, fit.phi_freq, fit.phi_freq_sigma, fit.chi2_reduced))
        fits.append(_clean({"phi_target_deg": deg, **fit.report()}))
    bundle.add("homi_summary.csv", _csv_text(
        ["phi_target_deg", "V", "V_sigma", "phi_freq", "phi_freq_sigma", "chi2_reduced"], table))
    return {"channel": sec.channel, "V": [f["V"] for f in fits], "phi_freq": [f["phi_freq"] for f in fits],
            "fits": fits}


def _qst_job(args):
    rho, n, seed, noiseless, path, mle = args
    ds = tomo.simulate_qst_counts(rho, n, seed, noiseless=noiseless, path=path)
    return ds, tomo.reconstruct(ds, mle=mle)


def cmd_qst(cfg: RunConfig, bundle: Bundle, executor: Executor | None = None) -> dict:
    sec = cfg.qst
    src = cfg.source.build()
    cells = [(ch, deg) for ch in sec.channels for deg in sec.phases_deg]
    jobs = []
    truths = []
    for ch, deg in cells:
        filt = spectral.channel(ch, math.radians(deg))
        rho = source.output_polarization_rho(src, filt, _grid(filt, cfg))
        truths.append(rho)
        jobs.append((rho, sec.pairs_per_setting, cfg.seed, cfg.noiseless, f"qst/ch={ch}/phi={deg!r}", sec.mle))
    results = list((executor.map if executor else map)(_qst_job, jobs))
    rows = []
    for (ch, deg), truth, (ds, rho) in zip(cells, truths, results):
        tag = f"ch{ch}_phi{_deg_tag(deg)}"
        bundle.add(f"qst_{tag}.csv", qst_csv(ds))
        bundle.add(f"rho_pol_{tag}.json", _json_text(matrix_json(rho)))
        rows.append((ch, deg, qmath.concurrence(rho), qmath.concurrence(truth)))
    bundle.add("qst_concurrence.csv", _csv_text(["channel", "phi_freq_deg", "C_pol", "C_pol_model"], rows))
    c = np.array([r[2] for r in rows])
    slopes = {}
    for ch in sec.channels:
        sel = [(r[1], r[2]) for r in rows if r[0] == ch]
        if len(sel) >= 2:
            x, y = np.radians([s[0] for s in sel]), np.array([s[1] for s in sel])
            slopes[str(ch)] = float(np.polyfit(x, y, 1)[0]) if np.ptp(x) > 0 else 0.0
    return {"C_pol": [float(v) for v in c], "C_pol_min": float(c.min()), "C_pol_mean": float(c.mean()),
            "slope_per_rad": slopes}


_SWAP16 = np.zeros((16, 16))
for _p3 in range(2):
    for _p4 in range(2):
        for _f3 in range(2):
            for _f4 in range(2):
                _SWAP16[(2 * _p4 + _p3) * 4 + 2 * _f4 + _f3, (2 * _p3 + _p4) * 4 + 2 * _f3 + _f4] = 1.0
_ANTISYM16 = 0.5 * (np.eye(16) - _SWAP16)


def antibunched_rho(rho16) -> qmath.DensityMatrix:
    """Two-photon state conditioned on a coincidence at zero delay (antisymmetric part)."""
    arr = rho16.data if isinstance(rho16, qmath.DensityMatrix) else np.asarray(rho16)
    r = _ANTISYM16 @ arr @ _ANTISYM16
    tr = float(np.trace(r).real)
    if tr <= 1e-12:
        raise source.PostSelectionError("no antisymmetric component: nothing anti-bunches")
    return qmath.DensityMatrix.from_array(r / tr, qmath.GLOBAL_LABELS)


def _joint_homi(args):
    state, delays, visibility, n, seed, noiseless = args
    # source overlap scaled by the extra distinguishability of the interferometer
    p = 0.5 + visibility * (homi.coincidence_probability_numeric(state, delays) - 0.5)
    mean = n * np.clip(p, 0.0, 1.0)
    counts = mean if noiseless else rng.poisson_counts(mean, seed, "joint/homi")
    scan = HomiScan(delays, counts, n, seed)
    return scan, homi.fit_scan(scan, state.filter.omega0, state.filter.delta_omega)


def _joint_qst(args):
    rho, n, seed, noiseless = args
    ds = tomo.simulate_qst_counts(rho, n, seed, noiseless=noiseless, path="joint/qst")
    return ds, tomo.reconstruct(ds)


def cmd_joint(cfg: RunConfig, bundle: Bundle, executor: Executor | None = None) -> dict:
    sec = cfg.joint
    src = cfg.source.build()
    filt = spectral.channel(sec.channel, math.radians(sec.phi_freq_deg))
    state = homi.rotate_mode4(source.output_state(src, filt, _grid(filt, cfg)))
    rho16 = source.hyper_rho_of(state)
    pol_true = qmath.partial_trace(antibunched_rho(rho16), "polarization")

    jobs_h = (state, sec.delays.delays(), sec.visibility, sec.pairs_per_point, cfg.seed, cfg.noiseless)
    jobs_q = (pol_true, sec.pairs_per_setting, cfg.seed, cfg.noiseless)
    if executor is not None:
        fh, fq = executor.submit(_joint_homi, jobs_h), executor.submit(_joint_qst, jobs_q)
        (scan, fit), (ds, rho_pol) = fh.result(), fq.result()
    else:
        scan, fit = _joint_homi(jobs_h)
        ds, rho_pol = _joint_qst(jobs_q)

    # bin-resolved coincidences fix the populations of si and is
    freq_true = qmath.partial_trace(rho16, "frequency").data
    means = sec.bin_pairs * np.array([freq_true[1, 1].real, freq_true[2, 2].real])
    bins = means if cfg.noiseless else rng.poisson_counts(means, cfg.seed, "joint/bins")
    p_omega = tomo.freq_bin_fraction(float(bins[0]), float(bins[1]))

    V = min(fit.V, 1.0)
    rho_w = tomo.freq_rho_from_homi(tomo.FreqEstimate(V, fit.phi_freq, p_omega))
    F_p = min(1.0, max(0.0, qmath.fidelity_to_pure(rho_pol, tomo.PHI_P_PLUS)))
    F_omega = V
    bound = tomo.global_fidelity_lower_bound(F_p, F_omega)
    if not bound.converged:
        raise NumericalFailure("fidelity-bound SDP did not converge")

    bundle.add("homi_scan.csv", scan_csv(scan))
    bundle.add("homi_fit.json", _json_text(_clean(fit.report())))
    bundle.add("qst.csv", qst_csv(ds))
    bundle.add("bins.csv", _csv_text(["bin", "counts", "expected_pairs"],
                                     [("si", bins[0], sec.bin_pairs), ("is", bins[1], sec.bin_pairs)]))
    bundle.add("rho_pol.json", _json_text(matrix_json(rho_pol)))
    bundle.add("rho_omega.json", _json_text(matrix_json(rho_w)))
    bundle.add("bound.json", _json_text(_clean({"F_p": F_p, "F_omega": F_omega, "F_bound": bound.value,
                                                "dual": bound.dual, "iterations": bound.iterations})))
    return {
        "C_pol": qmath.concurrence(rho_pol),
        "C_freq": qmath.concurrence(rho_w),
        "V": fit.V,
        "V_sigma": fit.V_sigma,
        "phi_freq": fit.phi_freq,
        "phi_freq_sigma": fit.phi_freq_sigma,
        "p_omega": p_omega,
        "F_p": F_p,
        "F_omega": F_omega,
        "F_bound": bound.value,
        "discarded": state.discarded,
    }


_SWEEP_MAP = {
    # cli axis -> (source axis, config grid attribute, column names, scale to SI)
    "length": ("alpha1_alpha2", "length_mm", ("alpha1_mm", "alpha2_mm"), 1e-3),
    "angle": ("t1_t2", "angle_deg", ("t1_deg", "t2_deg"), math.pi / 180),
    "pump": ("pump", "pump_split", ("pump_split",), 1.0),
    "bandwidth": ("bandwidth", "bandwidth_thz", ("bandwidth_thz",), spectral.THZ),
}


def cmd_sweep(cfg: RunConfig, bundle: Bundle, executor: Executor | None = None,
              axis: str | None = None) -> dict:
    sec = cfg.sweep
    axis = sec.axis if axis is None else axis
    src_axis, attr, cols, scale = _SWEEP_MAP[axis]
    grid_vals = getattr(sec, attr).values()
    si_vals = grid_vals * scale
    values = (si_vals, si_vals) if len(cols) == 2 else si_vals
    rows = source.sweep_concurrence(cfg.source.build(), src_axis, values, sec.filter(),
                                    n_points=sec.grid_points, executor=executor)
    long_rows = []
    for row in rows:
        idx = row["index"]
        params = [grid_vals[i] for i in idx]
        c = min(1.0, max(0.0, row["C"]))
        long_rows.append((*idx, *params, c, 1.0 - c))
    idx_cols = ["i", "j"][: len(cols)]
    bundle.add("sweep_long.csv", _csv_text([*idx_cols, *cols, "C", "degradation"], long_rows))
    if len(cols) == 2:
        n = len(grid_vals)
        table = np.array([r[-2] for r in long_rows]).reshape(n, n)
        bundle.add("sweep_table.csv", _csv_text([f"{cols[0]}\\{cols[1]}", *[_num(v) for v in grid_vals]],
                                                ([x, *table[i]] for i, x in enumerate(grid_vals))))
    else:
        bundle.add("sweep_table.csv", _csv_text([cols[0], "C"], ((r[1], r[2]) for r in long_rows)))
    cs = np.array([r[-2] for r in long_rows])
    return {"axis": axis, "cells": len(long_rows), "C_pol_min": float(cs.min()), "C_pol_max": float(cs.max())}


COMMANDS = {"homi-scan": cmd_homi_scan, "qst": cmd_qst, "joint": cmd_joint, "sweep": cmd_sweep}


def run(command: str, cfg: RunConfig, out: Path, workers: int = 1) -> dict:
    """Execute one pipeline and write its bundle; returns the summary."""
    bundle = Bundle(out)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else nullcontext(None)
    with pool as executor:
        metrics = COMMANDS[command](cfg, bundle, executor)
    summary = {"command": command, "seed": cfg.seed, "version": __version__, **metrics}
    bundle.add("resolved_config.json", cfg.dumps())
    bundle.add("summary.json", _json_text(_clean(summary)))
    bundle.write()
    return summary


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hypersource", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("homi-scan", "qst", "joint", "sweep", "validate-config"):
        s = sub.add_parser(name)
        src = s.add_mutually_exclusive_group()
        src.add_argument("--config", help="JSON run configuration")
        src.add_argument("--from-bundle", help="re-run from a bundle's resolved_config.json")
        s.add_argument("--seed", type=int, help="base seed (overrides the config)")
        s.add_argument("--noiseless", action="store_true", help="use expected counts instead of Poisson draws")
        if name != "validate-config":
            s.add_argument("--out", required=True, help="output directory")
            s.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
        if name == "sweep":
            s.add_argument("--axis", choices=sorted(_SWEEP_MAP), help="overrides sweep.axis")
    return p


def _load(args) -> RunConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.noiseless:
        overrides["noiseless"] = True
    path = os.path.join(args.from_bundle, "resolved_config.json") if args.from_bundle else args.config
    text = Path(path).read_text(encoding="utf-8") if path else "{}"
    if getattr(args, "axis", None):
        raw = json.loads(text) if text.strip() else {}
        sweep = dict(raw.get("sweep") or {}) if isinstance(raw, dict) else {}
        sweep["axis"] = args.axis
        overrides["sweep"] = sweep
    return parse_config(text, overrides)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.command == "validate-config":
        sys.stdout.write(cfg.dumps())
        return EXIT_OK
    if args.workers < 1:
        print("config error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = run(args.command, cfg, Path(args.out), args.workers)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalFailure, *NUMERIC_ERRORS) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # parameter combinations the schema cannot see (e.g. overlapping bins)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(_json_text(_clean(summary)), end="")
    return EXIT_OK


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
