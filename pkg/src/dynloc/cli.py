"""Command-line driver: one experiment per run, CSV/text outputs plus a manifest."""

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .analysis import DLConfig, correlation_study, lambda_sweep, layer_width
from .classical import psos, psos_grid
from .config import EXPERIMENTS, ConfigError, RunConfig, describe_defaults, parse_config
from .forcing import (ScaledParams, impulse_closed_form, impulse_quadrature, normalization,
                      normalized_impulse, force)
from .quantum import PhaseSpaceGrid, SpatialGrid, qsos_average, qsos_sequence

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

TWO_PI = 2.0 * math.pi


def fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


class _Writer:
    """Tracks files written during a run so a failed run leaves nothing behind."""

    def __init__(self, outdir):
        self.outdir = outdir
        self.files = []

    def path(self, name):
        p = os.path.join(self.outdir, name)
        self.files.append(p)
        return p

    def table(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])

    def husimi(self, name, h):
        rows = ((x, p, h.values[i, j]) for i, x in enumerate(h.window.x)
                for j, p in enumerate(h.window.p))
        self.table(name, ["x", "p", "value"], rows)

    def cleanup(self):
        for p in self.files:
            if os.path.exists(p):
                os.remove(p)


def _dl_config(cfg):
    return DLConfig(
        ensemble_size=cfg.ensemble_size, seed=cfg.seed, n_periods=cfg.n_periods,
        classical_steps=cfg.classical_steps, n_packets=cfg.n_packets,
        grid=SpatialGrid(cfg.n_cells, cfg.points_per_cell), quantum_steps=cfg.quantum_steps,
        window=cfg.avg_window, workers=cfg.threads or -1,
    )


def _window(cfg):
    return PhaseSpaceGrid.uniform(cfg.husimi_nx, cfg.husimi_np, p_range=(cfg.p_min, cfg.p_max))


_SWEEP_HEADER = ["m", "lambda", "dp_c", "dp_q", "dp_cmq", "impulse_norm", "layer_width"]


def _sweep_row(r):
    return [r.m, r.lam, r.dp_c, r.dp_q, r.dp_cmq, r.impulse_norm, r.layer_width]


def _waveform_table(cfg, w):
    t = np.linspace(0.0, 1.0, cfg.tau_samples)
    cols = [np.asarray(force(TWO_PI * t, m)) for m in cfg.m_values]
    header = ["t_over_T"] + [f"F_m={fmt(m)}" for m in cfg.m_values]
    w.table("waveform.csv", header, zip(t, *cols))


def _impulse_curve(cfg, w):
    rows = []
    for m in cfg.m_grid:
        rows.append([m, normalization(m), impulse_closed_form(m, TWO_PI),
                     impulse_quadrature(m, TWO_PI), normalized_impulse(m)])
    w.table("impulse.csv", ["m", "N", "I_closed", "I_quadrature", "I_normalized"], rows)


def _layer_width_curve(cfg, w):
    res = [layer_width(cfg.lam, cfg.kappa, m) for m in cfg.m_grid]
    dmax = max(r.d for r in res)
    rows = [[m, r.d, r.n_terms, r.truncation_error_bound, r.d / dmax if dmax > 0 else 0.0]
            for m, r in zip(cfg.m_grid, res)]
    w.table("layer_width.csv", ["m", "d", "n_terms", "truncation_error_bound", "d_normalized"], rows)


def _dp_sweep_lambda(cfg, w):
    recs = lambda_sweep(cfg.kappa, cfg.hbar_eff, cfg.m_values, cfg.lambda_grid, _dl_config(cfg))
    w.table("dp_sweep_lambda.csv", _SWEEP_HEADER, (_sweep_row(r) for r in recs))


def _dp_sweep_m(cfg, w):
    recs = correlation_study(cfg.kappa, cfg.lam, cfg.hbar_eff, cfg.m_grid, _dl_config(cfg))
    header = _SWEEP_HEADER + ["layer_width_3_5", "impulse_3_4"]
    rows = (_sweep_row(r) + [0.6 * r.layer_width, 0.75 * r.impulse_norm] for r in recs)
    w.table("dp_sweep_m.csv", header, rows)


def _psos(cfg, w):
    ic = psos_grid(cfg.psos_nx, cfg.psos_np, (cfg.p_min, cfg.p_max))
    s = psos(ic, cfg.psos_periods, cfg.params, cfg.classical_steps)
    rows = ((i, j + 1, s.x[i, j], s.p[i, j]) for i in range(s.x.shape[0]) for j in range(s.n_periods))
    w.table("psos.csv", ["orbit", "strobe", "x", "p"], rows)


def _qsos(cfg, w):
    grid = SpatialGrid(cfg.n_cells, cfg.points_per_cell)
    h = qsos_average(cfg.x0, cfg.p0, cfg.n_periods, cfg.params, _window(cfg), grid,
                     cfg.quantum_steps, cfg.alpha, cfg.threads or -1)
    w.husimi("qsos.csv", h)


def _qsos_sequence(cfg, w):
    grid = SpatialGrid(cfg.n_cells, cfg.points_per_cell)
    frames = qsos_sequence(cfg.x0, cfg.p0, cfg.n_periods, cfg.params, _window(cfg), grid,
                           cfg.quantum_steps, cfg.alpha, cfg.threads or -1)
    for f in frames:
        w.husimi(f"qsos_strobe_{f.meta['period']:03d}.csv", f.renormalized())
    orbit = psos([[cfg.x0, cfg.p0]], cfg.n_periods, cfg.params, cfg.classical_steps)
    w.table("orbit.csv", ["strobe", "x", "p"],
            ((j + 1, orbit.x[0, j], orbit.p[0, j]) for j in range(cfg.n_periods)))


_RUNNERS = {
    "waveform_table": _waveform_table,
    "impulse_curve": _impulse_curve,
    "layer_width_curve": _layer_width_curve,
    "dp_sweep_lambda": _dp_sweep_lambda,
    "dp_sweep_m": _dp_sweep_m,
    "psos": _psos,
    "qsos": _qsos,
    "qsos_sequence": _qsos_sequence,
}
assert set(_RUNNERS) == set(EXPERIMENTS)


def _set_threads(n):
    import numba
    cap = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(cap if n == 0 else min(n, cap))


def run(cfg):
    """Execute one experiment; returns the list of files written (manifest last)."""
    outdir = cfg.output_path
    os.makedirs(outdir, exist_ok=True)
    _set_threads(cfg.threads)
    w = _Writer(outdir)
    t0 = time.perf_counter()
    try:
        _RUNNERS[cfg.experiment](cfg, w)
        manifest = {
            "code": "dynloc",
            "version": __version__,
            "experiment": cfg.experiment,
            "seed": cfg.seed,
            "config": cfg.to_dict(),
            "outputs": [os.path.basename(p) for p in w.files],
            "wall_time_s": time.perf_counter() - t0,
        }
        with open(w.path("manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except BaseException:
        w.cleanup()
        raise
    return w.files


def build_parser():
    p = argparse.ArgumentParser(
        prog="dynloc",
        description="Dynamical localisation in an elliptic-driven shaken lattice.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="config keys (flat 'key = value' file, '#' comments):\n" + describe_defaults(),
    )
    p.add_argument("--config", metavar="PATH", help="run configuration file")
    p.add_argument("--output", metavar="DIR", help="output directory (overrides output_path)")
    p.add_argument("--seed", type=int, metavar="N", help="RNG seed (overrides config)")
    p.add_argument("--threads", type=int, metavar="N", help="worker threads, 0 = auto")
    p.add_argument("--experiment", choices=EXPERIMENTS, help="experiment (overrides config)")
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses status 2 for usage errors; here that is a validation error
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = parse_config(text).with_overrides(
            experiment=args.experiment, output_path=args.output, seed=args.seed,
            threads=args.threads,
        )
    except (ConfigError, OSError, UnicodeDecodeError) as exc:
        print(f"dynloc: configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        files = run(cfg)
    except Exception as exc:
        print(f"dynloc: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"dynloc: {cfg.experiment} wrote {len(files)} files to {cfg.output_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
