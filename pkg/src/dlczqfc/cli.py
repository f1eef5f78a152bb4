"""Command-line front end: every subcommand writes CSV tables plus a run manifest.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_config
from .dlcz import g2_cross_closed, retrieval_efficiency_closed, storage_calibrated_params
from .errors import ConfigError, DlczQfcError, FitError
from .fitting import fit_gaussian_decay, fit_linear_origin
from .qfc import (
    crossover_distance,
    compose_g2_with_noise,
    equivalent_fiber_length,
    eta_device,
    eta_internal,
    noise_probability,
    storage_to_fiber_length,
)
from .reference import published_table
from .rng import derive_seed
from .sim import SimulationConfig, counts_csv, simulate, simulate_coherent_input
from .stats import (
    cauchy_schwarz_R,
    g2_auto,
    g2_cross,
    max_heralding_efficiency,
    max_visibility,
    snr_from_counts,
    violation_significance,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

NAN = math.nan


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.9g}"


@dataclass(frozen=True)
class Table:
    header: tuple[str, ...]
    rows: tuple[tuple, ...]

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [row[i] for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow([format_number(v) for v in row])
        return buf.getvalue()


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    config_path: str | None
    seed: int
    out_dir: str
    version: str
    config_sha256: str
    trials: int | None = None
    mode: str | None = None
    outputs: tuple[str, ...] = ()

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        data = json.loads(text)
        data["outputs"] = tuple(data.get("outputs", ()))
        return cls(**data)


def config_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _trials(section_trials: int, override: int | None) -> int:
    return section_trials if override is None else override


def _safe(f, *args):
    try:
        return f(*args)
    except DlczQfcError:
        return None


# -- subcommands ----------------------------------------------------------------

def cmd_qfc_curve(config: RunConfig, seed: int = 0, trials: int | None = None, workers: int = 1) -> dict[str, Table]:
    sec, dev = config.qfc_curve, config.device
    grid = set(np.linspace(sec.pump_min, sec.pump_max, sec.pump_points).tolist()) if sec.pump_points > 0 else set()
    grid |= set(sec.extra_pumps)
    if sec.include_optimum:
        grid.add(dev.optimal_pump)
    rows = []
    for P in sorted(grid):
        signal = sec.mu_in * eta_device(P, dev) * dev.detector_eff
        noise = noise_probability(P, dev)
        snr = signal / noise if noise > 0 else (0.0 if signal == 0 else math.inf)
        rows.append((P, eta_internal(P, dev), eta_device(P, dev), noise, snr))
    header = ("P_pump (W)", "eta_int (1)", "eta_dev (1)", "p_N (1)", "SNR (1)")
    return {"qfc-curve.csv": Table(header, tuple(rows))}


def cmd_snr_curve(config: RunConfig, seed: int = 0, trials: int | None = None, workers: int = 1) -> dict[str, Table]:
    sec, dev = config.snr_curve, config.device
    n = _trials(sec.n_trials, trials)
    rows, points = [], []
    for i, mu in enumerate(sec.mu_values):
        model = mu * eta_device(sec.pump_power, dev) * dev.detector_eff / noise_probability(sec.pump_power, dev)
        c = simulate_coherent_input(mu, sec.pump_power, dev, n, derive_seed(seed, "snr-curve", i))
        if c.noise_clicks == 0:
            rows.append((mu, model, NAN, NAN))
            continue
        est = snr_from_counts(c.clicks / n, c.noise_clicks / n, n)
        rows.append((mu, model, est.value, est.sigma))
        points.append((mu, est.value, est.sigma))
    header = ("mu_in (1)", "SNR_model (1)", "SNR_simulated (1)", "SNR_simulated_sigma (1)")
    fit = fit_linear_origin(points)
    expected = eta_device(sec.pump_power, dev) * dev.detector_eff / noise_probability(sec.pump_power, dev)
    slope, sigma = fit["slope"]
    fit_table = Table(
        ("slope (1/photon)", "slope_sigma (1/photon)", "slope_model (1/photon)", "chi2 (1)", "dof (1)"),
        ((slope, sigma, expected, fit.chi2, fit.dof),),
    )
    return {"snr-curve.csv": Table(header, tuple(rows)), "snr-curve-fit.csv": fit_table}


def _write_efficiency(config: RunConfig, pump: float) -> float:
    dev = config.device
    return config.experiment.eta_cw * eta_internal(pump, dev) / dev.eta_int_max


def cmd_correlations(config: RunConfig, seed: int = 0, trials: int | None = None, workers: int = 1) -> dict[str, Table]:
    sec = config.correlations
    deph = config.deph()
    n = _trials(sec.n_trials, trials)
    noise = noise_probability(sec.pump_power, config.device)
    eta_w = _write_efficiency(config, sec.pump_power)
    rows = []
    for i, power in enumerate(sec.write_powers):
        params = config.experiment.with_write_power(power)
        g2_wr = g2_cross_closed(sec.storage_time, params, deph)
        signal = params.p * eta_w
        snr = signal / noise if noise > 0 else math.inf
        composed = compose_g2_with_noise(g2_wr, snr)
        sim_cfg = SimulationConfig(params, config.device, deph, sec.storage_time, n,
                                   derive_seed(seed, "correlations", i), True, sec.pump_power)
        est = _safe(g2_cross, simulate(sim_cfg, workers))
        g2_sim, g2_sigma = (est.value, est.sigma) if est is not None else (NAN, NAN)
        vis = max_visibility(composed)
        rows.append((power, params.p, g2_wr, snr, composed, g2_sim, g2_sigma,
                     max_heralding_efficiency(snr), vis.value))
    header = ("P_W (W)", "p (1)", "g2_wr_model (1)", "SNR (1)", "g2_cwr_composed (1)",
              "g2_cwr_simulated (1)", "g2_cwr_simulated_sigma (1)", "eta_h_max (1)", "V_max (1)")
    return {"correlations.csv": Table(header, tuple(rows))}


def _fit_row(name, points, **kwargs):
    try:
        res = fit_gaussian_decay(points, **kwargs)
    except FitError as exc:
        return (name, NAN, NAN, NAN, 0, False, str(exc))
    tau, sigma = res["tau"]
    return (name, tau, sigma, res.chi2, res.dof, res.converged, "; ".join(res.diagnostics))


def cmd_storage_decay(config: RunConfig, seed: int = 0, trials: int | None = None, workers: int = 1) -> dict[str, Table]:
    sec = config.storage_decay
    deph = config.deph()
    n = _trials(sec.n_trials, trials)
    params = storage_calibrated_params(config.experiment, sec.write_power, sec.g2_at_zero)
    times = np.linspace(0.0, sec.t_max, sec.t_points)
    rows, eta_points, g2_points = [], [], []
    for i, t in enumerate(times.tolist()):
        sim_cfg = SimulationConfig(params, config.device, deph, t, n,
                                   derive_seed(seed, "storage-decay", i), True, sec.pump_power)
        counts = simulate(sim_cfg, workers)
        if counts.clicks_w > 0:
            eta = counts.coincidences_wr / counts.clicks_w
            eta_sigma = math.sqrt(max(eta * (1 - eta), 1.0 / counts.clicks_w) / counts.clicks_w)
            eta_points.append((t, eta, eta_sigma))
        else:
            eta, eta_sigma = NAN, NAN
        est = _safe(g2_cross, counts)
        if est is not None and not est.one_sided:
            g2, g2_sigma = est.value, est.sigma
            g2_points.append((t, g2, g2_sigma))
        else:
            g2, g2_sigma = NAN, NAN
        rows.append((t, retrieval_efficiency_closed(t, params, deph), g2_cross_closed(t, params, deph),
                     eta, eta_sigma, g2, g2_sigma))
    header = ("t (s)", "eta_ret_model (1)", "g2_model (1)", "eta_ret_simulated (1)",
              "eta_ret_simulated_sigma (1)", "g2_simulated (1)", "g2_simulated_sigma (1)")
    fits = [
        _fit_row("eta_ret", eta_points, mode="gaussian"),
        _fit_row("g2", g2_points, mode="g2", params=params, deph=deph),
    ]
    (_, t1, s1, *_), (_, t2, s2, *_) = fits
    distance = abs(t1 - t2) / math.hypot(s1, s2) if s1 > 0 or s2 > 0 else NAN
    fit_header = ("observable", "tau (s)", "tau_sigma (s)", "chi2 (1)", "dof (1)", "converged", "note")
    fit_rows = tuple(fits) + (("configured", deph.tau, 0.0, NAN, 0, True, ""),
                              ("consistency", distance, NAN, NAN, 0, True, "|tau_eta - tau_g2| in sd"))
    return {"storage-decay.csv": Table(header, tuple(rows)),
            "storage-decay-fit.csv": Table(fit_header, fit_rows)}


TABLE1_HEADER = (
    "P_W (W)", "p_cwr (1)", "g2_cwr (1)", "g2_cwr_sigma (1)", "g2_cwcw (1)", "g2_cwcw_sigma (1)",
    "g2_rr (1)", "g2_rr_sigma (1)", "R (1)", "R_sigma (1)", "significance (sd)",
)


def _table1_row(power, p_cwr, x, a, b, extra=()):
    if a[0] > 0 and b[0] > 0:
        R = cauchy_schwarz_R(x, a, b)
        sig = violation_significance(R) if R.sigma > 0 else NAN
        r, rs = R.value, R.sigma
    else:
        r, rs, sig = NAN, NAN, NAN
    return (power, p_cwr, x[0], x[1], a[0], a[1], b[0], b[1], r, rs, sig) + tuple(extra)


def cmd_table1(config: RunConfig, seed: int = 0, trials: int | None = None, workers: int = 1) -> dict[str, Table]:
    sec = config.table1
    if sec.mode == "A":
        rows = []
        for row in published_table():
            extra = (row.R[0], row.R[1], violation_significance(row.R))
            rows.append(_table1_row(row.write_power, row.p_cw_r_percent / 100.0,
                                    row.g2_cw_r, row.g2_cw_cw, row.g2_r_r, extra))
        header = TABLE1_HEADER + ("R_published (1)", "R_published_sigma (1)", "significance_published (sd)")
        return {"table1.csv": Table(header, tuple(rows))}
    deph = config.deph()
    n = _trials(sec.n_trials, trials)
    pump = config.simulation.pump_power
    rows = []
    for i, power in enumerate(sec.write_powers):
        params = config.experiment.with_write_power(power)
        sim_cfg = SimulationConfig(params, config.device, deph, sec.storage_time, n,
                                   derive_seed(seed, "table1", i), True, pump)
        counts = simulate(sim_cfg, workers)
        nan2 = (NAN, NAN)
        x = _safe(g2_cross, counts) or nan2
        a = _safe(g2_auto, counts, "w") or nan2
        b = _safe(g2_auto, counts, "r") or nan2
        rows.append(_table1_row(power, counts.coincidences_wr / n, tuple(x), tuple(a), tuple(b)))
    return {"table1.csv": Table(TABLE1_HEADER, tuple(rows))}


def cmd_link_budget(config: RunConfig, seed: int = 0, trials: int | None = None, workers: int = 1) -> dict[str, Table]:
    sec = config.link_budget
    rows = tuple(
        (eta, equivalent_fiber_length(eta, sec.atten_telecom),
         crossover_distance(eta, sec.atten_near, sec.atten_telecom))
        for eta in sec.eta_devs
    )
    v = config.constants.fiber_group_velocity
    storage = tuple((t, storage_to_fiber_length(t, v)) for t in sec.storage_times)
    return {
        "link-budget.csv": Table(("eta_dev (1)", "equivalent_length (km)", "crossover (km)"), rows),
        "link-budget-storage.csv": Table(("t (s)", "fiber_length (km)"), storage),
    }


def cmd_simulate(config: RunConfig, seed: int = 0, trials: int | None = None, workers: int = 1,
                 config_digest: str = "") -> dict[str, str | Table]:
    sec = config.simulation
    sim_cfg = SimulationConfig(config.experiment, config.device, config.deph(), sec.storage_time,
                               _trials(sec.n_trials, trials), seed, sec.converted, sec.pump_power)
    counts = simulate(sim_cfg, workers)
    estimates = []
    for name, f in (("g2_cross", lambda: g2_cross(counts)), ("g2_auto_w", lambda: g2_auto(counts, "w")),
                    ("g2_auto_r", lambda: g2_auto(counts, "r"))):
        est = _safe(f)
        estimates.append((name, *(tuple(est) if est is not None else (NAN, NAN)),
                          est.one_sided if est is not None else False))
    return {
        "simulate-counts.csv": counts_csv(counts, config_digest, seed),
        "simulate-estimates.csv": Table(("quantity", "value (1)", "sigma (1)", "one_sided"), tuple(estimates)),
    }


COMMANDS = {
    "qfc-curve": cmd_qfc_curve,
    "snr-curve": cmd_snr_curve,
    "correlations": cmd_correlations,
    "storage-decay": cmd_storage_decay,
    "table1": cmd_table1,
    "link-budget": cmd_link_budget,
    "simulate": cmd_simulate,
}


# -- plumbing -------------------------------------------------------------------

def run(subcommand: str, config_path: str | None, seed: int | None, out_dir: str,
        trials: int | None = None, workers: int = 1, mode: str | None = None) -> RunManifest:
    """Run one subcommand, writing the manifest first and then every output."""
    raw = Path(config_path).read_bytes() if config_path else b""
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not UTF-8: {exc}") from None
    config = parse_config(text)
    if mode is not None:
        config = replace(config, table1=replace(config.table1, mode=mode))
    seed = config.simulation.seed if seed is None else seed
    if seed < 0:
        raise ConfigError("seed must be >= 0")
    if trials is not None and trials < 1:
        raise ConfigError("trials must be >= 1")
    if workers < 1:
        raise ConfigError("workers must be >= 1")

    digest = config_hash(raw)
    extra = {"config_digest": digest} if subcommand == "simulate" else {}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = _output_names(subcommand)
    manifest = RunManifest(
        subcommand=subcommand,
        config_path=str(Path(config_path).resolve()) if config_path else None,
        seed=seed,
        out_dir=str(out.resolve()),
        version=__version__,
        config_sha256=digest,
        trials=trials,
        mode=mode,
        outputs=names,
    )
    (out / f"{subcommand}.manifest.json").write_text(manifest.to_json())
    results = COMMANDS[subcommand](config, seed=seed, trials=trials, workers=workers, **extra)
    for name, content in results.items():
        text_out = content if isinstance(content, str) else content.to_csv()
        (out / name).write_text(text_out)
    return manifest


_OUTPUTS = {
    "qfc-curve": ("qfc-curve.csv",),
    "snr-curve": ("snr-curve.csv", "snr-curve-fit.csv"),
    "correlations": ("correlations.csv",),
    "storage-decay": ("storage-decay.csv", "storage-decay-fit.csv"),
    "table1": ("table1.csv",),
    "link-budget": ("link-budget.csv", "link-budget-storage.csv"),
    "simulate": ("simulate-counts.csv", "simulate-estimates.csv"),
}


def _output_names(subcommand: str) -> tuple[str, ...]:
    return _OUTPUTS[subcommand]


def replay(manifest_path: str, out_dir: str | None = None, workers: int = 1) -> RunManifest:
    """Re-run the command recorded in a manifest, checking the config is unchanged."""
    try:
        manifest = RunManifest.from_json(Path(manifest_path).read_text())
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"unreadable manifest: {exc}") from None
    if manifest.subcommand not in COMMANDS:
        raise ConfigError(f"unknown subcommand in manifest: {manifest.subcommand!r}")
    raw = Path(manifest.config_path).read_bytes() if manifest.config_path else b""
    if config_hash(raw) != manifest.config_sha256:
        raise ConfigError("config file changed since the manifest was written (sha256 mismatch)")
    if manifest.version != __version__:
        print(f"warning: manifest written by version {manifest.version}, running {__version__}", file=sys.stderr)
    return run(manifest.subcommand, manifest.config_path, manifest.seed,
               out_dir or manifest.out_dir, manifest.trials, workers, manifest.mode)


def _summary(manifest: RunManifest) -> str:
    out = Path(manifest.out_dir)
    lines = [f"{manifest.subcommand}: wrote {len(manifest.outputs)} file(s) to {out}"]
    for name in manifest.outputs:
        lines.append(f"  {name}")
    if manifest.subcommand in ("table1", "link-budget"):
        for name in manifest.outputs:
            lines.append("")
            lines.append((out / name).read_text().rstrip())
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dlczqfc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI configuration file")
    common.add_argument("--seed", type=int, help="master seed (default: [simulation] seed)")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--workers", type=int, default=1, help="worker threads; never changes output")
    common.add_argument("--trials", type=int, help="override the trial count of the subcommand")

    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "table1":
            p.add_argument("--mode", choices=("A", "B"),
                           help="A: published values, B: simulated (default: [table1] mode)")

    rp = sub.add_parser("replay", help="re-run a command from its manifest")
    rp.add_argument("manifest", metavar="MANIFEST")
    rp.add_argument("--out", metavar="DIR", help="output directory (default: the recorded one)")
    rp.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            manifest = replay(args.manifest, args.out, args.workers)
        else:
            manifest = run(args.command, args.config, args.seed, args.out, args.trials, args.workers,
                           getattr(args, "mode", None))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DlczQfcError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(_summary(manifest))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
