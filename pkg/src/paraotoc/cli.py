"""Command-line front end.

Six subcommands cover the workflows: ``otoc`` (one correlator series),
``lightcone`` (one evolved mode against many probes), ``butterfly``
(velocity fits over a parameter sweep), ``levels`` (sector-resolved
spacing statistics), ``zeromode`` (boundary-mode coherence profile and
scrambling times), and ``bench-ed`` (exact-versus-tensor agreement
sweep over chain sizes).

Every run resolves its settings in three layers: built-in defaults,
then the matching section of an INI config file, then command-line
flags.  The resolved settings are echoed verbatim into the meta JSON so
a run can be reproduced from its own output.  Data lands in CSV (UTF-8,
header row, 12 significant digits, LF endings); numbers in the CSVs are
deterministic across reruns, while wall-clock fields in the meta are
explicitly exempt.  A run that hits a numerical failure still writes
whatever rows it finished, marks the meta with status FAILED, and exits
with code 3; configuration problems exit with code 2.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path

import numpy as np

from paraotoc import __version__, ed
from paraotoc.analysis import butterfly_fit, wavefront_times, zero_mode_profile
from paraotoc.errors import ConfigError, NumericalError
from paraotoc.models import AlternatingChain, HoppingChain
from paraotoc.otoc import OtocRequest, lightcone_scan, run_otoc

_MODEL_KEYS = {
    "model": ("str", "hopping"),
    "n_spins": ("int", 6),
    "t1": ("float", 1.0),
    "t2": ("float", 0.5),
    "theta": ("float", 0.0),
    "phi": ("float", 0.0),
    "j1": ("float", 1.0),
    "j2": ("float", 0.0),
    "varphi": ("float", 0.0),
}

_EVOLVE_KEYS = {
    "dt": ("float", 0.02),
    "stride": ("float", 0.1),
    "chi": ("int", 32),
    "cutoff": ("float", 1e-12),
    "trunc_budget": ("float", 1e-6),
    "method": ("str", "direct"),
}

SCHEMAS = {
    "otoc": {
        **_MODEL_KEYS, **_EVOLVE_KEYS,
        "j": ("int", 3), "k": ("int", 9), "t_max": ("float", 1.0),
        "workers": ("int", 1),
    },
    "lightcone": {
        **_MODEL_KEYS, **_EVOLVE_KEYS,
        "n_spins": ("int", 10), "j": ("int", 10),
        "ks": ("intlist", [2, 4, 6, 8, 12, 14, 16, 18]),
        "t_max": ("float", 2.0), "interpolation": ("str", "none"),
        "workers": ("int", 1),
    },
    "butterfly": {
        **_MODEL_KEYS, **_EVOLVE_KEYS,
        "n_spins": ("int", 20), "j": ("int", 19),
        "ks": ("intlist", [7, 9, 11, 13, 25, 27, 29, 31]),
        "t_max": ("float", 6.0),
        "sweep_param": ("str", "t2"),
        "sweep_values": ("floatlist", [0.3, 0.5, 0.9]),
        "threshold": ("float", 0.01),
        "workers": ("int", 1),
    },
    "levels": {
        **_MODEL_KEYS,
        "sector": ("int", 0),
        "n_bins": ("int", 40),
        "s_max": ("float", 4.0),
        "workers": ("int", 1),
    },
    "zeromode": {
        **_MODEL_KEYS, **_EVOLVE_KEYS,
        "model": ("str", "alternating"),
        "n_spins": ("int", 12), "j2": ("float", 0.4),
        "varphi": ("float", -math.pi / 6),
        "t_max": ("float", 30.0), "stride": ("float", 0.5),
        "chi": ("int", 48), "dt": ("float", 0.01),
        "ks": ("intlist", []),
        "sizes": ("intlist", [6, 8, 10, 12]),
        "zm_threshold": ("float", 0.99),
        "horizon": ("float", 1e5),
        "workers": ("int", 1),
    },
    "bench-ed": {
        **_MODEL_KEYS,
        "sizes": ("intlist", [2, 3, 4]),
        "t_max": ("float", 1.0),
        "dt": ("float", 0.02),
        "stride": ("float", 0.2),
        "chi": ("int", 32),
        "cutoff": ("float", 1e-12),
        "trunc_budget": ("float", 1e-6),
        "workers": ("int", 1),
    },
}

_FLAG_TO_KEY = (("chi", "chi"), ("dt", "dt"), ("tmax", "t_max"),
                ("method", "method"), ("workers", "workers"))


def _parse_value(kind: str, raw: str, key: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "intlist":
            return [int(x) for x in raw.split(",") if x.strip()]
        if kind == "floatlist":
            return [float(x) for x in raw.split(",") if x.strip()]
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key} = {raw!r} as {kind}") from exc


def resolve_settings(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the config file section, then explicit flags."""
    schema = SCHEMAS[command]
    values = {key: default for key, (_, default) in schema.items()}
    if args.config is not None:
        parser = configparser.ConfigParser()
        if not parser.read(args.config, encoding="utf-8"):
            raise ConfigError(f"cannot read config file {args.config}")
        if parser.has_section(command):
            for key, raw in parser.items(command):
                if key not in schema:
                    raise ConfigError(f"unknown key {key!r} in [{command}]")
                values[key] = _parse_value(schema[key][0], raw, key)
    for flag, key in _FLAG_TO_KEY:
        flag_value = getattr(args, flag, None)
        if flag_value is None:
            continue
        if key not in schema:
            raise ConfigError(f"--{flag} does not apply to {command}")
        values[key] = flag_value
    return values


def build_model(settings: dict):
    kind = settings["model"]
    if kind == "hopping":
        return HoppingChain(n_spins=settings["n_spins"], t1=settings["t1"],
                            t2=settings["t2"], theta=settings["theta"],
                            phi=settings["phi"])
    if kind == "alternating":
        return AlternatingChain(n_spins=settings["n_spins"],
                                j1=settings["j1"], j2=settings["j2"],
                                varphi=settings["varphi"])
    raise ConfigError(f"model must be hopping or alternating, got {kind!r}")


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(cell) for cell in row])


class RunOutput:
    """Collects CSV tables, plot scripts, and meta for one run."""

    def __init__(self, command: str, settings: dict, out_dir: Path):
        self.command = command
        self.settings = settings
        self.out_dir = out_dir
        self.start = time.perf_counter()
        self.tables: dict[str, tuple[list, list]] = {}
        self.scripts: dict[str, str] = {}
        self.results: dict = {}

    def add_table(self, name: str, header, rows) -> None:
        self.tables[name] = (list(header), [tuple(r) for r in rows])

    def add_script(self, filename: str, source: str) -> None:
        self.scripts[filename] = source

    def write(self, status: str, error: str | None = None) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for name, (header, rows) in self.tables.items():
            _write_csv(self.out_dir / f"{name}.csv", header, rows)
        for filename, source in self.scripts.items():
            (self.out_dir / filename).write_text(source, encoding="utf-8")
        stem = self.command.replace("-", "_")
        meta = {
            "command": self.command,
            "version": __version__,
            "status": status,
            "config": self.settings,
            "results": self.results,
            "wall_time_seconds": time.perf_counter() - self.start,
        }
        if error is not None:
            meta["error"] = error
        with open(self.out_dir / f"{stem}_meta.json", "w",
                  encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _pooled(keys, task, workers: int):
    """Run ``task`` over keys; a keyed result dict keeps the output
    independent of completion order.  Failures are collected, not
    fatal mid-pool, so finished work survives."""
    results: dict = {}
    errors: dict = {}
    if workers <= 1:
        for key in keys:
            try:
                results[key] = task(key)
            except NumericalError as exc:
                errors[key] = exc
        return results, errors
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(task, key): key for key in keys}
        for future in as_completed(futures):
            key = futures[future]
            try:
                results[key] = future.result()
            except NumericalError as exc:
                errors[key] = exc
    return results, errors


def _request_from(settings: dict, model, j: int, k: int,
                  method: str | None = None) -> OtocRequest:
    return OtocRequest(
        model=model, j=j, k=k, t_max=settings["t_max"], dt=settings["dt"],
        stride=settings["stride"], chi=settings["chi"],
        cutoff=settings["cutoff"], trunc_budget=settings["trunc_budget"],
        method=method if method is not None else settings["method"])


def cmd_otoc(settings: dict, out: RunOutput) -> None:
    model = build_model(settings)
    series = run_otoc(_request_from(settings, model, settings["j"],
                                    settings["k"]))
    rows = [(t, f.real, f.imag, c, w) for t, f, c, w in
            zip(series.times, series.f, series.c, series.trunc_weight)]
    out.add_table("otoc", ["t", "re_f", "im_f", "c", "trunc_weight"], rows)
    out.results["budget_exceeded"] = bool(series.budget_exceeded)
    out.results["final_unitarity"] = float(series.unitarity[-1])
    out.add_script("plot_otoc.py", _PLOT_OTOC)


def cmd_lightcone(settings: dict, out: RunOutput) -> None:
    model = build_model(settings)
    grid = lightcone_scan(
        model, settings["j"], settings["ks"], settings["t_max"],
        dt=settings["dt"], stride=settings["stride"], chi=settings["chi"],
        cutoff=settings["cutoff"], trunc_budget=settings["trunc_budget"],
        method=settings["method"])
    rows = [(t, k, grid.f.real[i, col], grid.c[i, col])
            for i, t in enumerate(grid.times)
            for col, k in enumerate(grid.ks)]
    out.add_table("lightcone", ["t", "k", "re_f", "c"], rows)
    out.results["budget_exceeded"] = bool(grid.budget_exceeded)
    out.results["final_trunc_weight"] = float(grid.trunc_weight[-1])
    out.add_script("plot_lightcone.py",
                   _PLOT_LIGHTCONE.format(interp=settings["interpolation"]))


def cmd_butterfly(settings: dict, out: RunOutput) -> None:
    model = build_model(settings)
    param = settings["sweep_param"]
    if param not in {f.name for f in dataclasses.fields(model)} or param == "n_spins":
        raise ConfigError(f"sweep_param {param!r} is not a coupling of the "
                          f"{settings['model']} model")
    j = settings["j"]
    ks = settings["ks"]

    def fit_one(value: float):
        swept = dataclasses.replace(model, **{param: value})
        grid = lightcone_scan(
            swept, j, ks, settings["t_max"], dt=settings["dt"],
            stride=settings["stride"], chi=settings["chi"],
            cutoff=settings["cutoff"], trunc_budget=settings["trunc_budget"],
            method=settings["method"])
        arrivals = wavefront_times(grid.times, grid.f.real,
                                   settings["threshold"])
        return butterfly_fit(j, grid.ks, arrivals)

    sweep_values = settings["sweep_values"]
    results, errors = _pooled(sweep_values, fit_one, settings["workers"])
    rows = [(value, fit.v_left, fit.v_right, fit.ratio, fit.stderr_left,
             fit.stderr_right)
            for value in sweep_values if value in results
            for fit in [results[value]]]
    out.add_table("butterfly", ["sweep_value", "v_left", "v_right", "ratio",
                                "stderr_l", "stderr_r"], rows)
    out.results["sweep_param"] = param
    out.add_script("plot_butterfly.py", _PLOT_BUTTERFLY)
    if errors:
        value, exc = next(iter(sorted(errors.items())))
        raise NumericalError(
            f"{len(errors)} of {len(sweep_values)} sweep points failed; "
            f"first failure at {param} = {value}: {exc}")


def cmd_levels(settings: dict, out: RunOutput) -> None:
    model = build_model(settings)
    spectra = ed.parity_sector_spectra(model)
    sector = settings["sector"]
    if not 0 <= sector <= 2:
        raise ConfigError(f"sector must be 0, 1, or 2, got {sector}")
    stats = ed.level_statistics(spectra[sector].eigenvalues,
                                n_bins=settings["n_bins"],
                                s_max=settings["s_max"])
    out.add_table("levels_spacings", ["s"], [(s,) for s in stats.spacings])
    hist_rows = [(stats.bin_edges[i], stats.bin_edges[i + 1], d)
                 for i, d in enumerate(stats.densities)]
    out.add_table("levels_histogram", ["bin_left", "bin_right", "density"],
                  hist_rows)
    out.results["r_mean"] = float(stats.r_mean)
    out.results["n_levels"] = int(spectra[sector].eigenvalues.size)
    out.results["reference_r_poisson"] = ed.POISSON_R_MEAN
    out.results["reference_r_goe"] = ed.GOE_R_MEAN
    out.results["reference_r_gue"] = ed.GUE_R_MEAN
    out.add_script("plot_levels.py", _PLOT_LEVELS)


def cmd_zeromode(settings: dict, out: RunOutput) -> None:
    model = build_model(settings)
    if not isinstance(model, AlternatingChain):
        raise ConfigError("the boundary-mode workflow needs the alternating "
                          "model")
    profile = zero_mode_profile(
        model, settings["t_max"], dt=settings["dt"],
        stride=settings["stride"], chi=settings["chi"],
        cutoff=settings["cutoff"], trunc_budget=settings["trunc_budget"],
        ks=settings["ks"] or None, method=settings["method"])
    grid_rows = [(t, k, profile.re_f[i, col])
                 for i, t in enumerate(profile.times)
                 for col, k in enumerate(profile.ks)]
    out.add_table("zeromode_grid", ["t", "k", "re_f"], grid_rows)
    out.results["far_mode"] = int(profile.far_mode)
    out.results["far_min_re_f"] = float(profile.far_min_re_f)
    out.results["budget_exceeded"] = bool(profile.budget_exceeded)
    out.results["trusted_until"] = float(profile.times[profile.trusted][-1])

    def time_one(n_modes: int):
        return ed.zero_mode_times(
            settings["j1"], settings["j2"], settings["varphi"], [n_modes],
            threshold=settings["zm_threshold"],
            horizon=settings["horizon"])[0]

    sizes = settings["sizes"]
    results, errors = _pooled(sizes, time_one, settings["workers"])
    rows = [(size, results[size].t_star)
            for size in sorted(results)]
    out.add_table("zeromode_times", ["L", "t_star"], rows)
    out.results["uncrossed_sizes"] = [
        int(size) for size in sorted(results) if not results[size].crossed]
    out.add_script("plot_zeromode.py", _PLOT_ZEROMODE)
    if errors:
        size, exc = next(iter(sorted(errors.items())))
        raise NumericalError(
            f"{len(errors)} of {len(sizes)} scrambling-time runs failed; "
            f"first failure at L = {size}: {exc}")


def cmd_bench_ed(settings: dict, out: RunOutput) -> None:
    """Dense-versus-tensor agreement sweep over chain sizes.

    Both evolution methods run against the exact backend on the
    end-to-end mode pair in either order.  The agreement table is
    deterministic; wall times go to a sidecar table since they change
    run to run.
    """
    model = build_model(settings)

    def bench_one(n_spins: int):
        sized = dataclasses.replace(model, n_spins=n_spins)
        pairs = ((1, 2 * n_spins), (2 * n_spins, 1))
        tic = time.perf_counter()
        exact = {pair: run_otoc(_request_from(settings, sized, *pair, "ed"))
                 for pair in pairs}
        t_ed = time.perf_counter() - tic
        errs = {}
        tic = time.perf_counter()
        for method in ("direct", "timesplit"):
            dev = 0.0
            for pair in pairs:
                series = run_otoc(_request_from(settings, sized, *pair,
                                                method))
                dev = max(dev, float(np.abs(series.f - exact[pair].f).max()))
            errs[method] = dev
        t_mpo = time.perf_counter() - tic
        return 3 ** n_spins, errs["direct"], errs["timesplit"], t_ed, t_mpo

    sizes = settings["sizes"]
    results, errors = _pooled(sizes, bench_one, settings["workers"])
    rows = [(size, *results[size][:3]) for size in sorted(results)]
    out.add_table("bench_ed", ["n_spins", "hilbert_dim", "max_err_direct",
                               "max_err_timesplit"], rows)
    timing_rows = [(size, results[size][3], results[size][4])
                   for size in sorted(results)]
    out.add_table("bench_ed_timings", ["n_spins", "t_ed_s", "t_mpo_s"],
                  timing_rows)
    if results:
        out.results["max_err"] = max(max(r[1], r[2])
                                     for r in results.values())
    if errors:
        size, exc = next(iter(sorted(errors.items())))
        raise NumericalError(f"benchmark failed at n_spins = {size}: {exc}")


COMMANDS = {
    "otoc": cmd_otoc,
    "lightcone": cmd_lightcone,
    "butterfly": cmd_butterfly,
    "levels": cmd_levels,
    "zeromode": cmd_zeromode,
    "bench-ed": cmd_bench_ed,
}

_HELP = {
    "otoc": "one correlator time series for a mode pair",
    "lightcone": "one evolved mode against a set of probe modes",
    "butterfly": "wavefront velocity fits over a coupling sweep",
    "levels": "sector-resolved level spacing statistics",
    "zeromode": "boundary-mode coherence profile and scrambling times",
    "bench-ed": "agreement sweep of both tensor methods against the exact backend",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paraotoc",
        description="correlator toolkit for three-state clock chains")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=_HELP[name])
        cmd.add_argument("--config", help="INI file; section [%s] applies" % name)
        cmd.add_argument("--out", default=".", help="output directory")
        cmd.add_argument("--chi", type=int, help="bond dimension cap")
        cmd.add_argument("--dt", type=float, help="integrator time step")
        cmd.add_argument("--tmax", type=float, help="final time")
        cmd.add_argument("--workers", type=int, help="parallel worker count")
        cmd.add_argument("--method", choices=["direct", "timesplit", "ed"],
                         help="evolution backend")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = resolve_settings(args.command, args)
    except ConfigError as exc:
        print(f"paraotoc: config error: {exc}", file=sys.stderr)
        return 2
    out = RunOutput(args.command, settings, Path(args.out))
    try:
        COMMANDS[args.command](settings, out)
    except ConfigError as exc:
        print(f"paraotoc: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        out.write("FAILED", error=str(exc))
        print(f"paraotoc: numerical failure: {exc}", file=sys.stderr)
        return 3
    out.write("ok")
    return 0


_PLOT_OTOC = '''\
"""Plot the correlator series written by `paraotoc otoc`."""
import csv

import matplotlib.pyplot as plt

with open("otoc.csv", encoding="utf-8") as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
re_f = [float(r["re_f"]) for r in rows]
c = [float(r["c"]) for r in rows]

fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(6, 6))
top.plot(t, re_f, marker=".")
top.set_ylabel("Re F")
bottom.plot(t, c, marker=".", color="tab:red")
bottom.set_ylabel("C = 2(1 - Re F)")
bottom.set_xlabel("t")
fig.tight_layout()
fig.savefig("otoc.png", dpi=160)
'''

_PLOT_LIGHTCONE = '''\
"""Heatmap of the scan written by `paraotoc lightcone`."""
import csv

import matplotlib.pyplot as plt
import numpy as np

with open("lightcone.csv", encoding="utf-8") as fh:
    rows = list(csv.DictReader(fh))
times = sorted(set(float(r["t"]) for r in rows))
ks = sorted(set(int(r["k"]) for r in rows))
grid = np.zeros((len(ks), len(times)))
for r in rows:
    grid[ks.index(int(r["k"])), times.index(float(r["t"]))] = float(r["c"])

fig, ax = plt.subplots(figsize=(7, 4))
im = ax.imshow(grid, aspect="auto", origin="lower", interpolation="{interp}",
               extent=(times[0], times[-1], ks[0], ks[-1]), cmap="magma")
fig.colorbar(im, ax=ax, label="C")
ax.set_xlabel("t")
ax.set_ylabel("probe mode k")
fig.tight_layout()
fig.savefig("lightcone.png", dpi=160)
'''

_PLOT_BUTTERFLY = '''\
"""Velocity sweep written by `paraotoc butterfly`."""
import csv

import matplotlib.pyplot as plt

with open("butterfly.csv", encoding="utf-8") as fh:
    rows = list(csv.DictReader(fh))
x = [float(r["sweep_value"]) for r in rows]
vl = [float(r["v_left"]) for r in rows]
vr = [float(r["v_right"]) for r in rows]
el = [float(r["stderr_l"]) for r in rows]
er = [float(r["stderr_r"]) for r in rows]

fig, ax = plt.subplots(figsize=(6, 4))
ax.errorbar(x, vl, yerr=el, marker="o", label="left")
ax.errorbar(x, vr, yerr=er, marker="s", label="right")
ax.set_xlabel("swept coupling")
ax.set_ylabel("wavefront velocity")
ax.legend()
fig.tight_layout()
fig.savefig("butterfly.png", dpi=160)
'''

_PLOT_LEVELS = '''\
"""Spacing histogram written by `paraotoc levels`."""
import csv
import json
import math

import matplotlib.pyplot as plt

with open("levels_histogram.csv", encoding="utf-8") as fh:
    rows = list(csv.DictReader(fh))
left = [float(r["bin_left"]) for r in rows]
width = [float(r["bin_right"]) - float(r["bin_left"]) for r in rows]
density = [float(r["density"]) for r in rows]
with open("levels_meta.json", encoding="utf-8") as fh:
    r_mean = json.load(fh)["results"]["r_mean"]

fig, ax = plt.subplots(figsize=(6, 4))
ax.bar(left, density, width=width, align="edge", alpha=0.7)
grid = [0.02 * i for i in range(1, 201)]
ax.plot(grid, [math.exp(-s) for s in grid], "k--", label="Poisson")
ax.plot(grid, [(32 / math.pi ** 2) * s ** 2 *
               math.exp(-4 * s ** 2 / math.pi) for s in grid],
        "k:", label="GUE surmise")
ax.set_xlabel("s")
ax.set_ylabel("density")
ax.set_title(f"mean spacing-ratio = {r_mean:.4f}")
ax.legend()
fig.tight_layout()
fig.savefig("levels.png", dpi=160)
'''

_PLOT_ZEROMODE = '''\
"""Boundary-mode panels written by `paraotoc zeromode`."""
import csv

import matplotlib.pyplot as plt

with open("zeromode_grid.csv", encoding="utf-8") as fh:
    grid_rows = list(csv.DictReader(fh))
far = max(int(r["k"]) for r in grid_rows)
t = [float(r["t"]) for r in grid_rows if int(r["k"]) == far]
re_f = [float(r["re_f"]) for r in grid_rows if int(r["k"]) == far]

with open("zeromode_times.csv", encoding="utf-8") as fh:
    time_rows = list(csv.DictReader(fh))
sizes = [int(r["L"]) for r in time_rows]
t_star = [float(r["t_star"]) for r in time_rows]

fig, (left, right) = plt.subplots(1, 2, figsize=(9, 4))
left.plot(t, re_f, marker=".")
left.set_xlabel("t")
left.set_ylabel(f"Re F(1, {far})")
right.semilogy(sizes, t_star, marker="o")
right.set_xlabel("chain length L")
right.set_ylabel("crossing time")
fig.tight_layout()
fig.savefig("zeromode.png", dpi=160)
'''


if __name__ == "__main__":
    sys.exit(main())
