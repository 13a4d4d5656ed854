"""Command-line front end: ``dpqkd {fidelity,curve,optimize,validate}``.

Configuration is a flat ``key = value`` file (section headers optional and
ignored), overridden by repeated ``--set key=value`` and then by the explicit
flags.  Every default is the standard GYS parameter set.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dpqkd import fidelity, validation
from dpqkd.channel import ChannelParams
from dpqkd.fockcore import SourceSpec
from dpqkd.optimizer import KeyRatePoint, Protocol, SweepSpec, optimize_intensity, sweep
from dpqkd.plot import LinePlot

DEFAULTS = {
    "protocol": "decoy",
    "phases": "auto",
    "mus": "0:1:0.05",
    "distances": "auto",
    "distance": "50",
    "baseline": "true",
    "alpha_db_per_km": "0.2",
    "eta_bob": "0.045",
    "y0_dark": "1.7e-6",
    "e_detector": "0.033",
    "f_ec": "1.16",
    "mu_min": "",
    "mu_max": "",
    "nu_min": "1e-4",
    "nu_max": "0.05",
    "mu_grid_points": "60",
    "rel_tol": "1e-3",
    "decoy_rounds": "3",
    "cutoff_tol_km": "0.5",
    "jobs": "1",
    "out": ".",
}

CURVE_COLUMNS = ("distance_km", "key_rate", "mu_opt", "nu_opt", "Y0", "Y1", "e0", "e1", "cutoff", "reason")
FIDELITY_COLUMNS = ("N", "mu", "F0", "F1", "F0_first_order")


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    """12 significant digits; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.12g}"


def parse_grid(text: str) -> tuple[float, ...]:
    """``a,b,c`` or inclusive ``start:stop:step``; empty string gives an empty grid."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range must be start:stop:step, got {text!r}")
        a, b, s = (float(p) for p in parts)
        if s <= 0 or b < a:
            raise ConfigError(f"bad range {text!r}")
        n = int(math.floor((b - a) / s + 1e-9)) + 1
        return tuple(round(a + k * s, 12) for k in range(n))
    return tuple(float(p) for p in text.split(",") if p.strip())


def parse_phases(text: str) -> tuple[int | None, ...]:
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        if tok in ("inf", "continuous"):
            out.append(None)
            continue
        if ":" in tok:
            a, b = tok.split(":")
            out.extend(range(int(a), int(b) + 1))
            continue
        n = int(tok)
        if n < 1:
            raise ConfigError(f"number of phases must be >= 1, got {n}")
        out.append(n)
    return tuple(out)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class RunConfig:
    protocol: Protocol
    phases: tuple[int | None, ...]
    mus: tuple[float, ...]
    distances: tuple[float, ...]
    distance: float
    baseline: bool
    channel: ChannelParams
    mu_range: tuple[float, float] | None
    nu_range: tuple[float, float]
    mu_grid_points: int
    rel_tol: float
    decoy_rounds: int
    cutoff_tol_km: float
    jobs: int
    out: Path
    raw: dict = field(default_factory=dict, compare=False)

    def sweep_spec(self, n_phases, distances=(), protocol=None) -> SweepSpec:
        proto = protocol or self.protocol
        return SweepSpec(
            protocol=proto,
            n_phases=n_phases,
            distances_km=distances,
            channel=self.channel,
            mu_range=self.mu_range,
            nu_range=self.nu_range,
            mu_grid_points=self.mu_grid_points,
            rel_tol=self.rel_tol,
            decoy_rounds=self.decoy_rounds,
            cutoff_tol_km=self.cutoff_tol_km,
        )


def load_config(path: str | None, overrides: list[str], command: str = "curve") -> RunConfig:
    raw = dict(DEFAULTS)
    if path:
        cp = configparser.ConfigParser()
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not text.lstrip().startswith("["):
            text = "[run]\n" + text
        cp.read_string(text)
        for sec in cp.sections():
            raw.update({k: v for k, v in cp[sec].items()})
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        proto_text = raw["protocol"].strip().lower()
        protocol = Protocol.CONTINUOUS if proto_text in ("continuous", "continuous_baseline") else Protocol(proto_text)
        phases_text = raw["phases"]
        if phases_text.strip().lower() == "auto":
            if command == "fidelity":
                phases_text = "1:12"
            elif protocol == Protocol.NONDECOY:
                phases_text = "1,2,3,4"
            else:
                phases_text = "3:10"
        dist_text = raw["distances"]
        if dist_text.strip().lower() == "auto":
            dist_text = "0:40:2" if protocol == Protocol.NONDECOY else "0:160:10"
        mu_range = None
        if raw["mu_min"] or raw["mu_max"]:
            dflt = (0.05, 1.0) if protocol != Protocol.NONDECOY else (1e-4, 1.0)
            mu_range = (float(raw["mu_min"] or dflt[0]), float(raw["mu_max"] or dflt[1]))
        chan = ChannelParams(
            alpha_db_per_km=float(raw["alpha_db_per_km"]),
            eta_bob=float(raw["eta_bob"]),
            y0_dark=float(raw["y0_dark"]),
            e_detector=float(raw["e_detector"]),
            f_ec=float(raw["f_ec"]),
        )
        cfg = RunConfig(
            protocol=protocol,
            phases=parse_phases(phases_text),
            mus=parse_grid(raw["mus"]),
            distances=parse_grid(dist_text),
            distance=float(raw["distance"]),
            baseline=_bool(raw["baseline"]),
            channel=chan,
            mu_range=mu_range,
            nu_range=(float(raw["nu_min"]), float(raw["nu_max"])),
            mu_grid_points=int(raw["mu_grid_points"]),
            rel_tol=float(raw["rel_tol"]),
            decoy_rounds=int(raw["decoy_rounds"]),
            cutoff_tol_km=float(raw["cutoff_tol_km"]),
            jobs=int(raw["jobs"]),
            out=Path(raw["out"]),
            raw=raw,
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if any(m < 0 for m in cfg.mus):
        raise ConfigError("mus must be >= 0")
    # builds each SweepSpec once so that range and grid errors surface before any work
    try:
        for n in cfg.phases or (None,):
            cfg.sweep_spec(n, cfg.distances)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def cmd_fidelity(cfg: RunConfig) -> Path:
    """``F_0``, ``F_1`` and first-order ``F_0`` on the (N, mu) grid."""
    rows = []
    for n in cfg.phases:
        if n is None:
            continue
        for mu in cfg.mus:
            src = SourceSpec(n, mu)
            f0 = fidelity.fidelity_series(src, 0).value
            f1 = fidelity.fidelity_series(src, 1).value if n > 1 else None
            rows.append((n, mu, f0, f1, fidelity.fidelity_first_order(src, 0).value))
    return _write_csv(cfg.out / "fidelity.csv", FIDELITY_COLUMNS, rows)


def _label(n) -> str:
    return "continuous" if n is None else f"N{n}"


def _curve_rows(points: list[KeyRatePoint], cutoff_point: KeyRatePoint | None):
    rows = []
    for p in points:
        rows.append((p, 0))
    if cutoff_point is not None:
        rows.append((cutoff_point, 1))
        rows.sort(key=lambda r: (r[0].distance_km, r[1]))
    return [
        (p.distance_km, p.key_rate, p.mu, p.nu, p.y0, p.y1, p.e0, p.e1, flag, p.reason)
        for p, flag in rows
    ]


def _curves(cfg: RunConfig):
    runs = []
    if cfg.protocol == Protocol.CONTINUOUS:
        runs.append((None, cfg.sweep_spec(None, cfg.distances)))
    else:
        for n in cfg.phases:
            runs.append((n, cfg.sweep_spec(n, cfg.distances)))
        if cfg.baseline and None not in cfg.phases:
            runs.append((None, cfg.sweep_spec(None, cfg.distances)))
    return runs


def cmd_curve(cfg: RunConfig) -> list[Path]:
    """Key rate versus distance for every requested N, as CSV plus one SVG."""
    tag = cfg.protocol.value
    plot = LinePlot(f"Key rate ({tag})", "distance (km)", "key rate per pulse")
    paths = []
    for n, spec in _curves(cfg):
        res = sweep(spec, jobs=cfg.jobs)
        rows = _curve_rows(res.points, res.cutoff_point)
        paths.append(_write_csv(cfg.out / f"curve_{tag}_{_label(n)}.csv", CURVE_COLUMNS, rows))
        plot.add(_label(n), [p.distance_km for p in res.points], [p.key_rate for p in res.points],
                 dashed=n is None)
        if res.cutoff_km is not None:
            print(f"{tag} {_label(n)}: cutoff {res.cutoff_km:.12g} km")
        else:
            print(f"{tag} {_label(n)}: no cutoff inside the grid")
    svg = cfg.out / f"curve_{tag}.svg"
    svg.parent.mkdir(parents=True, exist_ok=True)
    plot.save(svg)
    paths.append(svg)
    return paths


def cmd_optimize(cfg: RunConfig) -> Path:
    """Optimized intensities and estimates at a single distance for every N."""
    rows = []
    for n, spec in _curves(cfg):
        p = optimize_intensity(spec, cfg.distance)
        rows.append((_label(n),) + _curve_rows([p], None)[0][:-2] + (p.reason,))
        print(f"{_label(n)}: R={fmt(p.key_rate)} mu={fmt(p.mu)} nu={fmt(p.nu)} ({p.reason})")
    header = ("phases",) + CURVE_COLUMNS[:-2] + ("reason",)
    return _write_csv(cfg.out / f"optimize_{cfg.protocol.value}.csv", header, rows)


def cmd_validate(cfg: RunConfig) -> bool:
    """Run the oracle suite; returns True when every check passes."""
    ok = True
    for r in validation.run_all():
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name} residual={r.residual:.3e} tol={r.tolerance:.1e}")
        ok &= r.passed
    return ok


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--set", metavar="K=V", action="append", default=[], dest="overrides")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--jobs", type=int)
    common.add_argument("--protocol", choices=("nondecoy", "decoy", "continuous"))
    common.add_argument("--phases", metavar="N[,N...]")
    parser = argparse.ArgumentParser(prog="dpqkd", description="Key rates for discrete-phase randomized QKD.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fidelity", parents=[common], help="fidelity table over N and mu")
    sub.add_parser("curve", parents=[common], help="key rate versus distance")
    sub.add_parser("optimize", parents=[common], help="optimize intensities at one distance")
    sub.add_parser("validate", parents=[common], help="run the oracle checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    for key in ("out", "jobs", "protocol", "phases"):
        v = getattr(args, key)
        if v is not None:
            overrides.append(f"{key}={v}")
    try:
        cfg = load_config(args.config, overrides, args.command)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "fidelity":
            print(cmd_fidelity(cfg))
        elif args.command == "curve":
            for p in cmd_curve(cfg):
                print(p)
        elif args.command == "optimize":
            print(cmd_optimize(cfg))
        else:
            return 0 if cmd_validate(cfg) else 1
    except OSError as exc:
        print(f"error: cannot write {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
