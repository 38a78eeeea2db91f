"""Command line front end.

Examples::

    pickands sweep --spec fbm:alpha=0.5,scale=2 --deltas 1,0.5,0.25 --reps 10000 --seed 42
    pickands validate --suite fubini --kernel gaussian --eta 1
    pickands estimate --method dy --spec kernel:indicator,eta=3,R=10

Settings are resolved as built-in defaults < ``--config`` file < keys embedded in
the ``--spec`` string < explicit flags. The resolved configuration (minus the
worker count) is echoed as the first line of the output, so an output file can
be passed back through ``--config`` to reproduce it.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import gaussian as gs
from . import kernel_quad, oracle
from .errors import ConfigError, NumericalError, PickandsError
from .estimators import (DYConfig, continuity_sweep, estimate_family_H, estimate_H_direct,
                         estimate_H_dy, fingerprint)
from .kernels import NormalDensity, kernel_by_name
from .maxstable import extremal_index
from .spectral import (Bernoulli, KernelField, LogGaussian, PolynomialScale, StationaryLogGaussian,
                       scaled_family)

COLUMNS = ["command", "spec", "delta", "eta", "T", "R", "reps", "seed", "estimate", "stderr",
           "elapsed_s", "fingerprint"]
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 2, 3, 4

COMMON = {"reps": 10000, "seed": 0, "block": 1000, "format": "csv", "output": None,
          "timing": False, "d": 1}
DEFAULTS = {
    "estimate": {"method": "dy", "delta": 0.0, "eta": 0.0, "T": 20.0, "R": 10.0, "h": 0.01,
                 "direct_method": "normalized"},
    "sweep": {"deltas": [1.0, 0.5, 0.25], "estimator": "dy", "eta": "matched", "T": 20.0, "R": 20.0,
              "direct_method": "normalized"},
    "kernel": {"kernel": "gaussian", "quantity": "constant", "delta": 0.0, "T": 40.0, "tol": 1e-7,
               "eta": 1.0, "R": 10.0, "h": 0.01},
    "family": {"delta": 0.0, "nodes": 4, "estimator": "dy", "R": 10.0, "h": 0.01, "T": 20.0},
    "maxstable": {"delta": 0.5, "T": 20.0, "r": 1.0, "R": 10.0, "estimator": "dy"},
    "validate": {"suite": "fubini", "kernel": "gaussian", "eta": 1.0},
}
ESTIMATOR_KEYS = {"delta", "eta", "R", "h", "T", "d"}
# settings that never change results and are therefore left out of the echo
VOLATILE = {"workers", "output", "format", "timing", "progress", "config"}


def load_schema() -> dict:
    return json.loads(resources.files("pickands").joinpath("config_schema.json").read_text())


# ---------------------------------------------------------------------------
# spec strings


def _number(text: str) -> float:
    t = text.strip()
    m = re.fullmatch(r"sqrt\(?([0-9.eE+-]+)\)?", t)
    try:
        return math.sqrt(float(m.group(1))) if m else float(t)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def parse_polynomial(text: str) -> PolynomialScale:
    """``"1+z"``, ``"2*z^2-0.5"`` or a semicolon list of coefficients ``"1;1"``."""
    t = text.replace(" ", "")
    if ";" in t:
        return PolynomialScale(tuple(_number(c) for c in t.split(";")))
    coeffs: dict[int, float] = {}
    for sign, term in re.findall(r"([+-]?)([^+-]+)", t):
        s = -1.0 if sign == "-" else 1.0
        m = re.fullmatch(r"(?:([0-9.eE]+)\*?)?z(?:\^(\d+))?", term)
        if m:
            c = _number(m.group(1)) if m.group(1) else 1.0
            k = int(m.group(2) or 1)
        else:
            c, k = _number(term), 0
        coeffs[k] = coeffs.get(k, 0.0) + s * c
    n = max(coeffs) + 1
    return PolynomialScale(tuple(coeffs.get(k, 0.0) for k in range(n)))


def _variance(kind: str, kv: dict) -> gs.VarianceFunction:
    if kind == "fbm":
        return gs.FBM(_number(kv.pop("alpha", "0.5")), _number(kv.pop("scale", "1")))
    if kind == "linear":
        return gs.Linear(_number(kv.pop("c", "1")))
    raise ConfigError(f"unknown variance family {kind!r}")


def parse_spec(text: str):
    """Build a field from ``kind:arg,key=value,...``; returns ``(field, estimator_overrides)``."""
    if not text:
        raise ConfigError("a --spec is required")
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    positional, kv = [], {}
    for part in filter(None, (p.strip() for p in rest.split(","))):
        if "=" in part:
            k, v = part.split("=", 1)
            kv[k.strip()] = v.strip()
        else:
            positional.append(part)
    extras = {k: (kv.pop(k) if k == "eta" and kv[k] == "matched" else _number(kv.pop(k)))
              for k in list(kv) if k in ESTIMATOR_KEYS}
    if "d" in extras:
        extras["d"] = int(extras["d"])
    d = int(extras.get("d", 1))
    if kind in ("fbm", "linear"):
        field = LogGaussian(_variance(kind, kv), d=d)
    elif kind == "kernel":
        name = positional[0] if positional else kv.pop("L", "gaussian")
        dens = NormalDensity(_number(kv.pop("p_scale", "1")), _number(kv.pop("p_loc", "0")))
        field = KernelField(kernel_by_name(name), dens)
    elif kind == "bernoulli":
        field = Bernoulli(_number(kv.pop("p", "0.5")), d=d)
    elif kind == "stationary":
        sub = kv.pop("kind", "cosine")
        if sub == "cosine":
            cov = gs.CosineCovariance(_number(kv.pop("s", "1")), _number(kv.pop("period", "5")))
        elif sub == "exponential":
            cov = gs.ExponentialCovariance(_number(kv.pop("s", "1")), _number(kv.pop("length", "1")))
        else:
            raise ConfigError(f"unknown stationary kind {sub!r}")
        field = StationaryLogGaussian(cov, d=d)
    elif kind == "family":
        base_kind = kv.pop("base", "linear")
        base = _variance(base_kind, kv)
        field = scaled_family(base, parse_polynomial(kv.pop("q", "1")), d=d)
    else:
        raise ConfigError(f"unknown spec kind {kind!r}")
    if kv or (positional and kind != "kernel"):
        raise ConfigError(f"unused spec entries {sorted(kv) + positional} in {text!r}")
    return field, extras


# ---------------------------------------------------------------------------
# configuration


def _csv_floats(text: str) -> list[float]:
    return [_number(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pickands", description="Estimate Pickands-type constants.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file, or an earlier output file")
        sp.add_argument("--spec", help="field, e.g. fbm:alpha=0.5,scale=2 or kernel:indicator")
        sp.add_argument("--reps", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--block", type=int, help="replications per random-stream block")
        sp.add_argument("--workers", help="thread count or 'auto' (default $PICKANDS_WORKERS or 1)")
        sp.add_argument("--output", "-o", help="output path (default: standard output)")
        sp.add_argument("--format", choices=["csv", "jsonl"])
        sp.add_argument("--progress", action="store_true", help="report replication counts on stderr")
        sp.add_argument("--timing", action="store_true", default=None,
                        help="fill the elapsed_s column (makes output run-dependent)")
        sp.add_argument("--d", type=int, choices=[1, 2])
        return sp

    e = common(sub.add_parser("estimate", help="single constant at one delta"))
    e.add_argument("--method", choices=["direct", "dy", "dy-quad"])
    e.add_argument("--direct-method", dest="direct_method", choices=["normalized", "plain"])
    for k in ("delta", "T", "R", "h"):
        e.add_argument(f"--{k}", type=_number)
    e.add_argument("--eta", type=_number)

    s = common(sub.add_parser("sweep", help="decreasing delta with common random numbers"))
    s.add_argument("--deltas", type=_csv_floats)
    s.add_argument("--estimator", choices=["direct", "dy"])
    s.add_argument("--direct-method", dest="direct_method", choices=["normalized", "plain"])
    s.add_argument("--eta", help="'matched' or a number")
    for k in ("T", "R", "h"):
        s.add_argument(f"--{k}", type=_number)

    k = common(sub.add_parser("kernel", help="deterministic kernel quadrature"))
    k.add_argument("--kernel", help="gaussian, indicator, laplace or a CSV path")
    k.add_argument("--quantity", choices=["constant", "fubini", "dy"])
    for name in ("delta", "T", "tol", "eta", "R", "h"):
        k.add_argument(f"--{name}", type=_number)

    f = common(sub.add_parser("family", help="locally stationary aggregate"))
    f.add_argument("--nodes", type=int)
    f.add_argument("--estimator", choices=["direct", "dy"])
    for name in ("delta", "R", "h", "T"):
        f.add_argument(f"--{name}", type=_number)

    m = common(sub.add_parser("maxstable", help="extremal index and the finite-grid identity"))
    m.add_argument("--sims", type=int)
    m.add_argument("--estimator", choices=["direct", "dy"])
    for name in ("delta", "T", "r", "R"):
        m.add_argument(f"--{name}", type=_number)

    v = common(sub.add_parser("validate", help="reference checks; exit 4 on failure"))
    v.add_argument("--suite", choices=["fubini", "oracles", "kernel", "hurst1", "all"])
    v.add_argument("--kernel")
    v.add_argument("--eta", type=_number)
    return p


def read_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    first = text.lstrip().splitlines()[0] if text.strip() else ""
    try:
        if first.startswith("# config:"):
            return json.loads(first[len("# config:"):])
        if first.startswith('{"#config"'):
            return json.loads(first)["#config"]
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None


def resolve(args: argparse.Namespace) -> tuple[dict, object, dict]:
    """Merge defaults, config file, spec extras and flags; validate against the schema."""
    cmd = args.command
    cfg = {**COMMON, **DEFAULTS[cmd]}
    if args.config:
        filed = read_config_file(args.config)
        if filed.get("command", cmd) != cmd:
            raise ConfigError(f"config is for {filed['command']!r}, not {cmd!r}")
        cfg.update(filed)
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "progress")}
    if flags.get("timing") is False:
        flags.pop("timing")
    spec_text = flags.get("spec", cfg.get("spec"))
    field, extras = (None, {})
    if cmd not in ("kernel", "validate"):
        field, extras = parse_spec(spec_text)
    elif spec_text:
        cfg["spec"] = spec_text
    cfg.update(extras)
    if "eta" in flags and cmd == "sweep" and flags["eta"] != "matched":
        flags["eta"] = _number(flags["eta"])
    cfg.update(flags)
    cfg["command"] = cmd
    if "workers" in cfg and cfg["workers"] not in (None, "auto"):
        try:
            cfg["workers"] = int(cfg["workers"])
        except ValueError:
            raise ConfigError("--workers must be an integer or 'auto'") from None
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc.message}") from None
    return cfg, field, extras


def echo_config(cfg: dict) -> dict:
    return {k: cfg[k] for k in sorted(cfg) if k not in VOLATILE}


# ---------------------------------------------------------------------------
# commands


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x)) if math.isfinite(x) else str(float(x))
    return str(x)


def _row(cfg, command, spec, delta, eta, T, R, reps, est, se, elapsed, extra=None):
    key = {"config": echo_config(cfg), "row": [command, delta, eta, T, R], **(extra or {})}
    return {"command": command, "spec": spec, "delta": delta, "eta": eta, "T": T, "R": R,
            "reps": reps, "seed": cfg["seed"], "estimate": est, "stderr": se,
            "elapsed_s": elapsed if cfg.get("timing") else None, "fingerprint": fingerprint(key)}


def _run_kw(cfg, progress):
    return {"block": cfg["block"], "workers": cfg.get("workers"), "progress": progress}


def cmd_estimate(cfg, field, progress):
    m = cfg["method"]
    kw = _run_kw(cfg, progress)
    if m == "direct":
        delta = cfg["delta"] if cfg["delta"] > 0 else cfg["h"]
        r = estimate_H_direct(field, cfg["T"], delta, cfg["reps"], cfg["seed"], d=cfg["d"],
                              method=cfg["direct_method"], continuum_proxy=cfg["delta"] == 0, **kw)
        return [_row(cfg, "estimate", cfg["spec"], cfg["delta"], None, cfg["T"], None, r.reps,
                     r.estimate, r.stderr, r.elapsed)]
    dyc = DYConfig(delta=cfg["delta"], eta=cfg["eta"], R=cfg["R"], h=cfg["h"], d=cfg["d"])
    method = "quadrature" if m == "dy-quad" else "mc"
    r = estimate_H_dy(field, dyc, cfg["reps"], cfg["seed"], method=method, **kw)
    return [_row(cfg, "estimate", cfg["spec"], cfg["delta"], cfg["eta"], None, cfg["R"], r.reps,
                 r.estimate, r.stderr, r.elapsed)]


def cmd_sweep(cfg, field, progress):
    sw = continuity_sweep(field, cfg["deltas"], cfg["reps"], cfg["seed"], estimator=cfg["estimator"],
                          T=cfg["T"], R=cfg["R"], h=cfg.get("h"), eta=cfg["eta"],
                          direct_method=cfg["direct_method"], **_run_kw(cfg, progress))
    direct = cfg["estimator"] == "direct"
    rows = []
    for delta, r in sw.rows:
        eta = None if direct else (delta if cfg["eta"] == "matched" else cfg["eta"])
        rows.append(_row(cfg, "sweep", cfg["spec"], delta, eta, cfg["T"] if direct else None,
                         None if direct else cfg["R"], r.reps, r.estimate, r.stderr, r.elapsed))
    return rows


def cmd_kernel(cfg, field, progress):
    L = kernel_by_name(cfg["kernel"])
    spec = f"kernel:{cfg['kernel']}"
    q = cfg["quantity"]
    if q == "fubini":
        val = kernel_quad.fubini_identity(L, cfg["eta"])
        return [_row(cfg, "kernel", spec, None, cfg["eta"], None, None, 0, val, 0.0, None)]
    if q == "dy":
        out = kernel_quad.kernel_dy_quadrature(L, cfg["delta"], cfg["eta"], cfg["R"], cfg["h"])
        return [_row(cfg, "kernel", spec, cfg["delta"], cfg["eta"], None, cfg["R"], 0, out["value"], 0.0, None)]
    out = kernel_quad.kernel_constant(L, cfg["delta"], cfg["T"], tol=cfg["tol"])
    return [_row(cfg, "kernel", spec, cfg["delta"], None, cfg["T"], None, 0, out["value"], 0.0, None)]


def cmd_family(cfg, field, progress):
    r = estimate_family_H(field, cfg["delta"], cfg["reps"], cfg["seed"], nodes=cfg["nodes"],
                          estimator=cfg["estimator"], R=cfg["R"], h=cfg["h"], T=cfg["T"],
                          **_run_kw(cfg, progress))
    return [_row(cfg, "family", cfg["spec"], cfg["delta"], None, None, cfg["R"], r.reps,
                 r.estimate, r.stderr, r.elapsed)]


def cmd_maxstable(cfg, field, progress):
    out = extremal_index(field, cfg["delta"], cfg["T"], cfg["reps"], cfg["seed"], r=cfg["r"],
                         sims=cfg.get("sims"), R=cfg["R"], estimator=cfg["estimator"],
                         block=cfg["block"], workers=cfg.get("workers"))
    base = (cfg["spec"], cfg["delta"], None, cfg["T"], cfg["R"], cfg["reps"])
    return [
        _row(cfg, "maxstable/theta", *base, out["theta"], out["theta_stderr"], None),
        _row(cfg, "maxstable/identity_gap", *base, out["identity_gap"], out["gap_stderr"], None),
    ]


def _validate_checks(cfg):
    """``(name, value, reference, tolerance)`` tuples for the selected suite."""
    suite = cfg["suite"]
    checks = []
    if suite in ("fubini", "all"):
        if suite == "fubini":
            pairs = [(cfg["kernel"], cfg["eta"])]
        else:
            pairs = [(k, e) for k in ("gaussian", "laplace") for e in (0.5, 1.0, 2.0)]
        for name, eta in pairs:
            val = kernel_quad.fubini_identity(kernel_by_name(name), eta)
            checks.append((f"fubini/{name}/eta={eta:g}", val, 1.0, 1e-6))
    if suite in ("kernel", "all"):
        L = kernel_by_name("gaussian")
        val = kernel_quad.kernel_constant(L, 0.0, 40.0)["value"]
        checks.append(("kernel_constant/gaussian/T=40", val, oracle.gaussian_kernel_constant(40.0), 1e-6))
        for delta, T in ((2.0, 40.0), (0.5, 40.0), (2.0, 10.0)):
            val = kernel_quad.kernel_constant(kernel_by_name("indicator"), delta, T)["value"]
            checks.append((f"kernel_constant/indicator/delta={delta:g}/T={T:g}", val,
                           oracle.kernel_coverage_measure(delta, T) / T, 1e-9))
    if suite in ("hurst1", "all"):
        r = estimate_H_dy(LogGaussian(gs.Linear(math.sqrt(2))), DYConfig(0, 0, 10, 0.01), 10000, cfg["seed"],
                          workers=cfg.get("workers"))
        checks.append(("dy/linear_sqrt2", r.estimate, oracle.hurst1_closed_form(math.sqrt(2)),
                       max(0.01, 3 * r.stderr)))
    if suite in ("oracles", "all"):
        # fast quadrature routes against independently derived values
        g = kernel_by_name("gaussian")
        val = kernel_quad.kernel_dy_quadrature(g, 0.0, 0.0, 8.0, 0.01)["value"]
        checks.append(("oracle/gaussian_kernel_dy_vs_hurst1_lattice", val, oracle.hurst1_discrete(1.0, 0.01), 1e-6))
        ind = kernel_by_name("indicator")
        val = kernel_quad.kernel_dy_quadrature(ind, 0.0, 1.0, 10.0, 0.01)["value"]
        checks.append(("oracle/indicator_dy_eta1", val, 1.0, 1e-3))
        for delta in (0.5, 1.0, 2.0):
            val = kernel_quad.kernel_dy_quadrature(ind, delta, delta, 10.0, 0.5)["value"]
            checks.append((f"oracle/indicator_dy_delta={delta:g}", val, min(1.0, 1.0 / delta), 1e-9))
    return checks


def cmd_validate(cfg, out_stream):
    checks = _validate_checks(cfg)
    rows, ok = [], True
    for name, val, ref, tol in checks:
        passed = abs(val - ref) <= tol
        ok &= passed
        rows.append(_row(cfg, f"validate/{name}", cfg.get("spec"), None, cfg.get("eta"), None, None, 0,
                         val, 0.0, None))
        if len(checks) == 1:
            print(f"{val:.6f}", file=out_stream)
        else:
            print(f"{name} {val:.6f} {'PASS' if passed else 'FAIL'}", file=out_stream)
    return rows, ok


# ---------------------------------------------------------------------------
# output


def render(cfg: dict, rows: list[dict]) -> str:
    buf = io.StringIO()
    echo = json.dumps(echo_config(cfg), sort_keys=True, separators=(",", ":"))
    if cfg["format"] == "jsonl":
        buf.write('{"#config":' + echo + "}\n")
        for r in rows:
            buf.write(json.dumps({k: r[k] for k in COLUMNS}, separators=(",", ":")) + "\n")
        return buf.getvalue()
    buf.write("# config:" + echo + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in COLUMNS])
    return buf.getvalue()


def write_output(cfg, text: str):
    if cfg.get("output"):
        with open(cfg["output"], "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    progress = (lambda n: print(f"progress: {n} replications", file=sys.stderr)) if args.progress else None
    try:
        cfg, field, _ = resolve(args)
        np.seterr(over="ignore", under="ignore")
        if cfg["command"] == "validate":
            rows, ok = cmd_validate(cfg, sys.stdout)
            if cfg.get("output"):
                write_output(cfg, render(cfg, rows))
            return EXIT_OK if ok else EXIT_VALIDATION
        handler = {"estimate": cmd_estimate, "sweep": cmd_sweep, "kernel": cmd_kernel,
                   "family": cmd_family, "maxstable": cmd_maxstable}[cfg["command"]]
        rows = handler(cfg, field, progress)
        write_output(cfg, render(cfg, rows))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PickandsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
