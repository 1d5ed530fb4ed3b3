"""Command-line entry point.

Configuration files are flat ``key = value`` lines grouped under optional
``[section]`` headers; ``#`` starts a comment.  Keys before the first header
belong to ``[run]``.  Recognised sections and keys::

    [run]        command carrier n m resolution out seed
    [domain]     kind (ball|box) R extents
    [measure]    measure (beta_n | lebesgue | power:<a> | file:<path>)
    [solver]     tol max_iter method (inverse|descent)
    [family]     kind (zero|eigen|affine_m|affine_k) lam a k
    [condenser]  kind (ball_in_ball|mask) r mask
    [envelope]   obstacle (quadratic|condenser|file:<path>)
    [check]      name corpus s
    [exponents]  p r

Exit status: 0 converged, 2 not converged (diagnostics in summary.txt),
1 input error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

SECTIONS = {
    "run": {"command", "carrier", "n", "m", "resolution", "out", "seed"},
    "domain": {"kind", "R", "extents"},
    "measure": {"measure"},
    "solver": {"tol", "max_iter", "method"},
    "family": {"kind", "lam", "a", "k"},
    "condenser": {"kind", "r", "mask"},
    "envelope": {"obstacle"},
    "check": {"name", "corpus", "s"},
    "exponents": {"p", "r"},
}
COMMANDS = ("eig", "dirichlet", "semilinear", "capacity", "envelope", "check", "exponents")
CHECKS = ("blocki", "sobolev", "capacity_energy", "monotonicity", "dini", "flux_formula")
NEEDS_CARRIER = ("eig", "dirichlet", "semilinear", "capacity", "envelope")


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class RunConfig:
    command: str
    carrier: str = "radial"
    n: int = 1
    m: int = 1
    resolution: int = 0
    domain: str = "ball"
    R: float = 1.0
    extents: tuple = ()
    measure: str = "beta_n"
    tol: float = 1e-10
    max_iter: int = 500
    method: str = "inverse"
    family: dict = field(default_factory=dict)
    condenser: dict = field(default_factory=dict)
    obstacle: str = "quadratic"
    check: str = ""
    corpus: int = 100
    s_values: tuple = ()
    p: float = math.nan
    r: float = math.nan
    out: str = "."
    seed: int = 0
    base_dir: str = "."


def _read_pairs(text: str):
    """Yield (section, key, value, line_number)."""
    section = "run"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"expected key = value, got {line!r}", lineno)
        key, value = key.strip(), value.strip()
        if key not in SECTIONS[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", lineno)
        yield section, key, value, lineno


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    """Parse and validate configuration text; errors carry the line number."""
    raw = {}
    for section, key, value, lineno in _read_pairs(text):
        raw[(section, key)] = (value, lineno)

    def get(section, key, conv=str, default=None, required=False):
        if (section, key) not in raw:
            if required:
                raise ConfigError(f"missing required key {key!r} in section [{section}]")
            return default
        value, lineno = raw[(section, key)]
        try:
            return conv(value)
        except ValueError:
            raise ConfigError(f"bad value {value!r} for key {key!r}", lineno) from None

    def line_of(section, key):
        return raw.get((section, key), (None, None))[1]

    command = get("run", "command", required=True)
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}", line_of("run", "command"))
    cfg = RunConfig(command=command, base_dir=base_dir)
    cfg.out = get("run", "out", default=".")
    cfg.seed = get("run", "seed", int, 0)
    cfg.tol = get("solver", "tol", float, 1e-10)
    cfg.max_iter = get("solver", "max_iter", int, 500)
    cfg.method = get("solver", "method", default="inverse")
    if cfg.method not in ("inverse", "descent"):
        raise ConfigError(f"unknown method {cfg.method!r}", line_of("solver", "method"))

    if command in NEEDS_CARRIER or command == "exponents":
        cfg.n = get("run", "n", int, required=True)
        cfg.m = get("run", "m", int, required=True)
        if cfg.n < 1 or cfg.m < 1:
            raise ConfigError("m and n must be >= 1", line_of("run", "m"))
        if cfg.m > cfg.n:
            raise ConfigError("m exceeds n", line_of("run", "m"))
    if command in NEEDS_CARRIER:
        cfg.carrier = get("run", "carrier", default="radial")
        if cfg.carrier not in ("radial", "grid"):
            raise ConfigError(f"unknown carrier {cfg.carrier!r}", line_of("run", "carrier"))
        if cfg.carrier == "grid" and cfg.n > 2:
            raise ConfigError("grid carrier limited to n <= 2", line_of("run", "n"))
        cfg.resolution = get("run", "resolution", int, 2001 if cfg.carrier == "radial" else 33)
        if cfg.resolution % 2 == 0 or cfg.resolution < 5:
            raise ConfigError("resolution must be odd and >= 5", line_of("run", "resolution"))
        cfg.domain = get("domain", "kind", default="ball")
        if cfg.domain not in ("ball", "box"):
            raise ConfigError(f"unknown domain kind {cfg.domain!r}", line_of("domain", "kind"))
        cfg.R = get("domain", "R", float, 1.0)
        if not cfg.R > 0:
            raise ConfigError("R must be positive", line_of("domain", "R"))
        if cfg.domain == "box":
            if cfg.carrier == "radial":
                raise ConfigError("box domains need the grid carrier", line_of("domain", "kind"))
            ext = get("domain", "extents", lambda s: tuple(float(x) for x in s.split()), required=True)
            if len(ext) == 1:
                ext = ext * (2 * cfg.n)
            if len(ext) != 2 * cfg.n:
                raise ConfigError("box needs 2n extents", line_of("domain", "extents"))
            cfg.extents = ext
        cfg.measure = get("measure", "measure", default="beta_n")
        if not (cfg.measure in ("beta_n", "lebesgue") or cfg.measure.startswith(("power:", "file:"))):
            raise ConfigError(f"unknown measure {cfg.measure!r}", line_of("measure", "measure"))

    if command == "semilinear":
        kind = get("family", "kind", required=True)
        if kind not in ("zero", "eigen", "affine_m", "affine_k"):
            raise ConfigError(f"unknown family {kind!r}", line_of("family", "kind"))
        cfg.family = {
            "kind": kind,
            "lam": get("family", "lam", float, 0.0),
            "a": get("family", "a", float, 1.0),
            "k": get("family", "k", int, 1),
        }
    if command == "capacity" or (command == "envelope" and get("envelope", "obstacle", default="") == "condenser"):
        kind = get("condenser", "kind", required=True)
        if kind == "ball_in_ball":
            r = get("condenser", "r", float, required=True)
            if not 0 < r < cfg.R:
                raise ConfigError("condenser needs 0 < r < R", line_of("condenser", "r"))
            cfg.condenser = {"kind": kind, "r": r}
        elif kind == "mask":
            cfg.condenser = {"kind": kind, "mask": get("condenser", "mask", required=True)}
        else:
            raise ConfigError(f"unknown condenser kind {kind!r}", line_of("condenser", "kind"))
    if command == "envelope":
        cfg.obstacle = get("envelope", "obstacle", default="quadratic")
        if not (cfg.obstacle in ("quadratic", "condenser") or cfg.obstacle.startswith("file:")):
            raise ConfigError(f"unknown obstacle {cfg.obstacle!r}", line_of("envelope", "obstacle"))
    if command == "check":
        cfg.check = get("check", "name", required=True)
        if cfg.check not in CHECKS:
            raise ConfigError(f"unknown check {cfg.check!r}", line_of("check", "name"))
        cfg.corpus = get("check", "corpus", int, 100)
        cfg.s_values = get("check", "s", lambda s: tuple(float(x) for x in s.split()), ())
        cfg.n = get("run", "n", int, 1)
        cfg.m = get("run", "m", int, 1)
        if cfg.m > cfg.n:
            raise ConfigError("m exceeds n", line_of("run", "m"))
        cfg.p = get("exponents", "p", float, 2.0)
        cfg.r = get("exponents", "r", float, math.nan)
    if command == "exponents":
        cfg.p = get("exponents", "p", float, required=True)
        if not cfg.p > 1:
            raise ConfigError("p must be > 1", line_of("exponents", "p"))
        cfg.r = get("exponents", "r", float, math.nan)
        if not math.isnan(cfg.r) and not 0 < cfg.r < cfg.p:
            raise ConfigError("r must satisfy 0 < r < p", line_of("exponents", "r"))
    return cfg


# ---------------------------------------------------------------------------
# execution


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _write_summary(path, items) -> None:
    with open(path, "w") as fh:
        for k, v in items:
            fh.write(f"{k} = {_fmt(v)}\n")


def _path(cfg: RunConfig, p: str) -> str:
    return p if os.path.isabs(p) else os.path.join(cfg.base_dir, p)


def build_carrier(cfg: RunConfig):
    from mhessian.fields import Domain, make_grid, make_radial_grid

    if cfg.carrier == "radial":
        return make_radial_grid(cfg.n, cfg.resolution, radius=cfg.R)
    dom = Domain.ball(cfg.n, cfg.R) if cfg.domain == "ball" else Domain.box(cfg.n, cfg.extents)
    return make_grid(dom, cfg.resolution)


def build_measure(cfg: RunConfig, carrier):
    from mhessian.fields import make_density_measure

    spec = cfg.measure
    if spec == "beta_n":
        return make_density_measure(carrier, 1.0)
    if spec == "lebesgue":
        return make_density_measure(carrier, 1.0, reference="lebesgue")
    if spec.startswith("power:"):
        a = float(spec.split(":", 1)[1])
        rho = carrier.rho
        return make_density_measure(carrier, np.where(rho > 0, rho, 0.0) ** a)
    vals = np.loadtxt(_path(cfg, spec.split(":", 1)[1]), ndmin=1)
    if vals.size != int(np.prod(carrier.shape)):
        raise ValueError("measure file does not match the carrier")
    return make_density_measure(carrier, vals.reshape(carrier.shape))


def build_condenser(cfg: RunConfig, carrier):
    from mhessian.envelope import Condenser
    from mhessian.io import load_mask

    if cfg.condenser["kind"] == "ball_in_ball":
        return Condenser.ball_in_ball(carrier, cfg.condenser["r"])
    return Condenser(carrier, load_mask(_path(cfg, cfg.condenser["mask"]), carrier))


def build_family(cfg: RunConfig):
    from mhessian.functionals import RhsFamily

    f = cfg.family
    if f["kind"] == "zero":
        return RhsFamily.zero()
    if f["kind"] == "eigen":
        return RhsFamily.eigen(f["lam"], cfg.m)
    if f["kind"] == "affine_m":
        return RhsFamily.affine_m(f["lam"], cfg.m)
    return RhsFamily.affine_k(f["a"], f["lam"], f["k"])


def _gate_flux_formula(cfg: RunConfig):
    """The radial flux formula must agree with the eigenvalue formula first."""
    from mhessian.verify import flux_formula_gate

    if cfg.m >= 2:
        rep = flux_formula_gate(seed=cfg.seed)
        if not rep.passed:
            raise RuntimeError(f"flux-formula gate failed (worst relative error {rep.worst_ratio:.3e})")


def _run_eig(cfg, out):
    from mhessian.functionals import energy_Em, twisted_Im
    from mhessian.io import save_snapshot
    from mhessian.solvers import eigen_inverse_iteration, eigen_rayleigh_descent

    _gate_flux_formula(cfg)
    carrier = build_carrier(cfg)
    mu = build_measure(cfg, carrier)
    if cfg.method == "inverse":
        res = eigen_inverse_iteration(mu, cfg.m, tol=cfg.tol, max_iter=cfg.max_iter)
    else:
        res = eigen_rayleigh_descent(mu, cfg.m, steps=cfg.max_iter, tol=cfg.tol)
    u = res.eigenfunction
    res.log.write(os.path.join(out, "runlog.csv"))
    save_snapshot(u, os.path.join(out, "eigenfunction.snap"))
    items = [
        ("command", "eig"),
        ("method", cfg.method),
        ("lambda", res.lam),
        ("lambda_normalization", res.lam_normalization),
        ("residual_l1", res.residual_l1),
        ("E_m", energy_Em(u, cfg.m)),
        ("I_m", twisted_Im(u, mu, cfg.m)),
        ("iterations", res.iterations),
        ("converged", res.converged),
    ]
    return items, res.converged


def _run_dirichlet(cfg, out):
    from mhessian.fields import GridPotential
    from mhessian.functionals import energy_Em
    from mhessian.io import save_snapshot
    from mhessian.solvers import dirichlet_solve_grid, dirichlet_solve_radial
    from mhessian.solvers.dirichlet import grid_residual

    _gate_flux_formula(cfg)
    carrier = build_carrier(cfg)
    mu = build_measure(cfg, carrier)
    if cfg.carrier == "radial":
        u = dirichlet_solve_radial(mu.density, cfg.m, carrier)
        from mhessian.hessian import radial_density_k

        w = carrier.weights * carrier.interior
        f = mu.density
        res = float(np.sum(np.abs(radial_density_k(u, cfg.m) - f) * w) / max(np.sum(f * w), 1e-300))
        converged, sweeps = True, 0
    else:
        u, info = dirichlet_solve_grid(mu.density, cfg.m, carrier, tol=cfg.tol, max_sweeps=cfg.max_iter * 40, full_output=True)
        res, converged, sweeps = info.residual, info.converged, info.sweeps
        from mhessian.solvers import RunLog

        log = RunLog()
        for i, r in enumerate(info.history, start=1):
            log.record(100 * i, r, math.nan)
        log.write(os.path.join(out, "runlog.csv"))
    save_snapshot(u, os.path.join(out, "solution.snap"))
    items = [
        ("command", "dirichlet"),
        ("residual_l1", res),
        ("E_m", energy_Em(u, cfg.m)),
        ("sweeps", sweeps),
        ("converged", converged),
        ("min_value", float(np.min(u.values))),
    ]
    return items, converged


def _run_semilinear(cfg, out):
    from mhessian.io import save_snapshot
    from mhessian.solvers import solve_semilinear

    _gate_flux_formula(cfg)
    carrier = build_carrier(cfg)
    mu = build_measure(cfg, carrier)
    res = solve_semilinear(build_family(cfg), mu, cfg.m, tol=cfg.tol, max_iter=cfg.max_iter)
    res.log.write(os.path.join(out, "runlog.csv"))
    save_snapshot(res.potential, os.path.join(out, "solution.snap"))
    items = [
        ("command", "semilinear"),
        ("family", cfg.family["kind"]),
        ("residual_l1", res.residual),
        ("phi", res.phi_history[-1]),
        ("phi_monotone", res.phi_monotone),
        ("h2_status", res.h_report.h2_status),
        ("h3_status", res.h_report.h3_status),
        ("iterations", res.iterations),
        ("converged", res.converged),
    ]
    return items, res.converged


def _run_capacity(cfg, out):
    from mhessian.envelope import capacity_cm, extremal_function
    from mhessian.io import save_snapshot

    carrier = build_carrier(cfg)
    cond = build_condenser(cfg, carrier)
    res = capacity_cm(cond, cfg.m, tol=min(cfg.tol, 1e-8))
    save_snapshot(extremal_function(cond, cfg.m, tol=min(cfg.tol, 1e-8)), os.path.join(out, "extremal.snap"))
    with open(os.path.join(out, "capacity.csv"), "w") as fh:
        fh.write(res.header + "\n" + res.csv_row() + "\n")
    items = [
        ("command", "capacity"),
        ("mass_version", res.mass_version),
        ("energy_version", res.energy_version),
        ("ratio", res.ratio),
    ]
    return items, True


def _run_envelope(cfg, out):
    from mhessian.envelope import envelope_Pm
    from mhessian.fields import GridPotential, RadialPotential
    from mhessian.io import load_snapshot, save_snapshot

    carrier = build_carrier(cfg)
    if cfg.obstacle == "quadratic":
        vals = carrier.rho - cfg.R**2
        h = RadialPotential(carrier, vals) if cfg.carrier == "radial" else GridPotential(carrier, vals)
    elif cfg.obstacle == "condenser":
        h = build_condenser(cfg, carrier).obstacle()
    else:
        h = load_snapshot(_path(cfg, cfg.obstacle.split(":", 1)[1]))
    u = envelope_Pm(h, cfg.m, tol=max(cfg.tol, 1e-12))
    save_snapshot(u, os.path.join(out, "envelope.snap"))
    items = [
        ("command", "envelope"),
        ("max_gap", float(np.max(h.values - u.values))),
        ("min_value", float(np.min(u.values))),
    ]
    return items, True


def _run_check(cfg, out):
    from mhessian import verify

    name = cfg.check
    if name == "blocki":
        rep = verify.check_blocki_corpus(cfg.corpus, cfg.seed)
    elif name == "sobolev":
        rep = verify.check_sobolev_corpus(cfg.n, cfg.m, cfg.corpus, cfg.seed)
    elif name == "capacity_energy":
        rng = np.random.default_rng(cfg.seed)
        from mhessian.fields import make_radial_grid

        phi = verify.random_profile(make_radial_grid(cfg.n, 801), cfg.m, rng)
        depth = float(-np.min(phi.values))
        s_values = cfg.s_values or (0.25 * depth, 0.5 * depth, 0.75 * depth)
        rep = verify.check_capacity_energy(phi, s_values, cfg.m)
    elif name == "monotonicity":
        rep = verify.check_monotonicity_lambda([0.5, 1.0, 2.0], cfg.m, cfg.n)
    elif name == "flux_formula":
        rep = verify.flux_formula_gate(cfg.corpus, cfg.seed)
    else:
        prof = verify.DiffusenessProfile.power_law(1.0, cfg.p)
        r = cfg.r if not math.isnan(cfg.r) else cfg.m + 1.0
        d = verify.diffuseness_integrals(prof, cfg.m, r)
        items = [
            ("command", "check"),
            ("check", "dini"),
            ("tau", cfg.p),
            ("dini_verdict", d.dini.verdict),
            ("dini_value", d.dini.value),
            ("ell_gamma_verdict", d.ell.verdict),
            ("ell_gamma_value", d.ell.value),
        ]
        return items, d.dini.verdict != "indeterminate"
    rep.seed = cfg.seed
    rep.write(os.path.join(out, f"check_{name}.csv"))
    items = [
        ("command", "check"),
        ("check", name),
        ("seed", cfg.seed),
        ("samples", rep.samples),
        ("worst_ratio", rep.worst_ratio),
        ("violations", rep.violations),
        ("passed", rep.passed),
    ] + [("note", n) for n in rep.notes]
    return items, True


def _run_exponents(cfg, out):
    from mhessian.solvers import compute_exponents

    rec = compute_exponents(cfg.m, cfg.n, cfg.p)
    items = [
        ("command", "exponents"),
        ("m", rec.m),
        ("n", rec.n),
        ("p", rec.p),
        ("ell", rec.ell),
        ("p_star", rec.p_star),
        ("k_exp", rec.k_exp),
        ("holder_condition", rec.holder_condition),
        ("limit_case", rec.limit_case),
    ]
    if not math.isnan(cfg.r):
        items.append(("tau", rec.tau(cfg.r)))
    return items, True


RUNNERS = {
    "eig": _run_eig,
    "dirichlet": _run_dirichlet,
    "semilinear": _run_semilinear,
    "capacity": _run_capacity,
    "envelope": _run_envelope,
    "check": _run_check,
    "exponents": _run_exponents,
}


def run(cfg: RunConfig) -> int:
    """Execute a validated config; returns the exit status."""
    from mhessian.solvers import HypothesisError

    out = _path(cfg, cfg.out) if not os.path.isabs(cfg.out) else cfg.out
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()
    try:
        items, converged = RUNNERS[cfg.command](cfg, out)
    except (HypothesisError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_summary(os.path.join(out, "summary.txt"), [("command", cfg.command), ("error", str(exc))])
        return 1
    except RuntimeError as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        _write_summary(os.path.join(out, "summary.txt"), [("command", cfg.command), ("converged", False), ("error", str(exc))])
        return 2
    items.append(("wall_time", time.perf_counter() - t0))
    _write_summary(os.path.join(out, "summary.txt"), items)
    return 0 if converged else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mhessian", description="Twisted complex m-Hessian eigenvalue problems.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("name", nargs="?", help="check name (for the check command)")
    ap.add_argument("--config", help="configuration file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="extra [run]-style setting; may be repeated, use section.key for other sections")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--max-iter", type=int)
    return ap


def _compose(args) -> tuple:
    text = ""
    base = "."
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
        base = os.path.dirname(os.path.abspath(args.config))
    # overrides are appended as extra sections; later keys win
    extra = ["[run]", f"command = {args.command}"]
    if args.name:
        extra += ["[check]", f"name = {args.name}"]
    if args.out:
        extra += ["[run]", f"out = {os.path.abspath(args.out)}"]
    if args.seed is not None:
        extra += ["[run]", f"seed = {args.seed}"]
    if args.tol is not None:
        extra += ["[solver]", f"tol = {args.tol!r}"]
    if args.max_iter is not None:
        extra += ["[solver]", f"max_iter = {args.max_iter}"]
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        section, dot, key = key.strip().rpartition(".")
        extra += [f"[{section if dot else 'run'}]", f"{key} = {value.strip()}"]
    return text.rstrip("\n") + "\n" + "\n".join(extra) + "\n", base


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text, base = _compose(args)
        cfg = parse_config(text, base_dir=base)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
