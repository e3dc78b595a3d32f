"""Command line front end: ``entscale generate|analyze|ksg|decompose``.

Defaults can be overridden with ``--config file.json``; explicit flags win
over the file. Every output file carries the effective configuration as a
``# config=`` header line, and ``--config`` accepts such a file directly, so
a run can be repeated from its own output.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import EntscaleError, UsageError

log = logging.getLogger("entscale")

SUBCOMMANDS = ("generate", "analyze", "ksg", "decompose")


@dataclass
class RunConfig:
    subcommand: str = "analyze"
    input: str = None
    output: str = None
    column: int = 0
    # generate
    model: str = "lorenz"
    n: int = 100_000
    noise: float = 0.0
    step: float = 5e-4
    dt: float = 0.01
    transient: int = 10_000
    component: str = "x"
    a1: float = 1.991843
    a2: float = -0.994793
    sigma: float = 1.0
    # embedding and grid
    m_max: int = 10
    tau: int = 1
    eps_min: float = None
    eps_max: float = None
    n_eps: int = 64
    theiler: int = 0
    delta_steps: int = 1
    exact_limit: int = 10_000
    # ksg
    orders: list = field(default_factory=lambda: [1, 2])
    k: int = 4
    eta: list = field(default_factory=lambda: [0.0])
    # decompose
    s_min: float = 0.1
    kappa_max: float = 0.5
    windows: list = field(default_factory=list)
    seed: int = 0
    bits: bool = False

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls(**d)
        cfg.windows = [tuple(map(float, w)) for w in cfg.windows]
        return cfg

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def header(self):
        return [f"entscale {__version__}", f"config={self.to_json()}"]


def read_config_file(path):
    """JSON object, or any output file carrying a ``# config=`` line."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError:
        for line in text.splitlines():
            if line.startswith("# config="):
                d = json.loads(line[len("# config="):])
                break
        else:
            raise UsageError(f"{path} is neither JSON nor an entscale output") from None
    if not isinstance(d, dict):
        raise UsageError("config must be a JSON object")
    return d


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _window(text):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be LO:HI, got {text!r}") from None
    return (lo, hi)


def build_parser():
    S = argparse.SUPPRESS
    p = _Parser(prog="entscale", description="Scale-dependent entropy analysis of scalar time series.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config (or an earlier output file)")
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("-v", "--verbose", action="store_true")

    data = _Parser(add_help=False)
    data.add_argument("input", nargs="?", default=S, help="series CSV")
    data.add_argument("--column", type=int, default=S)
    data.add_argument("--tau", type=int, default=S)
    data.add_argument("--bits", action="store_true", default=S, help="report information in bits")

    grid = _Parser(add_help=False)
    grid.add_argument("--m-max", dest="m_max", type=int, default=S)
    grid.add_argument("--eps-min", dest="eps_min", type=float, default=S)
    grid.add_argument("--eps-max", dest="eps_max", type=float, default=S)
    grid.add_argument("--n-eps", dest="n_eps", type=int, default=S)
    grid.add_argument("--theiler", type=int, default=S)
    grid.add_argument("--exact-limit", dest="exact_limit", type=int, default=S,
                      help="count all pairs up to this many points, sample references above")

    g = sub.add_parser("generate", parents=[common], help="write a synthetic series")
    g.add_argument("model", choices=("lorenz", "ar2"), nargs="?", default=S)
    g.add_argument("-o", "--output", default=S)
    g.add_argument("--n", type=int, default=S)
    g.add_argument("--noise", type=float, default=S, help="half-width of the uniform per-step Lorenz kick")
    g.add_argument("--step", type=float, default=S, help="integration step")
    g.add_argument("--dt", type=float, default=S, help="sampling interval")
    g.add_argument("--transient", type=int, default=S)
    g.add_argument("--component", choices=("x", "y", "z", "all"), default=S)
    g.add_argument("--a1", type=float, default=S)
    g.add_argument("--a2", type=float, default=S)
    g.add_argument("--sigma", type=float, default=S)

    a = sub.add_parser("analyze", parents=[common, data, grid], help="correlation-sum curve families")
    a.add_argument("-o", "--output", default=S, help="output prefix")
    a.add_argument("--delta-steps", dest="delta_steps", type=int, default=S)

    k = sub.add_parser("ksg", parents=[common, data], help="KSG predictive information")
    k.add_argument("-o", "--output", default=S)
    k.add_argument("--orders", type=int, nargs="+", default=S)
    k.add_argument("--k", type=int, default=S)
    k.add_argument("--eta", type=float, nargs="+", default=S)

    d = sub.add_parser("decompose", parents=[common, data, grid], help="excess entropy decomposition")
    d.add_argument("-o", "--output", default=S, help="output prefix")
    d.add_argument("--s-min", dest="s_min", type=float, default=S)
    d.add_argument("--kappa-max", dest="kappa_max", type=float, default=S)
    d.add_argument("--window", dest="windows", type=_window, action="append", default=S,
                   help="summary window LO:HI (repeatable)")
    return p


def resolve_config(argv):
    ns = vars(build_parser().parse_args(argv))
    verbose = ns.pop("verbose", False)
    base = {}
    path = ns.pop("config", None)
    if path is not None:
        base = read_config_file(path)
    base.update(ns)
    return RunConfig.from_dict(base), verbose


# -- subcommands ------------------------------------------------------------

def _need(cfg, name):
    if getattr(cfg, name) is None:
        raise UsageError(f"missing required setting: {name}")
    return getattr(cfg, name)


def _load(cfg):
    from .series import load_series
    return load_series(_need(cfg, "input"), cfg.column)


def _grid(cfg, series):
    from .corrsum import EpsGrid
    auto = EpsGrid.for_series(series, cfg.n_eps)
    lo = auto.values[0] if cfg.eps_min is None else cfg.eps_min
    hi = auto.values[-1] if cfg.eps_max is None else cfg.eps_max
    return EpsGrid.geometric(lo, hi, cfg.n_eps)


def _pair_cfg(cfg):
    from .corrsum import PairCountConfig
    return PairCountConfig(theiler=cfg.theiler, exact_limit=cfg.exact_limit, seed=cfg.seed)


def run_generate(cfg):
    from .models import Ar2Params, LorenzParams, ar2_generate, lorenz_generate
    from .series import save_series

    out = _need(cfg, "output")
    if cfg.model == "lorenz":
        p = LorenzParams(n_samples=cfg.n, integration_step=cfg.step, sampling_dt=cfg.dt,
                         noise_amp=cfg.noise, seed=cfg.seed, transient_steps=cfg.transient)
        xyz = lorenz_generate(p)
        if cfg.component == "all":
            series, extra = xyz[0], [xyz[1].samples, xyz[2].samples]
        else:
            series, extra = xyz["xyz".index(cfg.component)], []
    elif cfg.model == "ar2":
        series, extra = ar2_generate(Ar2Params(cfg.a1, cfg.a2, cfg.sigma, cfg.n, cfg.seed)), []
    else:
        raise UsageError(f"unknown model {cfg.model!r}")
    save_series(series, out, header=cfg.header(), columns=extra)
    log.info("wrote %d samples to %s", cfg.n, out)
    return [out]


def run_analyze(cfg):
    from .corrsum import analyze

    s = _load(cfg)
    prefix = _need(cfg, "output")
    curves = analyze(s, cfg.m_max, cfg.tau, _grid(cfg, s), _pair_cfg(cfg), cfg.delta_steps)
    paths = []
    for q, fam in curves.families().items():
        path = f"{prefix}_{q}.csv"
        fam.to_csv(path, header=cfg.header(), bits=cfg.bits)
        paths.append(path)
    return paths


def run_ksg(cfg):
    from .ksg import KsgConfig, predictive_information, write_pi_csv

    s = _load(cfg)
    out = _need(cfg, "output")
    pi = predictive_information(s, cfg.orders, cfg.tau, KsgConfig(k=cfg.k, seed=cfg.seed), cfg.eta)
    write_pi_csv(pi, out, header=cfg.header(), bits=cfg.bits)
    return [out]


def run_decompose(cfg):
    from .corrsum import analyze
    from .decomp import DecompConfig, run_decomposition
    from .scalefit import write_fits_csv

    s = _load(cfg)
    prefix = _need(cfg, "output")
    dcfg = DecompConfig(cfg.s_min, cfg.kappa_max, cfg.m_max)
    curves = analyze(s, cfg.m_max + 1, cfg.tau, _grid(cfg, s), _pair_cfg(cfg), cfg.delta_steps)
    result = run_decomposition(curves.deltaH, dcfg, cfg.windows)
    rep = result.report
    rep.config = {**rep.config, "run": json.loads(cfg.to_json())}
    scale = 1.0 / np.log(2.0) if cfg.bits else 1.0
    if scale != 1.0:
        rep = _scaled(rep, scale)
    paths = [f"{prefix}.json", f"{prefix}.csv", f"{prefix}_fits.csv"]
    rep.to_json(paths[0])
    rep.to_csv(paths[1], header=cfg.header())
    write_fits_csv(result.pre, paths[2], header=cfg.header())
    for w in rep.windows:
        log.info("window [%g, %g]: E_state %.3f+-%.3f  E_mem %.3f+-%.3f  E_core %.3f+-%.3f  D %.3f  const %.3f",
                 w.eps_lo, w.eps_hi, *w.E_state, *w.E_mem, *w.E_core, w.D, w.const)
    return paths


def _scaled(rep, scale):
    from dataclasses import replace

    from .decomp import summarize_window
    new = replace(rep, E_state=rep.E_state * scale, E_eps=rep.E_eps * scale,
                  E_mem=rep.E_mem * scale, E_total=rep.E_total * scale, windows=[])
    new.config = {**rep.config, "unit": "bits"}
    new.windows = [summarize_window(new, w.eps_lo, w.eps_hi) for w in rep.windows]
    return new


RUNNERS = {"generate": run_generate, "analyze": run_analyze, "ksg": run_ksg, "decompose": run_decompose}


def main(argv=None):
    logging.basicConfig(format="%(message)s", stream=sys.stderr)
    try:
        try:
            cfg, verbose = resolve_config(argv)
        except SystemExit as exc:
            return exc.code if isinstance(exc.code, int) else 1
        log.setLevel(logging.INFO if verbose else logging.WARNING)
        paths = RUNNERS[cfg.subcommand](cfg)
    except EntscaleError as exc:
        print(f"entscale: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"entscale: FileNotFound: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"entscale: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ArithmeticError as exc:
        print(f"entscale: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
