"""Command-line front end.

    czlab <experiment> --manifold SPEC --out DIR [flags]

Exit status: 0 when every contract holds, 2 on a contract violation, 1 on a
usage or I/O error.  ``summary.json`` is written to the output directory in
all three cases when the directory is known.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .experiments import (
    DEFAULT_SEED,
    BochnerRequest,
    DoublingSpec,
    NegricInput,
    check_bochner_cz2,
    check_doubling,
    check_interpolation,
    check_sandwich_bounds,
    make_and_check_cutoffs,
    negric_constants,
    random_bump_family,
    run_counterexample,
    run_scaling,
)
from .geometry import ModelManifold, curvature_local, green
from .report import atomic_write, csv_bytes, json_bytes, sha256
from .warpfn import SawtoothSpec, build_sawtooth_warp, make_analytic_warp

log = logging.getLogger("czlab")

GRAMMAR = """manifold spec grammar:
  euclidean:m=<int>
  hyperbolic:m=<int>,a=<float>
  sawtooth:m=<int>,kmax=<int>,gamma=<float>,rho=<float>,teeth=<int>
e.g. euclidean:m=2   hyperbolic:m=2,a=1.0   sawtooth:m=2,kmax=4,gamma=1.0,rho=0.1,teeth=1"""

EXPERIMENTS = ("curvature", "green", "counterexample", "scaling", "bochner",
               "interpolation", "doubling", "cutoffs", "negric")

_SPEC_KEYS = {
    "euclidean": {"m": int},
    "hyperbolic": {"m": int, "a": float},
    "sawtooth": {"m": int, "kmax": int, "gamma": float, "rho": float, "teeth": int},
}
_SPEC_DEFAULTS = {
    "euclidean": {"m": 2},
    "hyperbolic": {"m": 2, "a": 1.0},
    "sawtooth": {"m": 2, "kmax": 4, "gamma": 1.0, "rho": 0.1, "teeth": 1},
}


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str
    manifold: str
    out: str
    seed: int = DEFAULT_SEED
    params: dict = field(default_factory=dict)


def parse_manifold_spec(spec: str):
    """Return (kind, params) with defaults filled in."""
    kind, _, rest = spec.strip().partition(":")
    kind = kind.strip().lower()
    if kind not in _SPEC_KEYS:
        raise UsageError(f"unknown manifold kind {kind!r}\n{GRAMMAR}")
    params = dict(_SPEC_DEFAULTS[kind])
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        key = key.strip()
        if not eq or key not in _SPEC_KEYS[kind]:
            raise UsageError(f"bad manifold parameter {item!r}\n{GRAMMAR}")
        try:
            params[key] = _SPEC_KEYS[kind][key](val)
        except ValueError:
            raise UsageError(f"bad value in {item!r}\n{GRAMMAR}") from None
    return kind, params


def build_manifold(spec: str) -> ModelManifold:
    kind, p = parse_manifold_spec(spec)
    try:
        if kind == "sawtooth":
            sig = build_sawtooth_warp(SawtoothSpec.default(p["kmax"], p["gamma"], p["rho"], p["teeth"]))
        else:
            sig = make_analytic_warp(kind, p.get("a", 1.0))
        return ModelManifold(p["m"], sig, spec=spec)
    except ValueError as exc:
        raise UsageError(f"{exc}\n{GRAMMAR}") from None


def _floats(text):
    return tuple(float(x) for x in str(text).replace(";", ",").split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in str(text).replace(";", ",").split(",") if x.strip())


# ------------------------------------------------------------- experiments

def _curvature(M, cfg):
    P = cfg.params
    hi = P.get("t_max") or (float(M.sigma.t_max) if np.isfinite(M.sigma.t_max) else 10.0)
    t = np.linspace(P.get("t_min") or 0.01, hi, int(P.get("n") or 1000))
    p, tau = M.sigma.locate(t)
    s, d1, d2 = M.sigma.eval_local(p, tau)
    sr, st, rr, rt = curvature_local(M, p, tau)
    rows = [dict(t=t[i], sigma=s[i], dsigma=d1[i], d2sigma=d2[i], sec_radial=sr[i],
                 sec_tangential=st[i], ric_radial=rr[i], ric_tangential=rt[i])
            for i in range(len(t))]
    contracts = {"finite": bool(np.all(np.isfinite(sr)) and np.all(np.isfinite(rt)))}
    if M.sigma.poly is None:
        expected = 0.0 if M.sigma.kind == "euclidean" else -M.sigma.scale ** 2
        secs = [sr] if M.m == 2 else [sr, st]
        err = max(float(np.max(np.abs(x - expected))) for x in secs)
        contracts["constant_curvature_1e-10"] = err <= 1e-10
    return dict(csv={"curvature.csv": rows}, contracts=contracts, checks={}, summary={})


def _green(M, cfg):
    P = cfg.params
    G = green(M)
    hi = P.get("t_max") or (float(M.sigma.t_max) if np.isfinite(M.sigma.t_max) else 10.0)
    t = np.linspace(P.get("t_min") or 0.05, hi, int(P.get("n") or 1000))
    g = G.value(t)
    g1, g2 = G.deriv(t, dtype=np.longdouble)
    s, d1, _ = M.sigma.derivs(t)
    s, d1 = s.astype(np.longdouble), d1.astype(np.longdouble)
    res = np.abs(g2 + (M.m - 1) * (d1 / s) * g1) * s ** (M.m - 1)
    res = res.astype(np.float64)
    rows = [dict(t=t[i], G=g[i], residual=res[i]) for i in range(len(t))]
    g_at_1 = float(G.value(np.array([1.0]))[0])
    contracts = {"harmonic_residual_1e-10": float(np.max(res)) <= 1e-10,
                 "G(1)=0": abs(g_at_1) <= 1e-12,
                 "increasing": bool(np.all(np.diff(g) > 0))}
    return dict(csv={"green.csv": rows}, contracts=contracts, checks={},
                summary=dict(max_residual=float(np.max(res))))


def _sawtooth_spec(cfg):
    kind, p = parse_manifold_spec(cfg.manifold)
    if kind != "sawtooth" or p["m"] != 2:
        raise UsageError("counterexample needs a sawtooth:m=2 manifold\n" + GRAMMAR)
    P = cfg.params
    kmax = int(P.get("kmax") or p["kmax"])
    gamma = float(P["gamma"]) if P.get("gamma") is not None else p["gamma"]
    return SawtoothSpec.default(kmax, gamma, p["rho"], p["teeth"])


def _counterexample(M, cfg):
    rep = run_counterexample(_sawtooth_spec(cfg))
    contracts = {k: rep.verdicts[k] for k in ("all_cells_ok", "ratio_increasing")
                 if k in rep.verdicts}
    checks = {k: v for k, v in rep.verdicts.items() if k not in contracts}
    return dict(csv={"cz_report.csv": rep.cells}, contracts=contracts, checks=checks,
                summary=rep.summary)


def _scaling(M, cfg):
    eps = cfg.params.get("eps_grid") or (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    rep = run_scaling(int(cfg.params.get("k") or 1), tuple(eps))
    return dict(csv={"scaling.csv": rep.cells}, contracts=rep.verdicts, checks={},
                summary=rep.summary)


def _family_range(M):
    if M.sigma.poly is not None:
        return 2.0, 12.0
    return 0.5, 6.0


def _bochner(M, cfg):
    lo, hi = _family_range(M)
    n = int(cfg.params.get("n_members") or 50)
    fam = random_bump_family(n, lo, hi, seed=cfg.seed)
    eps = cfg.params.get("eps_grid") or (0.25, 1.0, 4.0)
    rep = check_bochner_cz2(BochnerRequest(M, fam, tuple(eps)))
    return dict(csv={"bochner.csv": rep.cells}, contracts=rep.verdicts, checks={},
                summary=rep.summary)


def _interpolation(M, cfg):
    lo, hi = _family_range(M)
    n = int(cfg.params.get("n_members") or 40)
    fam = random_bump_family(n, lo, hi, seed=cfg.seed, max_bumps=1)
    p = float(cfg.params.get("p") or 2.0)
    eps = cfg.params.get("eps_grid") or (0.5, 1.0, 2.0)
    rep = check_interpolation(M, fam, p, tuple(eps))
    return dict(csv={"interpolation.csv": rep.cells}, contracts=rep.verdicts, checks={},
                summary=rep.summary)


def _doubling(M, cfg):
    P = cfg.params
    D = float(P.get("D") or 2.0 ** (2 * M.m))
    delta = float(P["delta"]) if P.get("delta") is not None else 1.0
    grid = tuple(np.linspace(1.0, 20.0, 20).tolist())
    r_grid = P.get("r_grid") or grid
    t_grid = P.get("t_grid") or grid
    rep = check_doubling(M, DoublingSpec(D, delta, tuple(r_grid), tuple(t_grid)))
    return dict(csv={"doubling.csv": rep.cells}, contracts=rep.verdicts, checks={},
                summary=dict(rep.summary, D=D, delta=delta))


def _cutoffs(M, cfg):
    n_list = cfg.params.get("n_list") or (1, 2, 4, 8, 16, 32, 64)
    rep = make_and_check_cutoffs(M, n_list=tuple(n_list))
    return dict(csv={"cutoffs.csv": rep.cells}, contracts=rep.verdicts, checks={},
                summary=rep.summary)


def _negric(M, cfg):
    P = cfg.params
    inp = NegricInput(int(P.get("m") or M.m), float(P.get("K") or 0.0),
                      float(P.get("inj") or math.pi), float(P.get("volN") or 1.0))
    rep = negric_constants(inp)
    return dict(csv={"negric.csv": rep.cells}, contracts=rep.verdicts, checks={},
                summary=rep.summary)


_RUNNERS = dict(curvature=_curvature, green=_green, counterexample=_counterexample,
                scaling=_scaling, bochner=_bochner, interpolation=_interpolation,
                doubling=_doubling, cutoffs=_cutoffs, negric=_negric)


def _sandwich_checks(M):
    """Extra sandwich verdicts attached to ``green`` runs on sawtooth planes."""
    if M.m != 2 or M.sigma.poly is None:
        return {}
    s = np.linspace(0.01, 5.0, 500)
    t = np.linspace(1.01, float(M.sigma.t_max), 500)
    return check_sandwich_bounds(M, s, t).verdicts


# -------------------------------------------------------------------- run

def run(cfg: RunConfig) -> int:
    if cfg.experiment not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {cfg.experiment!r}; choose from {EXPERIMENTS}")
    M = build_manifold(cfg.manifold)
    out = _RUNNERS[cfg.experiment](M, cfg)
    if cfg.experiment == "green":
        out["checks"].update(_sandwich_checks(M))
    hashes = {}
    for name, rows in out["csv"].items():
        data = csv_bytes(rows)
        atomic_write(os.path.join(cfg.out, name), data)
        hashes[name] = sha256(data)
    config = dict(experiment=cfg.experiment, manifold=cfg.manifold, seed=cfg.seed,
                  params=cfg.params)
    passed = all(bool(v) for v in out["contracts"].values())
    doc = dict(experiment=cfg.experiment, manifold_spec=cfg.manifold, parameters=config,
               version=__version__, cells=next(iter(out["csv"].values())),
               verdicts=dict(contracts=out["contracts"], checks=out["checks"]),
               summary=out["summary"], golden_hashes=hashes)
    data = json_bytes(doc)
    atomic_write(os.path.join(cfg.out, f"{cfg.experiment}.json"), data)
    hashes[f"{cfg.experiment}.json"] = sha256(data)
    _write_summary(cfg, dict(status="pass" if passed else "contract-violation",
                             contracts=out["contracts"], checks=out["checks"],
                             artifacts=hashes))
    return 0 if passed else 2


def _write_summary(cfg, body):
    doc = dict(version=__version__, experiment=cfg.experiment, manifold_spec=cfg.manifold,
               seed=cfg.seed, params=cfg.params, **body)
    atomic_write(os.path.join(cfg.out, "summary.json"), json_bytes(doc))


# ------------------------------------------------------------------ parser

_PARAM_FLAGS = [
    # flag, dest, parser
    ("--kmax", "kmax", int),
    ("--gamma", "gamma", float),
    ("--k", "k", int),
    ("--p", "p", float),
    ("--eps-grid", "eps_grid", _floats),
    ("--D", "D", float),
    ("--delta", "delta", float),
    ("--r-grid", "r_grid", _floats),
    ("--t-grid", "t_grid", _floats),
    ("--n-list", "n_list", _ints),
    ("--K", "K", float),
    ("--inj", "inj", float),
    ("--volN", "volN", float),
    ("--m", "m", int),
    ("--n-members", "n_members", int),
    ("--t-min", "t_min", float),
    ("--t-max", "t_max", float),
    ("--n", "n", int),
]
_PARSERS = {dest: conv for _, dest, conv in _PARAM_FLAGS}


def build_parser():
    ap = argparse.ArgumentParser(prog="czlab", description=__doc__.splitlines()[0],
                                 epilog=GRAMMAR, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=f"czlab {__version__}")
    sub = ap.add_subparsers(dest="experiment", metavar="experiment")
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, epilog=GRAMMAR, formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--manifold", default=None, help="manifold spec (see grammar)")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--config", default=None, help="key = value config file")
        for flag, dest, conv in _PARAM_FLAGS:
            sp.add_argument(flag, dest=dest, type=conv, default=None)
    return ap


def read_config_file(path):
    """``key = value`` lines, optionally under a [run] section.  Keys use the
    flag names without dashes (``eps-grid`` or ``eps_grid``)."""
    with open(path) as fh:
        text = fh.read()
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(text)
    out = {}
    for sec in cp.sections():
        for key, val in cp.items(sec):
            out[key.replace("-", "_")] = val
    return out


def config_from_args(ns) -> RunConfig:
    if ns.experiment is None:
        raise UsageError("missing experiment name; choose from " + ", ".join(EXPERIMENTS))
    file_vals = read_config_file(ns.config) if ns.config else {}
    unknown = set(file_vals) - set(_PARSERS) - {"manifold", "out", "seed"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    params = {}
    for dest, conv in _PARSERS.items():
        val = getattr(ns, dest)
        if val is None and dest in file_vals:
            try:
                val = conv(file_vals[dest])
            except ValueError:
                raise UsageError(f"bad config value for {dest}: {file_vals[dest]!r}") from None
        if val is not None:
            params[dest] = list(val) if isinstance(val, tuple) else val
    default_manifold = "sawtooth:m=2" if ns.experiment in ("counterexample", "scaling") else "euclidean:m=2"
    manifold = ns.manifold or file_vals.get("manifold") or default_manifold
    out = ns.out or file_vals.get("out") or os.path.join("czlab-out", ns.experiment)
    seed = ns.seed if ns.seed is not None else int(file_vals.get("seed", DEFAULT_SEED))
    return RunConfig(ns.experiment, manifold, out, seed, params)


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("CZLAB_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    cfg = None
    try:
        cfg = config_from_args(ns)
        return run(cfg)
    except (UsageError, OSError) as exc:
        print(f"czlab: error: {exc}", file=sys.stderr)
        if cfg is not None:
            try:
                _write_summary(cfg, dict(status="usage-error", error=str(exc)))
            except OSError:
                pass
        return 1


if __name__ == "__main__":
    sys.exit(main())
