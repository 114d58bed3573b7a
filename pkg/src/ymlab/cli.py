"""Command-line experiment runner.

    ymlab <task> [--config FILE] [--out-dir DIR] [--seed N] [--threads N]

Tasks: check, critical, spectral, flow, hybrid, morse.  The configuration
is an INI file; see ``DEFAULTS`` for every key.  Each run writes
``report.json`` plus CSV tables into the output directory, which defaults
to ``$YMLAB_OUT_DIR`` or ``./ymlab-out``.

Exit status: 0 pass, 1 fail, 2 usage or configuration error, 3 partial
result, 4 pipeline error.
"""
import argparse
import configparser
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .lattice import TorusGrid
from .functional import NO_PERTURBATION, PerturbationSpec

__all__ = ["ExperimentConfig", "ConfigError", "runExperiment", "main", "TASKS", "DEFAULTS"]

log = logging.getLogger("ymlab")

TASKS = ("check", "critical", "spectral", "flow", "hybrid", "morse")
EXIT = {"pass": 0, "fail": 1, "usage": 2, "partial": 3, "error": 4}

DEFAULTS = {
    "experiment": {"task": "check", "group": "u1", "seed": "0"},
    "grid": {"Nx": "8", "Ny": "8", "Lx": str(2 * math.pi), "Ly": str(2 * math.pi), "conformal": "0.0"},
    "perturbation": {"kind": "cos_cos", "eps": "0.2", "row": "0", "col": "0"},
    "solver": {"newton_tol": "1e-9", "eig_tol": "1e-8", "crossing_tol": "1e-9", "svd_tol": "1e-8"},
    "trajectory": {"S": "25", "M": "64", "ds_policy": "count", "source": "-1", "target": "-1",
                   "n_starts": "1"},
    "morse": {"level": "inf", "n_starts": "8", "lift_radius": str(math.pi + 1e-6), "oracle": "yes"},
    "check": {"samples": "100"},
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    group: str
    seed: int
    Nx: int
    Ny: int
    Lx: float
    Ly: float
    conformal: float
    pert_kind: str
    eps: float
    row: int
    col: int
    newton_tol: float
    eig_tol: float
    crossing_tol: float
    svd_tol: float
    S: float
    M: int
    ds_policy: str
    source: int
    target: int
    n_starts: int
    level: float
    morse_starts: int
    lift_radius: float
    oracle: bool
    samples: int

    @property
    def tolerances(self):
        return {k: getattr(self, k) for k in ("newton_tol", "eig_tol", "crossing_tol", "svd_tol")}

    def grid(self):
        u = None
        if self.conformal:
            rng = np.random.default_rng(self.seed)
            u = self.conformal * rng.standard_normal((self.Nx, self.Ny))
        return TorusGrid(self.Nx, self.Ny, self.Lx, self.Ly, u)

    def perturbation(self, grid):
        if self.pert_kind == "none" or self.eps == 0:
            return NO_PERTURBATION if self.pert_kind == "none" else PerturbationSpec.cos_cos(grid, 0.0)
        if self.pert_kind == "cos_cos":
            return PerturbationSpec.cos_cos(grid, self.eps, self.row, self.col)
        from .checks import winding_perturbation
        return winding_perturbation(grid, self.eps)

    def slices(self, grid):
        if self.ds_policy == "grid":
            # ds = h
            return int(round(2 * self.S / min(grid.hx, grid.hy))) + 1
        return self.M

    def as_ini(self):
        """Normalized configuration text, the input of the config hash."""
        cp = configparser.ConfigParser()
        cp.optionxform = str
        for sec, keys in _normalized(self).items():
            cp[sec] = keys
        lines = []
        for sec in sorted(cp.sections()):
            lines.append(f"[{sec}]")
            lines += [f"{k} = {cp[sec][k]}" for k in sorted(cp[sec])]
        return "\n".join(lines) + "\n"


def _normalized(c):
    return {
        "experiment": {"task": c.task, "group": c.group, "seed": str(c.seed)},
        "grid": {"Nx": str(c.Nx), "Ny": str(c.Ny), "Lx": repr(c.Lx), "Ly": repr(c.Ly),
                 "conformal": repr(c.conformal)},
        "perturbation": {"kind": c.pert_kind, "eps": repr(c.eps), "row": str(c.row), "col": str(c.col)},
        "solver": {k: repr(v) for k, v in c.tolerances.items()},
        "trajectory": {"S": repr(c.S), "M": str(c.M), "ds_policy": c.ds_policy, "source": str(c.source),
                       "target": str(c.target), "n_starts": str(c.n_starts)},
        "morse": {"level": repr(c.level), "n_starts": str(c.morse_starts),
                  "lift_radius": repr(c.lift_radius), "oracle": "yes" if c.oracle else "no"},
        "check": {"samples": str(c.samples)},
    }


def _get(cp, sec, key, conv, check=None, what=""):
    raw = cp[sec][key]
    try:
        v = conv(raw)
    except ValueError:
        raise ConfigError(f"{sec}.{key}: cannot parse {raw!r}") from None
    if check is not None and not check(v):
        raise ConfigError(f"{sec}.{key}: {what} (got {raw!r})")
    return v


def _bool(s):
    s = s.strip().lower()
    if s in ("1", "yes", "true", "on"):
        return True
    if s in ("0", "no", "false", "off"):
        return False
    raise ValueError(s)


def load_config(path=None, overrides=None):
    """Parse an INI file on top of ``DEFAULTS``; ``overrides`` maps ``section.key`` to text."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_dict(DEFAULTS)
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config: no such file {path}")
        try:
            cp.read(path)
        except configparser.Error as e:
            raise ConfigError(f"config: {e}") from None
    for k, v in (overrides or {}).items():
        sec, key = k.split(".")
        cp[sec][key] = str(v)
    for sec in cp.sections():
        if sec not in DEFAULTS:
            raise ConfigError(f"{sec}: unknown section")
        for key in cp[sec]:
            if key not in DEFAULTS[sec]:
                raise ConfigError(f"{sec}.{key}: unknown key")
    pos = lambda v: v > 0
    return ExperimentConfig(
        task=_get(cp, "experiment", "task", str, lambda v: v in TASKS, f"one of {TASKS}"),
        group=_get(cp, "experiment", "group", str, lambda v: v in ("u1", "su2"), "u1 or su2"),
        seed=_get(cp, "experiment", "seed", int, lambda v: v >= 0, "nonnegative"),
        Nx=_get(cp, "grid", "Nx", int, lambda v: v >= 4, "at least 4"),
        Ny=_get(cp, "grid", "Ny", int, lambda v: v >= 4, "at least 4"),
        Lx=_get(cp, "grid", "Lx", float, pos, "positive"),
        Ly=_get(cp, "grid", "Ly", float, pos, "positive"),
        conformal=_get(cp, "grid", "conformal", float, lambda v: v >= 0, "nonnegative"),
        pert_kind=_get(cp, "perturbation", "kind", str, lambda v: v in ("none", "cos_cos", "winding"),
                       "none, cos_cos or winding"),
        eps=_get(cp, "perturbation", "eps", float),
        row=_get(cp, "perturbation", "row", int),
        col=_get(cp, "perturbation", "col", int),
        newton_tol=_get(cp, "solver", "newton_tol", float, pos, "positive"),
        eig_tol=_get(cp, "solver", "eig_tol", float, pos, "positive"),
        crossing_tol=_get(cp, "solver", "crossing_tol", float, pos, "positive"),
        svd_tol=_get(cp, "solver", "svd_tol", float, pos, "positive"),
        S=_get(cp, "trajectory", "S", float, pos, "positive"),
        M=_get(cp, "trajectory", "M", int, lambda v: v >= 8, "at least 8"),
        ds_policy=_get(cp, "trajectory", "ds_policy", str, lambda v: v in ("count", "grid"), "count or grid"),
        source=_get(cp, "trajectory", "source", int),
        target=_get(cp, "trajectory", "target", int),
        n_starts=_get(cp, "trajectory", "n_starts", int, lambda v: v >= 1, "at least 1"),
        level=_get(cp, "morse", "level", float),
        morse_starts=_get(cp, "morse", "n_starts", int, lambda v: v >= 1, "at least 1"),
        lift_radius=_get(cp, "morse", "lift_radius", float, pos, "positive"),
        oracle=_get(cp, "morse", "oracle", _bool),
        samples=_get(cp, "check", "samples", int, lambda v: v >= 1, "at least 1"),
    )


# -- tasks ---------------------------------------------------------------------------
def _catalog(cfg, grid, pert, threads):
    from .morse import enumerateCritical
    return enumerateCritical(pert, grid, cfg.group, cfg.level, cfg.morse_starts, cfg.seed, threads,
                             eig_tol=cfg.eig_tol)


def _pick_pair(cfg, cat):
    """Source and target ids; by default the highest-index point and the lowest-action point one index below."""
    if cfg.source >= 0:
        src = cat.by_id(cfg.source)
    else:
        top = max(c.morse_index for c in cat)
        src = sorted(cat.degree(top), key=lambda c: c.id)[0]
    if cfg.target >= 0:
        tgt = cat.by_id(cfg.target)
    else:
        below = cat.degree(src.morse_index - 1)
        if not below:
            raise RuntimeError("no critical point one index below the source")
        tgt = sorted(below, key=lambda c: (c.value, c.id))[0]
    return src, tgt


def task_check(cfg, out, threads):
    from .checks import run_suite
    grid = cfg.grid()
    pert = cfg.perturbation(grid)
    res = run_suite(grid, pert, cfg.seed, cfg.samples)
    io.write_csv(out / "checks.csv", ["check", "value", "tol", "ok"],
                 [(k, v["value"], v["tol"], int(v["ok"])) for k, v in res.items()])
    summary = {k: {"value": v["value"], "tol": v["tol"], "ok": v["ok"]} for k, v in res.items()}
    return ("pass" if all(v["ok"] for v in res.values()) else "fail"), {"checks": summary}


def task_critical(cfg, out, threads):
    from .flow import DegenerateError, coercivityEstimate
    grid = cfg.grid()
    pert = cfg.perturbation(grid)
    cat = _catalog(cfg, grid, pert, threads)
    rows = []
    coerc = {}
    for c in cat:
        rows += [(c.id, k, float(w)) for k, w in enumerate(c.spectrum)]
        try:
            coerc[str(c.id)] = coercivityEstimate(c, pert, check=False)
        except DegenerateError as e:
            coerc[str(c.id)] = {"error": str(e)}
    io.write_csv(out / "spectra.csv", ["id", "k", "eigenvalue"], rows)
    io.write_report(out / "catalog.json", io.catalog_to_json(cat, pert, fields=True))
    status = "pass" if cat.regular else "fail"
    return status, {"catalog": io.catalog_to_json(cat, pert), "coercivity": coerc}


def task_spectral(cfg, out, threads):
    from .critical import PiecewiseLinearPath, spectralFlow
    grid = cfg.grid()
    pert = cfg.perturbation(grid)
    cat = _catalog(cfg, grid, pert, threads)
    src, tgt = _pick_pair(cfg, cat)
    s = np.linspace(-1.0, 1.0, 33)
    path = PiecewiseLinearPath([-1.0, 1.0], [src.cfg, tgt.cfg])
    flB, crB = spectralFlow(path, pert, s=None, operator="B_f0", crossing_tol=cfg.crossing_tol, refine=32)
    flC, crC = spectralFlow(path, pert, s=None, operator="C_f", crossing_tol=cfg.crossing_tol, refine=32,
                            check_C=False)
    from .critical import assembleB
    rows = []
    for sv in s:
        w = np.linalg.eigvalsh(assembleB(path(sv), pert, include_Y=False).dense())
        head = w[np.argsort(np.abs(w))[:8]]
        rows += [(float(sv), float(x)) for x in np.sort(head)]
    io.write_csv(out / "spectral_path.csv", ["s", "eigenvalue"], rows)
    pos = [c.get("positivity_factor") for c in crB if c.get("positivity_factor") is not None]
    agree = len(crB) == len(crC) and sum(c["signature"] for c in crB) == sum(c["signature"] for c in crC)
    ok = agree and all(p >= 1 - 1e-9 for p in pos)
    res = {
        "source": src.id, "target": tgt.id,
        "morse_index_difference": src.morse_index - tgt.morse_index,
        "flow_B_f0": flB, "flow_C_f": flC,
        "crossings_B_f0": crB, "crossings_C_f": crC,
        "crossing_counts_agree": agree,
        "min_positivity_factor": min(pos) if pos else None,
    }
    return ("pass" if ok else "fail"), res


def task_flow(cfg, out, threads):
    from .flow import (TrajectoryError, assembleD, decayFit, endpointGaps, indexReport,
                       solveTrajectory)
    from . import functional as fn
    grid = cfg.grid()
    pert = cfg.perturbation(grid)
    cat = _catalog(cfg, grid, pert, threads)
    src, tgt = _pick_pair(cfg, cat)
    M = cfg.slices(grid)
    try:
        p = solveTrajectory((src, tgt), pert, cfg.S, M, tol=cfg.newton_tol)
    except TrajectoryError as e:
        return "fail", {"source": src.id, "target": tgt.id, "error": str(e)}
    p.endpoint_ids = (src.id, tgt.id)
    E = fn.trajectoryEnergy(p, pert)
    acts = np.array([fn.action(p.config(m), pert) for m in range(p.M)])
    rep = indexReport(assembleD(p, pert), cfg.svd_tol)
    fit = decayFit(p)
    gaps = endpointGaps(p, pert)
    B = fn.trajectoryBounds(p, pert, src.value, tgt.value)
    io.save_trajectory(out / "trajectory", p, pert)
    io.write_csv(out / "action_profile.csv", ["s", "action"], zip(p.s.tolist(), acts.tolist()))
    io.write_csv(out / "energy_profile.csv", ["s", "energy"],
                 zip((0.5 * (p.s[1:] + p.s[:-1])).tolist(), E["profile"].tolist()))
    energy_ok = abs(E["energy"] - E["drop"]) <= 1e-4 * (1 + abs(E["drop"]))
    mono = float(np.max(np.diff(acts)))
    want = src.morse_index - tgt.morse_index
    checks = {
        "energy_identity": energy_ok,
        "monotone": mono <= 1e-8,
        "index": rep["index"] == want and not rep["ambiguous"],
        "decay_r2": fit["r2"] >= 0.99,
        "curvature_bound": B["curvature_ok"],
        "omega_bound": B["omega_root_ok"],
    }
    res = {
        "source": src.id, "target": tgt.id, "S": cfg.S, "M": M,
        "newton_iterations": p.info["iterations"], "residual": p.residual,
        "energy": E["energy"], "action_drop": E["drop"], "max_action_increase": mono,
        "numeric_index": rep["index"], "kernel_dim": rep["kernel_dim"], "cokernel_dim": rep["cokernel_dim"],
        "morse_index_difference": want,
        "decay": fit, "endpoint_gaps": gaps, "bounds": B,
        "breaking": p.info["breaking"], "checks": checks,
    }
    return ("pass" if all(checks.values()) else "fail"), res


def task_hybrid(cfg, out, threads):
    from .hybrid import thetaChainMatrix
    grid = cfg.grid()
    pert = cfg.perturbation(grid)
    cat = _catalog(cfg, grid, pert, threads)
    res = {"shared_perturbation": "A-only perturbation used on both sides", "degrees": {}}
    status = "pass"
    for k in sorted(set(cat.indices)):
        th = thetaChainMatrix(list(cat), k, pert, cfg.S, cfg.slices(grid), cfg.n_starts, cfg.seed)
        res["degrees"][str(k)] = th
        if not (th["unit_diagonal"] and th["upper_triangular"]):
            status = "fail"
        elif th["flags"] and status == "pass":
            status = "partial"
    io.write_report(out / "theta.json", res)
    return status, res


def task_morse(cfg, out, threads):
    from .morse import ChainError, ReducedTorusModel, buildComplex, homology
    grid = cfg.grid()
    pert = cfg.perturbation(grid)
    cat = _catalog(cfg, grid, pert, threads)
    if not cat.regular:
        return "fail", {"catalog": io.catalog_to_json(cat, pert), "error": "catalog is not a-regular"}
    cx = buildComplex(cat, pert, S=cfg.S, M=cfg.slices(grid), n_starts=cfg.n_starts,
                      lift_radius=cfg.lift_radius, seed=cfg.seed, threads=threads)
    try:
        betti = homology(cx)
    except ChainError as e:
        return "fail", {"error": str(e)}
    res = {"catalog": io.catalog_to_json(cat, pert), "complex": io.complex_to_json(cx, betti),
           "counts": {str(k): [{kk: v for kk, v in r.items() if kk != "attempts"} for r in rs]
                      for k, rs in cx.counts.items()}}
    (out / "flow_category.dot").write_text(io.complex_to_dot(cx, cat))
    status = "partial" if cx.partial else "pass"
    if cfg.oracle and cfg.group == "u1" and grid.flat:
        ob, pts, n = ReducedTorusModel(grid, pert, cfg.level).homology()
        res["oracle"] = {"betti": ob, "critical_points": pts,
                         "counts": [[list(k), v] for k, v in sorted(n.items())]}
        if ob != betti:
            status = "fail"
    return status, res


_RUNNERS = {
    "check": task_check, "critical": task_critical, "spectral": task_spectral,
    "flow": task_flow, "hybrid": task_hybrid, "morse": task_morse,
}


def runExperiment(cfg, out_dir, threads=1):
    """Run one task and write ``report.json``; returns ``(status, report)``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise OSError(f"output directory {out} is not writable: {e}") from None
    text = cfg.as_ini()
    status, res = _RUNNERS[cfg.task](cfg, out, threads)
    report = {
        "task": cfg.task,
        "status": status,
        "config": _normalized(cfg),
        "config_hash": io.config_hash(text),
        "tolerances": cfg.tolerances,
        "results": res,
    }
    io.write_report(out / "report.json", report)
    return status, report


def build_parser():
    ap = argparse.ArgumentParser(prog="ymlab", description="Elliptic Yang-Mills lattice experiments.")
    sub = ap.add_subparsers(dest="task", required=True)
    for t in TASKS:
        p = sub.add_parser(t, help=f"run the {t} task")
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--out-dir", default=None, help="output directory (default $YMLAB_OUT_DIR or ./ymlab-out)")
        p.add_argument("--seed", type=int, default=None, help="override experiment.seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for independent solves")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"experiment.task": args.task}
    if args.seed is not None:
        overrides["experiment.seed"] = args.seed
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as e:
        print(f"ymlab: configuration error: {e}", file=sys.stderr)
        return EXIT["usage"]
    if args.threads < 1:
        print("ymlab: --threads must be at least 1", file=sys.stderr)
        return EXIT["usage"]
    out = Path(args.out_dir or io.default_out_dir())
    try:
        status, _ = runExperiment(cfg, out, args.threads)
    except OSError as e:
        print(f"ymlab: {e}", file=sys.stderr)
        return EXIT["error"]
    except Exception as e:  # pipeline failure, reported with its module
        mod = type(e).__module__
        print(f"ymlab: {cfg.task} failed in {mod}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT["error"]
    print(f"{cfg.task}: {status} ({out / 'report.json'})")
    return EXIT[status]


if __name__ == "__main__":
    sys.exit(main())
