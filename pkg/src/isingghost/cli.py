"""
Command-line interface.

``isingghost verify``      run the exact identities over a graph corpus
``isingghost sample``      dump bond configurations drawn by the samplers
``isingghost experiment``  run one of the Monte Carlo studies

Settings come from an INI file (``--config``) with flags taking precedence.
Every invocation writes ``manifest.json`` next to its outputs.

Exit codes
----------
0  success
1  verification failed (some deviation above tolerance)
2  usage error (bad arguments, unknown experiment, unparsable config file)
3  configuration error (missing seed, invalid value, empty corpus)
4  oracle capacity exceeded
5  input/output error
"""

from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import glob
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .lattice import FREE, WIRED, build_domain_graph, build_graph, graph_from_text, graph_hash, sites_from_rows

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_CAPACITY = 4
EXIT_IO = 5

TOLERANCES = {"ES": 1e-10, "SWITCHING": 1e-10, "UEG": 1e-10, "SECH": 1e-10,
              "GHS-MONOTONE": 1e-12, "FINITE-ENERGY": 1e-12, "PARITY": 1e-12, "COUPLINGS": 1e-12}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunManifest:
    """What was run, with which settings, and what it wrote."""

    command: str
    config: dict
    seed: int | None
    code_version: str
    started: str = ""
    elapsed_seconds: float = 0.0
    outputs: list = field(default_factory=list)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        doc = {"command": self.command, "config": self.config, "seed": self.seed,
               "code_version": self.code_version, "package_version": __version__,
               "wall_clock": {"started": self.started, "elapsed_seconds": self.elapsed_seconds},
               "outputs": sorted(self.outputs)}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return path


def code_version() -> str:
    """SHA-256 over the package sources."""
    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# configuration


def _read_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if path is None:
        return cp
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise CliError(EXIT_USAGE, f"malformed config {path}: {exc}") from None
    return cp


def _floats(text: str) -> tuple:
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def _ints(text: str) -> tuple:
    return tuple(int(t) for t in text.replace(";", ",").split(",") if t.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _section(cp, name) -> dict:
    return dict(cp[name]) if cp.has_section(name) else {}


def _run_settings(cp, args) -> dict:
    run = _section(cp, "run")
    seed = args.seed if args.seed is not None else run.get("seed")
    out = args.out if args.out is not None else run.get("out", "results")
    workers = args.workers if args.workers is not None else run.get("workers", os.cpu_count() or 1)
    scale = args.budget_scale if args.budget_scale is not None else run.get("budget_scale", 1.0)
    try:
        return {"seed": None if seed is None else int(seed), "out": Path(out),
                "workers": max(1, int(workers)), "budget_scale": float(scale)}
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"invalid [run] setting: {exc}") from None


def _prepare_out(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write to {out}: {exc.strerror or exc}") from None


# ---------------------------------------------------------------------------
# verify

_SHAPE_KEYS = {"shapes", "a_values", "h_values", "graphs", "identities"}


def _corpus_from_config(cp, base: Path):
    from .oracle import CORPUS_SHAPES

    sec = _section(cp, "verify")
    unknown = set(sec) - _SHAPE_KEYS
    if unknown:
        raise CliError(EXIT_CONFIG, f"unknown [verify] keys: {', '.join(sorted(unknown))}")
    try:
        a_values = _floats(sec["a_values"]) if "a_values" in sec else (1.0, 0.5)
        h_values = _floats(sec["h_values"]) if "h_values" in sec else (0.0, 0.1, 0.7)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"invalid [verify] grid: {exc}") from None
    shapes = [s.strip() for s in sec["shapes"].split(",") if s.strip()] if "shapes" in sec \
        else (list(CORPUS_SHAPES) if "graphs" not in sec else [])
    graphs = []
    for name in shapes:
        rows = CORPUS_SHAPES.get(name)
        if rows is None:
            if "/" not in name and set(name) <= set("#.|"):
                rows = name.split("|")
            else:
                raise CliError(EXIT_CONFIG, f"unknown corpus shape {name!r}")
        for a in a_values:
            for h in h_values:
                try:
                    graphs.append((f"{name}/a={a:g}/h={h:g}", build_graph(sites_from_rows(rows), a, h)))
                except ValueError as exc:
                    raise CliError(EXIT_CONFIG, f"shape {name!r}: {exc}") from None
    for pattern in sec.get("graphs", "").split(","):
        pattern = pattern.strip()
        if not pattern:
            continue
        paths = sorted(glob.glob(str(base / pattern) if not os.path.isabs(pattern) else pattern))
        if not paths:
            raise CliError(EXIT_IO, f"no graph file matches {pattern!r}")
        for p in paths:
            try:
                graphs.append((Path(p).name, graph_from_text(Path(p).read_text())))
            except OSError as exc:
                raise CliError(EXIT_IO, f"cannot read {p}: {exc.strerror or exc}") from None
            except (ValueError, KeyError) as exc:
                raise CliError(EXIT_CONFIG, f"bad graph file {p}: {exc}") from None
    identities = None
    if "identities" in sec:
        identities = [s.strip().upper() for s in sec["identities"].split(",") if s.strip()]
    return graphs, identities


def _verify_graph(label, g, identities):
    from .oracle import CapacityError, current_trace_law, current_trace_law_factorial, verify_identity

    records = []
    key = graph_hash(g)
    try:
        records.append((label, key, "COUPLINGS", float(g.coupling_deviation())))
        for which in identities:
            if which == "PARITY":
                dev = float(np.max(np.abs(current_trace_law(g) - current_trace_law_factorial(g))))
            else:
                dev = float(verify_identity(g, which))
            records.append((label, key, which, dev))
    except CapacityError as exc:
        return {"capacity": f"graph {label} ({key}): {exc}"}
    return {"records": records}


def cmd_verify(args) -> int:
    from .oracle import IDENTITIES

    cp = _read_config(args.config)
    base = Path(args.config).parent if args.config else Path.cwd()
    run = _run_settings(cp, args)
    graphs, identities = _corpus_from_config(cp, base)
    if not graphs:
        raise CliError(EXIT_CONFIG, "no graphs in the verification corpus")
    identities = identities or list(IDENTITIES) + ["PARITY"]
    bad = [w for w in identities if w not in TOLERANCES or w == "COUPLINGS"]
    if bad:
        raise CliError(EXIT_CONFIG, f"unknown identities: {', '.join(bad)}")
    _prepare_out(run["out"])
    t0 = time.time()
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    tasks = [(label, g, identities) for label, g in graphs]
    if run["workers"] > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=run["workers"]) as pool:
            results = list(pool.map(_verify_graph, *zip(*tasks)))
    else:
        results = [_verify_graph(*t) for t in tasks]
    for r in results:
        if "capacity" in r:
            raise CliError(EXIT_CAPACITY, f"oracle capacity exceeded: {r['capacity']}")
    records = [rec for r in results for rec in r["records"]]
    worst = {}
    for label, key, which, dev in records:
        if which not in worst or dev > worst[which]["deviation"]:
            worst[which] = {"graph": label, "graph_hash": key, "deviation": dev,
                            "tolerance": TOLERANCES[which]}
    for w in worst.values():
        w["pass"] = bool(w["deviation"] <= w["tolerance"])
    ok = all(w["pass"] for w in worst.values())
    golden = [{"graph-hash": key, "graph": label, "identity": which, "deviation": dev}
              for label, key, which, dev in records]
    report = {"pass": ok, "n_graphs": len(graphs), "worst": worst}
    outputs = []
    try:
        (run["out"] / "verify.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        (run["out"] / "golden.json").write_text(json.dumps(golden, indent=2, sort_keys=True) + "\n")
        outputs = ["verify.json", "golden.json"]
        config = {"verify": _section(cp, "verify"), "identities": identities,
                  "graphs": [label for label, _ in graphs]}
        RunManifest("verify", config, None, code_version(), started, round(time.time() - t0, 3),
                    outputs).write(run["out"])
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write results: {exc}") from None
    for which, w in sorted(worst.items()):
        status = "ok" if w["pass"] else "FAIL"
        print(f"{which:14s} {w['deviation']:.3e}  worst on {w['graph']}  {status}")
    print("verification", "passed" if ok else "FAILED", f"({len(graphs)} graphs)")
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------------------
# sample


def cmd_sample(args) -> int:
    from .samplers import RngStream, current_trace_chain, default_burn_in, fk_chain, write_bond_stream

    cp = _read_config(args.config)
    run = _run_settings(cp, args)
    if run["seed"] is None:
        raise CliError(EXIT_CONFIG, "a master seed is required ([run] seed or --seed)")
    sec = _section(cp, "sample")
    try:
        domain = _floats(sec.get("domain", "0,4,0,4"))
        if len(domain) != 4:
            raise ValueError("domain needs x0,x1,y0,y1")
        a = float(sec.get("a", 1.0))
        h = float(sec.get("h", 0.0))
        boundary = sec.get("boundary", "free").strip().lower()
        rep = sec.get("representation", "fk").strip().lower()
        samples = int(sec.get("samples", 100))
        thin = int(sec.get("thin", 1))
        cluster = _bool(sec.get("cluster_moves", "true"))
        g = build_domain_graph(domain, a, h)
        if boundary not in ("free", "wired"):
            raise ValueError(f"boundary must be free or wired, not {boundary!r}")
        if rep not in ("fk", "trace", "loops"):
            raise ValueError(f"representation must be fk, trace or loops, not {rep!r}")
        if rep != "fk" and boundary != "free":
            raise ValueError("loop and trace samples use the free boundary")
        burn = int(sec["burn_in"]) if "burn_in" in sec else default_burn_in(g)
        burn = max(1, int(round(burn * run["budget_scale"])))
        if samples < 1 or thin < 1:
            raise ValueError("samples and thin must be positive")
    except (ValueError, KeyError) as exc:
        raise CliError(EXIT_CONFIG, f"invalid [sample] setting: {exc}") from None
    _prepare_out(run["out"])
    t0 = time.time()
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    rng = RngStream(run["seed"], 0)
    if rep == "fk":
        it = fk_chain(g, WIRED if boundary == "wired" else FREE, rng, burn, thin, cluster)
        configs = [next(it).copy() for _ in range(samples)]
    else:
        it = current_trace_chain(g, rng, burn, thin, cluster)
        configs = [next(it)[0 if rep == "loops" else 1].copy() for _ in range(samples)]
    sweeps = burn + thin * (1 + np.arange(samples))
    try:
        write_bond_stream(run["out"] / "samples.bin", np.array(configs), graph_hash=graph_hash(g),
                          seed=run["seed"], sweep_indices=sweeps)
        config = {"sample": {"domain": list(domain), "a": a, "h": h, "boundary": boundary,
                             "representation": rep, "samples": samples, "thin": thin,
                             "burn_in": burn, "cluster_moves": cluster}}
        RunManifest("sample", config, run["seed"], code_version(), started,
                    round(time.time() - t0, 3), ["samples.bin"]).write(run["out"])
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write samples: {exc}") from None
    print(f"wrote {samples} {rep} samples of {g!r} to {run['out'] / 'samples.bin'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment

_INT_GRIDS = {"distances", "radii", "n_values"}
_FLOAT_GRIDS = {"a_values", "h_values"}


def _experiment_config(name, cp, run):
    from .experiments import ExperimentConfig, default_config

    sec = _section(cp, "experiment")
    sec.update(_section(cp, name))
    kw = {}
    try:
        for k, v in sec.items():
            if k in _INT_GRIDS:
                kw[k] = _ints(v)
            elif k in _FLOAT_GRIDS:
                kw[k] = _floats(v)
            elif k in ("N", "n", "chains", "sweeps", "batches", "burn_in"):
                kw["N" if k == "n" else k] = int(v)
            elif k == "a":
                kw[k] = float(v)
            elif k == "cluster_moves":
                kw[k] = _bool(v)
            else:
                raise ValueError(f"unknown key {k!r}")
        cfg = default_config(name, run["seed"], workers=run["workers"], **kw)
    except (ValueError, TypeError) as exc:
        raise CliError(EXIT_CONFIG, f"invalid experiment setting: {exc}") from None
    return cfg.scaled(run["budget_scale"]) if run["budget_scale"] != 1.0 else cfg


def cmd_experiment(args) -> int:
    from .experiments import EXPERIMENTS, run_experiment, write_outputs

    if args.name not in EXPERIMENTS:
        raise CliError(EXIT_USAGE, f"unknown experiment {args.name!r}; choose from {', '.join(EXPERIMENTS)}")
    cp = _read_config(args.config)
    run = _run_settings(cp, args)
    if run["seed"] is None:
        raise CliError(EXIT_CONFIG, "a master seed is required ([run] seed or --seed)")
    cfg = _experiment_config(args.name, cp, run)
    _prepare_out(run["out"])
    t0 = time.time()
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    result = run_experiment(cfg)
    try:
        paths = write_outputs(result, run["out"])
        RunManifest(f"experiment {args.name}", cfg.to_dict(), cfg.seed, code_version(), started,
                    round(time.time() - t0, 3), [p.name for p in paths]).write(run["out"])
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write results: {exc}") from None
    print(f"{args.name}: wrote {', '.join(str(p) for p in paths)}")
    print(json.dumps(result.summary.get("flags", {}), sort_keys=True, default=str))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
    common.add_argument("--out", help="output directory (overrides [run] out)")
    common.add_argument("--workers", type=int, help="worker processes (default: all cores)")
    common.add_argument("--budget-scale", type=float, dest="budget_scale",
                        help="multiply every sweep budget by this factor")
    p = argparse.ArgumentParser(prog="isingghost", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="check the exact identities on a graph corpus")
    sub.add_parser("sample", parents=[common], help="dump sampled bond configurations")
    e = sub.add_parser("experiment", parents=[common], help="run a Monte Carlo study")
    e.add_argument("name", help="decay, onearm, rsw, hR or loops")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    handler = {"verify": cmd_verify, "sample": cmd_sample, "experiment": cmd_experiment}[args.command]
    try:
        return handler(args)
    except CliError as exc:
        print(f"isingghost: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
