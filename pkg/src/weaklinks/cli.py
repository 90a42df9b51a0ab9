"""Config-driven batch runner.

Usage::

    weaklinks simulate --config run.yaml --out results/
    weaklinks preset two_node --format json

Exit codes: 2 config parse error, 3 validation error, 4 state-space capacity
exceeded, 5 numerical failure, 6 a bound violated beyond statistical
tolerance.
"""

from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import hashlib
import json
import os
import platform
import sys
from pathlib import Path
from typing import Any

import numpy as np
import scipy
import yaml

from . import __version__, amc
from .compare import (BoundViolationError, compare_networks, is_island_network,
                      island_bound_grid, no_weak_clique_rows, scaling_trend,
                      star_vs_islands, sweep_star_scaling, two_node_grid)
from .engine import SimParams, estimate_welfare, run_epochs, write_snapshots_csv
from .network import (NetworkError, NetworkSpec, classify_regime, gen_clique, gen_island,
                      gen_star, load_network, network_from_dict, regime_boundary)
from .welfare import Method, bound_discount, bound_island, bound_no_weak

OUT_ENV = "WEAKLINKS_OUT"
MODES = ("simulate", "exact", "bounds", "compare", "sweep")

EXIT_PARSE, EXIT_VALIDATION, EXIT_CAPACITY, EXIT_NUMERICAL, EXIT_BOUND = 2, 3, 4, 5, 6


class ConfigParseError(Exception):
    pass


class ConfigError(ValueError):
    pass


# --- config -----------------------------------------------------------------

_TOP_KEYS = {"mode", "network", "networks", "params", "simulate", "compare", "sweep", "output"}
_PARAM_KEYS = {f.name for f in dataclasses.fields(SimParams)}
_SIM_KEYS = {"epochs": 10_000, "burn_in": 0, "replicas": 1, "engine_mode": "auto"}
_COMPARE_KEYS = {"method": "exact_amc", "epochs": 10_000, "burn_in": 0, "replicas": 4}
_SWEEP_KEYS = {
    "param": {"axis": None, "grid": None, "method": "exact_amc", "epochs": 10_000,
              "burn_in": 0, "replicas": 4},
    "no_weak_clique": {"ns": [1, 3, 6], "eps": [0.01, 0.1]},
    "two_node": {"eps_ratios": [1e-3, 1e-2, 1e-1], "gamma_ratios": [0.1, 1.0, 10.0],
                 "phi_ratio": 1e4},
    "island_bound": {"n": 6, "max_parts": 3, "gammas": [0.5, 2.0]},
    "star_vs_islands": {"ns": [6, 7], "k": 3, "phi_ratios": [1e4, 1e-4],
                        "gamma_ratio": 2.0, "eps_ratio": 1e-4},
    "star_scaling": {"ns": [9, 25, 64, 144], "epochs": 20_000, "burn_in": 0,
                     "replicas": 8, "eps_ratio": 1e-4},
}
_OUTPUT_KEYS = {"dir", "format"}


def _reject_unknown(d: dict, allowed, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def parse_config_text(text: str, suffix: str = ".yaml") -> dict:
    try:
        doc = json.loads(text) if suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigParseError(str(exc)) from exc
    if not isinstance(doc, dict):
        raise ConfigParseError("config must be a mapping at the top level")
    # a manifest carries the resolved config it was produced from
    if "manifest_version" in doc:
        doc = doc.get("config")
        if not isinstance(doc, dict):
            raise ConfigParseError("manifest has no config")
    return doc


def load_config(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    return parse_config_text(text, path.suffix)


def build_net(d: dict, base: Path | None = None) -> NetworkSpec:
    """Inline network, generator invocation or file reference."""
    if not isinstance(d, dict):
        raise ConfigError("network must be a mapping")
    if "file" in d:
        _reject_unknown(d, {"file"}, "network")
        p = Path(d["file"])
        return load_network(p if p.is_absolute() or base is None else base / p)
    if "generator" not in d:
        return network_from_dict(d)
    gen = d["generator"]
    if gen == "clique":
        _reject_unknown(d, {"generator", "n"}, "network")
        return gen_clique(int(d["n"]))
    if gen == "island":
        _reject_unknown(d, {"generator", "sizes", "weak_topology"}, "network")
        return gen_island(d["sizes"], d.get("weak_topology", []))
    if gen == "star":
        _reject_unknown(d, {"generator", "n", "m"}, "network")
        return gen_star(int(d["n"]), int(d["m"]))
    raise ConfigError(f"unknown generator {gen!r}")


def resolve_config(raw: dict, mode: str | None = None) -> dict:
    """Validate a config and fill in defaults; returns a new dict."""
    cfg = copy.deepcopy(raw)
    _reject_unknown(cfg, _TOP_KEYS, "config")
    if mode is not None:
        cfg["mode"] = mode
    mode = cfg.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    params = cfg.setdefault("params", {})
    _reject_unknown(params, _PARAM_KEYS, "params")
    SimParams(**params)
    out = cfg.setdefault("output", {})
    _reject_unknown(out, _OUTPUT_KEYS, "output")
    if out.get("format") not in (None, "csv", "json"):
        raise ConfigError("output.format must be csv or json")

    if mode in ("simulate", "exact", "bounds") and "network" not in cfg:
        raise ConfigError(f"mode {mode} needs a network")
    if mode == "simulate":
        sim = cfg.setdefault("simulate", {})
        _reject_unknown(sim, _SIM_KEYS, "simulate")
        for k, v in _SIM_KEYS.items():
            sim.setdefault(k, v)
    if mode == "compare":
        nets = cfg.get("networks")
        if not isinstance(nets, list) or not nets:
            raise ConfigError("compare needs a non-empty networks list")
        c = cfg.setdefault("compare", {})
        _reject_unknown(c, _COMPARE_KEYS, "compare")
        for k, v in _COMPARE_KEYS.items():
            c.setdefault(k, v)
        Method(c["method"])
    if mode == "sweep":
        s = cfg.get("sweep")
        if not isinstance(s, dict) or s.get("kind") not in _SWEEP_KEYS:
            raise ConfigError(f"sweep.kind must be one of {sorted(_SWEEP_KEYS)}")
        allowed = _SWEEP_KEYS[s["kind"]]
        _reject_unknown(s, set(allowed) | {"kind"}, "sweep")
        for k, v in allowed.items():
            s.setdefault(k, v)
        if s["kind"] == "param":
            if s["axis"] not in _PARAM_KEYS - {"seed"} or not isinstance(s["grid"], list):
                raise ConfigError("param sweep needs an axis (a rate or tau) and a grid list")
            if "network" not in cfg:
                raise ConfigError("param sweep needs a network")
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# --- presets ----------------------------------------------------------------

PRESETS: dict[str, dict] = {
    "no_weak_clique": {
        "mode": "simulate",
        "network": {"generator": "clique", "n": 6},
        "params": {"lam": 1.0, "epsilon": 0.1, "tau": 0.0, "seed": 1},
        "simulate": {"epochs": 100_000, "replicas": 8},
    },
    "frozen_clique": {
        "mode": "exact",
        "network": {"generator": "clique", "n": 4},
        "params": {"lam": 1.0, "epsilon": 0.1, "tau": 0.5},
    },
    "two_node": {
        "mode": "sweep",
        "params": {"lam": 1.0},
        "sweep": {"kind": "two_node"},
    },
    "island_bound_grid": {
        "mode": "sweep",
        "params": {"lam": 1.0, "epsilon": 0.01, "phi": 1e4},
        "sweep": {"kind": "island_bound"},
    },
    "star_vs_islands_exact": {
        "mode": "sweep",
        "params": {"lam": 1.0},
        "sweep": {"kind": "star_vs_islands"},
    },
    "star_scaling": {
        "mode": "sweep",
        "params": {"lam": 1.0, "seed": 2024},
        "sweep": {"kind": "star_scaling"},
    },
}


# --- runners ----------------------------------------------------------------

class Outputs:
    """Writes tables into one directory and remembers what it wrote."""

    def __init__(self, root: Path, fmt: str | None):
        self.root = root
        self.fmt = fmt
        self.files: list[str] = []

    def _path(self, name: str) -> Path:
        p = (self.root / name).resolve()
        if self.root.resolve() not in p.parents:
            raise ConfigError(f"refusing to write outside {self.root}: {name}")
        self.files.append(name)
        return p

    def table(self, name: str, rows: list[dict], extra: dict | None = None) -> None:
        if self.fmt in (None, "csv") and rows:
            with self._path(name + ".csv").open("w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]))
                w.writeheader()
                w.writerows(rows)
        if self.fmt in (None, "json"):
            doc = {"rows": rows, **(extra or {})}
            self._path(name + ".json").write_text(json.dumps(doc, indent=2, default=_jsonable) + "\n")

    def text(self, name: str, body: str) -> None:
        self._path(name).write_text(body)

    def handle(self, name: str):
        return self._path(name).open("w", newline="")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x)}")


def _params(cfg: dict) -> SimParams:
    return SimParams(**cfg["params"])


def _run_simulate(cfg: dict, net: NetworkSpec, out: Outputs, workers: int, trace: bool) -> None:
    p = _params(cfg)
    sim = cfg["simulate"]
    est = estimate_welfare(net, p, sim["epochs"], sim["burn_in"], sim["replicas"],
                           workers=workers, mode=sim["engine_mode"])
    lo99, hi99 = est.ci(0.99)
    row = {"digest": net.digest(), "n": net.n, "regime": classify_regime(net, p.tau).value,
           "welfare": est.mean, "stderr": est.stderr, "ci95_lo": est.ci95[0],
           "ci95_hi": est.ci95[1], "ci99_lo": lo99, "ci99_hi": hi99,
           "epochs": est.epochs_used, "replicas": est.replicas,
           "bound_no_weak": bound_no_weak(p.lam, p.epsilon) if not net.weak_edges else ""}
    out.table("welfare", [row], {"replica_means": list(est.replica_means)})
    if trace:
        with out.handle("trace.jsonl") as fh:
            snaps = run_epochs(net, p, sim["epochs"], sim["burn_in"],
                               np.random.default_rng(p.seed), mode=sim["engine_mode"], trace=fh)
        with out.handle("snapshots.csv") as fh:
            write_snapshots_csv(snaps, fh)


def _run_exact(cfg: dict, net: NetworkSpec, out: Outputs) -> None:
    p = _params(cfg)
    model = amc.build_model(net, p)
    row = {"digest": net.digest(), "n": net.n, "regime": model.regime.value,
           "boundary": regime_boundary(net, p.tau), "states": len(model.states),
           "welfare": model.welfare, "p_raw": model.p_raw, "p_conditional": model.p_conditional,
           "eta_core_good": model.eta_core_good()}
    out.table("exact", [row])
    out.text("model.json", model.to_json() + "\n")


def _run_bounds(cfg: dict, net: NetworkSpec, out: Outputs) -> None:
    p = _params(cfg)
    row: dict[str, Any] = {"digest": net.digest(), "regime": classify_regime(net, p.tau).value,
                           "d_min": net.d_min, "d_max": net.d_max,
                           "bound_no_weak": bound_no_weak(p.lam, p.epsilon),
                           "bound_discount": "", "beta_below_discount_bound": "",
                           "p_conditional": "", "bound_island": ""}
    if net.d_min >= 1:
        row["bound_discount"] = bound_discount(p.tau, net.d_min, net.d_max)
        if p.beta is not None:
            row["beta_below_discount_bound"] = p.beta < row["bound_discount"]
    if is_island_network(net) and net.components.count > 1 and p.epsilon > 0:
        pc = amc.build_model(net, p).p_conditional
        if pc is not None:
            row["p_conditional"] = pc
            row["bound_island"] = bound_island(pc, p.lam, p.epsilon, p.gamma,
                                               net.components.sizes)
    out.table("bounds", [row])


def _run_compare(cfg: dict, out: Outputs, base: Path | None, workers: int) -> None:
    p = _params(cfg)
    c = cfg["compare"]
    specs = []
    for i, item in enumerate(cfg["networks"]):
        item = dict(item)
        name = item.pop("name", f"net{i}")
        specs.append((name, build_net(item, base)))
    method = Method(c["method"])
    budget = None
    if method is Method.MONTE_CARLO:
        budget = {"epochs": c["epochs"], "burn_in": c["burn_in"], "replicas": c["replicas"],
                  "workers": workers}
    report = compare_networks(specs, p, method, budget)
    rows = report.rows()
    out.table("compare", rows, {"ranking": report.to_dict()["ranking"], "violations": []})


def _run_sweep(cfg: dict, out: Outputs, base: Path | None, workers: int) -> None:
    s = cfg["sweep"]
    p = _params(cfg)
    kind = s["kind"]
    extra: dict[str, Any] = {"kind": kind}
    if kind == "param":
        net = build_net(cfg["network"], base)
        rows = []
        for v in s["grid"]:
            q = p.replace(**{s["axis"]: v})
            if Method(s["method"]) is Method.EXACT_AMC:
                w, se = amc.build_model(net, q).welfare, 0.0
            else:
                est = estimate_welfare(net, q, s["epochs"], s["burn_in"], s["replicas"],
                                       workers=workers)
                w, se = est.mean, est.stderr
            rows.append({s["axis"]: v, "welfare": w, "stderr": se})
    elif kind == "no_weak_clique":
        rows = no_weak_clique_rows(s["ns"], s["eps"], p.lam)
    elif kind == "two_node":
        rows = two_node_grid(p.lam, s["eps_ratios"], s["gamma_ratios"], s["phi_ratio"])
        extra["all_ordered"] = all(r["ordered"] for r in rows)
    elif kind == "island_bound":
        rows = island_bound_grid(s["n"], s["max_parts"], p.lam, p.epsilon, s["gammas"], p.phi)
        extra["all_hold"] = all(r["holds"] for r in rows)
    elif kind == "star_vs_islands":
        rows = []
        for n in s["ns"]:
            for ph in s["phi_ratios"]:
                rows += star_vs_islands(n, s["k"], p.lam, s["eps_ratio"], s["gamma_ratio"], ph)
    else:
        table = sweep_star_scaling(s["ns"], s["epochs"], s["replicas"], s["burn_in"], p.lam,
                                   s["eps_ratio"], p.seed, workers)
        rows = [dataclasses.asdict(r) for r in table]
        ok, used = scaling_trend(table)
        extra.update(trend_increasing=ok, exemptions_used=used)
    out.table("sweep", rows, extra)


def execute(cfg: dict, out_dir: Path, *, fmt: str | None = None, workers: int = 1,
            trace: bool = False, base: Path | None = None) -> list[str]:
    """Run a resolved config, writing results and a manifest into ``out_dir``."""
    net = build_net(cfg["network"], base) if "network" in cfg else None
    out_dir.mkdir(parents=True, exist_ok=True)
    out = Outputs(out_dir, fmt or cfg["output"].get("format"))
    mode = cfg["mode"]
    if mode == "simulate":
        _run_simulate(cfg, net, out, workers, trace)
    elif mode == "exact":
        _run_exact(cfg, net, out)
    elif mode == "bounds":
        _run_bounds(cfg, net, out)
    elif mode == "compare":
        _run_compare(cfg, out, base, workers)
    else:
        _run_sweep(cfg, out, base, workers)
    manifest = {
        "manifest_version": 1,
        "mode": mode,
        "config_hash": config_hash(cfg),
        "seed": cfg["params"].get("seed", 0),
        "versions": {"weaklinks": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "outputs": sorted(out.files),
        "config": cfg,
    }
    out.text("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out.files


# --- entry point --------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON experiment config (or a manifest)")
    common.add_argument("--seed", type=int, help="override params.seed")
    common.add_argument("--out", help=f"output directory (default: ${OUT_ENV}/<name>)")
    common.add_argument("--trace", action="store_true", help="also write an event trace")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    common.add_argument("--format", choices=("csv", "json"), help="default: both")
    ap = argparse.ArgumentParser(prog="weaklinks", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for m in MODES:
        sub.add_parser(m, parents=[common], help=f"run a {m} experiment")
    pp = sub.add_parser("preset", parents=[common], help="run a shipped experiment")
    pp.add_argument("name", choices=sorted(PRESETS))
    return ap


def _out_dir(args, cfg: dict, name: str) -> Path:
    if args.out:
        return Path(args.out)
    if cfg["output"].get("dir"):
        return Path(cfg["output"]["dir"])
    return Path(os.environ.get(OUT_ENV, "weaklinks_out")) / name


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    base = None
    try:
        if args.command == "preset":
            raw = copy.deepcopy(PRESETS[args.name])
            if args.config:
                raise ConfigError("preset does not take --config")
            name, mode = args.name, None
        else:
            if not args.config:
                raise ConfigError(f"{args.command} needs --config")
            raw = load_config(args.config)
            base = Path(args.config).parent
            name, mode = args.command, args.command
        if args.seed is not None:
            raw.setdefault("params", {})["seed"] = args.seed
        cfg = resolve_config(raw, mode)
        if "network" in cfg:
            build_net(cfg["network"], base)
        files = execute(cfg, _out_dir(args, cfg, name), fmt=args.format,
                        workers=max(1, args.workers), trace=args.trace, base=base)
    except ConfigParseError as exc:
        print(f"config parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except amc.CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (amc.SolverError, amc.StructureError, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BoundViolationError as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        return EXIT_BOUND
    except (ConfigError, NetworkError, amc.AmcError, ValueError, KeyError, TypeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print("\n".join(sorted(files)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
