"""Command-line experiments.

Usage::

    spinbell chsh-scan configs/tfim_ground.yaml [--seed N] [--out DIR]
    spinbell clustering-fit CONFIG
    spinbell quench CONFIG
    spinbell bell-certify CONFIG
    spinbell local-bound INEQUALITY_FILE
    spinbell self-test

Each experiment writes ``<name>.csv`` (numeric, byte-reproducible) and
appends provenance plus rows to ``<name>.jsonl`` in the output directory.
Exit codes: 0 success, 2 config error, 3 numeric failure, 4 certificate
violation.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bell import (certify, chsh, chsh_sup_fixed_alice, chsh_sup_seesaw, delta_margin,
                   horodecki_spin_sup, load_inequality, local_bound_bruteforce, r_star)
from .bell.inequality import best_deterministic_strategy
from .clustering import (ClusteringFit, CorrelationSample, PropagationFit, correlation_samples,
                         fit_clustering, fit_propagation, fmt, singleton_pairs, write_samples_csv)
from .config import ExperimentConfig, load_config
from .errors import (AllSamplesFloored, ConfigError, DimensionCapExceeded, FormulaMismatch,
                     InvalidGeometry, InvalidRegion, OverlappingSupports, RangeViolation,
                     ShapeMismatch, SiteCountMismatch, SpinBellError, ZeroDecay, ZeroMargin)
from .lattice import Region, build_lattice, region_distance
from .models import model_hamiltonian
from .quantum import (HamiltonianSpec, Term, build_hamiltonian, evolve_state,
                      ground_state, pauli, product_state, thermal_state)
from .states import singlet

logger = logging.getLogger("spinbell")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VIOLATION = 0, 2, 3, 4
CONFIG_ERRORS = (ConfigError, ShapeMismatch, FormulaMismatch, InvalidGeometry, InvalidRegion,
                 OverlappingSupports, DimensionCapExceeded, RangeViolation, SiteCountMismatch)

_S = 1 / math.sqrt(2)
LOCAL_STATES = {
    "up": np.array([1, 0], dtype=complex),
    "down": np.array([0, 1], dtype=complex),
    "plus": np.array([_S, _S], dtype=complex),
    "minus": np.array([_S, -_S], dtype=complex),
    "mixed": np.eye(2, dtype=complex) / 2,
}


# ---------------------------------------------------------------------------
# building blocks


def make_lattice(cfg: ExperimentConfig):
    lc = cfg.lattice
    return build_lattice(lc.shape, lc.boundary, lc.metric, lc.local_dim)


def build_system(cfg: ExperimentConfig):
    lattice = make_lattice(cfg)
    if cfg.state.kind == "product":
        return lattice, None
    if cfg.model.name == "custom":
        terms = [Term(Region(t["sites"]), np.array(t["matrix"])) for t in cfg.model.terms]
        spec = HamiltonianSpec(terms, max_range=max(
            [lattice.diameter(Region(t["sites"])) for t in cfg.model.terms] or [0]), name="custom")
        return lattice, build_hamiltonian(lattice, spec)
    return lattice, model_hamiltonian(lattice, cfg.model.name, **cfg.model.params)


def initial_state(cfg: ExperimentConfig, lattice):
    labels = cfg.state.initial
    if len(labels) == 1:
        labels = labels * lattice.n_sites
    if len(labels) != lattice.n_sites:
        raise ConfigError("state.initial", f"{len(labels)} labels for {lattice.n_sites} sites")
    if lattice.local_dim != 2:
        raise ConfigError("state.initial", "product labels are qubit states")
    return product_state([LOCAL_STATES[lab] for lab in labels])


def prepare_states(cfg: ExperimentConfig, lattice, H) -> list:
    """States to analyse: one for static recipes, one per time for a quench."""
    kind = cfg.state.kind
    if kind == "ground":
        gs = ground_state(H)
        logger.info("ground energy %.12g gap %.6g", gs.energy, gs.gap)
        return [gs.state]
    if kind == "thermal":
        return [thermal_state(H, cfg.state.beta)]
    psi0 = initial_state(cfg, lattice)
    if kind == "product":
        return [psi0]
    return [evolve_state(H, psi0, t) for t in cfg.state.times]


def resolve_pairs(spec, cfg: ExperimentConfig, lattice) -> list[tuple[Region, Region]]:
    rc = cfg.regions
    if spec == "all-singletons":
        pairs = singleton_pairs(lattice, rc.min_distance)
    else:
        try:
            pairs = [(lattice.check_region(x), lattice.check_region(y)) for x, y in spec]
        except InvalidRegion as exc:
            raise ConfigError("regions.pairs", str(exc)) from None
    return [(x, y) for x, y in pairs
            if rc.min_distance <= region_distance(lattice, x, y) <= rc.max_distance]


def _zero_fit(quench: bool, n: int):
    """Fit for data that is identically zero: the zero envelope dominates."""
    if quench:
        return PropagationFit(0.0, 0.0, 0.0, 0.0, 0, n, {"all_floored": True})
    return ClusteringFit(0.0, 0.0, 0.0, 0, n, 0.0)


def static_fit(cfg: ExperimentConfig, state, lattice):
    fc = cfg.fit
    if fc.C is not None:
        return ClusteringFit(fc.C, fc.lam, 0.0, 0, 0, fc.C, fc.floor), []
    pairs = resolve_pairs(cfg.regions.fit_pairs, cfg, lattice)
    samples = correlation_samples(state, lattice, pairs, cfg.basis)
    try:
        return fit_clustering(samples, fc.floor), samples
    except AllSamplesFloored:
        logger.info("all %d correlators floored: using the zero envelope", len(samples))
        return _zero_fit(False, len(samples)), samples


def quench_fit(cfg: ExperimentConfig, states, lattice):
    fc = cfg.fit
    if fc.C is not None:
        if fc.v is None:
            raise ConfigError("fit.v", "a fixed quench fit needs v")
        return PropagationFit(fc.C, fc.lam, fc.v, 0.0, 0, 0, {"fixed": True}), []
    pairs = resolve_pairs(cfg.regions.fit_pairs, cfg, lattice)
    samples = [s for st in states
               for s in correlation_samples(st, lattice, pairs, cfg.basis, t=st.params["t"])]
    try:
        fit = fit_propagation(samples, fc.floor, fc.lam_range, fc.v_range, fc.grid, fc.rounds)
    except AllSamplesFloored:
        return _zero_fit(True, len(samples)), samples
    return fit, samples


def fit_for(cfg, states, lattice):
    if cfg.state.kind == "quench":
        return quench_fit(cfg, states, lattice)
    return static_fit(cfg, states[0], lattice)


def region_label(reg: Region) -> str:
    return ";".join(str(s) for s in reg.sites)


class RunWriter:
    """CSV + JSON-lines writer for one experiment table."""

    def __init__(self, cfg: ExperimentConfig, command: str, name: str):
        self.cfg, self.command, self.name = cfg, command, name
        self.out = Path(cfg.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.start = time.perf_counter()

    def write(self, columns, rows, extra: dict | None = None):
        with open(self.out / f"{self.name}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([fmt(row[c]) for c in columns])
        header = {"record": "run", "command": self.command, "version": __version__,
                  "config_hash": self.cfg.config_hash(), "input_digest": self.cfg.input_digest(),
                  "seed": self.cfg.seed, "config": self.cfg.to_dict(),
                  "wall_time_s": time.perf_counter() - self.start, "n_rows": len(rows),
                  **(extra or {})}
        with open(self.out / f"{self.name}.jsonl", "a") as fh:
            fh.write(json.dumps(_plain(header), sort_keys=True) + "\n")
            for row in rows:
                fh.write(json.dumps(_plain({"record": "row", **row}), sort_keys=True) + "\n")

    def write_json(self, fname, obj):
        with open(self.out / fname, "w") as fh:
            json.dump(_plain(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _plain(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    return x


# ---------------------------------------------------------------------------
# experiments; each returns (exit_code, rows)


def cmd_chsh_scan(cfg: ExperimentConfig):
    lattice, H = build_system(cfg)
    states = prepare_states(cfg, lattice, H)
    fit, _ = fit_for(cfg, states, lattice)
    pairs = resolve_pairs(cfg.regions.pairs, cfg, lattice)
    thermal = cfg.state.kind == "thermal"
    ineq = chsh()
    rows, task = [], 0
    for st in states:
        for X, Y in pairs:
            cert = certify(st, ineq, [X, Y], lattice, fit, seed=cfg.seed + task,
                           restarts=cfg.seesaw.restarts, tol=cfg.seesaw.tol,
                           max_iter=cfg.seesaw.max_iter)
            task += 1
            r = cert.inputs["distances"][0]
            row = {"t": float(st.params.get("t", 0.0)), "x": region_label(X), "y": region_label(Y),
                   "r": r, "chsh_sup": cert.value, "epsilon": cert.inputs["epsilon"],
                   "bound": cert.bound, "formula": cert.formula, "satisfied": cert.satisfied}
            if thermal:
                row.update(_fixed_alice_columns(cfg, st, X, Y, r, fit))
            rows.append(row)
    columns = ["t", "x", "y", "r", "chsh_sup", "epsilon", "bound", "formula", "satisfied"]
    if thermal:
        columns += ["delta", "r_star", "chsh_fixed_alice", "beyond_r_star", "fixed_ok"]
    extra = {"fit": fit.to_dict()}
    if thermal and cfg.state.beta_star is not None:
        extra["beta_star"] = cfg.state.beta_star
        extra["below_beta_star"] = cfg.state.beta < cfg.state.beta_star
    RunWriter(cfg, "chsh-scan", "chsh_scan").write(columns, rows, extra)
    ok = all(row["satisfied"] and row.get("fixed_ok", True) for row in rows)
    return (EXIT_OK if ok else EXIT_VIOLATION), rows


def _fixed_alice_columns(cfg, state, X, Y, r, fit):
    a0, a1 = (pauli(lab, X.sites[0]) for lab in cfg.alice)
    delta = delta_margin(state, a0, a1)
    try:
        rs = r_star(X.size, fit.C, fit.lam, delta)
    except (ZeroMargin, ZeroDecay):
        rs = math.inf
    value, _, _ = chsh_sup_fixed_alice(state, a0, a1, Y)
    beyond = r >= math.ceil(rs) if math.isfinite(rs) else False
    return {"delta": delta, "r_star": rs, "chsh_fixed_alice": value, "beyond_r_star": beyond,
            "fixed_ok": (not beyond) or value <= 2.0 + 1e-9}


def cmd_clustering_fit(cfg: ExperimentConfig):
    lattice, H = build_system(cfg)
    states = prepare_states(cfg, lattice, H)
    if cfg.state.kind == "quench":
        raise ConfigError("state.kind", "clustering-fit needs a static state; use quench")
    pairs = resolve_pairs(cfg.regions.fit_pairs, cfg, lattice)
    samples = correlation_samples(states[0], lattice, pairs, cfg.basis)
    fit = fit_clustering(samples, cfg.fit.floor)
    writer = RunWriter(cfg, "clustering-fit", "samples")
    write_samples_csv(writer.out / "samples.csv", samples)
    ratios = [abs(s.value) / float(fit.envelope(s.r, s.min_size)) for s in samples]
    report = {"dominates": fit.dominates(samples), "n_samples": len(samples),
              "worst_ratio": max(ratios), "config_hash": cfg.config_hash()}
    writer.write_json("fit.json", fit.to_dict())
    writer.write_json("dominance.json", report)
    return (EXIT_OK if report["dominates"] else EXIT_VIOLATION), samples


def synthetic_samples(cfg: ExperimentConfig, lattice) -> list[CorrelationSample]:
    """Correlations injected straight from the light-cone envelope."""
    p = cfg.synthetic
    pairs = resolve_pairs(cfg.regions.pairs, cfg, lattice)
    rs = sorted({region_distance(lattice, x, y) for x, y in pairs})
    return [CorrelationSample(r, t, p["C"] * math.expm1(p["lambda"] * p["v"] * t)
                              * math.exp(-p["lambda"] * r), op_a="synthetic", op_b="synthetic")
            for t in cfg.state.times for r in rs]


def cmd_quench(cfg: ExperimentConfig):
    if cfg.synthetic is None and cfg.state.kind != "quench":
        raise ConfigError("state.kind", "quench needs a quench state recipe")
    lattice, H = build_system(cfg) if cfg.synthetic is None else (make_lattice(cfg), None)
    writer = RunWriter(cfg, "quench", "light_cone")
    if cfg.synthetic is not None:
        samples = synthetic_samples(cfg, lattice)
    else:
        states = prepare_states(cfg, lattice, H)
        if cfg.save_states:
            np.savez(writer.out / "states.npz", t=np.array(cfg.state.times),
                     data=np.stack([st.data for st in states]))
        pairs = resolve_pairs(cfg.regions.pairs, cfg, lattice)
        samples = [s for st in states
                   for s in correlation_samples(st, lattice, pairs, cfg.basis, t=st.params["t"])]
    fc = cfg.fit
    fit = fit_propagation(samples, fc.floor, fc.lam_range, fc.v_range, fc.grid, fc.rounds)
    rows = light_cone_table(samples, fit)
    write_samples_csv(writer.out / "samples.csv", samples)
    writer.write_json("fit.json", fit.to_dict())
    writer.write(["t", "r", "value", "bound", "dominated"], rows, {"fit": fit.to_dict()})
    return (EXIT_OK if all(row["dominated"] for row in rows) else EXIT_VIOLATION), rows


def light_cone_table(samples, fit: PropagationFit) -> list[dict]:
    """Per (t, r) cell: largest size-normalised |correlation| and the envelope."""
    cells: dict = {}
    for s in samples:
        key = (s.t, s.r)
        cells[key] = max(cells.get(key, 0.0), abs(s.value) / (s.size_x * s.size_y))
    rows = []
    for (t, r), value in sorted(cells.items()):
        bound = float(fit.envelope(t, r))
        rows.append({"t": t, "r": r, "value": value, "bound": bound, "dominated": value <= bound})
    return rows


def cmd_bell_certify(cfg: ExperimentConfig):
    if cfg.inequality is None:
        raise ConfigError("inequality", "bell-certify needs an inequality file")
    ineq = load_inequality(cfg.inequality)
    if not cfg.regions.sets:
        raise ConfigError("regions.sets", "bell-certify needs at least one region set")
    lattice, H = build_system(cfg)
    states = prepare_states(cfg, lattice, H)
    fit, _ = fit_for(cfg, states, lattice)
    rows, task = [], 0
    for st in states:
        for n, regs in enumerate(cfg.regions.sets):
            try:
                regions = [lattice.check_region(r) for r in regs]
            except InvalidRegion as exc:
                raise ConfigError(f"regions.sets[{n}]", str(exc)) from None
            cert = certify(st, ineq, regions, lattice, fit, cfg.formula, seed=cfg.seed + task,
                           restarts=cfg.seesaw.restarts, tol=cfg.seesaw.tol,
                           max_iter=cfg.seesaw.max_iter)
            task += 1
            rows.append({"t": float(st.params.get("t", 0.0)), "set": n,
                         "regions": "|".join(region_label(r) for r in regions),
                         "formula": cert.formula, "value": cert.value, "bound": cert.bound,
                         "margin": cert.margin, "satisfied": cert.satisfied,
                         "inputs": cert.inputs})
    columns = ["t", "set", "regions", "formula", "value", "bound", "margin", "satisfied"]
    RunWriter(cfg, "bell-certify", "certificates").write(
        columns, rows, {"fit": fit.to_dict(), "inequality": ineq.to_dict()})
    return (EXIT_OK if all(r["satisfied"] for r in rows) else EXIT_VIOLATION), rows


def cmd_local_bound(path, out=None):
    out = out or sys.stdout
    ineq = load_inequality(path)
    value, assignment = best_deterministic_strategy(ineq)
    print(f"name: {ineq.name or Path(path).stem}", file=out)
    print(f"delta_c: {fmt(value)}", file=out)
    print(f"assignment: {json.dumps(assignment)}", file=out)
    return EXIT_OK, value


def cmd_self_test(out=None):
    """Fast sanity checks of the numerical core."""
    out = out or sys.stdout
    checks = []

    v = chsh_sup_seesaw(singlet(), [0], [1], restarts=5).value
    checks.append(("singlet CHSH reaches 2 sqrt 2", abs(v - 2 * math.sqrt(2)) < 1e-6))
    checks.append(("CHSH local bound is 2", local_bound_bruteforce(chsh()) == 2.0))
    checks.append(("Horodecki value of the singlet",
                   abs(horodecki_spin_sup(singlet()) - 2 * math.sqrt(2)) < 1e-12))

    samples = [CorrelationSample(r, 0.0, 0.7 * math.exp(-0.4 * r)) for r in range(1, 8)]
    fit = fit_clustering(samples)
    checks.append(("exponential fit recovers (C, lambda)",
                   abs(fit.C - 0.7) < 1e-9 and abs(fit.lam - 0.4) < 1e-9))

    samples = [CorrelationSample(r, t, 1.5 * math.expm1(0.8 * 2.0 * t) * math.exp(-0.8 * r))
               for t in (0.0, 0.2, 0.4, 0.6) for r in range(1, 6)]
    pf = fit_propagation(samples)
    checks.append(("light-cone fit recovers (C, lambda, v)",
                   abs(pf.C - 1.5) < 1e-6 and abs(pf.lam - 0.8) < 1e-6 and abs(pf.v - 2.0) < 1e-6
                   and pf.dominates(samples)))

    lattice = build_lattice(6)
    H = model_hamiltonian(lattice, "tfim", J=1.0, g=2.0)
    gs = ground_state(H)
    checks.append(("TFIM ground state is gapped", gs.gap > 0.5))
    a0, a1 = pauli("z", 0), pauli("x", 0)
    val, _, _ = chsh_sup_fixed_alice(gs.state, a0, a1, [5])
    checks.append(("fixed-Alice CHSH below 2 at long range", val <= 2 + 1e-9))

    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}", file=out)
    return (EXIT_OK if all(ok for _, ok in checks) else EXIT_NUMERIC), checks


COMMANDS = {
    "chsh-scan": cmd_chsh_scan,
    "clustering-fit": cmd_clustering_fit,
    "quench": cmd_quench,
    "bell-certify": cmd_bell_certify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinbell", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="experiment config (YAML)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
    p = sub.add_parser("local-bound")
    p.add_argument("inequality", help="inequality file (YAML)")
    sub.add_parser("self-test")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "local-bound":
            return cmd_local_bound(args.inequality)[0]
        if args.command == "self-test":
            return cmd_self_test()[0]
        cfg = load_config(args.config, {"seed": args.seed, "out": args.out})
        code, rows = COMMANDS[args.command](cfg)
        logger.info("%s: %d rows written to %s", args.command, len(rows), cfg.output_dir)
        if code == EXIT_VIOLATION:
            print(f"{args.command}: certificate violation found", file=sys.stderr)
        return code
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SpinBellError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
