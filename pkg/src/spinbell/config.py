"""Experiment configuration: YAML key tree parsed into dataclasses.

Every validation failure raises :class:`ConfigError` carrying the dotted path
of the offending key, e.g. ``state.beta: must be >= 0``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError

STATE_KINDS = ("ground", "thermal", "quench", "product")
LOCAL_LABELS = ("up", "down", "plus", "minus", "mixed")


@dataclass
class LatticeConfig:
    geometry: str = "chain"
    length: int = 8
    width: int = 0
    height: int = 0
    boundary: str = "open"
    metric: str = "graph"
    local_dim: int = 2

    @property
    def shape(self):
        return self.length if self.geometry == "chain" else (self.width, self.height)


@dataclass
class ModelConfig:
    name: str = "tfim"
    params: dict = field(default_factory=dict)
    terms: list = field(default_factory=list)  # custom: [{sites, matrix}]


@dataclass
class StateConfig:
    kind: str = "ground"
    beta: float = 0.0
    initial: list = field(default_factory=lambda: ["up"])
    times: list = field(default_factory=lambda: [0.0])
    beta_star: float | None = None  # user-supplied clustering threshold, reported only


@dataclass
class RegionConfig:
    pairs: object = "all-singletons"
    fit_pairs: object = "all-singletons"
    min_distance: float = 0.0
    max_distance: float = math.inf
    sets: list = field(default_factory=list)


@dataclass
class FitConfig:
    floor: float = 1e-12
    lam_range: tuple = (0.05, 5.0)
    v_range: tuple = (0.05, 10.0)
    grid: int = 40
    rounds: int = 3
    C: float | None = None
    lam: float | None = None
    v: float | None = None


@dataclass
class SeesawConfig:
    restarts: int = 20
    tol: float = 1e-9
    max_iter: int = 500


@dataclass
class ExperimentConfig:
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    state: StateConfig = field(default_factory=StateConfig)
    basis: list = field(default_factory=lambda: ["x", "y", "z"])
    regions: RegionConfig = field(default_factory=RegionConfig)
    inequality: str | None = None
    fit: FitConfig = field(default_factory=FitConfig)
    seesaw: SeesawConfig = field(default_factory=SeesawConfig)
    alice: list = field(default_factory=lambda: ["z", "x"])
    formula: str = "auto"
    synthetic: dict | None = None
    save_states: bool = False
    seed: int = 0
    output_dir: str = "runs/default"
    source: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source")
        return _jsonable(d)

    def config_hash(self) -> str:
        """sha256 of the canonical config; the output directory is excluded."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def input_digest(self) -> str:
        """sha256 over the config file and inequality file bytes."""
        h = hashlib.sha256()
        for p in (self.source, self.inequality):
            if p and Path(p).exists():
                h.update(Path(p).read_bytes())
        return h.hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


# ---------------------------------------------------------------------------
# validation helpers


def _num(d, key, path, default=None, *, lo=None, integer=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"{path}.{key}", "required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        if v == "inf":
            return math.inf
        raise ConfigError(f"{path}.{key}", f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{path}.{key}", f"expected an integer, got {v!r}")
    if not math.isfinite(v) and not (key == "max_distance" and v == math.inf):
        raise ConfigError(f"{path}.{key}", "must be finite")
    if lo is not None and v < lo:
        raise ConfigError(f"{path}.{key}", f"must be >= {lo}")
    return int(v) if integer else float(v)


def _choice(d, key, path, choices, default):
    v = d.get(key, default)
    if v not in choices:
        raise ConfigError(f"{path}.{key}", f"must be one of {list(choices)}, got {v!r}")
    return v


def _section(raw, key):
    v = raw.get(key, {})
    if v is None:
        return {}
    if not isinstance(v, dict):
        raise ConfigError(key, "expected a mapping")
    return v


def _regions_list(v, path, arity=None):
    if isinstance(v, str):
        if v != "all-singletons":
            raise ConfigError(path, f"expected 'all-singletons' or a list, got {v!r}")
        return v
    if not isinstance(v, list):
        raise ConfigError(path, "expected a list of region groups")
    out = []
    for n, group in enumerate(v):
        if not isinstance(group, list) or (arity and len(group) != arity):
            raise ConfigError(f"{path}[{n}]", f"expected a list of {arity or 'N'} regions")
        regs = []
        for m, reg in enumerate(group):
            reg = [reg] if isinstance(reg, int) else reg
            if not isinstance(reg, list) or not reg or not all(isinstance(s, int) for s in reg):
                raise ConfigError(f"{path}[{n}][{m}]", "region must be a nonempty list of site ids")
            regs.append(reg)
        out.append(regs)
    return out


def parse_config(raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("", "config must be a mapping at top level")
    base_dir = Path(base_dir or ".")
    known = {"seed", "lattice", "model", "state", "operators", "regions", "inequality", "fit",
             "seesaw", "thermal", "quench", "certify", "output"}
    for key in raw:
        if key not in known:
            raise ConfigError(str(key), "unknown key")

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")

    lat = _section(raw, "lattice")
    geometry = _choice(lat, "geometry", "lattice", ("chain", "grid"), "chain")
    lc = LatticeConfig(
        geometry=geometry,
        length=_num(lat, "length", "lattice", None if geometry == "chain" else 0, lo=1, integer=True),
        width=_num(lat, "width", "lattice", None if geometry == "grid" else 0, lo=0, integer=True),
        height=_num(lat, "height", "lattice", None if geometry == "grid" else 0, lo=0, integer=True),
        boundary=_choice(lat, "boundary", "lattice", ("open", "periodic"), "open"),
        metric=_choice(lat, "metric", "lattice", ("graph", "euclidean", "chebyshev"), "graph"),
        local_dim=_num(lat, "local_dim", "lattice", 2, lo=2, integer=True),
    )

    mod = dict(_section(raw, "model"))
    name = _choice(mod, "name", "model", ("tfim", "xxz", "heisenberg", "custom"), "tfim")
    mod.pop("name", None)
    terms = mod.pop("terms", [])
    params = {k: _num(mod, k, "model") for k in mod}
    allowed = {"tfim": {"J", "g"}, "xxz": {"J", "Delta", "h"}, "heisenberg": {"J", "h"},
               "custom": set()}[name]
    for k in params:
        if k not in allowed:
            raise ConfigError(f"model.{k}", f"not a parameter of {name}")
    if name == "custom":
        terms = [_parse_term(t, f"model.terms[{n}]") for n, t in enumerate(terms or [])]
    mc = ModelConfig(name, params, terms)

    st = _section(raw, "state")
    kind = _choice(st, "kind", "state", STATE_KINDS, "ground")
    initial = st.get("initial", "up")
    initial = [initial] if isinstance(initial, str) else initial
    if not isinstance(initial, list) or not all(lab in LOCAL_LABELS for lab in initial):
        raise ConfigError("state.initial", f"labels must be from {list(LOCAL_LABELS)}")
    times = st.get("times", [0.0])
    if not isinstance(times, list) or not times:
        raise ConfigError("state.times", "expected a nonempty list of times")
    times = [_num({"t": t}, "t", "state.times", lo=0) for t in times]
    sc = StateConfig(kind, _num(st, "beta", "state", None if kind == "thermal" else 0.0, lo=0),
                     initial, times,
                     _num(st, "beta_star", "state", lo=0) if "beta_star" in st else None)

    ops = _section(raw, "operators")
    basis = ops.get("basis", ["x", "y", "z"])
    if not isinstance(basis, list) or not basis or not all(b in ("x", "y", "z") for b in basis):
        raise ConfigError("operators.basis", "expected a nonempty subset of [x, y, z]")

    reg = _section(raw, "regions")
    rc = RegionConfig(
        pairs=_regions_list(reg.get("pairs", "all-singletons"), "regions.pairs", 2),
        fit_pairs=_regions_list(reg.get("fit_pairs", "all-singletons"), "regions.fit_pairs", 2),
        min_distance=_num(reg, "min_distance", "regions", 0.0, lo=0),
        max_distance=_num(reg, "max_distance", "regions", math.inf, lo=0),
        sets=_regions_list(reg.get("sets", []), "regions.sets"),
    )

    ineq = raw.get("inequality")
    if ineq is not None:
        if not isinstance(ineq, str):
            raise ConfigError("inequality", "expected a file path")
        p = Path(ineq)
        ineq = str(p if p.is_absolute() else base_dir / p)
        if not Path(ineq).exists():
            raise ConfigError("inequality", f"file not found: {ineq}")

    fit = _section(raw, "fit")
    fc = FitConfig(
        floor=_num(fit, "floor", "fit", 1e-12, lo=0),
        lam_range=_range(fit, "lambda_range", (0.05, 5.0)),
        v_range=_range(fit, "v_range", (0.05, 10.0)),
        grid=_num(fit, "grid", "fit", 40, lo=2, integer=True),
        rounds=_num(fit, "rounds", "fit", 3, lo=0, integer=True),
        C=_num(fit, "C", "fit", None, lo=0) if "C" in fit else None,
        lam=_num(fit, "lambda", "fit", None, lo=0) if "lambda" in fit else None,
        v=_num(fit, "v", "fit", None, lo=0) if "v" in fit else None,
    )
    if (fc.C is None) != (fc.lam is None):
        raise ConfigError("fit", "fixed constants need both C and lambda")

    ss = _section(raw, "seesaw")
    ssc = SeesawConfig(_num(ss, "restarts", "seesaw", 20, lo=1, integer=True),
                       _num(ss, "tol", "seesaw", 1e-9, lo=0),
                       _num(ss, "max_iter", "seesaw", 500, lo=1, integer=True))

    th = _section(raw, "thermal")
    alice = th.get("alice", ["z", "x"])
    if not (isinstance(alice, list) and len(alice) == 2 and all(a in ("x", "y", "z") for a in alice)):
        raise ConfigError("thermal.alice", "expected two Pauli labels")

    q = _section(raw, "quench")
    synthetic = q.get("synthetic")
    if synthetic is not None:
        synthetic = {k: _num(synthetic, k, "quench.synthetic", lo=0) for k in ("C", "lambda", "v")}
    save_states = bool(q.get("save_states", False))

    cert = _section(raw, "certify")
    formula = _choice(cert, "formula", "certify",
                      ("auto", "lemma1", "thm3_quench", "lemma2_twobody",
                       "thm6_quench_twobody", "thm7_general"), "auto")

    out = _section(raw, "output")
    out_dir = out.get("dir", "runs/default")
    if not isinstance(out_dir, str):
        raise ConfigError("output.dir", "expected a path")

    return ExperimentConfig(lc, mc, sc, basis, rc, ineq, fc, ssc, alice, formula, synthetic,
                            save_states, seed, out_dir)


def _range(d, key, default):
    v = d.get(key, default)
    if not (isinstance(v, (list, tuple)) and len(v) == 2
            and all(isinstance(x, (int, float)) and x > 0 for x in v) and v[0] < v[1]):
        raise ConfigError(f"fit.{key}", "expected [low, high] with 0 < low < high")
    return (float(v[0]), float(v[1]))


def _parse_term(t, path):
    """Custom term: ``{sites: [...], matrix: [[[re, im], ...], ...]}`` (row-major)."""
    if not isinstance(t, dict) or "sites" not in t or "matrix" not in t:
        raise ConfigError(path, "expected {sites, matrix}")
    try:
        arr = np.asarray(t["matrix"], dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.matrix", "expected nested numeric arrays") from None
    if arr.ndim != 3 or arr.shape[-1] != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(f"{path}.matrix", "expected a square matrix of [re, im] pairs")
    return {"sites": [int(s) for s in t["sites"]], "matrix": (arr[..., 0] + 1j * arr[..., 1]).tolist()}


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError("", f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("", f"YAML error: {exc}") from None
    raw = raw or {}
    overrides = overrides or {}
    if overrides.get("seed") is not None:
        raw["seed"] = overrides["seed"]
    if overrides.get("out") is not None:
        raw.setdefault("output", {})["dir"] = overrides["out"]
    cfg = parse_config(raw, path.parent)
    cfg.source = str(path)
    return cfg
