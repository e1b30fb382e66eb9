"""Scenario files: schema, validation and construction of problem instances.

A scenario is a JSON document describing the grid, operator, condition
measures, data, optional forcing or nonlinearity, time grid, norms and
check tolerances.  Validation is strict: unknown keys are errors and
nothing is computed before the whole document has been checked.
"""

from __future__ import annotations

import copy
import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import operators as ops
from .errors import ConfigError
from .expressions import ExpressionError, compile_expression
from .grid import Grid, NormSpec, fft_inverse
from .linear import NonlocalProblem
from .measures import TimeMeasure, integrate_kernel
from .picard import power_law
from .report import read_snapshot

# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

_NUM = {"type": "number"}
_COMPLEX = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}
_CHANNELS = {"type": "array", "items": _COMPLEX, "minItems": 1}

_TERM = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {"enum": ["gaussian", "planewave", "random", "constant"]},
        "center": {"type": "array", "items": _NUM, "minItems": 1, "maxItems": 3},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "k": {"type": "array", "items": {"type": "integer"}, "minItems": 1, "maxItems": 3},
        "cutoff": {"type": "integer", "minimum": 1},
        "amplitude": _COMPLEX,
        "channels": _CHANNELS,
        "profile": {"type": "string"},
        "time": {"type": "string"},
    },
}

_FIELD = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "terms": {"type": "array", "items": _TERM},
        "snapshot": {"type": "string"},
    },
}

_MEASURE = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "atoms": {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 3}},
        "density": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "values": {"type": "array", "items": _COMPLEX, "minItems": 2},
                "expression": {"type": "string"},
                "samples": {"type": "integer", "minimum": 2},
                "csv": {"type": "string"},
                "column": {"type": ["string", "integer"]},
                "imag_column": {"type": ["string", "integer"]},
            },
        },
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "mode", "grid", "operator", "time"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "mode": {"enum": ["linear", "nonlinear"]},
        "grid": {
            "type": "object", "additionalProperties": False, "required": ["dim", "points", "length"],
            "properties": {
                "dim": {"enum": [1, 2, 3]},
                "points": {"type": "integer", "minimum": 8},
                "length": {"type": "number", "exclusiveMinimum": 0},
                "periodic_data": {"type": "boolean"},
            },
        },
        "operator": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {
                "kind": {"enum": ["scalar", "diagonal", "matrix", "rank_one", "wentzell"]},
                "a": {"oneOf": [_COMPLEX, {"type": "string"}]},
                "b": {"type": "string"},
                "values": {"type": "array", "items": _COMPLEX, "minItems": 1},
                "rows": {"type": "array", "items": {"type": "array", "items": _COMPLEX, "minItems": 1}, "minItems": 1},
                "g": {"type": "array", "items": _COMPLEX, "minItems": 1},
                "s": _NUM,
                "q": {"type": "number", "minimum": 1},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "M": {"type": "integer", "minimum": 4},
                "condition_cap": {"type": "number", "exclusiveMinimum": 1},
            },
        },
        "alpha": _MEASURE,
        "beta": _MEASURE,
        "data": {
            "type": "object", "additionalProperties": False,
            "properties": {"phi": _FIELD, "psi": _FIELD},
        },
        "manufactured": {
            "type": "object", "additionalProperties": False, "required": ["k", "vector"],
            "properties": {
                "k": {"type": "array", "items": {"type": "integer"}, "minItems": 1, "maxItems": 3},
                "vector": _CHANNELS,
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "forcing": {
            "type": "object", "additionalProperties": False, "required": ["terms"],
            "properties": {"terms": {"type": "array", "items": _TERM}},
        },
        "nonlinearity": {
            "type": "object", "additionalProperties": False, "required": ["kind", "lambda", "p"],
            "properties": {
                "kind": {"enum": ["power"]},
                "lambda": _NUM,
                "p": {"type": "number", "exclusiveMinimum": 1},
                "order": {"type": "integer", "minimum": 1, "maximum": 4},
                "dealias": {"type": "boolean"},
            },
        },
        "time": {
            "type": "object", "additionalProperties": False, "required": ["T", "K"],
            "properties": {
                "T": {"type": "number", "exclusiveMinimum": 0},
                "K": {"type": "integer", "minimum": 8},
            },
        },
        "norms": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "s": _NUM,
                "p": {"oneOf": [{"type": "number", "minimum": 1}, {"const": "inf"}]},
                "q": {"oneOf": [{"type": "number", "minimum": 1}, {"const": "inf"}]},
                "sigma": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "gamma": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
            },
        },
        "picard": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "C0": {"type": "number", "minimum": 0},
                "C1": {"type": "number", "minimum": 0},
                "atol": {"type": "number", "minimum": 0},
                "rtol": {"type": "number", "minimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "ceiling": {"type": "number", "exclusiveMinimum": 0},
                "enforce_window": {"type": "boolean"},
                "initial": {"enum": ["linear", "zero"]},
            },
        },
        "identity": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "xi2": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "t": {"type": "array", "items": _NUM},
            },
        },
        "oracle": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "fine": {"type": "integer", "minimum": 4},
                "max_modes": {"type": "integer", "minimum": 1},
            },
        },
        "solver": {
            "type": "object", "additionalProperties": False,
            "properties": {"det_fraction": {"type": "number", "minimum": 0}},
        },
        "seed": {"type": "integer", "minimum": 0},
        "tolerances": {
            "type": "object", "additionalProperties": False,
            "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in (
                "identity_zero", "identity_pythagorean", "identity_derivative", "pde_residual",
                "condition_residual", "oracle", "manufactured", "fixed_point_factor")},
        },
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {"csv": {"type": "boolean"}, "snapshots": {"type": "boolean"}},
        },
    },
}

DEFAULT_TOLERANCES = {
    "identity_zero": 1e-12,
    "identity_pythagorean": 1e-10,
    "identity_derivative": 1e-6,
    "pde_residual": 1e-8,
    "condition_residual": 1e-10,
    "oracle": 1e-6,
    "manufactured": 1e-10,
    "fixed_point_factor": 10.0,
}


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    """A validated scenario document plus the directory relative paths refer to."""

    config: dict
    base_dir: Path
    source: str = ""

    @property
    def name(self) -> str:
        return self.config["name"]

    @property
    def mode(self) -> str:
        return self.config["mode"]

    def section(self, key: str) -> dict:
        return self.config.get(key) or {}

    @property
    def tolerances(self) -> dict:
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(self.section("tolerances"))
        return tol


def shipped_scenarios() -> list[str]:
    """Names of the scenarios bundled with the package."""
    root = resources.files("nlwave") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _locate(path_or_name: str) -> tuple[str, Path, str]:
    p = Path(path_or_name)
    if p.is_file():
        return p.read_text(), p.resolve().parent, str(p)
    root = resources.files("nlwave") / "scenarios"
    cand = root / f"{path_or_name}.json"
    if cand.is_file():
        return cand.read_text(), Path(str(root)), f"<shipped:{path_or_name}>"
    raise ConfigError(f"no scenario file or shipped scenario named {path_or_name!r}")


def _line_of(text: str, path) -> int | None:
    """Best-effort line of the last key of a JSON path in ``text``."""
    keys = [k for k in path if isinstance(k, str)]
    if not keys:
        return None
    needle = f'"{keys[-1]}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def parse_scenario(text: str, base_dir: Path | str = ".", source: str = "<string>") -> Scenario:
    """Parse and validate scenario JSON text."""
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            path = path + extra[:1]
            msg = f"unknown key(s) {extra}"
        else:
            msg = err.message
        dotted = ".".join(str(p) for p in path) or "<root>"
        raise ConfigError(msg, field=dotted, line=_line_of(text, path))
    sc = Scenario(cfg, Path(base_dir), source)
    _semantic_checks(sc, text)
    return sc


def load_scenario(path_or_name: str) -> Scenario:
    """Read a scenario from a file path or by shipped name."""
    text, base, source = _locate(path_or_name)
    return parse_scenario(text, base, source)


def _semantic_checks(sc: Scenario, text: str):
    cfg = sc.config
    op = cfg["operator"]
    need = {"scalar": ["a"], "diagonal": ["values"], "matrix": ["rows"],
            "rank_one": ["g", "s"], "wentzell": ["a", "b", "M"]}[op["kind"]]
    for key in need:
        if key not in op:
            raise ConfigError(f"operator kind {op['kind']!r} requires {key!r}",
                              field=f"operator.{key}", line=_line_of(text, ["kind"]))
    if op["kind"] == "wentzell" and not (isinstance(op["a"], str)):
        raise ConfigError("Wentzell coefficient a must be an expression in y", field="operator.a")
    if op["kind"] == "scalar" and isinstance(op["a"], str):
        raise ConfigError("scalar operator needs a number", field="operator.a")
    g = cfg["grid"]
    n = g["points"]
    if n & (n - 1):
        raise ConfigError("points per axis must be a power of two", field="grid.points",
                          line=_line_of(text, ["points"]))
    if cfg["mode"] == "nonlinear" and "nonlinearity" not in cfg:
        raise ConfigError("nonlinear scenarios need a nonlinearity block", field="nonlinearity")
    if "manufactured" in cfg and "data" in cfg:
        raise ConfigError("give either data or manufactured, not both", field="manufactured")
    T = cfg["time"]["T"]
    for label in ("alpha", "beta"):
        for i, atom in enumerate(cfg.get(label, {}).get("atoms", [])):
            if not 0 <= atom[0] <= T:
                raise ConfigError(f"atom location {atom[0]} outside [0, {T}]",
                                  field=f"{label}.atoms.{i}", line=_line_of(text, [label]))
        dens = cfg.get(label, {}).get("density")
        if dens is not None:
            sources = [k for k in ("values", "expression", "csv") if k in dens]
            if len(sources) != 1:
                raise ConfigError("density needs exactly one of values, expression, csv",
                                  field=f"{label}.density")
            if "expression" in dens and "samples" not in dens:
                raise ConfigError("density expressions need a sample count",
                                  field=f"{label}.density.samples")
    for label in ("phi", "psi"):
        fld = cfg.get("data", {}).get(label)
        if fld is not None and ("terms" in fld) == ("snapshot" in fld):
            raise ConfigError("field needs exactly one of terms or snapshot", field=f"data.{label}")


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _complex(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _expr(text, names, where):
    try:
        return compile_expression(text, names)
    except ExpressionError as exc:
        raise ConfigError(str(exc), field=where) from None


def build_family(cfg: dict) -> ops.OperatorFamily:
    kind = cfg["kind"]
    try:
        if kind == "scalar":
            return ops.scalar(_complex(cfg["a"]))
        if kind == "diagonal":
            return ops.diagonal([_complex(v) for v in cfg["values"]])
        if kind == "matrix":
            rows = [[_complex(v) for v in row] for row in cfg["rows"]]
            if any(len(r) != len(rows) for r in rows):
                raise ConfigError("matrix rows must form a square array", field="operator.rows")
            return ops.matrix(rows, cfg.get("condition_cap", ops.DEFAULT_CONDITION_CAP))
        if kind == "rank_one":
            return ops.rank_one([_complex(v) for v in cfg["g"]], cfg["s"], cfg.get("q", 2.0),
                                cfg.get("sigma", 1.0))
        M = cfg["M"]
        y = np.linspace(0.0, 1.0, M + 1)
        a = _expr(cfg["a"], ("y",), "operator.a")(y)
        b = _expr(cfg.get("b", "0"), ("y",), "operator.b")(y)
        return ops.build_wentzell(a, b, M, cfg.get("condition_cap", ops.DEFAULT_CONDITION_CAP))
    except ops.OperatorConstructionError as exc:
        raise ConfigError(str(exc), field="operator") from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), field="operator") from None


def _read_csv_column(path: Path, column):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"empty CSV file {path}")
    header, body = rows[0], rows[1:]
    if isinstance(column, int):
        idx = column
    elif column in header:
        idx = header.index(column)
    else:
        raise ConfigError(f"column {column!r} not in {path}")
    return np.array([float(r[idx]) for r in body if r])


def build_measure(cfg: dict | None, T: float, base_dir: Path, where: str) -> TimeMeasure:
    if not cfg:
        return TimeMeasure.zero(T)
    atoms = [(a[0], complex(a[1], a[2] if len(a) > 2 else 0.0)) for a in cfg.get("atoms", [])]
    dens = cfg.get("density")
    samples = None
    if dens is not None:
        if "values" in dens:
            samples = np.array([_complex(v) for v in dens["values"]])
        elif "expression" in dens:
            t = np.linspace(0.0, T, dens["samples"])
            samples = _expr(dens["expression"], ("t",), f"{where}.density.expression")(t).astype(complex)
        else:
            path = base_dir / dens["csv"]
            if not path.is_file():
                raise ConfigError(f"density CSV {path} not found", field=f"{where}.density.csv")
            samples = _read_csv_column(path, dens.get("column", 0)).astype(complex)
            if "imag_column" in dens:
                samples = samples + 1j * _read_csv_column(path, dens["imag_column"])
            if samples.size < 2:
                raise ConfigError("density needs at least two samples", field=f"{where}.density")
    try:
        return TimeMeasure(T, tuple(atoms), samples)
    except ValueError as exc:
        raise ConfigError(str(exc), field=where) from None


def _channel_amplitudes(term: dict, N: int, where: str) -> np.ndarray:
    """Per-channel coefficients: ``amplitude * channels * profile``."""
    vals = np.full(N, _complex(term.get("amplitude", 1.0)))
    if "channels" in term:
        ch = np.array([_complex(v) for v in term["channels"]])
        if ch.size != N:
            raise ConfigError(f"channels needs {N} entries, got {ch.size}", field=f"{where}.channels")
        vals = vals * ch
    if "profile" in term:
        j = np.arange(1, N + 1, dtype=float)
        y = np.linspace(0.0, 1.0, N) if N > 1 else np.zeros(1)
        vals = vals * _expr(term["profile"], ("y", "j"), f"{where}.profile")(y, j)
    return vals


def _term_field(term: dict, grid: Grid, N: int, rng, where: str) -> np.ndarray:
    coords = grid.coordinates()
    kind = term["type"]
    amp = _channel_amplitudes(term, N, where)
    if kind == "constant":
        shape = np.ones(grid.size)
    elif kind == "gaussian":
        center = term.get("center", [0.5 * grid.length] * grid.dim)
        if len(center) != grid.dim:
            raise ConfigError("gaussian center must match the grid dimension", field=f"{where}.center")
        width = term.get("width", 1.0)
        r2 = sum((c - x0) ** 2 for c, x0 in zip(coords, center))
        shape = np.exp(-r2 / (2.0 * width**2))
    elif kind == "planewave":
        k = term.get("k")
        if k is None or len(k) != grid.dim:
            raise ConfigError("planewave needs integer k per axis", field=f"{where}.k")
        phase = sum(2 * np.pi * ki / grid.length * c for ki, c in zip(k, coords))
        shape = np.exp(1j * phase)
    else:
        cutoff = term.get("cutoff", 4)
        m = np.fft.fftfreq(grid.points, d=1.0 / grid.points)
        mesh = np.meshgrid(*([np.abs(m)] * grid.dim), indexing="ij")
        keep = np.logical_and.reduce([x.ravel() <= cutoff for x in mesh])
        spec = (rng.standard_normal((grid.size, N)) + 1j * rng.standard_normal((grid.size, N))) * keep[:, None]
        vals = fft_inverse(grid, spec)
        vals /= max(np.max(np.abs(vals)), 1e-300)
        return vals * amp[None, :]
    return shape[:, None] * amp[None, :]


def build_field(cfg: dict | None, grid: Grid, N: int, base_dir: Path, rng, where: str) -> np.ndarray:
    if not cfg:
        return np.zeros((grid.size, N), complex)
    if "snapshot" in cfg:
        try:
            arr, meta = read_snapshot(base_dir / cfg["snapshot"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read snapshot: {exc}", field=f"{where}.snapshot") from None
        if arr.ndim == 3:
            arr = arr[0]
        if arr.shape != (grid.size, N):
            raise ConfigError(f"snapshot shape {arr.shape} does not match ({grid.size}, {N})",
                              field=f"{where}.snapshot")
        return arr
    out = np.zeros((grid.size, N), complex)
    for i, term in enumerate(cfg.get("terms", [])):
        if "time" in term:
            raise ConfigError("time profiles are only allowed in forcing terms", field=f"{where}.terms.{i}.time")
        out += _term_field(term, grid, N, rng, f"{where}.terms.{i}")
    return out


def build_forcing(cfg: dict | None, grid: Grid, N: int, times: np.ndarray, rng) -> np.ndarray | None:
    if not cfg or not cfg.get("terms"):
        return None
    out = np.zeros((times.size, grid.size, N), complex)
    for i, term in enumerate(cfg["terms"]):
        where = f"forcing.terms.{i}"
        spatial = _term_field(term, grid, N, rng, where)
        prof = _expr(term.get("time", "1"), ("t",), f"{where}.time")(times)
        out += prof[:, None, None] * spatial[None]
    return out


@dataclass
class BuiltScenario:
    """Everything needed to run a scenario."""

    scenario: Scenario
    problem: NonlocalProblem
    exact: object = None
    picard: dict = field(default_factory=dict)
    identity: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    seed: int = 0


def manufactured_data(grid: Grid, family: ops.OperatorFamily, alpha: TimeMeasure, beta: TimeMeasure,
                      k, vector):
    """Data ``(phi, psi)`` and exact solution for the target ``e^{ik.x} C(xi, t, A) v``.

    ``k`` holds integer mode numbers per axis.  The exact solution is
    returned as a function of a time array giving ``(u, u_t)`` physical
    arrays of shape ``(T, size, N)``.
    """
    kvec = 2 * np.pi * np.asarray(k, float) / grid.length
    xi2 = float(kvec @ kvec)
    coords = grid.coordinates()
    wave = np.exp(1j * sum(ki * c for ki, c in zip(kvec, coords)))
    v = np.asarray(vector, complex)
    mu2 = family.eigenvalues + xi2
    ve = family.to_eigen(v)

    def u_e(t):
        return ops.cos_kernel(t, mu2) * ve

    def ut_e(t):
        return -mu2 * ops.sin_kernel(t, mu2) * ve

    phi_e = ve - integrate_kernel(alpha, u_e)
    psi_e = -integrate_kernel(beta, ut_e)
    phi = wave[:, None] * family.from_eigen(phi_e)[None, :]
    psi = wave[:, None] * family.from_eigen(psi_e)[None, :]

    def exact(times):
        times = np.atleast_1d(times)
        u = family.from_eigen(u_e(times))
        ut = family.from_eigen(ut_e(times))
        return wave[None, :, None] * u[:, None, :], wave[None, :, None] * ut[:, None, :]
    return phi, psi, exact


def build(sc: Scenario, seed: int | None = None) -> BuiltScenario:
    """Construct the problem instance described by a validated scenario."""
    cfg = sc.config
    seed = cfg.get("seed", 0) if seed is None else int(seed)
    rng = np.random.default_rng(seed)
    g = cfg["grid"]
    try:
        grid = Grid(g["dim"], g["points"], g["length"])
    except ValueError as exc:
        raise ConfigError(str(exc), field="grid") from None
    family = build_family(cfg["operator"])
    N = family.dim
    T, K = float(cfg["time"]["T"]), int(cfg["time"]["K"])
    alpha = build_measure(cfg.get("alpha"), T, sc.base_dir, "alpha")
    beta = build_measure(cfg.get("beta"), T, sc.base_dir, "beta")
    exact = None
    if "manufactured" in cfg:
        man = cfg["manufactured"]
        if len(man["k"]) != grid.dim:
            raise ConfigError("manufactured k must match the grid dimension", field="manufactured.k")
        vec = _channel_amplitudes({"channels": man["vector"]}, N, "manufactured")
        phi, psi, exact = manufactured_data(grid, family, alpha, beta, man["k"], vec)
    else:
        data = cfg.get("data", {})
        phi = build_field(data.get("phi"), grid, N, sc.base_dir, rng, "data.phi")
        psi = build_field(data.get("psi"), grid, N, sc.base_dir, rng, "data.psi")
    times = np.linspace(0.0, T, K + 1)
    forcing = build_forcing(cfg.get("forcing"), grid, N, times, rng)
    nl = None
    if cfg["mode"] == "nonlinear":
        n = cfg["nonlinearity"]
        nl = power_law(n["lambda"], n["p"], n.get("order", 1), n.get("dealias", True))
    norms_cfg = cfg.get("norms", {})
    as_exp = lambda v: np.inf if v == "inf" else float(v)
    sigma = norms_cfg.get("sigma")
    norms = NormSpec(float(norms_cfg.get("s", 1.0)), as_exp(norms_cfg.get("p", 2.0)),
                     as_exp(norms_cfg.get("q", 2.0)), None if sigma is None else float(sigma))
    periodic = g.get("periodic_data", False) or "manufactured" in cfg
    prob = NonlocalProblem(grid, family, alpha, beta, phi, psi, K, horizon=T, forcing=forcing,
                           nonlinearity=nl, gamma=float(norms_cfg.get("gamma", 0.0)),
                           det_fraction=float(cfg.get("solver", {}).get("det_fraction", 1e-8)),
                           periodic_data=periodic, norms=norms, name=cfg["name"])
    ident = {"xi2": [0.0, 1.0, 10.0], "t": [0.0, 0.1, 1.0, float(np.pi)]}
    ident.update(cfg.get("identity", {}))
    orc = {"fine": 16, "max_modes": 64}
    orc.update(cfg.get("oracle", {}))
    return BuiltScenario(sc, prob, exact, dict(cfg.get("picard", {})), ident, orc, seed)


def scenario_copy(sc: Scenario, **updates) -> Scenario:
    """A re-validated copy with top-level sections replaced or merged."""
    cfg = copy.deepcopy(sc.config)
    for key, val in updates.items():
        if isinstance(val, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    return parse_scenario(json.dumps(cfg), sc.base_dir, sc.source)
