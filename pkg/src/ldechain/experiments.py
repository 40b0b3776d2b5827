"""Experiment drivers behind the ``ldechain`` command line.

Each ``cmd_*`` function takes a validated :class:`RunConfig` and returns a
:class:`ResultTable`. Configs are flat JSON objects; grids are given either as
lists or as inclusive ``"start:stop:step"`` range strings.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import lru_cache
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from . import __version__, ed
from .cavity import CavityParams, validity_check
from .chain import correlation_matrix, make_profile, solve
from .entanglement import concurrence, end_to_end_rdm, max_fidelity
from .protocol import ProtocolConfig, fidelity_vs_alpha

logger = logging.getLogger(__name__)

CLASSICAL_THRESHOLD = 2.0 / 3.0


class ConfigError(ValueError):
    """Invalid run configuration (exit code 1)."""


class ValidationFailure(RuntimeError):
    """A numerical check failed (exit code 2)."""

    def __init__(self, message: str, table: Optional["ResultTable"] = None):
        super().__init__(message)
        self.table = table


# ---------------------------------------------------------------------------
# Result tables


@dataclass
class ResultTable:
    columns: list[tuple[str, str]]
    rows: list[tuple]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        width = len(self.columns)
        for row in self.rows:
            if len(row) != width:
                raise ValueError(f"row {row!r} does not match {width} columns")

    @property
    def names(self) -> list[str]:
        return [c[0] for c in self.columns]

    def column(self, name: str) -> list:
        i = self.names.index(name)
        return [r[i] for r in self.rows]

    def records(self) -> list[dict]:
        return [dict(zip(self.names, r)) for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in self.metadata.items():
            buf.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
        buf.write("# columns: " + ", ".join(f"{n}:{t}" for n, t in self.columns) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.names)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "metadata": self.metadata,
                "columns": [{"name": n, "type": t} for n, t in self.columns],
                "rows": [[_jsonable(v) for v in r] for r in self.rows],
            },
            indent=2,
            sort_keys=True,
        )


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def read_table_csv(text: str) -> ResultTable:
    """Parse the CSV layout written by :meth:`ResultTable.to_csv`."""
    meta, types, body = {}, None, []
    for line in text.splitlines():
        if line.startswith("# columns: "):
            types = [tuple(c.split(":")) for c in line[len("# columns: "):].split(", ")]
        elif line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        else:
            body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    types = types or [(h, "str") for h in header]
    conv = {"int": int, "float": float, "str": str, "bool": lambda s: s == "true"}
    rows = [tuple(conv[t](v) for (_, t), v in zip(types, row)) for row in reader]
    return ResultTable(list(types), rows, meta)


# ---------------------------------------------------------------------------
# Config handling


@dataclass(frozen=True)
class KeySpec:
    kind: str  # int, float, bool, int_list, float_list
    default: Any = None
    required: bool = False
    positive: bool = False


SCHEMAS: dict[str, dict[str, KeySpec]] = {
    "concurrence-scan": {
        "n_values": KeySpec("int_list", "8:24:2"),
        "lambdas": KeySpec("float_list", [0.15, 0.2, 0.4, 0.2], positive=True),
        "mus": KeySpec("float_list", [7.0, 5.0, 3.0, 1.0], positive=True),
        "temperatures": KeySpec("float_list", [0.0]),
    },
    "fidelity-map": {
        "n_sites": KeySpec("int", 12, positive=True),
        "lambda_grid": KeySpec("float_list", "0.05:1.0:0.05", positive=True),
        "mu_grid": KeySpec("float_list", "1.0:8.0:0.25", positive=True),
        "temperatures": KeySpec("float_list", [0.005, 0.01]),
    },
    "tc-find": {
        "n_values": KeySpec("int_list", [12, 24, 36]),
        "lambda_grid": KeySpec("float_list", "0.05:1.0:0.05", positive=True),
        "mu_grid": KeySpec("float_list", "1.0:8.0:0.25", positive=True),
        "t_low": KeySpec("float", 1e-4, positive=True),
        "t_high": KeySpec("float", 1.0, positive=True),
        "tolerance": KeySpec("float", 0.005, positive=True),
    },
    "protocol-run": {
        "n_sites": KeySpec("int", 12, positive=True),
        "lambda": KeySpec("float", 0.5, positive=True),
        "mu": KeySpec("float", 4.0, positive=True),
        "nu": KeySpec("float", 50.0, positive=True),
        "temperatures": KeySpec("float_list", [0.001, 0.003, 0.004, 0.005, 0.007]),
        "alpha_grid": KeySpec("float_list", [round(0.1 + 0.05 * k, 2) for k in range(18)] + [0.99]),
        "phase_average": KeySpec("bool", False),
        "n_phases": KeySpec("int", 16, positive=True),
        "measurement_time": KeySpec("float", None, positive=True),
    },
    "validate-cavity": {
        "g": KeySpec("float", 1.0, positive=True),
        "delta": KeySpec("float", 0.0),
        "couplings": KeySpec("float_list", None, positive=True),
        "n_sites": KeySpec("int", 12, positive=True),
        "lambda": KeySpec("float", 0.5, positive=True),
        "mu": KeySpec("float", 4.0, positive=True),
        "bulk_coupling": KeySpec("float", 0.01, positive=True),
        "temperature": KeySpec("float", 0.0),
        "threshold": KeySpec("float", 0.1, positive=True),
    },
    "oracle-check": {
        "n_min": KeySpec("int", 2, positive=True),
        "n_max": KeySpec("int", 10, positive=True),
        "profiles_per_n": KeySpec("int", 20, positive=True),
        "temperatures": KeySpec("float_list", [0.0, 0.05, 0.5]),
        "coupling_min": KeySpec("float", 0.1, positive=True),
        "coupling_max": KeySpec("float", 2.0, positive=True),
        "tolerance": KeySpec("float", 1e-8, positive=True),
    },
}

COMMON_KEYS = {"seed": KeySpec("int", 0)}


def parse_range(text: str) -> list[float]:
    """Inclusive ``start:stop:step`` range, rounded to 12 digits."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"bad range {text!r}; expected 'start:stop:step'") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"bad range {text!r}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(count)]


def _line_of(raw: str, key: str) -> Optional[int]:
    needle = json.dumps(key)
    for i, line in enumerate(raw.splitlines(), 1):
        if needle in line:
            return i
    return None


def _where(raw: str, key: str) -> str:
    line = _line_of(raw, key) if raw else None
    return f"line {line}: " if line else ""


def _coerce(raw: str, key: str, spec: KeySpec, value):
    where = _where(raw, key)
    try:
        if value is None:
            return None
        if spec.kind == "int":
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            out = int(value)
        elif spec.kind == "float":
            if isinstance(value, bool):
                raise TypeError
            out = float(value)
        elif spec.kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            out = value
        else:
            items = parse_range(value) if isinstance(value, str) else list(value)
            if not items:
                raise ConfigError(f"{where}{key!r} must be a non-empty list")
            if spec.kind == "int_list":
                if any(isinstance(v, bool) or float(v) != int(v) for v in items):
                    raise TypeError
                out = [int(v) for v in items]
            else:
                out = [float(v) for v in items]
    except ConfigError:
        raise
    except (TypeError, ValueError):
        raise ConfigError(f"{where}{key!r} should be of type {spec.kind}, got {value!r}") from None
    vals = out if isinstance(out, list) else [out]
    if any(not isinstance(v, bool) and not np.isfinite(v) for v in vals):
        raise ConfigError(f"{where}{key!r} contains non-finite values")
    if spec.positive and any(v <= 0 for v in vals):
        raise ConfigError(f"{where}{key!r} must be positive")
    if key.startswith("temperature") and any(v < 0 for v in vals):
        raise ConfigError(f"{where}{key!r} must be non-negative")
    return out


@dataclass(frozen=True)
class RunConfig:
    kind: str
    params: dict
    seed: int = 0

    def __getitem__(self, key):
        return self.params[key]


def load_config(kind: str, raw: str | dict | None = None) -> RunConfig:
    """Validate a config document against the schema of ``kind``.

    ``raw`` may be JSON text, an already-parsed dict, or ``None`` for defaults.
    Unknown keys are errors.
    """
    if kind not in SCHEMAS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    text = ""
    if raw is None:
        doc = {}
    elif isinstance(raw, dict):
        doc = dict(raw)
    else:
        text = raw
        try:
            doc = json.loads(raw) if raw.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    schema = {**SCHEMAS[kind], **COMMON_KEYS}
    unknown = sorted(set(doc) - set(schema))
    if unknown:
        key = unknown[0]
        raise ConfigError(f"{_where(text, key)}unknown key {key!r} for {kind}")
    params = {}
    for key, spec in schema.items():
        if key in doc:
            params[key] = _coerce(text, key, spec, doc[key])
        elif spec.required:
            raise ConfigError(f"missing required key {key!r}")
        else:
            params[key] = _coerce("", key, spec, spec.default)
    seed = params.pop("seed")
    _check_semantics(kind, params, text)
    return RunConfig(kind, params, seed)


def _check_semantics(kind: str, p: dict, text: str) -> None:
    if kind == "concurrence-scan":
        if len(p["lambdas"]) != len(p["mus"]):
            raise ConfigError(f"{_where(text, 'mus')}'lambdas' and 'mus' must have equal length")
        if any(n < 2 or n % 2 for n in p["n_values"]):
            raise ConfigError(f"{_where(text, 'n_values')}'n_values' must be even and >= 2")
        for lam, mu in zip(p["lambdas"], p["mus"]):
            need = _min_sites(lam, mu)
            if min(p["n_values"]) < need:
                raise ConfigError(
                    f"{_where(text, 'n_values')}(lambda={lam}, mu={mu}) needs N >= {need}")
    if kind == "fidelity-map" and p["n_sites"] < 6:
        raise ConfigError(f"{_where(text, 'n_sites')}'n_sites' must be >= 6")
    if kind in ("fidelity-map", "tc-find"):
        if any(not 0 < v <= 1 for v in p["lambda_grid"]):
            raise ConfigError(f"{_where(text, 'lambda_grid')}'lambda_grid' must lie in (0, 1]")
        if any(not 1 <= v <= 8 for v in p["mu_grid"]):
            raise ConfigError(f"{_where(text, 'mu_grid')}'mu_grid' must lie in [1, 8]")
    if kind == "tc-find":
        if p["t_low"] >= p["t_high"]:
            raise ConfigError(f"{_where(text, 't_low')}'t_low' must be below 't_high'")
        if any(n < 6 for n in p["n_values"]):
            raise ConfigError(f"{_where(text, 'n_values')}'n_values' must be >= 6")
    if kind == "protocol-run":
        if p["n_sites"] < 2:
            raise ConfigError(f"{_where(text, 'n_sites')}'n_sites' must be >= 2")
        if any(not 0 < a < 1 for a in p["alpha_grid"]):
            raise ConfigError(f"{_where(text, 'alpha_grid')}'alpha_grid' must lie in (0, 1)")
    if kind == "oracle-check":
        if not 2 <= p["n_min"] <= p["n_max"]:
            raise ConfigError(f"{_where(text, 'n_min')}need 2 <= n_min <= n_max")
        if p["n_max"] > ed.MAX_SITES:
            raise ed.SizeLimitError(f"n_max={p['n_max']} exceeds the ED limit of {ed.MAX_SITES}")
        if p["coupling_min"] > p["coupling_max"]:
            raise ConfigError(f"{_where(text, 'coupling_min')}coupling_min exceeds coupling_max")


def _metadata(config: RunConfig, **extra) -> dict:
    meta = {
        "experiment": config.kind,
        "parameters": config.params,
        "seed": config.seed,
        "code_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    meta.update(extra)
    return meta


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Free-fermion helpers


def _profile(n: int, lam: float, mu: float):
    if lam == 1.0 and mu == 1.0:
        return make_profile("uniform", n)
    if mu == 1.0:
        return make_profile("lambda", n, lam)
    return make_profile("lambda_mu", n, lam, mu)


def _min_sites(lam: float, mu: float) -> int:
    if lam == 1.0 and mu == 1.0:
        return 2
    return 4 if mu == 1.0 else 6


@lru_cache(maxsize=8192)
def _modes(n: int, lam: float, mu: float):
    return solve(_profile(n, lam, mu))


def end_state(n: int, lam: float, mu: float, T: float):
    """End-to-end two-qubit state of the lambda-mu chain (``mu = 1`` is the lambda model)."""
    return end_to_end_rdm(correlation_matrix(_modes(n, lam, mu), T))


# ---------------------------------------------------------------------------
# Commands


def cmd_concurrence_scan(config: RunConfig, threads: int = 1) -> ResultTable:
    p = config.params
    cells = [
        (n, lam, mu, T)
        for lam, mu in zip(p["lambdas"], p["mus"])
        for T in p["temperatures"]
        for n in p["n_values"]
    ]

    def run(cell):
        n, lam, mu, T = cell
        rho = end_state(n, lam, mu, T)
        return (n, lam, mu, T, concurrence(rho), max_fidelity(rho))

    rows = _pmap(run, cells, threads)
    return ResultTable(
        [("N", "int"), ("lambda", "float"), ("mu", "float"), ("T", "float"),
         ("concurrence", "float"), ("f_max", "float")],
        rows,
        _metadata(config),
    )


def fmax_grid(n: int, lambdas: Sequence[float], mus: Sequence[float], T: float,
              threads: int = 1) -> np.ndarray:
    """``F_max`` on the (lambda, mu) grid, shape ``(len(lambdas), len(mus))``."""
    cells = [(lam, mu) for lam in lambdas for mu in mus]
    vals = _pmap(lambda c: max_fidelity(end_state(n, c[0], c[1], T)), cells, threads)
    return np.array(vals).reshape(len(lambdas), len(mus))


def cmd_fidelity_map(config: RunConfig, threads: int = 1) -> ResultTable:
    p = config.params
    rows = []
    for T in p["temperatures"]:
        grid = fmax_grid(p["n_sites"], p["lambda_grid"], p["mu_grid"], T, threads)
        for i, lam in enumerate(p["lambda_grid"]):
            for j, mu in enumerate(p["mu_grid"]):
                rows.append((lam, mu, T, float(grid[i, j])))
    return ResultTable(
        [("lambda", "float"), ("mu", "float"), ("T", "float"), ("f_max", "float")],
        rows,
        _metadata(config, n_sites=p["n_sites"]),
    )


@dataclass(frozen=True)
class CriticalTemperature:
    n_sites: int
    t_c: float
    t_low: float
    t_high: float
    best_lambda: float
    best_mu: float
    best_f_max: float


def find_tc(n: int, lambdas: Sequence[float], mus: Sequence[float], t_low: float,
            t_high: float, tolerance: float = 0.005, threads: int = 1) -> CriticalTemperature:
    """Bisect for the highest temperature where some grid cell beats ``F_max = 2/3``.

    Assumes the grid maximum decreases with temperature; the bracket is
    checked at both ends.
    """

    def best(T):
        g = fmax_grid(n, lambdas, mus, T, threads)
        i, j = np.unravel_index(np.argmax(g), g.shape)
        return float(g[i, j]), lambdas[i], mus[j]

    lo, hi = t_low, t_high
    f_lo = best(lo)
    if f_lo[0] <= CLASSICAL_THRESHOLD:
        raise ValidationFailure(
            f"bracket failure at N={n}: max F_max={f_lo[0]:.6f} <= 2/3 already at T={lo}")
    f_hi = best(hi)
    if f_hi[0] > CLASSICAL_THRESHOLD:
        raise ValidationFailure(
            f"bracket failure at N={n}: max F_max={f_hi[0]:.6f} > 2/3 still at T={hi}")
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        f_mid = best(mid)
        if f_mid[0] > CLASSICAL_THRESHOLD:
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return CriticalTemperature(n, 0.5 * (lo + hi), lo, hi, f_lo[1], f_lo[2], f_lo[0])


def cmd_tc_find(config: RunConfig, threads: int = 1) -> ResultTable:
    p = config.params
    rows = []
    for n in p["n_values"]:
        tc = find_tc(n, p["lambda_grid"], p["mu_grid"], p["t_low"], p["t_high"],
                     p["tolerance"], threads)
        rows.append((n, tc.t_c, tc.t_low, tc.t_high, tc.best_lambda, tc.best_mu, tc.best_f_max))
    return ResultTable(
        [("N", "int"), ("T_c", "float"), ("T_low", "float"), ("T_high", "float"),
         ("lambda_star", "float"), ("mu_star", "float"), ("f_max_at_T_low", "float")],
        rows,
        _metadata(config),
    )


def cmd_protocol(config: RunConfig, threads: int = 1) -> ResultTable:
    p = config.params
    if p["n_sites"] >= 6:
        channel = make_profile("lambda_mu", p["n_sites"], p["lambda"], p["mu"])
    elif p["n_sites"] >= 4:
        channel = make_profile("lambda", p["n_sites"], p["lambda"])
    else:
        channel = make_profile("uniform", p["n_sites"])

    def run(T):
        cfg = ProtocolConfig(channel, p["nu"], T, p["measurement_time"])
        return T, fidelity_vs_alpha(cfg, p["alpha_grid"], p["phase_average"], p["n_phases"])

    rows = []
    for T, table in _pmap(run, p["temperatures"], threads):
        for row in table:
            rows.append((row.abs_alpha, T, row.fidelity, row.accepted_probability))
    return ResultTable(
        [("alpha", "float"), ("T", "float"), ("fidelity", "float"), ("p_accept", "float")],
        rows,
        _metadata(config, channel_couplings=list(channel.couplings)),
    )


def cmd_validate_cavity(config: RunConfig, threads: int = 1) -> ResultTable:
    p = config.params
    params = CavityParams.at_resonance(p["g"], p["delta"])
    couplings = p["couplings"]
    if couplings is None:
        profile = _profile(p["n_sites"], p["lambda"], p["mu"])
        couplings = list(p["bulk_coupling"] * profile.array)
    rep = validity_check(params, couplings, p["temperature"], p["threshold"])
    rows = [
        ("coupling", rep.max_coupling, rep.eps2minus, rep.coupling_ratio, rep.threshold,
         rep.coupling_ok),
        ("temperature", rep.temperature, rep.eps2minus, rep.temperature_ratio, rep.threshold,
         rep.temperature_ok),
    ]
    return ResultTable(
        [("quantity", "str"), ("value", "float"), ("eps_2minus", "float"), ("ratio", "float"),
         ("threshold", "float"), ("pass", "bool")],
        rows,
        _metadata(config, omega=params.omega, verdict="pass" if rep.passed else "fail",
                  note=rep.symmetric_geometry_note),
    )


def oracle_profiles(n: int, count: int, rng: np.random.Generator, lo: float, hi: float):
    return [make_profile("custom", n, custom_couplings=rng.uniform(lo, hi, n - 1))
            for _ in range(count)]


def oracle_compare(profile, T: float) -> dict:
    """Absolute deviations between the free-fermion and ED end-to-end states."""
    n = profile.n_sites
    ff = end_to_end_rdm(correlation_matrix(solve(profile), T))
    ex = ed.reduce_to_pair(ed.gibbs_state(profile, T), 0, n - 1)
    out = {}
    for i in range(4):
        for j in range(4):
            out[f"rho[{i},{j}]"] = float(abs(ff.rho[i, j] - ex.rho[i, j]))
    out["concurrence"] = abs(concurrence(ff) - concurrence(ex))
    out["f_max"] = abs(max_fidelity(ff) - max_fidelity(ex))
    return out


def cmd_oracle_check(config: RunConfig, threads: int = 1) -> ResultTable:
    """Free-fermion vs ED on seeded random profiles; raises on any breach."""
    p = config.params
    rng = np.random.default_rng(config.seed)
    cases = []
    for n in range(p["n_min"], p["n_max"] + 1):
        for k, prof in enumerate(oracle_profiles(n, p["profiles_per_n"], rng,
                                                 p["coupling_min"], p["coupling_max"])):
            for T in p["temperatures"]:
                cases.append((n, k, T, prof))

    def run(case):
        n, k, T, prof = case
        deltas = oracle_compare(prof, T)
        return n, k, T, deltas

    rows = []
    failures = []
    for n, k, T, deltas in _pmap(run, cases, threads):
        worst = max(deltas, key=deltas.get)
        ok = all(d <= p["tolerance"] for d in deltas.values())
        rows.append((n, k, T, worst, deltas[worst], ok))
        for name, d in deltas.items():
            if d > p["tolerance"]:
                failures.append(f"N={n} profile={k} T={T} {name} delta={d:.3e}")
    table = ResultTable(
        [("N", "int"), ("profile", "int"), ("T", "float"), ("worst_observable", "str"),
         ("max_delta", "float"), ("pass", "bool")],
        rows,
        _metadata(config, n_cases=len(rows), n_failures=len(failures)),
    )
    if failures:
        raise ValidationFailure("oracle mismatch:\n  " + "\n  ".join(failures), table)
    return table


COMMANDS = {
    "concurrence-scan": cmd_concurrence_scan,
    "fidelity-map": cmd_fidelity_map,
    "tc-find": cmd_tc_find,
    "protocol-run": cmd_protocol,
    "validate-cavity": cmd_validate_cavity,
    "oracle-check": cmd_oracle_check,
}
