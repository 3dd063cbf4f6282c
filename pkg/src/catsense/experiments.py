"""
Experiment orchestration behind the ``catsense`` command line.

Each command takes a validated ``RunConfig`` and returns an
``ExperimentResult`` whose records are sorted by the sweep variable. Output
is deterministic given the config: the only run-dependent content is the
timestamp/wall-clock line of the CSV header.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from typing import Any, Callable

import numpy as np
from scipy import stats

from . import metrology as met
from . import noise_mc
from .evolution import lambda_to_t2
from .linalg_core import AdditiveObservable
from .macroscopicity import diagnose, q_fit
from .states import InvalidSectorError, StateKind, StateSpec, sector_indices

COMMANDS = ("qindex", "ghz-curve", "scaling", "thermal-demo", "mc-validate", "ramsey", "optimize")
FAMILY_ALIASES = {"projected_thermal": "mz_projected_thermal", "product": "product_plus"}
GHZ_CURVE_T2 = (1.0, 10.0, 100.0, 1000.0, math.inf)
MC_GRID = (0.001, 0.003, 0.01, 0.03, 0.1, 1.0, 10.0)
ZENO_LIMIT = 0.1
Z_FAIL = 4.0
MAX_DEMO_N = 12


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (exit code 2)."""


@dataclass
class RunConfig:
    command: str
    family: str = "ghz"
    obs: str = "mz"
    ns: list[int] = field(default_factory=lambda: [4, 6, 8, 10, 12])
    b: float = math.atanh(0.6)
    m: int | None = None
    lam: float = 0.0
    tau_c: float = math.inf
    p2: float | None = None
    total_time: float = 1.0
    t_values: list[float] | None = None
    t_points: int = 60
    eta: str = "optimal"
    model: str = "simulate"
    w: float = 1.0
    n_traj: int = 10_000
    seed: int = 0
    out: str | None = None
    format: str = "csv"
    threads: int = 1

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        self.family = FAMILY_ALIASES.get(self.family, self.family)
        try:
            StateKind(self.family)
        except ValueError:
            raise ConfigError(f"unknown family {self.family!r}") from None
        if self.obs.lower().removeprefix("m") not in ("x", "y", "z"):
            raise ConfigError(f"observable must be one of mz, mx, my (got {self.obs!r})")
        if not self.ns or min(self.ns) < 1:
            raise ConfigError("system sizes must be positive")
        if self.lam < 0 or not self.tau_c > 0 or not self.total_time > 0:
            raise ConfigError("lambda must be >= 0, tau_c and T positive")
        if self.p2 is not None and not 0 < self.p2 < 1:
            raise ConfigError("p2 must lie in (0, 1)")
        if self.t_values is not None and min(self.t_values) <= 0:
            raise ConfigError("interaction times must be positive")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.model not in ("simulate", "closed-form"):
            raise ConfigError("model must be simulate or closed-form")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.n_traj < 2:
            raise ConfigError("need at least two trajectories")
        if self.out is not None:
            parent = os.path.dirname(os.path.abspath(self.out))
            if not os.access(parent, os.W_OK):
                raise ConfigError(f"output directory {parent} is not writable")
        return self

    def state_spec(self, n: int) -> StateSpec:
        params: dict[str, Any] = {}
        if self.family in ("thermal_x", "mz_projected_thermal"):
            params["b"] = self.b
        if self.family == "mz_projected_thermal" and self.m is not None:
            params["M"] = self.m
        if self.family == "mixture":
            params["w"] = self.w
        try:
            return StateSpec(StateKind(self.family), n, params)
        except InvalidSectorError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        # JSON has no infinity; keep the header parseable by strict readers
        for key in ("tau_c",):
            if math.isinf(out[key]):
                out[key] = "inf"
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if data.get("tau_c") == "inf":
            data["tau_c"] = math.inf
        return cls(**data)


@dataclass
class ExperimentResult:
    config: dict[str, Any]
    columns: list[str]
    records: list[dict[str, Any]]
    summary: dict[str, Any] = field(default_factory=dict)
    wall_clock: float = 0.0
    passed: bool = True

    def to_csv(self, timestamp: str | None = None) -> str:
        buf = io.StringIO()
        header = {"config": self.config, "summary": self.summary}
        buf.write("# " + json.dumps(header, sort_keys=True, default=_json_default) + "\n")
        stamp = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
        buf.write(f"# generated {stamp} wall_clock_s={self.wall_clock:.3f}\n")
        writer = csv.DictWriter(buf, fieldnames=self.columns, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for rec in self.records:
            writer.writerow({k: _format_cell(rec.get(k)) for k in self.columns})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2, default=_json_default)

    def render(self, fmt: str) -> str:
        return self.to_csv() if fmt == "csv" else self.to_json()


def _json_default(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _clean(value: float | None) -> float | None:
    """JSON-safe float: infinities and NaN become None."""
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def workers_from_env(default: int = 1) -> int:
    raw = os.environ.get("CATSENSE_THREADS")
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"CATSENSE_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError("CATSENSE_THREADS must be >= 1")
    return min(value, os.cpu_count() or 1)


def _obs_label(cfg: RunConfig) -> str:
    return cfg.obs.lower().removeprefix("m")


def _fixed_t(cfg: RunConfig) -> float | None:
    if cfg.t_values is not None and len(cfg.t_values) == 1:
        return cfg.t_values[0]
    return None


def _t_range(cfg: RunConfig, n: int) -> tuple[float, float] | None:
    if cfg.t_values is not None and len(cfg.t_values) >= 2:
        return min(cfg.t_values), max(cfg.t_values)
    return None


# ---------------------------------------------------------------------------
# commands


def cmd_qindex(cfg: RunConfig) -> ExperimentResult:
    records = []
    for n in sorted(cfg.ns):
        spec = cfg.state_spec(n)
        diag = diagnose(spec.density(), AdditiveObservable.pauli(_obs_label(cfg), n), spec)
        records.append(
            {
                "N": n,
                "positive_eigensum": diag.positive_eigensum,
                "cat_value": diag.cat_value,
                "eta_rank": diag.eta_rank,
                "eigensum_over_N2": diag.positive_eigensum / n**2,
            }
        )
    summary: dict[str, Any] = {}
    if len(cfg.ns) >= 3:
        fit = q_fit(cfg.state_spec(min(cfg.ns)), _obs_label(cfg), cfg.ns)
        summary = {"q_slope": fit.slope, "q_stderr": fit.stderr, "r_squared": fit.r_squared}
    columns = ["N", "positive_eigensum", "cat_value", "eta_rank", "eigensum_over_N2"]
    return ExperimentResult(cfg.to_dict(), columns, records, summary)


def cmd_ghz_curve(cfg: RunConfig) -> ExperimentResult:
    """delta omega sqrt(T) of the GHZ closed form against t for several T2."""
    n = cfg.ns[0] if len(cfg.ns) == 1 else 10
    if cfg.t_values is not None and len(cfg.t_values) >= 2:
        grid = np.geomspace(min(cfg.t_values), max(cfg.t_values), max(cfg.t_points, 2))
    else:
        # six decades around every T2 optimum at N = 10
        grid = np.geomspace(1e-3, 1e3, 121)
    records, minima = [], {}
    for t2 in GHZ_CURVE_T2:
        label = "inf" if math.isinf(t2) else f"{t2:g}"
        for t in grid:
            value = met.ghz_closed_form(n, float(t), t2, cfg.total_time) * math.sqrt(cfg.total_time)
            records.append({"T2": label, "t": float(t), "delta_omega_sqrtT": _clean(value)})
        if not math.isinf(t2):
            t_opt, best = met.ghz_optimum(n, t2)
            minima[label] = {"t_opt": t_opt, "min_delta_omega_sqrtT": best}
    columns = ["T2", "t", "delta_omega_sqrtT"]
    return ExperimentResult(cfg.to_dict(), columns, records, {"N": n, "minima": minima})


def _confidence_interval(slope: float, stderr: float, points: int, level: float = 0.95) -> list[float]:
    half = stats.t.ppf(0.5 + level / 2, max(points - 2, 1)) * stderr
    return [slope - half, slope + half]


def cmd_scaling(cfg: RunConfig) -> ExperimentResult:
    ns = sorted(cfg.ns)
    if len(ns) < 4:
        raise ConfigError("scaling needs at least four system sizes")
    fixed = _fixed_t(cfg)
    records = []
    if cfg.model == "closed-form":
        if cfg.family != "ghz":
            raise ConfigError("the closed-form model exists only for the GHZ family")
        fit = met.ghz_closed_form_scaling(ns, lambda_to_t2(cfg.lam), fixed)
        for n, d, t in zip(fit.n_values, fit.delta_values, fit.t_opt or []):
            records.append({"N": n, "t_opt": t, "delta_omega_sqrtT": d, "bound_upper": None, "bound_lower": None})
    else:
        if cfg.lam == 0 and fixed is None:
            raise ConfigError("noiseless scaling needs a fixed interaction time (--t VALUE)")
        fit, reports = met.scaling_study(
            cfg.state_spec(ns[0]),
            _obs_label(cfg),
            cfg.eta,
            cfg.lam,
            ns,
            fixed_t=fixed,
            p2=cfg.p2,
            workers=cfg.threads,
            t_range=_t_range(cfg, ns[0]),
            total_time=cfg.total_time,
            points=cfg.t_points,
        )
        for n, r in zip(ns, reports):
            records.append(
                {
                    "N": n,
                    "t_opt": r.t_opt,
                    "delta_omega_sqrtT": r.delta_omega_sqrtT,
                    "bound_upper": r.bound_upper_delta,
                    "bound_lower": r.bound_lower_dPdw,
                    "omega": r.omega,
                    "interior_minimum": r.interior_minimum,
                }
            )
    summary = {
        "slope": fit.slope,
        "stderr": fit.stderr,
        "ci95": _confidence_interval(fit.slope, fit.stderr, len(ns)),
        "r_squared": fit.r_squared,
    }
    columns = ["N", "t_opt", "delta_omega_sqrtT", "bound_upper", "bound_lower"]
    return ExperimentResult(cfg.to_dict(), columns, records, summary)


# readouts tried per probe in the thermal demo; the best one is kept
DEMO_PROBES: dict[str, tuple[str, str, tuple[str, ...]]] = {
    "projected_thermal": ("mz_projected_thermal", "x", ("optimal", "sector")),
    "thermal": ("thermal_x", "z", ("optimal", "majority:y")),
    "product_plus": ("product_plus", "z", ("optimal", "majority:y")),
}


def thermal_demo_point(n: int, b: float, m: int | None, lam: float, **kwargs) -> dict[str, dict[str, Any]]:
    """Optimized delta omega sqrt(T) for the projected, raw thermal and product probes."""
    if n > MAX_DEMO_N:
        raise ConfigError(f"thermal demo is limited to N <= {MAX_DEMO_N}")
    sector = n % 2 if m is None else m
    if abs(sector) >= n:
        raise ConfigError(f"sector M={sector} holds a single product state; pick |M| < N")
    try:
        sector_indices(n, sector)
    except InvalidSectorError as exc:
        raise ConfigError(str(exc)) from None
    out = {}
    for name, (kind, axis, readouts) in DEMO_PROBES.items():
        params = {"b": b, "M": sector} if kind == "mz_projected_thermal" else {"b": b}
        spec = StateSpec(StateKind(kind), n, params if kind != "product_plus" else {})
        best = None
        for readout in readouts:
            report = met.optimize_size(spec, axis, readout, lam, n, **kwargs)
            if best is None or report.delta_omega_sqrtT < best[1].delta_omega_sqrtT:
                best = (readout, report)
        readout, report = best
        out[name] = {"readout": readout, "t_opt": report.t_opt, "delta_omega_sqrtT": report.delta_omega_sqrtT}
    return out


def cmd_thermal_demo(cfg: RunConfig) -> ExperimentResult:
    if cfg.lam == 0:
        raise ConfigError("thermal demo optimizes t under dephasing; set --lambda or --T2")
    records = []
    for n in sorted(cfg.ns):
        point = thermal_demo_point(n, cfg.b, cfg.m, cfg.lam, total_time=cfg.total_time, points=cfg.t_points)
        cat = point["projected_thermal"]["delta_omega_sqrtT"]
        for name, row in point.items():
            records.append({"N": n, "b": cfg.b, "probe": name, **row, "ratio_to_projected": row["delta_omega_sqrtT"] / cat})
    columns = ["N", "b", "probe", "readout", "t_opt", "delta_omega_sqrtT", "ratio_to_projected"]
    summary = {
        f"N={r['N']}:{r['probe']}": r["ratio_to_projected"] for r in records if r["probe"] != "projected_thermal"
    }
    return ExperimentResult(cfg.to_dict(), columns, records, {"ratios": summary})


def cmd_mc_validate(cfg: RunConfig) -> ExperimentResult:
    """Monte Carlo coherence against the Zeno-regime closed form exp(-2 lam^2 t^2).

    With no --lambda given, each row uses lam = 1 / (2 t) so the closed-form
    coherence is exp(-1/2) at every t.
    """
    tau_c = 1.0 if math.isinf(cfg.tau_c) else cfg.tau_c
    ratios = cfg.t_values or list(MC_GRID)
    records = []
    rows = [(0.0, min(ratios))] + [(None, r) for r in sorted(ratios)]
    for i, (lam_row, ratio) in enumerate(rows):
        t = ratio * tau_c
        lam = lam_row if lam_row is not None else (cfg.lam or 1.0 / (2 * t))
        est = noise_mc.coherence_mc(lam, tau_c, t, n_traj=cfg.n_traj, seed=cfg.seed + i)
        closed = math.exp(-2 * lam**2 * t**2)
        z = est.z_score(closed)
        zeno = ratio <= ZENO_LIMIT
        records.append(
            {
                "t_over_tauc": ratio,
                "lambda": lam,
                "mc_mean": complex(est.mean).real,
                "mc_stderr": est.stderr,
                "closed_form": closed,
                "exact_gaussian": noise_mc.exact_coherence(lam, t, tau_c),
                "z_score": z,
                "zeno_regime": zeno,
                "note": "" if zeno else "outside Zeno regime (informational)",
            }
        )
    failures = [r for r in records if r["zeno_regime"] and abs(r["z_score"]) > Z_FAIL]
    columns = ["t_over_tauc", "lambda", "mc_mean", "mc_stderr", "closed_form", "exact_gaussian", "z_score", "zeno_regime", "note"]
    summary = {"max_abs_z_zeno": max(abs(r["z_score"]) for r in records if r["zeno_regime"]), "failures": len(failures)}
    return ExperimentResult(cfg.to_dict(), columns, records, summary, passed=not failures)


def _single_n(cfg: RunConfig) -> int:
    if len(cfg.ns) != 1:
        raise ConfigError("this command takes a single system size (--N VALUE)")
    return cfg.ns[0]


def cmd_ramsey(cfg: RunConfig) -> ExperimentResult:
    n = _single_n(cfg)
    t = _fixed_t(cfg)
    if t is None:
        raise ConfigError("ramsey needs a single interaction time (--t VALUE)")
    report = met.optimize_size(cfg.state_spec(n), _obs_label(cfg), cfg.eta, cfg.lam, n, fixed_t=t, p2=cfg.p2, total_time=cfg.total_time)
    row = {"N": n, **report.to_dict()}
    return ExperimentResult(cfg.to_dict(), list(row), [row])


def cmd_optimize(cfg: RunConfig) -> ExperimentResult:
    n = _single_n(cfg)
    if cfg.lam == 0:
        raise ConfigError("noiseless objective has no interior minimum; set --lambda or --T2")
    spec = cfg.state_spec(n)
    a = AdditiveObservable.pauli(_obs_label(cfg), n)
    rho = spec.density()
    signal = met.RamseySignal(rho, a, met.readout_projector(rho, a, cfg.eta))
    rule = met.phase_scan_rule(signal, cfg.lam) if cfg.p2 is None else met.fixed_p2_rule(cfg.p2, n)
    t_range = _t_range(cfg, n) or met.default_t_range(cfg.lam, n)
    objective = lambda t: signal.delta_sqrt_t(rule(t), cfg.lam, t)  # noqa: E731
    result = met.minimize_over_log_grid(objective, t_range, cfg.t_points)
    records = [{"t": float(t), "delta_omega_sqrtT": float(v)} for t, v in zip(result.grid, result.values)]
    summary = {"t_opt": result.t_opt, "min_delta_omega_sqrtT": result.value, "interior_minimum": result.interior}
    return ExperimentResult(cfg.to_dict(), ["t", "delta_omega_sqrtT"], records, summary)


HANDLERS: dict[str, Callable[[RunConfig], ExperimentResult]] = {
    "qindex": cmd_qindex,
    "ghz-curve": cmd_ghz_curve,
    "scaling": cmd_scaling,
    "thermal-demo": cmd_thermal_demo,
    "mc-validate": cmd_mc_validate,
    "ramsey": cmd_ramsey,
    "optimize": cmd_optimize,
}


def run(cfg: RunConfig) -> ExperimentResult:
    cfg.validate()
    start = time.perf_counter()
    result = HANDLERS[cfg.command](cfg)
    result.wall_clock = time.perf_counter() - start
    return result


__all__ = [
    "COMMANDS",
    "ConfigError",
    "ExperimentResult",
    "RunConfig",
    "run",
    "thermal_demo_point",
    "workers_from_env",
]
