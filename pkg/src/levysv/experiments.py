"""Experiment orchestration: validated configs, seeded trial execution over a
process pool, reports with self-auditing aggregates, and plot-data CSVs.

Each experiment kind is a triple of pure functions

    prepare(cfg) -> ctx            shared, picklable context (built once)
    task(cfg, ctx, k) -> [rows]    one work unit; randomness from trial_rng(seed, k)
    aggregate(cfg, rows) -> dict   summary computed from the rows alone

so reports do not depend on the number of workers, and reloading a report can
recompute its aggregates from the stored rows.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import functools
import math
import multiprocessing as mp
import os

import numpy as np

from . import __version__
from .ensemble import build_levy, coupling_time, split_b_removal, symmetrize
from .errors import DomainError, NumericalError
from .freeconv import isotropic_residual
from .io import read_json, write_json, write_table
from .limit import density_table, rho_a_zero, rho_a_zero_published, solve_limit, xi
from .params import EnsembleParams
from .rng import trial_rng
from .spectral import decompose, stieltjes
from .stable import entry_tail_prob, sample_entry, tail_envelope
from .stats import (
    CountingConfig,
    delocalization_sup,
    deloc_reference,
    ensemble_block,
    gap_sandwich_report,
    ks_distance,
    ks_two_sample,
    lsv_limit_cdf,
    smallest_singular,
    smoothing_q,
)

__all__ = [
    "KINDS",
    "WORKERS_ENV",
    "FAILURE_LIMIT",
    "ConfigError",
    "RunAborted",
    "ExperimentConfig",
    "ExperimentReport",
    "run",
    "save_report",
    "load_report",
    "emit_plotdata",
    "default_workers",
]

WORKERS_ENV = "LEVYSV_WORKERS"
FAILURE_LIMIT = 0.05


class ConfigError(DomainError):
    """Invalid experiment configuration."""


class RunAborted(NumericalError):
    """Too many trials failed."""


DEFAULTS = {
    "lsv": {"ensemble": "levy", "trials": 100, "gamma": 1.0, "s": None},
    "bottomk": {"k": 3, "trials": 100},
    "deloc": {"ensemble": "levy", "c": 0.05, "delta": 0.15, "trials": 100},
    "locallaw": {"E_min": -0.2, "E_max": 0.2, "points": 20, "eta_exp": 0.4, "tol": 1e-10},
    "isotropic": {"trials": 50, "E": 0.05, "eta_exp": 0.6, "s": None, "c": 0.05},
    "gap": {"ensembles": ["levy", "gaussian"], "r": 1.0, "eps": 0.01, "w": None, "trials": 200, "gamma": 1.0, "C_max": 5.0},
    "density": {"energies": [0.0], "etas": [0.05, 0.025, 0.0125]},
    "tailcheck": {"N_list": [128, 512], "draws": 100000, "x_grid": [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]},
}
KINDS = tuple(DEFAULTS)
ENSEMBLES = ("levy", "gaussian", "interpolant")


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: EnsembleParams
    options: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    out: str = None

    def __post_init__(self):
        if self.kind not in DEFAULTS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {', '.join(KINDS)}")
        unknown = set(self.options) - set(DEFAULTS[self.kind])
        if unknown:
            raise ConfigError(f"unknown options for {self.kind}: {sorted(unknown)}")
        opts = dict(DEFAULTS[self.kind])
        opts.update(self.options)
        object.__setattr__(self, "options", opts)
        if int(self.workers) < 1:
            raise ConfigError("workers must be at least 1")
        if self.params.seed != self.seed:
            object.__setattr__(self, "params", self.params.replace(seed=int(self.seed)))
        _validate_options(self.kind, opts, self.params)

    def to_dict(self):
        """Experiment definition (execution settings such as workers and out are not included)."""
        return {"kind": self.kind, "params": self.params.to_dict(), "options": dict(self.options), "seed": int(self.seed)}

    @classmethod
    def from_dict(cls, d, **overrides):
        d = dict(d)
        d.update({k: v for k, v in overrides.items() if v is not None})
        try:
            params = d.get("params", {})
            if not isinstance(params, EnsembleParams):
                params = EnsembleParams.from_dict(params)
            return cls(d["kind"], params, d.get("options", {}), int(d.get("seed", params.seed)), int(d.get("workers", 1)), d.get("out"))
        except KeyError as exc:
            raise ConfigError(f"missing config field {exc}") from exc
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _positive_int(opts, name):
    v = opts[name]
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ConfigError(f"{name} must be a positive integer, got {v!r}")


def _validate_options(kind, o, params):
    if "trials" in o:
        _positive_int(o, "trials")
    if kind in ("lsv", "deloc") and o["ensemble"] not in ENSEMBLES:
        raise ConfigError(f"unknown ensemble {o['ensemble']!r}")
    if kind == "gap":
        if not o["ensembles"] or any(e not in ENSEMBLES for e in o["ensembles"]):
            raise ConfigError(f"bad ensembles {o['ensembles']!r}")
        CountingConfig(params.N, r=o["r"], eps=o["eps"], w=o["w"])
    if "gamma" in o and not 0 <= o["gamma"] <= 1:
        raise ConfigError("gamma must lie in [0, 1]")
    if kind == "bottomk":
        _positive_int(o, "k")
        if o["k"] > params.N:
            raise ConfigError("k cannot exceed N")
    if kind == "deloc" and not o["c"] > 0:
        raise ConfigError("c must be positive")
    if kind == "locallaw":
        _positive_int(o, "points")
        if not o["E_min"] <= o["E_max"]:
            raise ConfigError("E_min must not exceed E_max")
    if kind == "density" and (len(o["etas"]) < 2 or any(e <= 0 for e in o["etas"])):
        raise ConfigError("need at least two positive etas")
    if kind == "tailcheck":
        _positive_int(o, "draws")
        if any(int(n) != n or n < 1 for n in o["N_list"]):
            raise ConfigError("N_list must hold positive integers")


# -- experiment kinds ------------------------------------------------------

def _coupling(cfg):
    s = cfg.options.get("s")
    return float(s) if s is not None else coupling_time(cfg.params).t


def _lsv_prepare(cfg):
    return {"t": _coupling(cfg) if cfg.options["ensemble"] == "interpolant" else None}


def _lsv_task(cfg, ctx, k):
    o, p = cfg.options, cfg.params
    ens = o["ensemble"]
    s1 = smallest_singular(ensemble_block(p, ens, trial_rng(cfg.seed, k), o["gamma"], ctx["t"]))
    scale = p.N * (1.0 if ens == "gaussian" else xi(p.a))
    return [{"trial": k, "seed": cfg.seed, "raw": s1, "scaled": scale * s1, "ensemble": ens}]


def _ok(rows):
    return [r for r in rows if not r.get("error")]


def _lsv_aggregate(cfg, rows):
    vals = np.array([r["scaled"] for r in _ok(rows)])
    return {
        "ks": ks_distance(vals),
        "n": int(vals.size),
        "mean": float(vals.mean()),
        "quantiles": {str(q): float(np.quantile(vals, q)) for q in (0.1, 0.25, 0.5, 0.75, 0.9)},
    }


def _bottomk_task(cfg, ctx, k):
    p, K = cfg.params, cfg.options["k"]
    rng = trial_rng(cfg.seed, k)
    rows = []
    for ens, fac in (("levy", xi(p.a)), ("gaussian", 1.0)):
        D = ensemble_block(p, ens, rng)
        s = np.linalg.svd(D, compute_uv=False)[::-1]
        rows.append({"trial": k, "seed": cfg.seed, "ensemble": ens, "values": (fac * p.N * s[:K]).tolist()})
    return rows


def _bottomk_aggregate(cfg, rows):
    K = cfg.options["k"]
    lv = np.array([r["values"] for r in _ok(rows) if r["ensemble"] == "levy"])
    gs = np.array([r["values"] for r in _ok(rows) if r["ensemble"] == "gaussian"])
    ks = [ks_two_sample(lv[:, j], gs[:, j]) for j in range(K)]
    return {"ks_componentwise": ks, "ks_max": max(ks), "n": int(lv.shape[0])}


def _deloc_task(cfg, ctx, k):
    o, p = cfg.options, cfg.params
    D = ensemble_block(p, o["ensemble"], trial_rng(cfg.seed, k))
    sup, cnt = delocalization_sup(decompose(symmetrize(D)), o["c"])
    bound = p.N ** (o["delta"] - 0.5)
    return [{
        "trial": k, "seed": cfg.seed, "sup": sup, "count": cnt, "bound": bound,
        "within": None if sup is None else bool(sup <= bound),
        "log_ratio": None if sup is None else sup / deloc_reference(p.N, cnt),
    }]


def _deloc_aggregate(cfg, rows):
    got = [r for r in _ok(rows) if r["sup"] is not None]
    sups = np.array([r["sup"] for r in got])
    return {
        "n": len(got),
        "empty_windows": len(_ok(rows)) - len(got),
        "fraction_within": float(np.mean([r["within"] for r in got])) if got else float("nan"),
        "sup_median": float(np.median(sups)) if got else float("nan"),
        "sup_max": float(sups.max()) if got else float("nan"),
        "bound": cfg.params.N ** (cfg.options["delta"] - 0.5),
        "log_ratio_median": float(np.median([r["log_ratio"] for r in got])) if got else float("nan"),
    }


def _locallaw_prepare(cfg):
    p, o = cfg.params, cfg.options
    H = symmetrize(build_levy(p, trial_rng(cfg.seed, 0)).data)
    X, _ = split_b_removal(H, p)
    s = np.linalg.svd(X.block(), compute_uv=False)
    energies = np.linspace(o["E_min"], o["E_max"], o["points"])
    return {"lambdas": np.concatenate([-s, s]), "energies": energies.tolist(), "eta": p.N ** (-o["eta_exp"])}


def _locallaw_task(cfg, ctx, k):
    E, eta = ctx["energies"][k], ctx["eta"]
    z = complex(E, eta)
    mx = stieltjes(ctx["lambdas"], z)
    ma = solve_limit(cfg.params.a, z, tol=cfg.options["tol"]).m_a
    return [{"index": k, "E": E, "eta": eta, "re_mX": mx.real, "im_mX": mx.imag, "re_ma": ma.real, "im_ma": ma.imag, "abs_diff": abs(mx - ma)}]


def _locallaw_aggregate(cfg, rows):
    d = [r["abs_diff"] for r in _ok(rows)]
    return {"max_residual": float(max(d)), "mean_residual": float(np.mean(d)), "n": len(d)}


def _isotropic_prepare(cfg):
    return {"s": _coupling(cfg)}


def _isotropic_task(cfg, ctx, k):
    p, o = cfg.params, cfg.options
    rng = trial_rng(cfg.seed, k)
    H = symmetrize(build_levy(p, rng).data)
    X, _ = split_b_removal(H, p)
    q = rng.standard_normal(2 * p.N)
    q /= np.linalg.norm(q)
    z = complex(o["E"], p.N ** (-o["eta_exp"]))
    res = isotropic_residual(decompose(X), ctx["s"], z, q, rng, c=o["c"])
    return [{"trial": k, "seed": cfg.seed, "residual": res.residual, "scale": res.scale, "ratio": res.ratio}]


def _isotropic_aggregate(cfg, rows):
    ok = _ok(rows)
    return {
        "median_ratio": float(np.median([r["ratio"] for r in ok])),
        "median_residual": float(np.median([r["residual"] for r in ok])),
        "n": len(ok),
    }


def _gap_prepare(cfg):
    need_t = "interpolant" in cfg.options["ensembles"]
    return {"t": _coupling(cfg) if need_t else None}


def _gap_task(cfg, ctx, k):
    p, o = cfg.params, cfg.options
    base = CountingConfig(p.N, r=o["r"], eps=o["eps"], w=o["w"])
    rng = trial_rng(cfg.seed, k)
    rows = []
    for ens in o["ensembles"]:
        # heavy-tailed spectra are compared on the window shrunk by xi
        w = base.w if ens == "gaussian" else base.w / xi(p.a)
        cc = CountingConfig(p.N, r=base.r, eps=base.eps, w=w)
        s = np.linalg.svd(ensemble_block(p, ens, rng, o["gamma"], ctx["t"]), compute_uv=False)
        rep = gap_sandwich_report(np.concatenate([-s, s]), cc)
        rows.append({
            "trial": k, "seed": cfg.seed, "ensemble": ens, "w": w, "exact": rep.exact, "lower": rep.lower, "upper": rep.upper,
            "needed_C": rep.needed_C, "q_lo": smoothing_q(rep.upper), "q_hi": smoothing_q(rep.lower), "edge": rep.edge,
        })
    return rows


def _gap_aggregate(cfg, rows):
    out = {}
    for ens in cfg.options["ensembles"]:
        rs = [r for r in _ok(rows) if r["ensemble"] == ens]
        n = len(rs)
        p = sum(r["exact"] == 0 for r in rs) / n
        lo = math.fsum(r["q_lo"] for r in rs) / n
        hi = math.fsum(r["q_hi"] for r in rs) / n
        C = np.array([r["needed_C"] for r in rs])
        out[ens] = {
            "w": rs[0]["w"], "n": n, "probability": p, "stderr": math.sqrt(p * (1 - p) / n),
            "bracket_lo": lo, "bracket_hi": hi, "slack": max(0.0, lo - p, p - hi),
            "C_q99": float(np.quantile(C, 0.99)),
            "fraction_within_C_max": float(np.mean(C <= cfg.options["C_max"])),
            "edge_cases": int(sum(r["edge"] for r in rs)),
        }
    if "levy" in out and "gaussian" in out:
        out["levy_minus_gaussian"] = out["levy"]["probability"] - out["gaussian"]["probability"]
    return out


def _density_prepare(cfg):
    return {"energies": [float(e) for e in cfg.options["energies"]]}


def _density_task(cfg, ctx, k):
    rows, _ = density_table(cfg.params.a, [ctx["energies"][k]], cfg.options["etas"])
    return [dict(zip(("a", "E", "eta", "re_m", "im_m", "rho"), r)) for r in rows]


def _density_aggregate(cfg, rows):
    a = cfg.params.a
    ext = {r["E"]: r["rho"] for r in _ok(rows) if r["eta"] == 0.0}
    agg = {"rho_extrapolated": {repr(E): v for E, v in ext.items()}, "rho_a_zero": rho_a_zero(a), "rho_a_zero_published": rho_a_zero_published(a)}
    if 0.0 in ext:
        agg["rho0_abs_error"] = abs(ext[0.0] - rho_a_zero(a))
    return agg


def _tail_prepare(cfg):
    xs = [float(x) for x in cfg.options["x_grid"]]
    exact = {}
    for N in cfg.options["N_list"]:
        p = cfg.params.replace(N=int(N))
        exact[int(N)] = [entry_tail_prob(x * N ** (-1.0 / p.a), p) for x in xs]
    return {"x_grid": xs, "exact": exact}


def _tail_task(cfg, ctx, k):
    N = int(cfg.options["N_list"][k])
    p = cfg.params.replace(N=N)
    d = np.abs(sample_entry(p, cfg.options["draws"], trial_rng(cfg.seed, k)))
    ts = np.array(ctx["x_grid"]) * N ** (-1.0 / p.a)
    _, _, ratios = tail_envelope(d, N, p.a, ts)
    rows = []
    for t, r, pe in zip(ts, ratios, ctx["exact"][N]):
        rows.append({"N": N, "t": float(t), "p_hat": float(r / (N * t**p.a + 1)), "p_exact": pe, "ratio": float(r), "ratio_exact": pe * (N * t**p.a + 1)})
    return rows


def _tail_aggregate(cfg, rows):
    out = {}
    for N in cfg.options["N_list"]:
        rs = [r for r in _ok(rows) if r["N"] == int(N)]
        rat = [r["ratio"] for r in rs]
        out[str(int(N))] = {"C1": min(rat), "C2": max(rat), "max_abs_dev": max(abs(r["p_hat"] - r["p_exact"]) for r in rs)}
    return out


def _n_tasks(cfg, ctx):
    o = cfg.options
    if cfg.kind == "locallaw":
        return len(ctx["energies"])
    if cfg.kind == "density":
        return len(ctx["energies"])
    if cfg.kind == "tailcheck":
        return len(o["N_list"])
    return o["trials"]


_none = lambda cfg: {}
KIND_FUNCS = {
    "lsv": (_lsv_prepare, _lsv_task, _lsv_aggregate),
    "bottomk": (_none, _bottomk_task, _bottomk_aggregate),
    "deloc": (_none, _deloc_task, _deloc_aggregate),
    "locallaw": (_locallaw_prepare, _locallaw_task, _locallaw_aggregate),
    "isotropic": (_isotropic_prepare, _isotropic_task, _isotropic_aggregate),
    "gap": (_gap_prepare, _gap_task, _gap_aggregate),
    "density": (_density_prepare, _density_task, _density_aggregate),
    "tailcheck": (_tail_prepare, _tail_task, _tail_aggregate),
}


def _task(kind, cfg, ctx, k):
    try:
        return KIND_FUNCS[kind][1](cfg, ctx, k)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return [{"task": k, "error": f"{type(exc).__name__}: {exc}"}]


# -- running and reports ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExperimentReport:
    config: dict
    records: list
    aggregates: dict
    failures: int
    tasks: int
    version: str = __version__
    rng: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "config": self.config,
            "records": self.records,
            "aggregates": self.aggregates,
            "failures": self.failures,
            "tasks": self.tasks,
            "version": self.version,
            "rng": self.rng,
        }


def _plain(obj):
    """Convert numpy scalars/arrays so the JSON encoding is canonical."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def run(cfg: ExperimentConfig, workers=None) -> ExperimentReport:
    """Execute ``cfg``; aborts with :class:`RunAborted` if more than 5% of tasks fail."""
    workers = cfg.workers if workers is None else workers
    prepare, _, aggregate = KIND_FUNCS[cfg.kind]
    ctx = prepare(cfg)
    n = _n_tasks(cfg, ctx)
    fn = functools.partial(_task, cfg.kind, cfg, ctx)
    if workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=workers, mp_context=mp.get_context("fork")) as pool:
            chunks = list(pool.map(fn, range(n), chunksize=max(1, n // (4 * workers))))
    else:
        chunks = [fn(k) for k in range(n)]
    records = _plain([r for chunk in chunks for r in chunk])
    failures = sum(1 for chunk in chunks if any(r.get("error") for r in chunk))
    if failures > FAILURE_LIMIT * n:
        raise RunAborted(f"{failures} of {n} tasks failed (limit {FAILURE_LIMIT:.0%})")
    agg = _plain(aggregate(cfg, records))
    rng = {"bit_generator": "Philox", "seed": int(cfg.seed), "streams": "SeedSequence(seed, spawn_key=(task_index,))"}
    return ExperimentReport(_plain(cfg.to_dict()), records, agg, failures, n, __version__, rng)


def save_report(report: ExperimentReport, out_dir):
    """Write ``report.json`` and ``trials.csv`` into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.json")
    write_json(path, report.to_dict())
    rows = [r for r in report.records if not r.get("error")]
    if rows:
        cols = list(rows[0])
        write_table(os.path.join(out_dir, "trials.csv"), cols, ([_cell(r.get(c)) for c in cols] for r in rows))
    return path


def _cell(v):
    return ";".join(repr(float(x)) for x in v) if isinstance(v, list) else ("" if v is None else v)


def load_report(path, audit=True) -> ExperimentReport:
    """Load a report; with ``audit`` the aggregates are recomputed from the rows and compared."""
    d = read_json(path)
    rep = ExperimentReport(d["config"], d["records"], d["aggregates"], d["failures"], d["tasks"], d.get("version", ""), d.get("rng", {}))
    if audit:
        cfg = ExperimentConfig.from_dict(rep.config)
        again = _plain(KIND_FUNCS[cfg.kind][2](cfg, rep.records))
        if not _same(again, rep.aggregates):
            raise NumericalError(f"{path}: stored aggregates do not match the per-trial records")
    return rep


def _same(a, b):
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_same(a[k], b[k]) for k in a)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b


def emit_plotdata(report: ExperimentReport, target):
    """Write plotting CSVs for ``report`` into directory ``target``; returns the paths."""
    os.makedirs(target, exist_ok=True)
    kind = report.config["kind"]
    rows = [r for r in report.records if not r.get("error")]
    paths = []

    def out(name, cols, data):
        p = os.path.join(target, name)
        try:
            write_table(p, cols, data)
        except OSError as exc:
            raise OSError(f"cannot write {p}: {exc}") from exc
        paths.append(p)

    if kind == "lsv":
        x = np.sort([r["scaled"] for r in rows])
        F = np.arange(1, x.size + 1) / x.size
        out("lsv_empirical.csv", ["r", "F_emp"], zip(x.tolist(), F.tolist()))
        grid = np.linspace(0.0, max(4.0, float(x.max())), 201)
        out("lsv_limit.csv", ["r", "F_limit"], zip(grid.tolist(), lsv_limit_cdf(grid).tolist()))
    elif kind == "gap":
        agg = report.aggregates
        out("gap.csv", ["ensemble", "w", "p_emp", "p_bracket_lo", "p_bracket_hi"],
            [(e, agg[e]["w"], agg[e]["probability"], agg[e]["bracket_lo"], agg[e]["bracket_hi"]) for e in report.config["options"]["ensembles"]])
    elif kind == "density":
        out("density.csv", ["E", "rho"], [(r["E"], r["rho"]) for r in rows if r["eta"] == 0.0])
    elif kind == "locallaw":
        out("locallaw_residuals.csv", ["E", "eta", "abs_diff"], [(r["E"], r["eta"], r["abs_diff"]) for r in rows])
    else:
        cols = list(rows[0]) if rows else []
        out(f"{kind}_records.csv", cols, ([_cell(r.get(c)) for c in cols] for r in rows))
    return paths
