"""Command line harness: ``matern4d {tn, whittle, validate}``.

Exit codes: 0 success, 2 configuration error, 3 validation failure,
4 internal numerical assertion.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import validation as val
from .model import MaternParams, ModelPair
from .score import ScoreSetup, mc_experiment, shell_indices
from .simulator import SimConfig
from .taper import CONV_MODES, FreqLattice, TaperSpec
from .whittle import EmbeddingError, WhittleConfig, default_alpha_grid, simulate_and_fit

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_INTERNAL = 4

EXPERIMENTS = ("tn", "whittle", "validate")

# Every recognised field with its default; None means "absent unless given".
DEFAULTS = {
    "lattice": {"M": 20, "q": 2},
    "taper": {"R": 2.0, "Q": 400},
    "models": {"m": None, "sigma1": None, "sigma2": None, "alpha1": 1.0, "alpha2": 2.0, "nu": 1.5},
    "shell": {"K0": 3, "K1": 9},
    "mc": {"reps": 200},
    "conv": {"mode": "padded_linear"},
    "whittle": {
        "n_obs": 8,
        "alpha_true": 3.0,
        "m_true": 1.0,
        "alpha_min": 0.5,
        "alpha_max": 6.0,
        "alpha_step": 0.05,
        "reps": 100,
    },
    "validate": {
        "oracle_M": 6,
        "oracle_n_obs": 4,
        "growth_N": [16, 32, 64, 128],
        "sweep_K1": [5, 7, 9],
        "diag_reps": 500,
        "mean_reps": 2000,
        "wick_M": 8,
        "wick_reps": 5000,
        "decay_k": [3, 0, 0, 0],
        "decay_near": 1,
        "decay_far": 4,
    },
}

_INT_FIELDS = {
    "M", "q", "Q", "K0", "K1", "reps", "n_obs", "oracle_M", "oracle_n_obs",
    "diag_reps", "mean_reps", "wick_M", "wick_reps", "decay_near", "decay_far",
}
_INT_LIST_FIELDS = {"growth_N", "sweep_K1", "decay_k"}
_STR_FIELDS = {"mode"}


class ConfigError(ValueError):
    """A configuration field is mistyped or out of range."""


@dataclass
class RunConfig:
    """Fully resolved run configuration (all defaults filled in)."""

    experiment: str
    seed: int
    sections: dict

    def get(self, section: str, key: str):
        return self.sections[section][key]

    def to_dict(self) -> dict:
        out = {"experiment": self.experiment, "seed": self.seed}
        for name, body in self.sections.items():
            out[name] = {k: v for k, v in body.items() if v is not None}
        return out

    # builders ---------------------------------------------------------

    def model_pair(self) -> ModelPair:
        mdl = self.sections["models"]
        nu = mdl["nu"]
        try:
            if mdl["sigma1"] is not None or mdl["sigma2"] is not None:
                return ModelPair(
                    MaternParams(mdl["sigma1"], mdl["alpha1"], nu),
                    MaternParams(mdl["sigma2"], mdl["alpha2"], nu),
                )
            return ModelPair.matched(mdl["m"], mdl["alpha1"], mdl["alpha2"], nu)
        except ValueError as exc:
            raise ConfigError(f"models: {exc}") from exc

    def sim_config(self, M: int | None = None) -> SimConfig:
        lat = self.sections["lattice"]
        tap = self.sections["taper"]
        try:
            return SimConfig(
                lattice=FreqLattice(M if M is not None else lat["M"], lat["q"]),
                taper=TaperSpec(tap["R"], tap["Q"]),
                pair=self.model_pair(),
                conv_mode=self.sections["conv"]["mode"],
                master_seed=self.seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def whittle_config(self) -> WhittleConfig:
        w = self.sections["whittle"]
        grid = default_alpha_grid(w["alpha_min"], w["alpha_max"], w["alpha_step"])
        try:
            return WhittleConfig(self.sections["models"]["nu"], grid, w["reps"], self.seed)
        except ValueError as exc:
            raise ConfigError(f"whittle: {exc}") from exc


def _check_type(section: str, key: str, value):
    where = f"{section}.{key}"
    if key in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
    elif key in _INT_LIST_FIELDS:
        if not isinstance(value, list) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{where} must be a list of integers, got {value!r}")
    elif key in _STR_FIELDS:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}")
    else:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{where} must be finite, got {value!r}")
    return value


def _validate_ranges(cfg: RunConfig):
    s = cfg.sections
    positive = [
        ("lattice", "M"), ("lattice", "q"), ("taper", "R"), ("taper", "Q"), ("models", "alpha1"),
        ("models", "alpha2"), ("models", "nu"), ("mc", "reps"), ("whittle", "n_obs"),
        ("whittle", "reps"), ("whittle", "alpha_true"), ("whittle", "m_true"),
        ("whittle", "alpha_min"), ("whittle", "alpha_step"),
    ]
    for sec, key in positive:
        if not s[sec][key] > 0:
            raise ConfigError(f"{sec}.{key} must be positive, got {s[sec][key]!r}")
    if s["taper"]["Q"] % 2:
        raise ConfigError(f"taper.Q must be even, got {s['taper']['Q']!r}")
    if s["shell"]["K0"] < 0 or s["shell"]["K1"] < s["shell"]["K0"]:
        raise ConfigError(f"shell: need 0 <= K0 <= K1, got K0={s['shell']['K0']}, K1={s['shell']['K1']}")
    if s["whittle"]["alpha_max"] < s["whittle"]["alpha_min"]:
        raise ConfigError("whittle.alpha_max must be >= whittle.alpha_min")
    if s["conv"]["mode"] not in CONV_MODES:
        raise ConfigError(f"conv.mode must be one of {CONV_MODES}, got {s['conv']['mode']!r}")
    mdl = s["models"]
    explicit = (mdl["sigma1"] is not None, mdl["sigma2"] is not None)
    if any(explicit):
        if not all(explicit):
            raise ConfigError("models: give both sigma1 and sigma2, or neither (matched mode)")
        if mdl["m"] is not None:
            raise ConfigError("models.m conflicts with explicit sigma1/sigma2")
    elif mdl["m"] is None:
        mdl["m"] = 1.0
    if len(s["validate"]["decay_k"]) != 4:
        raise ConfigError("validate.decay_k must have 4 entries")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {cfg.seed!r}")


def parse_config(raw: dict, experiment: str | None = None) -> RunConfig:
    """Resolve a parsed TOML mapping against :data:`DEFAULTS`."""
    raw = dict(raw)
    kind = raw.pop("experiment", experiment)
    if experiment is not None and kind != experiment:
        raise ConfigError(f"experiment: config is for {kind!r} but subcommand is {experiment!r}")
    if kind not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {kind!r}")
    seed = raw.pop("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    sections = copy.deepcopy(DEFAULTS)
    for name, body in raw.items():
        if name not in sections:
            raise ConfigError(f"unknown section or key {name!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"[{name}] must be a table")
        for key, value in body.items():
            if key not in sections[name]:
                raise ConfigError(f"unknown field {name}.{key}")
            sections[name][key] = _check_type(name, key, value)
    cfg = RunConfig(kind, seed, sections)
    _validate_ranges(cfg)
    return cfg


def bundled_configs() -> list:
    return sorted(p.name for p in resources.files("matern4d").joinpath("configs").iterdir()
                  if p.name.endswith(".toml"))


def load_config(ref: str | None, experiment: str) -> RunConfig:
    """Read ``ref`` as a file path, else as a bundled config name (with or without suffix)."""
    if ref is None:
        return parse_config({}, experiment)
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    else:
        stem = path.name.split(".")[0]
        target = resources.files("matern4d").joinpath("configs", stem + ".toml")
        if not target.is_file():
            raise ConfigError(f"config {ref!r} is neither a file nor one of {bundled_configs()}")
        text = target.read_text()
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {ref!r} is not valid TOML: {exc}") from exc
    return parse_config(raw, experiment)


# serialisation --------------------------------------------------------


def fmt_float(x: float) -> str:
    return "%.17g" % x


def _json_encode(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_json_encode(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _json_encode(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return fmt_float(x) if math.isfinite(x) else json.dumps(str(x))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def write_json(path: Path, obj) -> Path:
    path.write_text(_json_encode(obj) + "\n")
    return path


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_config_echo(out: Path, cfg: RunConfig) -> Path:
    path = out / "resolved_config.toml"
    path.write_bytes(tomli_w.dumps(cfg.to_dict()).encode())
    return path


def resolve_threads(threads: int) -> int:
    if threads == 0:
        return os.cpu_count() or 1
    return max(1, threads)


# experiments ----------------------------------------------------------


def histogram_rows(values_by_model: dict, bins: int = 30):
    allv = np.concatenate([np.asarray(v) for v in values_by_model.values()])
    lo, hi = float(allv.min()), float(allv.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    counts = {m: np.histogram(v, bins=edges)[0] for m, v in values_by_model.items()}
    return [
        (float(edges[i]), float(edges[i + 1]), *(int(counts[m][i]) for m in sorted(counts)))
        for i in range(bins)
    ]


def run_tn_experiment(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    """Score replicates under both models and write the result files."""
    out.mkdir(parents=True, exist_ok=True)
    sim_cfg = cfg.sim_config()
    try:
        shell = shell_indices(cfg.get("shell", "K0"), cfg.get("shell", "K1"), sim_cfg.lattice)
    except ValueError as exc:
        raise ConfigError(f"shell: {exc}") from exc
    timings = {}
    t0 = time.perf_counter()
    setup = ScoreSetup(sim_cfg, shell)
    timings["setup_seconds"] = time.perf_counter() - t0
    reps = cfg.get("mc", "reps")
    results = {}
    for tag in (1, 2):
        t0 = time.perf_counter()
        results[tag] = mc_experiment(sim_cfg, shell, reps, tag, resolve_threads(threads), setup)
        timings[f"model{tag}_seconds"] = time.perf_counter() - t0

    files = {
        "replicates": write_csv(
            out / "tn_replicates.csv",
            ("model", "replicate", "T"),
            [(tag, i, t) for tag in (1, 2) for i, t in enumerate(results[tag].per_rep_T)],
        ),
        "histogram": write_csv(
            out / "tn_histogram.csv",
            ("bin_lo", "bin_hi", "count_model1", "count_model2"),
            histogram_rows({tag: results[tag].per_rep_T for tag in (1, 2)}),
        ),
        "config": write_config_echo(out, cfg),
    }
    report = {
        "config": cfg.to_dict(),
        "models": {
            str(tag): {"mean_T": r.mean_T, "var_T": r.var_T, "reps": r.reps}
            for tag, r in results.items()
        },
        "L": float(np.sum(setup.deltas**2)),
        "n_terms": len(shell),
        "timings": timings,
    }
    files["summary"] = out / "tn_summary.json"
    report["artifacts"] = {k: str(v) for k, v in files.items()}
    write_json(files["summary"], report)
    return report


def _quartiles(values) -> dict:
    q25, q50, q75 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
    return {"median": float(q50), "q25": float(q25), "q75": float(q75), "iqr": float(q75 - q25)}


def run_whittle(cfg: RunConfig, out: Path, threads: int = 1) -> dict:
    """Simulate and fit Whittle replicates and write the result files."""
    out.mkdir(parents=True, exist_ok=True)
    w = cfg.sections["whittle"]
    wcfg = cfg.whittle_config()
    t0 = time.perf_counter()

    def one(i):
        return simulate_and_fit(w["n_obs"], w["alpha_true"], w["m_true"], wcfg, i)

    n_threads = resolve_threads(threads)
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            fits = list(pool.map(one, range(wcfg.reps)))
    else:
        fits = [one(i) for i in range(wcfg.reps)]
    elapsed = time.perf_counter() - t0

    files = {
        "replicates": write_csv(
            out / "whittle_replicates.csv",
            ("replicate", "alpha_hat", "m_hat"),
            [(i, f.alpha_hat, f.m_hat) for i, f in enumerate(fits)],
        ),
        "profile": write_csv(
            out / "whittle_profile.csv", ("alpha", "objective", "m_hat"), fits[0].objective_curve
        ),
        "config": write_config_echo(out, cfg),
        "summary": out / "whittle_summary.json",
    }
    report = {
        "config": cfg.to_dict(),
        "reps": len(fits),
        "alpha_hat": _quartiles([f.alpha_hat for f in fits]),
        "m_hat": _quartiles([f.m_hat for f in fits]),
        "grid_size": len(wcfg.alpha_grid),
        "timings": {"fit_seconds": elapsed},
        "artifacts": {k: str(v) for k, v in files.items()},
    }
    write_json(files["summary"], report)
    return report


def run_validation(cfg: RunConfig, out: Path, threads: int = 1, corrupt_kernel: bool = False) -> dict:
    """Run every oracle and asymptotics suite; write validation.json and one CSV per table."""
    out.mkdir(parents=True, exist_ok=True)
    v = cfg.sections["validate"]
    K0, K1 = cfg.get("shell", "K0"), cfg.get("shell", "K1")
    sim_cfg = cfg.sim_config()
    models = cfg.sections["models"]
    if sim_cfg.pair.model1.alpha == sim_cfg.pair.model2.alpha:
        raise ConfigError("models: alpha1 == alpha2 leaves nothing to validate")
    try:
        shell = shell_indices(K0, K1, sim_cfg.lattice)
    except ValueError as exc:
        raise ConfigError(f"shell: {exc}") from exc

    suites = [
        ("fft_oracles", lambda: val.check_fft_oracles(v["oracle_M"], v["oracle_n_obs"], cfg.seed)),
        ("hermitian_symmetry", lambda: val.check_hermitian(sim_cfg, corrupt_kernel)),
        ("diagonal_asymptotics", lambda: val.check_diagonal_asymptotics(ScoreSetup(sim_cfg, shell))),
        ("log_growth", lambda: val.check_log_growth(
            K0, v["growth_N"], models["alpha1"], models["alpha2"], models["nu"])),
        ("offdiag_decay", lambda: val.check_offdiag_decay(
            sim_cfg, tuple(v["decay_k"]), v["decay_near"], v["decay_far"])),
        ("wick_identity", lambda: val.check_wick(cfg.sim_config(M=v["wick_M"]), v["wick_reps"])),
        ("mean_identities", lambda: val.check_mean_identities(sim_cfg, K0, K1, v["mean_reps"])),
        ("variance_bound", lambda: val.check_variance_bound(sim_cfg, K0, v["sweep_K1"], v["diag_reps"])),
        ("llr_remainder", lambda: val.check_llr_remainder(sim_cfg, K0, v["sweep_K1"], v["diag_reps"])),
    ]
    results = {}
    files = {"config": write_config_echo(out, cfg)}
    for name, run in suites:
        t0 = time.perf_counter()
        try:
            check = run()
        except ValueError as exc:
            raise ConfigError(f"validate.{name}: {exc}") from exc
        entry = {
            "passed": bool(check.passed),
            "measured": check.measured,
            "threshold": check.threshold,
            "seconds": time.perf_counter() - t0,
        }
        if check.table:
            path = write_csv(out / f"validate_{name}.csv", check.table_header, check.table)
            entry["table"] = str(path)
            files[name] = path
        results[name] = entry
    failed = [name for name, entry in results.items() if not entry["passed"]]
    report = {
        "config": cfg.to_dict(),
        "all_passed": not failed,
        "failed": failed,
        "suites": results,
        "artifacts": {k: str(p) for k, p in files.items()},
    }
    write_json(out / "validation.json", report)
    return report


# entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matern4d", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("tn", "Monte Carlo distribution of T under both models"),
        ("whittle", "Monte Carlo distribution of the Whittle estimator"),
        ("validate", "oracle and asymptotics suites"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="TOML path or bundled name, e.g. experiment1")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", default=f"results_{name}", help="output directory")
        p.add_argument("--threads", type=int, default=0, help="worker threads, 0 = auto")
        if name != "validate":
            p.add_argument("--reps", type=int, help="replicate count (overrides the config)")
        else:
            p.add_argument("--corrupt-kernel", action="store_true", help=argparse.SUPPRESS)
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
        cfg.seed = args.seed
    reps = getattr(args, "reps", None)
    if reps is not None:
        if reps < 1:
            raise ConfigError(f"--reps must be >= 1, got {reps}")
        cfg.sections["mc" if args.command == "tn" else "whittle"]["reps"] = reps
    if args.threads < 0:
        raise ConfigError(f"--threads must be >= 0, got {args.threads}")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = _apply_overrides(load_config(args.config, args.command), args)
        if args.command == "tn":
            report = run_tn_experiment(cfg, out, args.threads)
            for tag, r in report["models"].items():
                print(f"model {tag}: mean_T={r['mean_T']:.4f} var_T={r['var_T']:.4f} reps={r['reps']}")
        elif args.command == "whittle":
            report = run_whittle(cfg, out, args.threads)
            a, m = report["alpha_hat"], report["m_hat"]
            print(f"alpha_hat median={a['median']:.4f} IQR=[{a['q25']:.4f}, {a['q75']:.4f}]")
            print(f"m_hat median={m['median']:.4f} IQR=[{m['q25']:.4f}, {m['q75']:.4f}]")
        else:
            report = run_validation(cfg, out, args.threads, args.corrupt_kernel)
            for name, entry in report["suites"].items():
                print(f"{'PASS' if entry['passed'] else 'FAIL'} {name}")
            if report["failed"]:
                print("failed checks: " + ", ".join(report["failed"]), file=sys.stderr)
                return EXIT_VALIDATION
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, FloatingPointError, EmbeddingError) as exc:
        print(f"internal assertion failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    print(f"results written to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
