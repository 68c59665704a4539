"""Command line interface for the single-feature circuit toolkit.

Subcommands
-----------
check-identity  verify the analytic fidelity-gap identity on random draws
learn           run learning batches and report the quantum speed-up
decohere        quantum learning speed across a dephasing-rate grid
sweep           (W, C_r) hyperparameter grids per machine setting
nbit            train and assemble a multi-bit circuit bank

Every subcommand accepts ``--config PATH --seed U64 --out DIR --workers N
--trials N``.  The same settings may come from a JSON config file or from
environment variables with the ``USFC_`` prefix (``USFC_CONFIG``,
``USFC_SEED``, ``USFC_OUT``, ``USFC_WORKERS``, ``USFC_TRIALS``).
Precedence: command line flag, then environment variable, then config file,
then built-in default.

Data artifacts (record JSONL files, CSV tables) are byte-identical across
reruns of the same effective configuration; the wall-clock timestamp appears
only in ``summary.json`` under the ``generated_at`` key.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .experiments import (
    batch_label,
    decoherence_sweep,
    labeled_batch,
    learning_probability,
    parameter_sweep,
    speedup_with_ci,
    task_tag,
    write_curve_csv,
    write_records_jsonl,
    write_summary_json,
    write_sweep_csv,
)
from .fidelity import (
    CanonicalTask,
    TaskSpec,
    analytic_advantage,
    canonical_task,
    fidelity_gap,
    fidelity_gap_batch,
)
from .learner import DEConfig
from .model import Machine, PhaseConfig, PreferenceVector, canonical_delta
from .nbit import NBitTrainingSet, evaluate_circuit, train_all
from .optics import DephasingMode, ShotPlan
from .rng import batch_seed, derive_rng
from .tuning import TUNED_CR, TUNED_W

__all__ = ["ConfigError", "ExperimentConfig", "build_parser", "main"]

ENV_PREFIX = "USFC_"

_U64_MAX = 2**64 - 1


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _fail(field_name: str, message: str) -> None:
    raise ConfigError(f"{field_name}: {message}")


def _as_int(value: Any, field_name: str, minimum: int | None = None,
            maximum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(field_name, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(field_name, f"must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        _fail(field_name, f"must be <= {maximum}, got {value}")
    return value


def _as_float(value: Any, field_name: str, minimum: float | None = None,
              maximum: float | None = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(field_name, f"expected a number, got {value!r}")
    out = float(value)
    if not math.isfinite(out):
        _fail(field_name, f"must be finite, got {value!r}")
    if minimum is not None and out < minimum:
        _fail(field_name, f"must be >= {minimum}, got {value}")
    if maximum is not None and out > maximum:
        _fail(field_name, f"must be <= {maximum}, got {value}")
    return out


def _as_bool(value: Any, field_name: str) -> bool:
    if not isinstance(value, bool):
        _fail(field_name, f"expected true or false, got {value!r}")
    return value


def _as_str(value: Any, field_name: str) -> str:
    if not isinstance(value, str):
        _fail(field_name, f"expected a string, got {value!r}")
    return value


def _as_section(value: Any, field_name: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        _fail(field_name, f"expected an object, got {value!r}")
    return dict(value)


def _reject_unknown(raw: Mapping[str, Any], known: Sequence[str],
                    prefix: str = "") -> None:
    for key in raw:
        if key not in known:
            _fail(f"{prefix}{key}", "unknown key")


# -- machine settings ------------------------------------------------------

_NAMED_SETTINGS: dict[str, tuple[Machine, Callable[[], PhaseConfig]]] = {
    "classical": (Machine.CLASSICAL, PhaseConfig.zero),
    "delta0": (Machine.QUANTUM, PhaseConfig.zero),
    "half-pi": (Machine.QUANTUM, PhaseConfig.half_pi),
    "ti": (Machine.QUANTUM, PhaseConfig.target_independent),
}


def resolve_setting(entry: Any, field_name: str) -> tuple[str, Machine, PhaseConfig]:
    """Map a settings entry to (name, machine, phases).

    Accepts the named settings ``classical`` / ``delta0`` / ``half-pi`` /
    ``ti`` or a bare number interpreted as a fixed quantum phase difference.
    """
    if isinstance(entry, str):
        named = _NAMED_SETTINGS.get(entry)
        if named is None:
            _fail(field_name,
                  f"unknown setting {entry!r}; expected one of "
                  f"{sorted(_NAMED_SETTINGS)} or a number")
        machine, phase_factory = named
        return entry, machine, phase_factory()
    if isinstance(entry, (int, float)) and not isinstance(entry, bool):
        delta = _as_float(entry, field_name)
        return (f"delta-{delta:.12g}", Machine.QUANTUM,
                PhaseConfig.from_delta(delta))
    _fail(field_name, f"expected a setting name or a number, got {entry!r}")
    raise AssertionError("unreachable")


def _canon_settings(value: Any, field_name: str) -> list:
    if not isinstance(value, Sequence) or isinstance(value, (str, bytes)):
        _fail(field_name, f"expected a list of settings, got {value!r}")
    if not value:
        _fail(field_name, "must not be empty")
    entries = list(value)
    names = []
    for k, entry in enumerate(entries):
        name, _, _ = resolve_setting(entry, f"{field_name}[{k}]")
        names.append(name)
    if len(set(names)) != len(names):
        _fail(field_name, f"duplicate setting names in {names}")
    return entries


# -- named target functions for nbit ---------------------------------------

_NAMED_FUNCTIONS: dict[str, Callable[[str], int]] = {
    "and": lambda x: int(all(c == "1" for c in x)),
    "or": lambda x: int(any(c == "1" for c in x)),
    "xor": lambda x: x.count("1") % 2,
    "nand": lambda x: 1 - int(all(c == "1" for c in x)),
    "nor": lambda x: 1 - int(any(c == "1" for c in x)),
    "xnor": lambda x: 1 - x.count("1") % 2,
}


# -- section canonicalizers -------------------------------------------------

def _canon_de(raw: Mapping[str, Any]) -> dict:
    out = {
        "m": 10,
        "w": TUNED_W,
        "cr": TUNED_CR,
        "epsilon_t": 0.01,
        "max_iterations": 100,
        "gamma": 0.0,
        "reevaluate_incumbent": True,
    }
    _reject_unknown(raw, list(out), "de.")
    if "m" in raw:
        out["m"] = _as_int(raw["m"], "de.m", minimum=3)
    if "w" in raw:
        out["w"] = _as_float(raw["w"], "de.w")
    if "cr" in raw:
        out["cr"] = _as_float(raw["cr"], "de.cr", minimum=0.0, maximum=1.0)
    if "epsilon_t" in raw:
        eps = _as_float(raw["epsilon_t"], "de.epsilon_t")
        if not 0.0 < eps < 1.0:
            _fail("de.epsilon_t", f"must lie in (0, 1), got {eps}")
        out["epsilon_t"] = eps
    if "max_iterations" in raw:
        out["max_iterations"] = _as_int(raw["max_iterations"],
                                        "de.max_iterations", minimum=1)
    if "gamma" in raw:
        out["gamma"] = _as_float(raw["gamma"], "de.gamma",
                                 minimum=0.0, maximum=1.0)
    if "reevaluate_incumbent" in raw:
        out["reevaluate_incumbent"] = _as_bool(raw["reevaluate_incumbent"],
                                               "de.reevaluate_incumbent")
    return out


def _canon_shots(raw: Mapping[str, Any]) -> dict:
    out = {"enabled": False, "l_total": 100_000, "mode": "density-damping"}
    _reject_unknown(raw, list(out), "shots.")
    if "enabled" in raw:
        out["enabled"] = _as_bool(raw["enabled"], "shots.enabled")
    if "l_total" in raw:
        out["l_total"] = _as_int(raw["l_total"], "shots.l_total", minimum=1)
    if "mode" in raw:
        mode = _as_str(raw["mode"], "shots.mode")
        values = [m.value for m in DephasingMode]
        if mode not in values:
            _fail("shots.mode", f"expected one of {values}, got {mode!r}")
        out["mode"] = mode
    return out


def _canon_task(value: Any) -> Any:
    if isinstance(value, str):
        if value not in CanonicalTask._value2member_map_:
            _fail("task", f"unknown canonical task {value!r}; expected one of "
                          f"{[t.value for t in CanonicalTask]} or a table")
        return value
    if isinstance(value, Mapping):
        try:
            spec = TaskSpec.from_json(json.dumps(dict(value)))
        except (ValueError, TypeError, KeyError) as err:
            _fail("task", str(err))
        return json.loads(spec.to_json())
    _fail("task", f"expected a task name or table object, got {value!r}")
    raise AssertionError("unreachable")


def _canon_learn(raw: Mapping[str, Any]) -> dict:
    out: dict = {"settings": list(_DEFAULT_LEARN_SETTINGS)}
    _reject_unknown(raw, list(out), "learn.")
    if "settings" in raw:
        out["settings"] = _canon_settings(raw["settings"], "learn.settings")
    return out


def _canon_decohere(raw: Mapping[str, Any]) -> dict:
    out: dict = {"gammas": [0.0, 0.25, 0.5, 0.75, 1.0]}
    _reject_unknown(raw, list(out), "decohere.")
    if "gammas" in raw:
        value = raw["gammas"]
        if not isinstance(value, Sequence) or isinstance(value, (str, bytes)):
            _fail("decohere.gammas", f"expected a list of rates, got {value!r}")
        if not value:
            _fail("decohere.gammas", "must not be empty")
        gammas = [_as_float(g, f"decohere.gammas[{k}]", minimum=0.0, maximum=1.0)
                  for k, g in enumerate(value)]
        if len(set(gammas)) != len(gammas):
            _fail("decohere.gammas", f"duplicate rates in {gammas}")
        out["gammas"] = gammas
    return out


def _canon_grid(value: Any, field_name: str,
                maximum: float | None) -> list[float] | None:
    if value is None:
        return None
    if not isinstance(value, Sequence) or isinstance(value, (str, bytes)):
        _fail(field_name, f"expected a list of numbers, got {value!r}")
    if not value:
        _fail(field_name, "must not be empty")
    return [_as_float(v, f"{field_name}[{k}]", minimum=0.0, maximum=maximum)
            for k, v in enumerate(value)]


def _canon_sweep(raw: Mapping[str, Any]) -> dict:
    out: dict = {
        "settings": list(_DEFAULT_SWEEP_SETTINGS),
        "trials_per_cell": 100,
        "fail_threshold": 0,
        "w_grid": None,
        "cr_grid": None,
    }
    _reject_unknown(raw, list(out), "sweep.")
    if "settings" in raw:
        out["settings"] = _canon_settings(raw["settings"], "sweep.settings")
    if "trials_per_cell" in raw:
        out["trials_per_cell"] = _as_int(raw["trials_per_cell"],
                                         "sweep.trials_per_cell", minimum=1)
    if "fail_threshold" in raw:
        out["fail_threshold"] = _as_int(raw["fail_threshold"],
                                        "sweep.fail_threshold", minimum=0)
    if "w_grid" in raw:
        out["w_grid"] = _canon_grid(raw["w_grid"], "sweep.w_grid", maximum=None)
    if "cr_grid" in raw:
        out["cr_grid"] = _canon_grid(raw["cr_grid"], "sweep.cr_grid",
                                     maximum=1.0)
    return out


def _canon_nbit(raw: Mapping[str, Any]) -> dict:
    out: dict = {
        "n_bits": 2,
        "machine": "classical",
        "delta": 0.0,
        "epsilon_t": 0.005,
        "function": None,
        "targets": None,
    }
    _reject_unknown(raw, list(out), "nbit.")
    if "n_bits" in raw:
        out["n_bits"] = _as_int(raw["n_bits"], "nbit.n_bits", minimum=1)
    if "machine" in raw:
        machine = _as_str(raw["machine"], "nbit.machine")
        values = [m.value for m in Machine]
        if machine not in values:
            _fail("nbit.machine", f"expected one of {values}, got {machine!r}")
        out["machine"] = machine
    if "delta" in raw:
        out["delta"] = _as_float(raw["delta"], "nbit.delta")
    if "epsilon_t" in raw:
        eps = _as_float(raw["epsilon_t"], "nbit.epsilon_t")
        if not 0.0 < eps < 1.0:
            _fail("nbit.epsilon_t", f"must lie in (0, 1), got {eps}")
        out["epsilon_t"] = eps
    if raw.get("function") is not None and raw.get("targets") is not None:
        _fail("nbit.function", "give either nbit.targets or nbit.function, "
                               "not both")
    if raw.get("function") is not None:
        out["function"] = _canon_function(raw["function"], out["n_bits"])
    if raw.get("targets") is not None:
        out["targets"] = _canon_targets(raw["targets"], out["n_bits"])
    return out


def _canon_function(value: Any, n_bits: int) -> Any:
    if isinstance(value, str):
        if value.lower() not in _NAMED_FUNCTIONS:
            _fail("nbit.function", f"unknown function {value!r}; known names: "
                                   f"{sorted(_NAMED_FUNCTIONS)}")
        return value.lower()
    if isinstance(value, bool) or not isinstance(value, int):
        _fail("nbit.function", f"expected a name or truth-table code, "
                               f"got {value!r}")
    limit = 1 << (1 << n_bits)
    if not 0 <= value < limit:
        _fail("nbit.function",
              f"truth-table code must lie in [0, {limit}), got {value}")
    return value


def _canon_targets(value: Any, n_bits: int) -> dict:
    if not isinstance(value, Mapping):
        _fail("nbit.targets", f"expected an object mapping inputs to bits, "
                              f"got {value!r}")
    table = {}
    for key, bit in value.items():
        table[str(key)] = _as_int(bit, f"nbit.targets[{key!r}]",
                                  minimum=0, maximum=1)
    try:
        NBitTrainingSet(n_bits, table)
    except ValueError as err:
        _fail("nbit.targets", str(err))
    return dict(sorted(table.items()))


def _canon_check_identity(raw: Mapping[str, Any]) -> dict:
    out: dict = {"samples": 10_000, "tolerance": 1e-10}
    _reject_unknown(raw, list(out), "check_identity.")
    if "samples" in raw:
        out["samples"] = _as_int(raw["samples"], "check_identity.samples",
                                 minimum=1)
    if "tolerance" in raw:
        tol = _as_float(raw["tolerance"], "check_identity.tolerance")
        if tol <= 0.0:
            _fail("check_identity.tolerance", f"must be positive, got {tol}")
        out["tolerance"] = tol
    return out


_DEFAULT_LEARN_SETTINGS = ("classical", "delta0", "half-pi", "ti")
_DEFAULT_SWEEP_SETTINGS = ("classical", "delta0", "half-pi", "ti")

_TOP_LEVEL_KEYS = ("seed", "out", "workers", "trials", "task", "de", "shots",
                   "learn", "decohere", "sweep", "nbit", "check_identity")


@dataclass
class ExperimentConfig:
    """Validated, fully defaulted experiment configuration.

    ``from_dict`` -> ``to_dict`` is an identity on canonical dictionaries,
    so configs survive a serialize/parse round trip unchanged.
    """

    seed: int = 0
    out: str = "results"
    workers: int | None = None
    trials: int = 200
    task: Any = "T1"
    de: dict = field(default_factory=lambda: _canon_de({}))
    shots: dict = field(default_factory=lambda: _canon_shots({}))
    learn: dict = field(default_factory=lambda: _canon_learn({}))
    decohere: dict = field(default_factory=lambda: _canon_decohere({}))
    sweep: dict = field(default_factory=lambda: _canon_sweep({}))
    nbit: dict = field(default_factory=lambda: _canon_nbit({}))
    check_identity: dict = field(default_factory=lambda: _canon_check_identity({}))

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ExperimentConfig":
        if not isinstance(raw, Mapping):
            _fail("config", f"top level must be an object, got {raw!r}")
        _reject_unknown(raw, _TOP_LEVEL_KEYS)
        kwargs: dict = {}
        if "seed" in raw:
            kwargs["seed"] = _as_int(raw["seed"], "seed", minimum=0,
                                     maximum=_U64_MAX)
        if "out" in raw:
            kwargs["out"] = _as_str(raw["out"], "out")
        if raw.get("workers") is not None:
            kwargs["workers"] = _as_int(raw["workers"], "workers", minimum=1)
        if "trials" in raw:
            kwargs["trials"] = _as_int(raw["trials"], "trials", minimum=1)
        if "task" in raw:
            kwargs["task"] = _canon_task(raw["task"])
        kwargs["de"] = _canon_de(_as_section(raw.get("de"), "de"))
        kwargs["shots"] = _canon_shots(_as_section(raw.get("shots"), "shots"))
        kwargs["learn"] = _canon_learn(_as_section(raw.get("learn"), "learn"))
        kwargs["decohere"] = _canon_decohere(
            _as_section(raw.get("decohere"), "decohere"))
        kwargs["sweep"] = _canon_sweep(_as_section(raw.get("sweep"), "sweep"))
        kwargs["nbit"] = _canon_nbit(_as_section(raw.get("nbit"), "nbit"))
        kwargs["check_identity"] = _canon_check_identity(
            _as_section(raw.get("check_identity"), "check_identity"))
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config: invalid JSON ({err})") from err
        if not isinstance(raw, dict):
            _fail("config", "top level must be a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        out: dict = {}
        for key in _TOP_LEVEL_KEYS:
            value = getattr(self, key)
            out[key] = dict(value) if isinstance(value, dict) else value
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def resolved_task(self) -> TaskSpec:
        if isinstance(self.task, str):
            return canonical_task(CanonicalTask(self.task))
        return TaskSpec.from_json(json.dumps(self.task))

    def worker_count(self) -> int:
        if self.workers is not None:
            return self.workers
        return os.cpu_count() or 1

    def de_config(self, machine: Machine, phases: PhaseConfig, *,
                  epsilon_t: float | None = None,
                  gamma: float | None = None) -> DEConfig:
        de = self.de
        plan = ShotPlan(l_total=self.shots["l_total"]) if self.shots["enabled"] else None
        return DEConfig(
            m=de["m"],
            w=de["w"],
            cr=de["cr"],
            epsilon_t=de["epsilon_t"] if epsilon_t is None else epsilon_t,
            max_iterations=de["max_iterations"],
            machine=machine,
            phases=phases,
            gamma=de["gamma"] if gamma is None else gamma,
            shots=plan,
            shot_mode=DephasingMode(self.shots["mode"]),
            reevaluate_incumbent=de["reevaluate_incumbent"],
        )


# -- flag / environment overlay ---------------------------------------------

def _env_int(environ: Mapping[str, str], key: str) -> int:
    text = environ[key]
    try:
        return int(text, 10)
    except ValueError:
        _fail(key, f"expected an integer, got {text!r}")
    raise AssertionError("unreachable")


def _parse_settings_arg(text: str, field_name: str) -> list:
    entries: list = []
    for token in (t.strip() for t in text.split(",")):
        if not token:
            continue
        if token in _NAMED_SETTINGS:
            entries.append(token)
            continue
        try:
            entries.append(float(token))
        except ValueError:
            _fail(field_name, f"unknown setting {token!r}; expected one of "
                              f"{sorted(_NAMED_SETTINGS)} or a number")
    if not entries:
        _fail(field_name, "must not be empty")
    return entries


def _parse_gammas_arg(text: str, field_name: str) -> list[float]:
    values: list[float] = []
    for token in (t.strip() for t in text.split(",")):
        if not token:
            continue
        try:
            values.append(float(token))
        except ValueError:
            _fail(field_name, f"expected a number, got {token!r}")
    if not values:
        _fail(field_name, "must not be empty")
    return values


def _parse_function_arg(text: str) -> Any:
    try:
        return int(text, 10)
    except ValueError:
        return text


def load_effective_config(args: argparse.Namespace,
                          environ: Mapping[str, str] | None = None,
                          ) -> ExperimentConfig:
    """Merge config file, environment and flags into a validated config."""
    environ = os.environ if environ is None else environ
    path = args.config if args.config is not None else environ.get(ENV_PREFIX + "CONFIG")
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as err:
            raise ConfigError(f"config: cannot read {path}: {err}") from err
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config: invalid JSON in {path} ({err})") from err
        if not isinstance(raw, dict):
            _fail("config", "top level must be a JSON object")
    else:
        raw = {}
    raw = {key: (dict(value) if isinstance(value, Mapping) else value)
           for key, value in raw.items()}

    for key in ("seed", "workers", "trials"):
        env_key = ENV_PREFIX + key.upper()
        if env_key in environ:
            raw[key] = _env_int(environ, env_key)
    if ENV_PREFIX + "OUT" in environ:
        raw["out"] = environ[ENV_PREFIX + "OUT"]

    for key in ("seed", "out", "workers", "trials"):
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value

    command = args.command
    if command == "check-identity":
        section = dict(raw.get("check_identity") or {})
        if args.samples is not None:
            section["samples"] = args.samples
        if args.tolerance is not None:
            section["tolerance"] = args.tolerance
        if section:
            raw["check_identity"] = section
    elif command == "learn":
        if args.settings is not None:
            section = dict(raw.get("learn") or {})
            section["settings"] = _parse_settings_arg(args.settings,
                                                      "--settings")
            raw["learn"] = section
    elif command == "decohere":
        if args.gammas is not None:
            section = dict(raw.get("decohere") or {})
            section["gammas"] = _parse_gammas_arg(args.gammas, "--gammas")
            raw["decohere"] = section
    elif command == "sweep":
        section = dict(raw.get("sweep") or {})
        if args.settings is not None:
            section["settings"] = _parse_settings_arg(args.settings,
                                                      "--settings")
        if args.trials_per_cell is not None:
            section["trials_per_cell"] = args.trials_per_cell
        elif args.paper_scale:
            section["trials_per_cell"] = 1000
        if args.fail_threshold is not None:
            section["fail_threshold"] = args.fail_threshold
        if section:
            raw["sweep"] = section
    elif command == "nbit":
        section = dict(raw.get("nbit") or {})
        if args.n_bits is not None:
            section["n_bits"] = args.n_bits
        if args.function is not None:
            section["function"] = _parse_function_arg(args.function)
            section.pop("targets", None)
        if args.machine is not None:
            section["machine"] = args.machine
        if section:
            raw["nbit"] = section

    return ExperimentConfig.from_dict(raw)


# -- output helpers ----------------------------------------------------------

def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _write_records(path: Path, records) -> None:
    write_records_jsonl(path, records)
    print(f"wrote {path}")


def _write_curve(path: Path, curve) -> None:
    write_curve_csv(path, curve)
    print(f"wrote {path}")


def _write_summary(path: Path, payload: dict) -> None:
    write_summary_json(path, payload)
    print(f"wrote {path}")


def _fit_dict(curve) -> dict | None:
    return curve.fit.to_dict() if curve.fit is not None else None


def _fails(records) -> int:
    return sum(1 for record in records if not record.converged)


def _speedup_entry(classical_records, quantum_records, seed: int) -> dict:
    try:
        return speedup_with_ci(classical_records, quantum_records, seed).to_dict()
    except ValueError as err:
        return {"error": str(err)}


# -- subcommands -------------------------------------------------------------

def cmd_check_identity(cfg: ExperimentConfig) -> int:
    """Probe the closed-form fidelity-gap identity with random draws."""
    section = cfg.check_identity
    samples = section["samples"]
    tolerance = section["tolerance"]
    task = canonical_task(CanonicalTask.T1)
    rng = derive_rng(batch_seed(cfg.seed, "check-identity"))

    draws = rng.random((samples, 3))
    deltas = (2.0 * draws[:, 2] - 1.0) * math.pi
    gaps = fidelity_gap_batch(draws[:, 0], draws[:, 1], deltas)
    worst_random = 0.0
    for k in range(samples):
        pref = PreferenceVector(draws[k, 0], draws[k, 1])
        _, expected = analytic_advantage(pref, canonical_delta(float(deltas[k])))
        worst_random = max(worst_random, abs(float(gaps[k]) - expected))

    worst_damped = 0.0
    worst_quarter = 0.0
    for _ in range(max(samples // 10, 1)):
        p0, p1, u, gamma = rng.random(4)
        pref = PreferenceVector(p0, p1)
        delta = (2.0 * u - 1.0) * math.pi
        _, expected = analytic_advantage(pref, canonical_delta(delta))
        numeric = fidelity_gap(pref, PhaseConfig.from_delta(delta), gamma, task)
        worst_damped = max(worst_damped,
                           abs(numeric - (1.0 - gamma) * expected))
        quarter = fidelity_gap(pref, PhaseConfig.half_pi(), 0.0, task)
        worst_quarter = max(worst_quarter, abs(quarter))

    worst_edge = 0.0
    for _ in range(25):
        r, u = rng.random(2)
        delta = (2.0 * u - 1.0) * math.pi
        for pref in (PreferenceVector(0.0, r), PreferenceVector(1.0, r),
                     PreferenceVector(r, 0.0), PreferenceVector(r, 1.0)):
            lam, _ = analytic_advantage(pref, canonical_delta(delta))
            worst_edge = max(worst_edge, abs(lam), abs(
                fidelity_gap(pref, PhaseConfig.from_delta(delta), 0.0, task)))

    print(f"random-draw residual:   {worst_random:.3e} ({samples} samples)")
    print(f"dephased residual:      {worst_damped:.3e}")
    print(f"delta=pi/2 gap:         {worst_quarter:.3e}")
    print(f"degenerate-edge gap:    {worst_edge:.3e}")
    print(f"tolerance:              {tolerance:g}")
    ok = max(worst_random, worst_damped, worst_quarter, worst_edge) < tolerance
    print(f"identity check: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_learn(cfg: ExperimentConfig) -> int:
    """Run one learning batch per configured setting and report speed-ups."""
    task = cfg.resolved_task()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = cfg.worker_count()

    batches: dict[str, list] = {}
    settings_summary: dict[str, dict] = {}
    for entry in cfg.learn["settings"]:
        name, machine, phases = resolve_setting(entry, "learn.settings")
        config = cfg.de_config(machine, phases)
        records = labeled_batch(config, task, cfg.trials, cfg.seed, workers)
        curve = learning_probability(records)
        _write_records(out / f"{name}-records.jsonl", records)
        _write_curve(out / f"{name}-curve.csv", curve)
        batches[name] = records
        settings_summary[name] = {
            "label": batch_label(machine, phases, config.gamma, task),
            "trials": cfg.trials,
            "fails": _fails(records),
            "converged_fraction": curve.converged_fraction,
            "fit": _fit_dict(curve),
        }
        fit = curve.fit
        desc = f"n_c={fit.n_c:.2f}, sigma_n={fit.sigma_n:.2f}" if fit else "no fit"
        print(f"{name}: converged {curve.converged_fraction * 100:.1f}%, {desc}")

    speedups: dict[str, dict] = {}
    if "classical" in batches:
        for name, records in batches.items():
            if name == "classical":
                continue
            seed = batch_seed(cfg.seed, f"speedup|{name}")
            speedups[name] = _speedup_entry(batches["classical"], records, seed)
            entry = speedups[name]
            if "speedup_pct" in entry:
                lo, hi = entry["ci95"]
                print(f"speed-up {name}: {entry['speedup_pct']:.1f}% "
                      f"(95% CI [{lo:.1f}, {hi:.1f}])")
            else:
                print(f"speed-up {name}: unavailable ({entry['error']})")

    summary = {
        "command": "learn",
        "generated_at": _timestamp(),
        "seed": cfg.seed,
        "task": task_tag(task),
        "trials": cfg.trials,
        "settings": settings_summary,
        "speedups": speedups,
    }
    _write_summary(out / "summary.json", summary)
    return 0


def cmd_decohere(cfg: ExperimentConfig) -> int:
    """Scan dephasing rates for the quantum machine at fixed phases."""
    task = cfg.resolved_task()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    gammas = cfg.decohere["gammas"]
    base = cfg.de_config(Machine.QUANTUM, PhaseConfig.zero(), gamma=0.0)
    result = decoherence_sweep(base, task, gammas, cfg.trials, cfg.seed,
                               cfg.worker_count())

    _write_records(out / "classical-records.jsonl", result.classical_records)
    _write_curve(out / "classical-curve.csv", result.classical_curve)

    rows = []
    points_summary: dict[str, dict] = {}
    classical_fit = result.classical_curve.fit
    for point in result.points:
        tag = f"gamma-{point.gamma:.12g}"
        _write_records(out / f"{tag}-records.jsonl", point.records)
        _write_curve(out / f"{tag}-curve.csv", point.curve)
        fit = point.curve.fit
        rows.append([
            _fmt(point.gamma),
            _fmt(fit.n_c) if fit else "",
            _fmt(fit.sigma_n) if fit else "",
            str(_fails(point.records)),
            _fmt(classical_fit.n_c) if classical_fit else "",
        ])
        seed = batch_seed(cfg.seed, f"speedup|decohere|gamma={point.gamma:.12g}")
        speedup = _speedup_entry(result.classical_records, point.records, seed)
        points_summary[f"{point.gamma:.12g}"] = {
            "gamma": point.gamma,
            "fails": _fails(point.records),
            "converged_fraction": point.curve.converged_fraction,
            "fit": _fit_dict(point.curve),
            "speedup": speedup,
        }
        desc = f"n_c={fit.n_c:.2f}" if fit else "no fit"
        print(f"gamma={point.gamma:g}: converged "
              f"{point.curve.converged_fraction * 100:.1f}%, {desc}")

    series_path = out / "decoherence.csv"
    with open(series_path, "w", newline="\n", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["gamma", "n_c", "sigma_n", "fails", "classical_n_c"])
        writer.writerows(rows)
    print(f"wrote {series_path}")

    summary = {
        "command": "decohere",
        "generated_at": _timestamp(),
        "seed": cfg.seed,
        "task": task_tag(task),
        "trials_per_gamma": cfg.trials,
        "classical": {
            "fails": _fails(result.classical_records),
            "converged_fraction": result.classical_curve.converged_fraction,
            "fit": _fit_dict(result.classical_curve),
        },
        "points": points_summary,
    }
    _write_summary(out / "summary.json", summary)
    return 0


def cmd_sweep(cfg: ExperimentConfig) -> int:
    """Grid-scan (W, C_r) per machine setting and report the best cells."""
    task = cfg.resolved_task()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    section = cfg.sweep

    best_summary: dict[str, dict] = {}
    for entry in section["settings"]:
        name, machine, phases = resolve_setting(entry, "sweep.settings")
        base = cfg.de_config(machine, phases)
        try:
            grid = parameter_sweep(
                base, task,
                w_values=section["w_grid"],
                cr_values=section["cr_grid"],
                trials_per_cell=section["trials_per_cell"],
                master_seed=cfg.seed,
                fail_threshold=section["fail_threshold"],
                workers=cfg.worker_count(),
            )
        except ValueError as err:
            print(f"error: sweep setting {name}: {err}", file=sys.stderr)
            return 1
        path = out / f"{name}-sweep.csv"
        write_sweep_csv(path, grid)
        print(f"wrote {path}")
        i, j = grid.best_indices()
        best_summary[name] = {
            "w": grid.best_cell[0],
            "cr": grid.best_cell[1],
            "n_c": float(grid.n_c_grid[i, j]),
            "fails": int(grid.fail_grid[i, j]),
        }
        print(f"{name}: best (W, C_r) = ({grid.best_cell[0]:g}, "
              f"{grid.best_cell[1]:g}), n_c={grid.n_c_grid[i, j]:.2f}, "
              f"fails={int(grid.fail_grid[i, j])}")

    summary = {
        "command": "sweep",
        "generated_at": _timestamp(),
        "seed": cfg.seed,
        "task": task_tag(task),
        "trials_per_cell": section["trials_per_cell"],
        "fail_threshold": section["fail_threshold"],
        "best": best_summary,
    }
    _write_summary(out / "summary.json", summary)
    return 0


def _resolve_targets(section: Mapping[str, Any]) -> NBitTrainingSet:
    n_bits = section["n_bits"]
    if section["targets"] is not None:
        return NBitTrainingSet(n_bits, section["targets"])
    function = section["function"]
    if function is None:
        _fail("nbit.targets",
              "missing target table: set nbit.targets or nbit.function")
    if isinstance(function, str):
        return NBitTrainingSet.from_function(n_bits,
                                             _NAMED_FUNCTIONS[function])
    code = function
    return NBitTrainingSet.from_function(
        n_bits, lambda x: (code >> int(x, 2)) & 1)


def cmd_nbit(cfg: ExperimentConfig) -> int:
    """Train a block bank for a multi-bit target and assemble the circuit."""
    section = cfg.nbit
    targets = _resolve_targets(section)
    machine = Machine(section["machine"])
    phases = PhaseConfig.from_delta(section["delta"])
    config = cfg.de_config(machine, phases, epsilon_t=section["epsilon_t"])
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    result = train_all(targets, config, cfg.seed)
    bank = result.bank
    blocks_summary = {
        key: {
            "converged": record.converged,
            "completion_iteration": record.completion_iteration,
            "best_f": record.best_f_per_iteration[-1],
        }
        for key, record in result.records.items()
    }
    summary = {
        "command": "nbit",
        "generated_at": _timestamp(),
        "seed": cfg.seed,
        "n_bits": targets.n_bits,
        "machine": machine.value,
        "epsilon_t": section["epsilon_t"],
        "total_iterations": result.total_iterations,
        "blocks": blocks_summary,
        "failed_blocks": list(bank.failed_blocks),
    }

    if bank.partial:
        for key in bank.failed_blocks:
            print(f"block {key!r}: did not converge within "
                  f"{config.max_iterations} iterations")
        summary["assembled_fidelity"] = None
        _write_summary(out / "summary.json", summary)
        print("bank incomplete: no bank.json written")
        return 1

    bank_path = out / "bank.json"
    bank_path.write_text(bank.to_json() + "\n", encoding="utf-8")
    print(f"wrote {bank_path}")

    report_path = out / "report.csv"
    gamma = config.gamma
    fidelity_product = 1.0
    with open(report_path, "w", newline="\n", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["x", "target", "pr0", "pr1", "row_fidelity"])
        for x in sorted(targets.targets):
            dist = evaluate_circuit(bank, x, machine, gamma)
            target = targets.targets[x]
            row_fidelity = math.sqrt(max(float(dist[target]), 0.0))
            fidelity_product *= row_fidelity
            writer.writerow([x, str(target), _fmt(float(dist[0])),
                             _fmt(float(dist[1])), _fmt(row_fidelity)])
    print(f"wrote {report_path}")

    assembled = fidelity_product ** (1.0 / len(targets.targets))
    summary["assembled_fidelity"] = assembled
    _write_summary(out / "summary.json", summary)
    print(f"assembled fidelity: {assembled:.6f} "
          f"(total iterations {result.total_iterations})")
    return 0


_COMMANDS: dict[str, Callable[[ExperimentConfig], int]] = {
    "check-identity": cmd_check_identity,
    "learn": cmd_learn,
    "decohere": cmd_decohere,
    "sweep": cmd_sweep,
    "nbit": cmd_nbit,
}


# -- parser -------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH",
                        help="JSON config file (env: USFC_CONFIG)")
    parser.add_argument("--seed", type=int, metavar="U64",
                        help="master seed (env: USFC_SEED)")
    parser.add_argument("--out", metavar="DIR",
                        help="output directory (env: USFC_OUT)")
    parser.add_argument("--workers", type=int, metavar="N",
                        help="worker processes; results never depend on this "
                             "(env: USFC_WORKERS)")
    parser.add_argument("--trials", type=int, metavar="N",
                        help="trials per batch (env: USFC_TRIALS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="usfc",
        description="learning experiments on the universal single-feature "
                    "circuit")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")

    p = sub.add_parser("check-identity",
                       help="verify the analytic fidelity-gap identity")
    _add_common(p)
    p.add_argument("--samples", type=int, metavar="N",
                   help="number of random parameter draws")
    p.add_argument("--tolerance", type=float, metavar="X",
                   help="maximum allowed residual")

    p = sub.add_parser("learn", help="learning batches plus speed-up summary")
    _add_common(p)
    p.add_argument("--settings", metavar="LIST",
                   help="comma-separated machine settings "
                        "(classical, delta0, half-pi, ti, or a number)")

    p = sub.add_parser("decohere", help="dephasing-rate scan with classical "
                                        "baseline")
    _add_common(p)
    p.add_argument("--gammas", metavar="LIST",
                   help="comma-separated dephasing rates in [0, 1]")

    p = sub.add_parser("sweep", help="(W, C_r) hyperparameter grid scan")
    _add_common(p)
    p.add_argument("--settings", metavar="LIST",
                   help="comma-separated machine settings")
    p.add_argument("--trials-per-cell", type=int, dest="trials_per_cell",
                   metavar="N", help="trials per grid cell")
    p.add_argument("--fail-threshold", type=int, dest="fail_threshold",
                   metavar="N", help="max failures allowed in the best cell")
    p.add_argument("--paper-scale", action="store_true", dest="paper_scale",
                   help="use 1000 trials per cell")

    p = sub.add_parser("nbit", help="train and assemble a multi-bit bank")
    _add_common(p)
    p.add_argument("--n-bits", type=int, dest="n_bits", metavar="N",
                   help="input width of the target function")
    p.add_argument("--function", metavar="NAME|CODE",
                   help="named target (and, or, xor, nand, nor, xnor) or an "
                        "integer truth-table code")
    p.add_argument("--machine", choices=[m.value for m in Machine],
                   help="working channel used for every block")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_effective_config(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](cfg)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
