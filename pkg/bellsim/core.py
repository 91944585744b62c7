"""
Bell/CHSH Simulation Toolkit - core definitions
Constants, error types, angle literals, configuration loading and report plumbing
shared by the model modules and the command-line surface.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple
import json
import math
import os
import re


# -----------------------------
# Constants
# -----------------------------

# Absolute tolerance for every algebraic identity check (entrywise).
TOLERANCE = 1e-12

# Polariser angles (a1, a2, b1, b2) of the Aspect experiment, in radians.
ASPECT_ANGLES: Tuple[float, float, float, float] = (0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)

# Quantum CHSH value at the Aspect angles.
TSIRELSON_VALUE = 2.0 * math.sqrt(2.0)

# Bound obeyed by every local hidden-variable model.
LOCAL_BOUND = 2.0

# Experimental correction factors: finite solid angle of detection (F) and
# polariser transmission (T).
DETECTION_FACTOR_F = 0.984
TRANSMISSION_FACTOR_T = 0.971

# Laboratory value reported for the Aspect configuration and its uncertainty.
MEASURED_S = 2.697
MEASURED_S_UNCERTAINTY = 0.015

DEFAULT_RUNS = 1_000_000
DEFAULT_SEED = 20_251_018
DEFAULT_TRIALS = 10_000
DEFAULT_RANDOM_SETTINGS = 1_000

# Environment variable holding the default seed.
SEED_ENV_VAR = "BELLSIM_SEED"

# Outcome space X = {-1, 1}^2 in canonical order.
OUTCOMES: Tuple[int, int] = (1, -1)
OUTCOME_PAIRS: Tuple[Tuple[int, int], ...] = ((1, 1), (1, -1), (-1, 1), (-1, -1))

# Setting index pairs in canonical order (a1,b1), (a1,b2), (a2,b1), (a2,b2).
SETTING_INDICES: Tuple[Tuple[int, int], ...] = ((0, 0), (0, 1), (1, 0), (1, 1))

# Sign of each setting's correlator inside S.
CHSH_SIGNS: Dict[Tuple[int, int], int] = {(0, 0): 1, (0, 1): -1, (1, 0): 1, (1, 1): 1}

SOURCES = ("quantum-exact", "bell-measure")

# Scenario file sections and the keys each accepts.
CONFIG_SECTIONS: Dict[str, Tuple[str, ...]] = {
    "angles": ("a1", "a2", "b1", "b2"),
    "experiment": ("runs", "seed", "source", "parallel", "workers"),
    "correction": ("F", "T"),
    "verification": ("trials", "random_settings"),
}

PROVENANCES = ("exact", "sampled", "corrected")


# -----------------------------
# Error types
# -----------------------------

class InputError(ValueError):
    """Invalid argument: dimension, angle, outcome, factor or configuration value."""


class ConfigError(InputError):
    """Malformed or incomplete configuration file."""


class ZeroProbabilityConditionError(InputError):
    """A conditional probability was requested on an event of probability zero."""

    def __init__(self, event: str):
        super().__init__(f"Conditioning event has probability zero: {event}")
        self.event = event


class EmptySettingError(InputError):
    """A tally has no runs for the requested polariser setting."""

    def __init__(self, setting: str):
        super().__init__(f"No runs recorded for setting {setting}; correlator undefined")
        self.setting = setting


class NumericConsistencyError(ArithmeticError):
    """A quantity that must be real or normalised drifted beyond tolerance."""


# -----------------------------
# Path Resolution Utilities
# -----------------------------

def get_project_root() -> str:
    """Project root directory (where configs/ and reports/ live)."""
    current = os.path.abspath(__file__)
    return os.path.dirname(os.path.dirname(current))


def resolve_path(relative_path: str) -> str:
    """Resolve a path relative to the project root."""
    return os.path.join(get_project_root(), relative_path)


# -----------------------------
# Angle literals
# -----------------------------

_PI_LITERAL = re.compile(
    r"^\s*(?P<sign>[+-])?\s*(?P<num>\d+(?:\.\d+)?)?\s*\*?\s*pi\s*(?:/\s*(?P<den>\d+(?:\.\d+)?))?\s*$",
    re.IGNORECASE,
)


def check_finite(value: float, name: str) -> float:
    """Return `value` as float, raising InputError when it is NaN or infinite."""
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise InputError(f"{name} must be numeric, got {value!r}")
    if not math.isfinite(number):
        raise InputError(f"{name} must be finite, got {value!r}")
    return number


def parse_angle(text: Any) -> float:
    """
    Parse an angle given either as raw radians or as a multiple of pi.

    Accepted forms: 0.3927, "pi", "-pi/4", "3pi/8", "3*pi/8", "0.5pi".

    Raises:
        InputError: If the literal cannot be parsed or is not finite
    """
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return check_finite(text, "angle")
    literal = str(text).strip()
    match = _PI_LITERAL.match(literal)
    if match:
        numerator = float(match.group("num")) if match.group("num") else 1.0
        denominator = float(match.group("den")) if match.group("den") else 1.0
        if denominator == 0:
            raise InputError(f"Angle literal divides by zero: {text!r}")
        value = numerator * math.pi / denominator
        if match.group("sign") == "-":
            value = -value
        return check_finite(value, "angle")
    try:
        return check_finite(float(literal), "angle")
    except InputError:
        raise InputError(f"Cannot parse angle {text!r}; use radians or a literal like '3pi/8'")


def format_angle(radians: float, max_denominator: int = 64) -> str:
    """
    Canonical text for an angle: a pi-fraction when the angle is a small rational
    multiple of pi, otherwise the shortest round-trip repr of the radians.
    """
    if radians == 0:
        return "0"
    ratio = Fraction(radians / math.pi).limit_denominator(max_denominator)
    if abs(float(ratio) * math.pi - radians) <= TOLERANCE:
        sign = "-" if ratio < 0 else ""
        num, den = abs(ratio.numerator), ratio.denominator
        head = "pi" if num == 1 else f"{num}pi"
        return f"{sign}{head}" if den == 1 else f"{sign}{head}/{den}"
    return repr(float(radians))


def parse_angle_list(text: str) -> Tuple[float, float, float, float]:
    """Parse "a1,a2,b1,b2" into four radians."""
    parts = [p for p in str(text).split(",") if p.strip()]
    if len(parts) != 4:
        raise InputError(f"--angles needs exactly four comma-separated values (a1,a2,b1,b2), got {text!r}")
    a1, a2, b1, b2 = (parse_angle(p) for p in parts)
    return a1, a2, b1, b2


def parse_correction(text: str) -> Tuple[float, float]:
    """Parse "F=0.984,T=0.971" (comma- or space-separated) into (F, T)."""
    values: Dict[str, float] = {}
    for item in str(text).replace(",", " ").split():
        if "=" not in item:
            raise InputError(f"--correct expects F=..,T=.. pairs, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip().upper()
        if key not in ("F", "T"):
            raise InputError(f"--correct only knows F and T, got {key!r}")
        values[key] = check_finite(raw, f"correction factor {key}")
    missing = [k for k in ("F", "T") if k not in values]
    if missing:
        raise InputError(f"--correct is missing: {', '.join(missing)}")
    return values["F"], values["T"]


# -----------------------------
# Configuration
# -----------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for one simulated Bell experiment."""
    angles: Tuple[float, float, float, float] = ASPECT_ANGLES  # (a1, a2, b1, b2) radians
    runs: int = DEFAULT_RUNS
    seed: int = DEFAULT_SEED
    source: str = "quantum-exact"
    parallel: bool = False
    workers: Optional[int] = None

    def __post_init__(self):
        if len(self.angles) != 4:
            raise InputError(f"angles must be (a1, a2, b1, b2), got {self.angles!r}")
        for name, value in zip(("a1", "a2", "b1", "b2"), self.angles):
            check_finite(value, name)
        if isinstance(self.runs, bool) or int(self.runs) != self.runs or self.runs < 1:
            raise InputError(f"runs must be a positive integer, got {self.runs!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InputError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.source not in SOURCES:
            raise InputError(f"source must be one of {SOURCES}, got {self.source!r}")
        if self.workers is not None and self.workers < 1:
            raise InputError(f"workers must be >= 1, got {self.workers!r}")

    @property
    def a_angles(self) -> Tuple[float, float]:
        return self.angles[0], self.angles[1]

    @property
    def b_angles(self) -> Tuple[float, float]:
        return self.angles[2], self.angles[3]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "angles": angles_to_dict(self.angles),
            "runs": int(self.runs),
            "seed": int(self.seed),
            "source": self.source,
            "parallel": bool(self.parallel),
            "workers": self.workers,
        }


def angles_to_dict(angles: Tuple[float, float, float, float]) -> Dict[str, Dict[str, Any]]:
    """Canonical echo of an angle quadruple."""
    return {
        name: {"literal": format_angle(value), "radians": float(value)}
        for name, value in zip(("a1", "a2", "b1", "b2"), angles)
    }


@dataclass
class ScenarioSettings:
    """Everything a scenario file may set. Unset fields stay None."""
    angles: Optional[Tuple[float, float, float, float]] = None
    runs: Optional[int] = None
    seed: Optional[int] = None
    source: Optional[str] = None
    parallel: Optional[bool] = None
    workers: Optional[int] = None
    correction: Optional[Tuple[float, float]] = None
    trials: Optional[int] = None
    random_settings: Optional[int] = None
    metadata: Dict[str, Any] = field(default_factory=dict)


def _read_config_file(path: str) -> Dict[str, Any]:
    if path.endswith(".toml"):
        try:
            import tomllib
        except ImportError:
            raise ConfigError(f"Reading {path} needs Python 3.11+ (tomllib); use a JSON config instead")
        try:
            with open(path, "rb") as f:
                return tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Invalid TOML format in {path}: {e}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON format in {path}: {e}")


def _positive_int(section: str, key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value or value < 1:
        raise ConfigError(f"{section}.{key} must be a positive integer, got {value!r}")
    return int(value)


def load_config(path: str) -> ScenarioSettings:
    """
    Load a scenario file (JSON, or TOML with the same sections).

    Known sections: angles {a1,a2,b1,b2}, experiment {runs, seed, source, parallel,
    workers}, correction {F, T}, verification {trials, random_settings}.
    Keys starting with '_' are documentation and are skipped; any other unknown
    section or key is an error.

    Args:
        path: Config path; relative paths are tried against the working directory,
              the project root and configs/

    Returns:
        ScenarioSettings with the values the file sets

    Raises:
        ConfigError: If the file is missing, malformed or holds invalid values
    """
    candidates = [path]
    if not os.path.isabs(path):
        candidates += [resolve_path(path), resolve_path(os.path.join("configs", path))]
    resolved = next((c for c in candidates if os.path.exists(c)), None)
    if resolved is None:
        raise ConfigError(
            f"Config file not found: {path}\n"
            f"Searched: {', '.join(os.path.abspath(c) for c in candidates)}"
        )

    data = _read_config_file(resolved)
    if not isinstance(data, dict):
        raise ConfigError(f"{resolved} must hold an object at top level")

    unknown = [k for k in data if not k.startswith("_") and k not in CONFIG_SECTIONS]
    if unknown:
        raise ConfigError(f"Unknown sections in {resolved}: {', '.join(sorted(unknown))}")
    for section, keys in CONFIG_SECTIONS.items():
        if section not in data:
            continue
        if not isinstance(data[section], dict):
            raise ConfigError(f"{section} must be a table of keys, got {type(data[section]).__name__}")
        unknown = [k for k in data[section] if not k.startswith("_") and k not in keys]
        if unknown:
            raise ConfigError(f"Unknown keys in {section}: {', '.join(sorted(unknown))}")

    settings = ScenarioSettings(metadata=dict(data.get("_case_metadata", {})))

    if "angles" in data:
        angles = data["angles"]
        missing = [k for k in ("a1", "a2", "b1", "b2") if k not in angles]
        if missing:
            raise ConfigError(f"Missing required angle fields: {', '.join(missing)}")
        try:
            settings.angles = tuple(parse_angle(angles[k]) for k in ("a1", "a2", "b1", "b2"))
        except InputError as e:
            raise ConfigError(f"angles: {e}")

    experiment = data.get("experiment", {})
    if "runs" in experiment:
        settings.runs = _positive_int("experiment", "runs", experiment["runs"])
    if "seed" in experiment:
        seed = experiment["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise ConfigError(f"experiment.seed must be a 64-bit unsigned integer, got {seed!r}")
        settings.seed = seed
    if "source" in experiment:
        if experiment["source"] not in SOURCES:
            raise ConfigError(f"experiment.source must be one of {SOURCES}, got {experiment['source']!r}")
        settings.source = experiment["source"]
    if "parallel" in experiment:
        settings.parallel = bool(experiment["parallel"])
    if "workers" in experiment:
        settings.workers = _positive_int("experiment", "workers", experiment["workers"])

    if "correction" in data:
        correction = data["correction"]
        missing = [k for k in ("F", "T") if k not in correction]
        if missing:
            raise ConfigError(f"Missing required correction fields: {', '.join(missing)}")
        settings.correction = (
            check_finite(correction["F"], "correction.F"),
            check_finite(correction["T"], "correction.T"),
        )

    verification = data.get("verification", {})
    if "trials" in verification:
        settings.trials = _positive_int("verification", "trials", verification["trials"])
    if "random_settings" in verification:
        settings.random_settings = _positive_int("verification", "random_settings", verification["random_settings"])

    return settings


def resolve_seed(flag_seed: Optional[int], config_seed: Optional[int]) -> Tuple[int, str]:
    """
    Pick the seed by precedence flag > config > environment > default.

    Returns:
        (seed, origin) with origin one of "flag", "config", "env", "default"

    Raises:
        InputError: If the flag seed lies outside [0, 2^64)
    """
    if flag_seed is not None:
        if not 0 <= int(flag_seed) < 2 ** 64:
            raise InputError(f"--seed must be a 64-bit unsigned integer, got {flag_seed!r}")
        return int(flag_seed), "flag"
    if config_seed is not None:
        return int(config_seed), "config"
    env_value = os.environ.get(SEED_ENV_VAR)
    if env_value is not None and env_value.strip():
        try:
            seed = int(env_value)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env_value!r}")
        if not 0 <= seed < 2 ** 64:
            raise ConfigError(f"{SEED_ENV_VAR} must be a 64-bit unsigned integer, got {env_value!r}")
        return seed, "env"
    return DEFAULT_SEED, "default"


# -----------------------------
# Report plumbing
# -----------------------------

def tagged(value: float, provenance: str) -> Dict[str, Any]:
    """Wrap a floating value with its provenance ("exact" | "sampled" | "corrected")."""
    if provenance not in PROVENANCES:
        raise InputError(f"Unknown provenance {provenance!r}")
    return {"value": float(value), "provenance": provenance}


@dataclass
class ReportDocument:
    """Machine-readable result of one CLI command."""
    command: str
    config: Dict[str, Any]
    results: Dict[str, Any]
    seed: Optional[int] = None
    seed_origin: Optional[str] = None
    warnings: List[str] = field(default_factory=list)
    version: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "version": self.version,
            "seed": self.seed,
            "seed_origin": self.seed_origin,
            "config": self.config,
            "results": self.results,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        """Deterministic JSON text (sorted keys, fixed separators, trailing newline)."""
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def untagged_floats(document: Any, path: str = "") -> List[str]:
    """
    Paths of floating values in a report tree that are not wrapped by `tagged`.
    Angle echoes ("radians") and config blocks are exempt.
    """
    found: List[str] = []
    if isinstance(document, dict):
        if set(document) == {"value", "provenance"}:
            return found
        for key, value in document.items():
            if key in ("radians", "config"):
                continue
            found.extend(untagged_floats(value, f"{path}.{key}" if path else str(key)))
    elif isinstance(document, list):
        for idx, value in enumerate(document):
            found.extend(untagged_floats(value, f"{path}[{idx}]"))
    elif isinstance(document, float):
        found.append(path)
    return found


def save_json(document: ReportDocument, output_path: str) -> str:
    """Write a report document to `output_path` (directories created as needed)."""
    directory = os.path.dirname(os.path.abspath(output_path))
    os.makedirs(directory, exist_ok=True)
    with open(output_path, "w", encoding="utf-8") as f:
        f.write(document.to_json())
    return output_path
