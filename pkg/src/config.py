"""
Configuration for swe-femlab.

Two layers:
  - SystemConfig: the physics/time-stepping parameters the stepper needs
    (Rossby number, Froude number, time step, final time).
  - ExperimentConfig: everything an experiment command needs (mesh, physics,
    time, output), resolved from

        per-experiment defaults < config file < SWE_FEMLAB_* env vars < CLI flags

Config files are flat `key = value` text (parsed with python-dotenv), e.g.

    # steady.cfg
    domain = disk
    radius = 1.0
    edge_length = 0.1
    ro = 0.1
    fr = 1
    edge_lengths = 0.4, 0.2, 0.1

Keys are the lowercase ExperimentConfig field names. Unknown keys are rejected.
"""

import math
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from dotenv import dotenv_values, load_dotenv
import structlog

from src.errors import ConfigError

load_dotenv()

logger = structlog.get_logger("config")

ENV_PREFIX = "SWE_FEMLAB_"

EXPERIMENTS = ("balance", "steady", "kelvin-circular", "kelvin-converge", "spectrum")
DOMAINS = ("disk", "rectangle", "file")
MESH_FORMATS = ("gmsh22-ascii", "triangle-node-ele")
SOLVERS = ("auto", "direct", "iterative")

# Crank-Nicolson only
THETA = 0.5


@dataclass(frozen=True)
class SystemConfig:
    """Nondimensional parameters of the linear rotating shallow-water system."""
    ro: float
    fr: float
    dt: float
    t_end: float = 0.0
    theta: float = THETA

    def __post_init__(self):
        if not (self.ro > 0):
            raise ConfigError(f"Rossby number must be > 0 (inf allowed), got {self.ro}")
        if not (self.fr > 0) or math.isinf(self.fr):
            raise ConfigError(f"Froude number must be finite and > 0, got {self.fr}")
        # Negative dt integrates backwards (used for reversibility checks)
        if self.dt == 0 or not math.isfinite(self.dt):
            raise ConfigError(f"time step must be finite and nonzero, got {self.dt}")
        if self.theta != THETA:
            raise ConfigError(f"only Crank-Nicolson (theta=0.5) is supported, got {self.theta}")

    @property
    def inverse_rossby(self) -> float:
        """1/Ro, exactly 0 in the non-rotating limit Ro = inf."""
        return 0.0 if math.isinf(self.ro) else 1.0 / self.ro

    @property
    def inverse_froude_sq(self) -> float:
        return 1.0 / (self.fr * self.fr)

    @property
    def balance_ratio(self) -> float:
        """Fr^2/Ro: thickness of a balanced state is this times the streamfunction."""
        return self.fr * self.fr * self.inverse_rossby

    def with_dt(self, dt: float) -> "SystemConfig":
        return replace(self, dt=dt)


@dataclass
class ExperimentConfig:
    """Fully resolved settings for one experiment command."""
    experiment: str = "balance"

    # --- Mesh ---
    domain: str = "disk"
    radius: float = 1.0
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = 0.0
    y_max: float = 1.0
    edge_length: float = 0.1
    edge_lengths: tuple[float, ...] = (0.4, 0.2, 0.1)
    distortion: float = 0.0
    seed: int = 0
    mesh_file: str | None = None
    mesh_format: str = "gmsh22-ascii"

    # --- Physics ---
    ro: float = 0.1
    fr: float = 1.0

    # --- Time ---
    dt: float = 0.01
    t_end: float = 1.0
    snapshot_interval: float = 0.0       # 0 = no periodic snapshots
    snapshot_times: tuple[float, ...] = ()
    courant: float = 0.1                 # wave Courant number cap for the ladder

    # --- Balance / steady ---
    gaussian_x: float | None = None      # None = domain centroid
    gaussian_y: float | None = None
    gaussian_width: float | None = None  # None = 1/4 domain diameter
    zero_boundary: bool = True
    smoothing: int = 2
    n_fields: int = 1
    unbalanced: bool = False             # negative control: random u instead of balanced
    drift_tolerance: float = 1e-9

    # --- Kelvin ---
    kelvin_x0: float = -5.0
    retention_band: float = 0.2
    energy_tolerance: float = 1e-8
    slope_min: float = 1.7
    dt_check: bool = False

    # --- Spectrum ---
    spectrum_threshold: float = 1e-8     # relative to lambda_max
    dense_cap: int = 3000
    iterative_eigensolver: bool = False
    n_eigenvalues: int = 20

    # --- Solver / runtime ---
    solver: str = "auto"
    direct_max_dofs: int = 200_000
    output_dir: str = "output"
    threads: int = 1
    deterministic: bool = True

    def system(self, dt: float | None = None) -> SystemConfig:
        return SystemConfig(ro=self.ro, fr=self.fr, dt=self.dt if dt is None else dt,
                            t_end=self.t_end)

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    def validate(self) -> "ExperimentConfig":
        """Check enums and positivity. Returns self for chaining."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment '{self.experiment}', expected one of {EXPERIMENTS}")
        if self.domain not in DOMAINS:
            raise ConfigError(f"unknown domain '{self.domain}', expected one of {DOMAINS}")
        if self.mesh_format not in MESH_FORMATS:
            raise ConfigError(f"unknown mesh_format '{self.mesh_format}', expected one of {MESH_FORMATS}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver '{self.solver}', expected one of {SOLVERS}")
        if self.domain == "file" and not self.mesh_file:
            raise ConfigError("domain = file requires mesh_file")

        positive = {
            "radius": self.radius, "edge_length": self.edge_length, "fr": self.fr,
            "courant": self.courant, "drift_tolerance": self.drift_tolerance,
            "spectrum_threshold": self.spectrum_threshold, "dense_cap": self.dense_cap,
            "threads": self.threads, "n_fields": self.n_fields,
            "n_eigenvalues": self.n_eigenvalues, "energy_tolerance": self.energy_tolerance,
        }
        for name, value in positive.items():
            if not (value > 0):
                raise ConfigError(f"{name} must be > 0, got {value}")
        if not (self.ro > 0):
            raise ConfigError(f"ro must be > 0 (inf allowed), got {self.ro}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.t_end < 0:
            raise ConfigError(f"t_end must be >= 0, got {self.t_end}")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ConfigError(
                f"degenerate rectangle ({self.x_min}, {self.x_max}) x ({self.y_min}, {self.y_max})")
        if not (0 <= self.distortion < 0.3):
            raise ConfigError(f"distortion must be in [0, 0.3), got {self.distortion}")
        if self.smoothing < 0:
            raise ConfigError(f"smoothing must be >= 0, got {self.smoothing}")
        if any(h <= 0 for h in self.edge_lengths):
            raise ConfigError(f"edge_lengths must all be > 0, got {self.edge_lengths}")
        if self.gaussian_width is not None and self.gaussian_width <= 0:
            raise ConfigError(f"gaussian_width must be > 0, got {self.gaussian_width}")
        return self


# Per-experiment defaults layered on top of the dataclass defaults
EXPERIMENT_DEFAULTS: dict[str, dict] = {
    "balance": {
        "domain": "disk", "radius": 1.0, "edge_length": 0.1, "distortion": 0.2,
        "ro": 0.1, "fr": 1.0, "zero_boundary": True,
    },
    "steady": {
        "domain": "disk", "radius": 1.0, "edge_length": 0.1, "distortion": 0.2,
        "ro": 0.1, "fr": 1.0, "dt": 0.01, "t_end": 1.0, "smoothing": 2,
        "n_fields": 1, "drift_tolerance": 1e-9,
    },
    "kelvin-circular": {
        "domain": "disk", "radius": 1.0, "edge_length": 0.05, "distortion": 0.0,
        "ro": 0.1, "fr": 1.0, "dt": 0.01, "t_end": 100.0,
        "snapshot_times": (0.0, 30.0, 60.0, 90.0),
    },
    "kelvin-converge": {
        "domain": "rectangle", "x_min": -15.0, "x_max": 15.0, "y_min": 0.0, "y_max": 3.0,
        "edge_lengths": (0.4, 0.2, 0.1), "ro": 0.1, "fr": 1.0, "t_end": 10.0,
        "courant": 0.1, "slope_min": 1.7,
    },
    "spectrum": {
        "domain": "disk", "radius": 1.0, "edge_length": 0.125, "distortion": 0.2,
        "dense_cap": 3000,
    },
}

_FLOAT_KEYS = {
    "radius", "x_min", "x_max", "y_min", "y_max", "edge_length", "distortion",
    "ro", "fr", "dt", "t_end", "snapshot_interval", "courant", "drift_tolerance",
    "kelvin_x0", "retention_band", "energy_tolerance", "slope_min", "spectrum_threshold",
}
_OPTIONAL_FLOAT_KEYS = {"gaussian_x", "gaussian_y", "gaussian_width"}
_INT_KEYS = {"seed", "smoothing", "n_fields", "dense_cap", "n_eigenvalues",
             "direct_max_dofs", "threads"}
_BOOL_KEYS = {"zero_boundary", "unbalanced", "dt_check", "iterative_eigensolver", "deterministic"}
_LIST_KEYS = {"edge_lengths", "snapshot_times"}
_STR_KEYS = {"experiment", "domain", "mesh_format", "solver", "output_dir"}
_OPTIONAL_STR_KEYS = {"mesh_file"}

CONFIG_KEYS = (_FLOAT_KEYS | _OPTIONAL_FLOAT_KEYS | _INT_KEYS | _BOOL_KEYS
               | _LIST_KEYS | _STR_KEYS | _OPTIONAL_STR_KEYS)
BOOL_KEYS = frozenset(_BOOL_KEYS)


def _parse_float(key: str, raw) -> float:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return float(raw)
    text = str(raw).strip().lower()
    if text in ("inf", "infinity", "+inf"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got '{raw}'") from None


def _parse_bool(key: str, raw) -> bool:
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got '{raw}'")


def coerce_value(key: str, raw):
    """Convert a raw string (or already-typed value) to the field's type."""
    if key not in CONFIG_KEYS:
        raise ConfigError(f"unknown config key '{key}'")
    if raw is None:
        if key in _OPTIONAL_FLOAT_KEYS or key in _OPTIONAL_STR_KEYS:
            return None
        raise ConfigError(f"{key}: value missing")

    if key in _FLOAT_KEYS:
        return _parse_float(key, raw)
    if key in _OPTIONAL_FLOAT_KEYS:
        if str(raw).strip().lower() in ("", "none", "auto"):
            return None
        return _parse_float(key, raw)
    if key in _INT_KEYS:
        try:
            return int(str(raw).strip())
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got '{raw}'") from None
    if key in _BOOL_KEYS:
        return _parse_bool(key, raw)
    if key in _LIST_KEYS:
        if isinstance(raw, (list, tuple)):
            return tuple(_parse_float(key, v) for v in raw)
        parts = [p for p in str(raw).replace(";", ",").split(",") if p.strip()]
        return tuple(_parse_float(key, p) for p in parts)
    if key in _OPTIONAL_STR_KEYS:
        text = str(raw).strip()
        return text or None
    return str(raw).strip()


def read_config_file(path: str | Path) -> dict:
    """Parse a flat key/value config file into typed values."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    raw = dotenv_values(path)
    values = {}
    for key, value in raw.items():
        norm = key.strip().lower().replace("-", "_")
        values[norm] = coerce_value(norm, value)
    logger.debug("config_file_read", path=str(path), keys=sorted(values))
    return values


def read_environment(environ: dict | None = None) -> dict:
    """Collect SWE_FEMLAB_<KEY> overrides from the environment."""
    environ = os.environ if environ is None else environ
    values = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower()
        values[key] = coerce_value(key, value)
    return values


def load_experiment_config(experiment: str, path: str | Path | None = None,
                           overrides: dict | None = None,
                           environ: dict | None = None) -> ExperimentConfig:
    """
    Resolve an ExperimentConfig.

    Args:
        experiment: command name (balance | steady | kelvin-circular | kelvin-converge | spectrum)
        path: optional flat key/value config file
        overrides: CLI flag values; None entries are ignored (flag not given)
        environ: environment mapping (defaults to os.environ)
    """
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{experiment}', expected one of {EXPERIMENTS}")

    values: dict = dict(EXPERIMENT_DEFAULTS[experiment])
    sources = ["defaults"]

    if path is not None:
        values.update(read_config_file(path))
        sources.append(str(path))

    env_values = read_environment(environ)
    if env_values:
        values.update(env_values)
        sources.append("environment")

    if overrides:
        flag_values = {k: coerce_value(k, v) for k, v in overrides.items() if v is not None}
        values.update(flag_values)
        if flag_values:
            sources.append("flags")

    values["experiment"] = experiment
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    config = ExperimentConfig(**values).validate()
    logger.info("config_resolved", experiment=experiment, sources=sources)
    return config
