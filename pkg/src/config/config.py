import copy
import json
import logging
import math
import os
import sys
from logging.handlers import RotatingFileHandler
from typing import Any, Dict, List, Optional

from src.inference.base import PowerPosteriorFamily
from src.inference.families import FAMILIES
from src.pib.errors import PIBError
from src.pib.world import World, build_world, builtin_world


class ConfigError(Exception):
    """Base exception for configuration-related errors."""
    pass


class ConfigValidationError(ConfigError):
    """Raised when configuration validation fails."""
    pass


class ConfigFileError(ConfigError):
    """Raised when there are issues with the configuration file."""
    pass


_MISSING = object()


class RunConfig:
    """Loads and validates one experiment description.

    Reads a JSON document, checks every key strictly, builds the world or
    conjugate model it names and initialises the "pib" logger tree with a
    console handler and an optional rotating file handler.

    Attributes:
        mode (str): One of VALID_MODES.
        world (Optional[World]): World for curve runs.
        n_past (int): Past draws N.
        n_future (int): Future draws M.
        betas (List[float]): Beta grid, sorted as given.
        solver (Dict[str, Any]): k_theta, restarts, max_iters, tol, seed, require_convergence.
        model (Optional[PowerPosteriorFamily]): Conjugate model for conjugate_limits and gibbs runs.
        gibbs (Dict[str, Any]): beta, step_size (None picks a stable step), max_iters, tol,
            init_mean, init_log_std.
        augmentation (Dict[str, Any]): x, theta, obs_var, noise_stds, mc_samples, seed.
        output (Optional[str]): CSV path; None writes to standard output.
        threads (int): Worker threads.
        log_level (str): Logging level name.
        log_file (Optional[str]): Rotating log file path.
        logger (Optional[logging.Logger]): The configured "pib" logger.
    """

    VALID_MODES = {"curve", "conjugate_limits", "gibbs", "augmentation", "verify"}
    VALID_LOG_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
    TOP_LEVEL_KEYS = {
        "mode", "world", "n_past", "n_future", "betas", "solver", "model",
        "gibbs", "augmentation", "output", "threads", "logging",
    }
    SOLVER_DEFAULTS = {
        "k_theta": 2, "restarts": 8, "max_iters": 10_000, "tol": 1e-10, "seed": 0, "require_convergence": False,
    }
    GIBBS_DEFAULTS = {
        "step_size": None, "max_iters": 100_000, "tol": 1e-9, "init_mean": 0.0, "init_log_std": 0.0,
    }
    AUGMENTATION_DEFAULTS = {"x": 0.0, "theta": 0.0, "obs_var": 1.0, "mc_samples": 100_000, "seed": 0}
    MODEL_KEYS = {
        "beta_bernoulli": {"prior_a", "prior_b", "k", "n"},
        "gaussian": {"prior_mean", "prior_var", "obs_var", "data"},
        "dirichlet_categorical": {"prior_alphas", "counts"},
    }
    MAX_GRID_POINTS = 100_000

    def __init__(self, config_file: str) -> None:
        """Initializes the configuration from a file.

        Args:
            config_file: Path to the JSON configuration.

        Raises:
            ConfigFileError: If the file does not exist, cannot be read or is not valid JSON.
            ConfigValidationError: If a setting is missing, unknown or invalid.
        """
        self.config_file = config_file
        self.config: Dict[str, Any] = {}
        self.logger: Optional[logging.Logger] = None

        try:
            self._load_config_file()
            self._parse_configuration()
            self._validate_config()
            self._initiate_logger()
        except ConfigError:
            raise
        except Exception as e:
            raise ConfigError(f"Unexpected error during configuration initialization: {e}") from e

    def _load_config_file(self) -> None:
        """Loads and parses the configuration file.

        Raises:
            ConfigFileError: If file doesn't exist, can't be read, or has parsing errors.
        """
        if not os.path.exists(self.config_file):
            raise ConfigFileError(f"Configuration file '{self.config_file}' not found")

        if not os.access(self.config_file, os.R_OK):
            raise ConfigFileError(f"Configuration file '{self.config_file}' is not readable")

        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                document = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigFileError(f"Failed to parse configuration file '{self.config_file}': {e}") from e
        except (OSError, UnicodeDecodeError) as e:
            raise ConfigFileError(f"Unexpected error reading configuration file '{self.config_file}': {e}") from e

        if not isinstance(document, dict):
            raise ConfigFileError(f"Configuration file '{self.config_file}' must hold a JSON object")
        if "mode" not in document:
            raise ConfigFileError(f"Missing required key 'mode' in config file '{self.config_file}'")
        self.config = document

    # Typed accessors over dotted paths ("solver.k_theta").

    def _lookup(self, key: str) -> Any:
        node: Any = self.config
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return _MISSING
            node = node[part]
        return node

    def _require(self, key: str) -> Any:
        value = self._lookup(key)
        if value is _MISSING or value is None:
            raise ConfigValidationError(f"Required configuration '{key}' not found")
        return value

    @staticmethod
    def _as_int(key: str, value: Any) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigValidationError(f"Invalid integer value for '{key}': {value!r}")
        return value

    @staticmethod
    def _as_float(key: str, value: Any) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigValidationError(f"Invalid number for '{key}': {value!r}")
        return float(value)

    @staticmethod
    def _as_bool(key: str, value: Any) -> bool:
        if not isinstance(value, bool):
            raise ConfigValidationError(f"Invalid boolean value for '{key}': {value!r}. Use true or false")
        return value

    @staticmethod
    def _as_str(key: str, value: Any) -> str:
        if not isinstance(value, str) or not value.strip():
            raise ConfigValidationError(f"Required configuration '{key}' is empty")
        return value.strip()

    def _get_required_int(self, key: str) -> int:
        return self._as_int(key, self._require(key))

    def _get_required_float(self, key: str) -> float:
        return self._as_float(key, self._require(key))

    def _get_required_str(self, key: str) -> str:
        return self._as_str(key, self._require(key))

    def _get_required_list(self, key: str) -> List[Any]:
        value = self._require(key)
        if not isinstance(value, list):
            raise ConfigValidationError(f"Configuration '{key}' must be a list, got {value!r}")
        return value

    def _get_optional_int(self, key: str, default: Optional[int]) -> Optional[int]:
        value = self._lookup(key)
        return default if value is _MISSING or value is None else self._as_int(key, value)

    def _get_optional_float(self, key: str, default: Optional[float]) -> Optional[float]:
        value = self._lookup(key)
        return default if value is _MISSING or value is None else self._as_float(key, value)

    def _get_optional_bool(self, key: str, default: bool) -> bool:
        value = self._lookup(key)
        return default if value is _MISSING or value is None else self._as_bool(key, value)

    def _get_optional_str(self, key: str) -> Optional[str]:
        value = self._lookup(key)
        if value is _MISSING or value is None:
            return None
        if not isinstance(value, str):
            raise ConfigValidationError(f"Configuration '{key}' must be a string, got {value!r}")
        return value.strip() or None

    def _check_keys(self, section: str, allowed: set) -> None:
        node = self.config if not section else self._lookup(section)
        if node is _MISSING or node is None:
            return
        if not isinstance(node, dict):
            raise ConfigValidationError(f"Configuration '{section}' must be an object, got {node!r}")
        unknown = sorted(set(node) - allowed)
        if unknown:
            where = f" in '{section}'" if section else ""
            raise ConfigValidationError(f"Unknown key{where}: {', '.join(unknown)}")

    def _number_list(self, key: str, values: List[Any]) -> List[float]:
        return [self._as_float(f"{key}[{i}]", v) for i, v in enumerate(values)]

    def _parse_betas(self) -> List[float]:
        raw = self._require("betas")
        if isinstance(raw, list):
            return self._number_list("betas", raw)
        if not isinstance(raw, dict):
            raise ConfigValidationError(f"'betas' must be a list or an object with start/stop/step, got {raw!r}")
        self._check_keys("betas", {"start", "stop", "step"})
        start = self._get_required_float("betas.start")
        stop = self._get_required_float("betas.stop")
        step = self._get_required_float("betas.step")
        if step <= 0 or stop < start:
            raise ConfigValidationError(f"'betas' range needs step > 0 and stop >= start, got {raw!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        if count > self.MAX_GRID_POINTS:
            raise ConfigValidationError(f"'betas' range yields {count} points (limit {self.MAX_GRID_POINTS})")
        # Rounded so 0.1 + 2 * 0.1 prints as 0.3.
        return [round(start + i * step, 12) for i in range(count)]

    def _parse_world(self) -> World:
        raw = self._require("world")
        try:
            if isinstance(raw, str):
                return builtin_world(raw)
            if isinstance(raw, dict):
                self._check_keys("world", {"phi_prior", "obs_given_phi"})
                return build_world(self._require("world.phi_prior"), self._require("world.obs_given_phi"))
        except PIBError as e:
            raise ConfigValidationError(f"Invalid 'world': {e}") from e
        raise ConfigValidationError(f"'world' must be a built-in name or an object with tables, got {raw!r}")

    def _parse_model(self) -> PowerPosteriorFamily:
        family = self._get_required_str("model.family")
        if family not in FAMILIES:
            raise ConfigValidationError(
                f"Invalid model family '{family}'. Valid options: {', '.join(sorted(FAMILIES))}"
            )
        self._check_keys("model", self.MODEL_KEYS[family] | {"family"})
        kwargs = {key: self._require(f"model.{key}") for key in sorted(self.MODEL_KEYS[family])}
        try:
            return FAMILIES[family](**kwargs)
        except (PIBError, TypeError, ValueError) as e:
            raise ConfigValidationError(f"Invalid 'model' for family '{family}': {e}") from e

    def _section(
        self, name: str, defaults: Dict[str, Any], required: tuple = (), extra: tuple = ()
    ) -> Dict[str, Any]:
        self._check_keys(name, set(defaults) | set(required) | set(extra))
        section = {}
        for key in required:
            section[key] = self._get_required_float(f"{name}.{key}")
        for key, default in defaults.items():
            dotted = f"{name}.{key}"
            if isinstance(default, bool):
                section[key] = self._get_optional_bool(dotted, default)
            elif isinstance(default, int):
                section[key] = self._get_optional_int(dotted, default)
            else:
                section[key] = self._get_optional_float(dotted, default)
        return section

    def _parse_configuration(self) -> None:
        """Parses all configuration values with strict validation."""
        self._check_keys("", self.TOP_LEVEL_KEYS)
        self.mode = self._get_required_str("mode")
        if self.mode not in self.VALID_MODES:
            raise ConfigValidationError(
                f"Invalid mode '{self.mode}'. Valid options: {', '.join(sorted(self.VALID_MODES))}"
            )

        self.world: Optional[World] = None
        self.model: Optional[PowerPosteriorFamily] = None
        self.betas: List[float] = []
        self.n_past = self._get_optional_int("n_past", 1)
        self.n_future = self._get_optional_int("n_future", 1)
        self.solver = self._section("solver", self.SOLVER_DEFAULTS)
        self.gibbs: Dict[str, Any] = {}
        self.augmentation: Dict[str, Any] = {}

        if self.mode == "curve":
            self.world = self._parse_world()
            self.betas = self._parse_betas()
        elif self.mode == "conjugate_limits":
            self.model = self._parse_model()
            self.betas = self._parse_betas()
        elif self.mode == "gibbs":
            self.model = self._parse_model()
            self.gibbs = self._section("gibbs", self.GIBBS_DEFAULTS, required=("beta",))
        elif self.mode == "augmentation":
            self.augmentation = self._section("augmentation", self.AUGMENTATION_DEFAULTS, extra=("noise_stds",))
            self.augmentation["noise_stds"] = self._number_list(
                "augmentation.noise_stds", self._get_required_list("augmentation.noise_stds")
            )

        self.output = self._get_optional_str("output")
        self.threads = self._get_optional_int("threads", 1)

        self._check_keys("logging", {"level", "file"})
        self.log_level = self._get_optional_str("logging.level") or "WARNING"
        self.log_file = self._get_optional_str("logging.file")

    def _create_log_file(self, log_path: str) -> None:
        """Creates a log file and its directory if needed.

        Raises:
            ConfigError: If log file or directory cannot be created.
        """
        try:
            directory = os.path.dirname(log_path)
            if directory:
                if not os.path.exists(directory):
                    os.makedirs(directory, mode=0o755)
                elif not os.access(directory, os.W_OK):
                    raise ConfigError(f"Log directory '{directory}' is not writable")
            if os.path.exists(log_path) and not os.access(log_path, os.W_OK):
                raise ConfigError(f"Log file '{log_path}' is not writable")
        except OSError as e:
            raise ConfigError(f"Failed to create log file or directory for '{log_path}': {e}") from e

    def _validate_config(self) -> None:
        """Validates cross-field constraints.

        Raises:
            ConfigValidationError: If any settings are invalid.
        """
        if self.n_past < 1 or self.n_future < 1:
            raise ConfigValidationError(
                f"n_past and n_future must be at least 1, got {self.n_past} and {self.n_future}"
            )

        if self.threads < 1:
            raise ConfigValidationError(f"threads must be at least 1, got: {self.threads}")
        if self.threads > 256:
            raise ConfigValidationError(f"threads should not exceed 256, got: {self.threads}")

        solver = self.solver
        if solver["k_theta"] < 1 or solver["restarts"] < 1 or solver["max_iters"] < 1:
            raise ConfigValidationError("solver.k_theta, solver.restarts and solver.max_iters must be >= 1")
        if solver["tol"] <= 0:
            raise ConfigValidationError(f"solver.tol must be positive, got {solver['tol']}")

        if self.mode == "curve":
            if not self.betas:
                raise ConfigValidationError("'betas' must not be empty")
            bad = [b for b in self.betas if not 0.0 <= b < 1.0]
            if bad:
                raise ConfigValidationError(f"curve mode requires every beta in [0, 1), got {bad}")
            if any(b >= a for b, a in zip(self.betas, self.betas[1:])):
                raise ConfigValidationError(f"'betas' must be strictly increasing, got {self.betas}")

        if self.mode == "conjugate_limits":
            if not self.betas or any(b < 0 for b in self.betas):
                raise ConfigValidationError(f"'betas' must be a non-empty list of values >= 0, got {self.betas}")

        if self.mode == "gibbs":
            if self.model.name != "gaussian":
                raise ConfigValidationError(f"gibbs mode needs model.family 'gaussian', got '{self.model.name}'")
            if self.gibbs["beta"] < 0:
                raise ConfigValidationError(f"gibbs.beta must be >= 0, got {self.gibbs['beta']}")
            step = self.gibbs["step_size"]
            if step is not None and step <= 0:
                raise ConfigValidationError(f"gibbs.step_size must be positive, got {step}")
            if self.gibbs["max_iters"] < 1 or self.gibbs["tol"] <= 0:
                raise ConfigValidationError("gibbs.max_iters must be >= 1 and gibbs.tol positive")

        if self.mode == "augmentation":
            aug = self.augmentation
            if aug["obs_var"] <= 0:
                raise ConfigValidationError(f"augmentation.obs_var must be positive, got {aug['obs_var']}")
            if aug["mc_samples"] < 2:
                raise ConfigValidationError(f"augmentation.mc_samples must be >= 2, got {aug['mc_samples']}")
            if not aug["noise_stds"] or any(t < 0 for t in aug["noise_stds"]):
                raise ConfigValidationError(
                    f"augmentation.noise_stds must be a non-empty list of values >= 0, got {aug['noise_stds']}"
                )

        if self.log_level.upper() not in self.VALID_LOG_LEVELS:
            raise ConfigValidationError(
                f"Invalid log level '{self.log_level}'. "
                f"Valid options: {', '.join(sorted(self.VALID_LOG_LEVELS))}"
            )

    def _initiate_logger(self) -> None:
        """Initializes the "pib" logger with console and file handlers.

        Sets up:
            - Console handler (stderr).
            - File handler (if `log_file` is specified), rotated at 10MB with 3 backups.

        Raises:
            ConfigError: If logger setup fails.
        """
        self.logger = configure_logging(self.log_level, self.log_file, self._create_log_file)

    def override(self, output: Optional[str] = None, seed: Optional[int] = None, threads: Optional[int] = None) -> None:
        """Applies command-line overrides and re-validates.

        Raises:
            ConfigValidationError: If an override is invalid.
        """
        if output is not None:
            self.output = output
            self.config["output"] = output
        if seed is not None:
            self.solver["seed"] = seed
            self.config.setdefault("solver", {})["seed"] = seed
            if self.augmentation:
                self.augmentation["seed"] = seed
                self.config.setdefault("augmentation", {})["seed"] = seed
        if threads is not None:
            self.threads = threads
            self.config["threads"] = threads
        self._validate_config()

    def get(self, key: str) -> Any:
        """Retrieves a raw value by dotted path.

        Raises:
            ConfigError: If the key doesn't exist.
        """
        value = self._lookup(key)
        if value is _MISSING:
            raise ConfigError(f"Configuration key '{key}' not found")
        return value

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)

    def __str__(self) -> str:
        return (
            f"RunConfig(mode='{self.mode}', betas={len(self.betas)}, "
            f"n_past={self.n_past}, n_future={self.n_future}, "
            f"seed={self.solver['seed']}, threads={self.threads}, "
            f"output='{self.output or '-'}')"
        )

    def save(self, config_file: Optional[str] = None) -> None:
        """Writes the (possibly overridden) document back as JSON.

        Raises:
            ConfigError: If file cannot be written.
        """
        target_file = config_file or self.config_file
        try:
            directory = os.path.dirname(target_file)
            if directory and not os.path.exists(directory):
                os.makedirs(directory, mode=0o755)
            with open(target_file, "w", encoding="utf-8") as f:
                json.dump(self.config, f, indent=2, sort_keys=True)
                f.write("\n")
            if self.logger:
                self.logger.info("Configuration saved to: %s", target_file)
        except OSError as e:
            raise ConfigError(f"Failed to save configuration file '{target_file}': {e}") from e

    def reload(self) -> None:
        """Reloads configuration from the original file.

        Raises:
            ConfigError: If the reloaded file is missing or invalid; the previous state is kept.
        """
        previous = self.__dict__.copy()
        try:
            self.__init__(self.config_file)
        except ConfigError as e:
            self.__dict__.update(previous)
            raise ConfigError(f"Failed to reload configuration: {e}") from e
        if self.logger:
            self.logger.info("Configuration reloaded successfully")


def configure_logging(level: str = "WARNING", log_file: Optional[str] = None, prepare_file=None) -> logging.Logger:
    """Installs stderr (and optional rotating file) handlers on the "pib" logger.

    Raises:
        ConfigError: If a handler cannot be created.
    """
    formatter = logging.Formatter("%(asctime)s [%(levelname)s] %(name)s: %(message)s")
    try:
        log_level = getattr(logging, level.upper())
    except AttributeError:
        raise ConfigError(f"Invalid log level: {level}")

    logger = logging.getLogger("pib")
    logger.setLevel(log_level)
    if logger.hasHandlers():
        logger.handlers.clear()

    try:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(formatter)
        console_handler.setLevel(log_level)
        logger.addHandler(console_handler)
    except Exception as e:
        raise ConfigError(f"Failed to initialize console logging: {e}") from e

    if log_file:
        try:
            if prepare_file is not None:
                prepare_file(log_file)
            file_handler = RotatingFileHandler(
                log_file,
                maxBytes=10 * 1024 * 1024,  # 10MB
                backupCount=3,
                encoding="utf-8",
            )
            file_handler.setFormatter(formatter)
            file_handler.setLevel(log_level)
            logger.addHandler(file_handler)
        except ConfigError:
            raise
        except Exception as e:
            raise ConfigError(f"Failed to initialize file logging for '{log_file}': {e}") from e
    return logger
