#!/usr/bin/env python3
"""
Configuration Manager for hdmpc

Provides solver settings from environment variables and config files.
Configuration priority (highest to lowest):
    1. Command-line flags
    2. The "solver" section of the instance document
    3. Environment variables
    4. .claude/settings.local.json (personal, gitignored)
    5. .claude/settings.json (team defaults)
    6. Built-in defaults

Environment Variables:
    HDMPC_SEED - Seed for oracle sampling (default: 0)
    HDMPC_SINGLE_THREAD - Run Jacobi sweeps sequentially (true/false)
    HDMPC_MAX_WORKERS - Thread pool size for concurrent sweeps
    HDMPC_EARLY_EXIT - Stop the outer loop once the average is feasible
    HDMPC_LOG_LEVEL - Logging level for the CLI (DEBUG, INFO, WARNING, ERROR)
"""

from __future__ import annotations

import threading
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Mapping, Optional, cast

from assistant_skills_lib.config_manager import BaseConfigManager

from .error_handler import ValidationError

DEFAULT_TIGHTENING_RATIO = 0.5
DEFAULT_FACE_ENUMERATION_CAP = 6
DEFAULT_L0_VERTEX_LIMIT = 20
DEFAULT_VERTEX_ENUMERATION_CAP = 4096
DEFAULT_CONVERGENCE_TOL = 1e-8


def _parse_bool(value: str) -> bool:
    return value.lower() in ("true", "1", "yes")


@dataclass(frozen=True)
class SolverOptions:
    """Typed, validated view of the solver settings.

    Attributes:
        tightening_ratio: c_t as a fraction of the Slater margin, in (0, 1)
        early_exit: Stop the outer loop once the primal average is feasible
        single_thread: Run Jacobi sweeps sequentially
        max_workers: Thread pool size when sweeps run concurrently
        seed: Seed for randomized oracle sampling
        face_enumeration_cap: Largest local block solved by face enumeration
        l0_vertex_limit: Largest n_u for the exact vertex norm bound
        vertex_enumeration_cap: Limit on polytope vertex enumeration work
        record_history: Keep per-outer-iteration diagnostics
        convergence_tol: State norm treated as the origin
        distributed: Run steps through the coordinator/agent harness
    """

    tightening_ratio: float = DEFAULT_TIGHTENING_RATIO
    early_exit: bool = False
    single_thread: bool = True
    max_workers: int = 4
    seed: int = 0
    face_enumeration_cap: int = DEFAULT_FACE_ENUMERATION_CAP
    l0_vertex_limit: int = DEFAULT_L0_VERTEX_LIMIT
    vertex_enumeration_cap: int = DEFAULT_VERTEX_ENUMERATION_CAP
    record_history: bool = False
    convergence_tol: float = DEFAULT_CONVERGENCE_TOL
    distributed: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.tightening_ratio < 1.0:
            raise ValidationError(
                "must lie strictly between 0 and 1", field="solver.tightening_ratio"
            )
        if self.max_workers < 1:
            raise ValidationError("must be at least 1", field="solver.max_workers")
        if self.face_enumeration_cap < 0:
            raise ValidationError(
                "must be non-negative", field="solver.face_enumeration_cap"
            )
        if self.l0_vertex_limit < 0:
            raise ValidationError("must be non-negative", field="solver.l0_vertex_limit")
        if self.vertex_enumeration_cap < 1:
            raise ValidationError(
                "must be at least 1", field="solver.vertex_enumeration_cap"
            )
        if self.convergence_tol < 0:
            raise ValidationError("must be non-negative", field="solver.convergence_tol")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SolverOptions":
        """Build options from a settings mapping, ignoring unknown keys."""
        known = {f.name: f for f in fields(cls)}
        kwargs: Dict[str, Any] = {}
        for key, value in data.items():
            if key not in known or value is None:
                continue
            default = known[key].default
            try:
                if isinstance(default, bool):
                    kwargs[key] = (
                        _parse_bool(value) if isinstance(value, str) else bool(value)
                    )
                elif isinstance(default, int):
                    kwargs[key] = int(value)
                else:
                    kwargs[key] = float(value)
            except (TypeError, ValueError):
                raise ValidationError(
                    f"cannot convert {value!r}", field=f"solver.{key}"
                )
        return cls(**kwargs)

    def merged(self, **overrides: Any) -> "SolverOptions":
        """Return a copy with the non-None overrides applied."""
        data = asdict(self)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return SolverOptions.from_mapping(data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class ConfigManager(BaseConfigManager):
    """Manages hdmpc solver settings from environment variables and config files."""

    def __init__(self) -> None:
        """Initialize the configuration manager."""
        super().__init__()

    def get_service_name(self) -> str:
        """Returns the name of the service, which is 'hdmpc'."""
        return "hdmpc"

    def get_default_config(self) -> Dict[str, Any]:
        """Returns the default configuration dictionary for hdmpc."""
        return {
            "log_level": "WARNING",
            "solver": {
                "tightening_ratio": DEFAULT_TIGHTENING_RATIO,
                "early_exit": False,
                "single_thread": True,
                "max_workers": 4,
                "seed": 0,
                "face_enumeration_cap": DEFAULT_FACE_ENUMERATION_CAP,
                "l0_vertex_limit": DEFAULT_L0_VERTEX_LIMIT,
                "vertex_enumeration_cap": DEFAULT_VERTEX_ENUMERATION_CAP,
                "record_history": False,
                "convergence_tol": DEFAULT_CONVERGENCE_TOL,
            },
        }

    def get_hdmpc_config(self) -> Dict[str, Any]:
        """
        Get hdmpc configuration merged with environment variable overrides.

        Returns:
            Configuration dictionary
        """
        defaults = self.get_default_config()
        file_config = self.config.get(self.service_name, {})
        merged = self._deep_merge(defaults, file_config)
        env_overrides = self._get_env_overrides()
        final_config = self._deep_merge(merged, env_overrides)
        return cast(Dict[str, Any], final_config)

    def _get_env_overrides(self) -> Dict[str, Any]:
        """Get configuration overrides from environment variables."""
        solver: Dict[str, Any] = {}
        overrides: Dict[str, Any] = {}

        if seed := self.get_credential_from_env("SEED"):
            try:
                solver["seed"] = int(seed)
            except ValueError:
                pass
        if workers := self.get_credential_from_env("MAX_WORKERS"):
            try:
                solver["max_workers"] = int(workers)
            except ValueError:
                pass
        if single := self.get_credential_from_env("SINGLE_THREAD"):
            solver["single_thread"] = _parse_bool(single)
        if early := self.get_credential_from_env("EARLY_EXIT"):
            solver["early_exit"] = _parse_bool(early)
        if level := self.get_credential_from_env("LOG_LEVEL"):
            overrides["log_level"] = level.upper()

        if solver:
            overrides["solver"] = solver
        return overrides

    def validate_config(self) -> List[str]:
        """Validate configuration and return list of issues."""
        errors: List[str] = []
        config = self.get_hdmpc_config()

        if config.get("log_level") not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            errors.append(
                f"Invalid log level {config.get('log_level')!r}. "
                "Set HDMPC_LOG_LEVEL to DEBUG, INFO, WARNING or ERROR"
            )
        try:
            SolverOptions.from_mapping(config.get("solver", {}))
        except ValidationError as e:
            errors.append(str(e))
        return errors


# Global config manager instance with thread-safe initialization
_config_manager: Optional[ConfigManager] = None
_config_manager_lock = threading.Lock()


def get_config_manager() -> ConfigManager:
    """Get or create global ConfigManager instance.

    Thread-safe singleton access using double-checked locking pattern.
    """
    global _config_manager
    if _config_manager is None:
        with _config_manager_lock:
            if _config_manager is None:
                _config_manager = ConfigManager()
    return _config_manager


def get_config() -> Dict[str, Any]:
    """Get hdmpc configuration."""
    return get_config_manager().get_hdmpc_config()


def get_solver_defaults() -> Dict[str, Any]:
    """Get solver default settings."""
    config = get_config()
    return cast(Dict[str, Any], config.get("solver", {}))


def get_solver_options(
    document_section: Optional[Mapping[str, Any]] = None, **overrides: Any
) -> SolverOptions:
    """Resolve solver options from settings, an instance document and flags.

    Args:
        document_section: The "solver" section of an instance document
        **overrides: Command-line values; None means "not given"

    Returns:
        Validated SolverOptions
    """
    base = SolverOptions.from_mapping(get_solver_defaults())
    if document_section:
        base = base.merged(**dict(document_section))
    return base.merged(**overrides)
