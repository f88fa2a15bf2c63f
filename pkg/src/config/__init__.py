from .config import ConfigError, ConfigFileError, ConfigValidationError, RunConfig, configure_logging

__all__ = ['RunConfig', 'ConfigError', 'ConfigFileError', 'ConfigValidationError', 'configure_logging']
