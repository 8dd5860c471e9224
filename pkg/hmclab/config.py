"""Configuration module for the sampler laboratory."""

import os
import logging

from .errors import ConfigError

# Default configuration
DEFAULT_CONFIG = {
    'DB_PATH': 'hmclab.db',
    'API_HOST': '0.0.0.0',
    'API_PORT': 5000,
    'DEBUG': False,
    'LOG_LEVEL': 'INFO',
    'GRID_POINTS': 10000,      # sigma grid for worst-case rates
    'CERT_GRID_POINTS': 1000,  # sigma grid for Lyapunov certificates
    'ESS_METHOD': 'geyer',
    'ESS_MAX_LAG': 200,        # only used by the fixed-lag ESS method
    'STORE_RESULTS': False,
    'WORKERS': 1,
}

_INT_KEYS = ('API_PORT', 'GRID_POINTS', 'CERT_GRID_POINTS', 'ESS_MAX_LAG', 'WORKERS')
_BOOL_KEYS = ('DEBUG', 'STORE_RESULTS')

ENV_PREFIX = 'HMCLAB_'


def get_config():
    """Get configuration from environment variables, with defaults."""
    config = DEFAULT_CONFIG.copy()

    # Override from environment variables
    for key in config:
        env_key = f"{ENV_PREFIX}{key}"
        if env_key not in os.environ:
            continue
        raw = os.environ[env_key]
        if key in _INT_KEYS:
            try:
                config[key] = int(raw)
            except ValueError as e:
                raise ConfigError(f"{env_key} must be an integer, got {raw!r}") from e
        elif key in _BOOL_KEYS:
            config[key] = raw.lower() in ('true', '1', 'yes')
        else:
            config[key] = raw

    # Configure logging
    log_level = getattr(logging, str(config['LOG_LEVEL']).upper(), logging.INFO)
    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    return config
