import os

from dotenv import load_dotenv

from .error_handler import InputError
from .logging_setup import setup_logging

logger = setup_logging('config_loader')

DEFAULTS = {
    'NPH_THREADS': 1,
    'NPH_MVN_DRAWS': 200000,
    'NPH_PERMUTATIONS': 2500,
    'NPH_DAYS_PER_MONTH': 30.4375,
    'NPH_SEED': 2025,
}

CASTS = {
    'NPH_THREADS': int,
    'NPH_MVN_DRAWS': int,
    'NPH_PERMUTATIONS': int,
    'NPH_DAYS_PER_MONTH': float,
    'NPH_SEED': int,
}


class ConfigLoader:
    def __init__(self, env_file: str = None):
        # Values already present in the environment win over the .env file
        load_dotenv(env_file, override=False)

    def load_config(self, key: str, default=None):
        """Load a configuration value from the environment / .env file."""
        value = os.getenv(key)
        if value is None or value == '':
            if default is None and key in DEFAULTS:
                default = DEFAULTS[key]
            logger.debug(f"Config key {key} not set, using default {default}")
            return default

        cast = CASTS.get(key, str)
        try:
            value = cast(value)
        except ValueError as e:
            logger.error(f"Invalid value for {key}: {value!r}")
            raise InputError(f"invalid value for {key}: {value!r}", field=key) from e
        logger.debug(f"Loaded config: {key}={value}")
        return value

    def load_settings(self) -> dict:
        """Collect every known setting into a plain dict."""
        settings = {
            'threads': self.load_config('NPH_THREADS'),
            'mvn_draws': self.load_config('NPH_MVN_DRAWS'),
            'permutations': self.load_config('NPH_PERMUTATIONS'),
            'days_per_month': self.load_config('NPH_DAYS_PER_MONTH'),
            'seed': self.load_config('NPH_SEED'),
        }
        if settings['threads'] < 1:
            raise InputError("NPH_THREADS must be >= 1", field='NPH_THREADS')
        if settings['mvn_draws'] < 1:
            raise InputError("NPH_MVN_DRAWS must be >= 1", field='NPH_MVN_DRAWS')
        if settings['days_per_month'] <= 0:
            raise InputError("NPH_DAYS_PER_MONTH must be positive", field='NPH_DAYS_PER_MONTH')
        return settings


def load_settings(env_file: str = None, **overrides) -> dict:
    """Settings from the environment, with non-None overrides applied on top."""
    settings = ConfigLoader(env_file).load_settings()
    settings.update({k: v for k, v in overrides.items() if v is not None})
    return settings


if __name__ == "__main__":
    # Test run
    print(f"Settings: {load_settings()}")
