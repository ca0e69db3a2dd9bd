"""Configuration file and environment handling."""
import os
from pathlib import Path
from typing import Dict, Optional

import yaml

CONFIG_FILENAME = ".memo-qcd.yml"
THREADS_ENV = "MEMOQCD_THREADS"


def get_config(base_path: Path) -> Dict:
    """
    Get the config file from the base path.

    The file holds one mapping per sub-command, e.g. ``qfm-search: {generations: 10}``.

    :param base_path: The base path to the .memo-qcd.yml file.
    :return: Configuration
    """
    config_file = Path(base_path) / CONFIG_FILENAME

    if not config_file.exists():
        return dict()

    with open(config_file) as f:
        config = yaml.safe_load(f)

    if config is None:
        return dict()
    if not isinstance(config, dict):
        raise ValueError(f"{config_file} must hold a mapping of sub-command names to option mappings")
    return config


def command_defaults(config: Dict, command: str) -> Dict:
    """
    Get the option defaults of a sub-command from the configuration.

    Keys may be written with dashes like the flags (``log-path``) or with underscores.

    :param config: Configuration as returned by get_config()
    :param command: Sub-command name
    :return: mapping of argparse destinations to default values
    """
    section = config.get(command) or dict()
    if not isinstance(section, dict):
        raise ValueError(f'Configuration of "{command}" must be a mapping')
    return {key.replace("-", "_"): value for key, value in section.items()}


def resolve_threads(threads: Optional[int]) -> int:
    """
    Get the worker count: the flag, else the MEMOQCD_THREADS environment variable, else 1.

    :param threads: Value of the --threads flag
    :return: number of worker threads
    """
    if threads is None:
        value = os.environ.get(THREADS_ENV, "1")
        try:
            threads = int(value)
        except ValueError:
            raise ValueError(f'{THREADS_ENV} must be an integer, got "{value}"')
    if threads < 1:
        raise ValueError(f"Number of threads must be positive, got {threads}")
    return threads
