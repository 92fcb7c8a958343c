"""
Configuration loading utilities for replictl.
"""

import logging
import os
import tomllib
from pathlib import Path
from typing import Any, Optional

from models.errors import InputDataError

SETTINGS_FILE = "settings.toml"
DEFAULT_PRESET = "desk"

# Alternate names accepted by --preset
PRESET_ALIASES = {"paper": "full", "paper-scenario2": "full-scenario2"}


def project_root() -> Path:
    return Path(__file__).resolve().parents[2]


def presets_folder() -> Path:
    return project_root() / "configs"


def list_presets() -> list[str]:
    folder = presets_folder()
    if not folder.is_dir():
        return []
    return sorted(p.name for p in folder.iterdir() if (p / SETTINGS_FILE).is_file())


def resolve_preset(preset: Optional[str]) -> Optional[str]:
    """Map an alias onto its preset folder name."""
    if preset is None:
        return None
    return PRESET_ALIASES.get(preset, preset)


def get_config_paths(filename: str, preset: Optional[str] = None) -> list[str]:
    """Get the list of config file paths to try in order of priority."""
    paths = []

    env_config_folder = os.environ.get("REPLICTL_CONFIG_FOLDER")
    if env_config_folder:
        paths.append(os.path.join(env_config_folder, filename))

    paths.append(str(presets_folder() / (preset or DEFAULT_PRESET) / filename))
    return paths


def _read_toml(path: str) -> dict[str, Any]:
    with open(path, "rb") as f:
        return tomllib.load(f)


def load_settings(preset: Optional[str] = None, path: Optional[str] = None) -> dict[str, Any]:
    """
    Load settings from an explicit TOML file or the first existing file on the search path.

    An explicit path that does not exist, or any malformed TOML file, raises
    InputDataError. A preset that cannot be found yields defaults.
    """
    name = resolve_preset(preset)
    if name is not None and name not in list_presets():
        raise InputDataError(f"unknown preset '{preset}', available: {', '.join(list_presets()) or 'none'}")

    if path is not None:
        if not os.path.isfile(path):
            raise InputDataError(f"configuration file not found: {path}")
        candidates = [path]
    else:
        candidates = get_config_paths(SETTINGS_FILE, name)

    for settings_path in candidates:
        try:
            settings = _read_toml(settings_path)
        except FileNotFoundError:
            continue
        except tomllib.TOMLDecodeError as e:
            logging.error(f"Could not decode TOML from '{settings_path}': {e}")
            raise InputDataError(f"malformed configuration file {settings_path}: {e}") from e
        logging.info(f"Loaded settings from '{settings_path}'")
        return settings

    logging.warning("Settings file not found at any location. Using defaults.")
    return {}
