"""
JSON loading for custom flux tables, preset files and run configs.
Every file goes through validate_json_file before it is parsed for real.
"""
import json
import logging
import os

from errors import ConfigurationError
from experiments import ExperimentPreset, get_preset
from systems import get_builtin_system, system_custom, validate_flux_table

logger = logging.getLogger(__name__)

CUSTOM_PREFIX = "custom:"


def validate_json_file(file_path, required_fields=()):
    """
    Validate that a file exists, has a .json extension and holds a JSON
    object with the required top-level fields.
    Returns (is_valid, message) tuple.
    """
    if not os.path.exists(file_path):
        return False, f"File does not exist: {file_path}"

    if not file_path.lower().endswith('.json'):
        return False, f"File must have .json extension: {file_path}"

    try:
        with open(file_path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        return False, f"Invalid JSON in {file_path}: line {e.lineno}: {e.msg}"
    except OSError as e:
        return False, f"Error reading {file_path}: {e}"

    if not isinstance(data, dict):
        return False, f"{file_path} must contain a JSON object"

    missing_fields = set(required_fields) - set(data)
    if missing_fields:
        return False, f"{file_path}: missing required fields: {', '.join(sorted(missing_fields))}"

    return True, f"File validated successfully: {file_path}"


def _read_json(file_path, required_fields=()):
    is_valid, message = validate_json_file(file_path, required_fields)
    if not is_valid:
        raise ConfigurationError(message)
    with open(file_path, 'r') as f:
        return json.load(f)


def load_flux_table(file_path):
    data = _read_json(file_path)
    try:
        validate_flux_table(data)
    except ConfigurationError as e:
        raise ConfigurationError(f"{file_path}: {e}", field=e.field, term_index=e.term_index)
    return data


def load_custom_system(file_path):
    """
    SystemDefinition from a {"phi": [[c,p,q],...], "a": [...], "b": [...]} file.
    """
    table = load_flux_table(file_path)
    name = table.get('name') or os.path.splitext(os.path.basename(file_path))[0]
    logger.info("Loaded custom system '%s' from %s", name, file_path)
    return system_custom(table, name=name)


def resolve_system(selector):
    """
    kk | korchinski | custom:<path>.
    """
    if selector.startswith(CUSTOM_PREFIX):
        return load_custom_system(selector[len(CUSTOM_PREFIX):])
    return get_builtin_system(selector)


def load_preset_file(file_path):
    data = _read_json(file_path, required_fields=('name', 'system', 'riemann', 'domain', 'T'))
    system = data['system']
    if isinstance(system, str) and system.startswith(CUSTOM_PREFIX):
        # Embed the table so the preset stays self-contained in worker processes
        path = system[len(CUSTOM_PREFIX):]
        if not os.path.isabs(path):
            path = os.path.join(os.path.dirname(file_path), path)
        table = load_flux_table(path)
        data = dict(data, system=table.get('name', 'custom'), system_table=table)
    try:
        return ExperimentPreset.from_dict(data)
    except ConfigurationError as e:
        raise ConfigurationError(f"{file_path}: {e}", field=e.field)


def resolve_preset(selector):
    """
    Built-in preset name or path to a preset .json file.
    """
    if selector.lower().endswith('.json'):
        return load_preset_file(selector)
    return get_preset(selector)


def save_preset_file(preset, file_path):
    directory = os.path.dirname(file_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(file_path, 'w') as f:
        json.dump(preset.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    return file_path


def load_config_file(file_path):
    """
    Raw run-config dictionary; key validation happens in settings.
    """
    return _read_json(file_path)
