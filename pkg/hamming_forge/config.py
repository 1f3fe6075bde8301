#!/usr/bin/python3
"""
Hamming Forge Configuration
Module-level settings, enumeration cap resolution, logging setup and calibrated constants I/O
"""

import os
import sys
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Dict, Any, Optional

from dateutil import parser as date_parser
from dateutil import tz

from hamming_forge.errors import MalformedInput, PreconditionViolation, TooLarge

# Configuration
FORGE_CONFIG = {
    'enumeration_cap': 10**7,
    'epsilon_prime': 0.25,
    'node_budget': 10**5,
    'ln_precision_digits': 34,
    'constants_file': str(Path(__file__).resolve().parent.parent / 'constants' / 'binom_constants.json'),
    'log_file': None,
    'tolerance': 1e-9,
}

CAP_ENV_VAR = 'HAMMING_FORGE_CAP'
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
CONSTANT_NAMES = ('K', 'K_prime', 'K_basic3')

_cap_override: Optional[int] = None

logger = logging.getLogger(__name__)


def set_cap_override(cap: Optional[int]):
    """Install the --cap flag value for the rest of the process"""
    global _cap_override
    if cap is not None and cap <= 0:
        raise PreconditionViolation(f"cap must be positive, got {cap}")
    _cap_override = cap


def enumeration_cap(cap: Optional[int] = None) -> int:
    """Resolve the cap: explicit argument, then --cap, then the environment, then FORGE_CONFIG"""
    if cap is not None:
        return cap
    if _cap_override is not None:
        return _cap_override
    raw = os.environ.get(CAP_ENV_VAR)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise MalformedInput(f"{CAP_ENV_VAR} must be an integer, got {raw!r}")
        if value <= 0:
            raise MalformedInput(f"{CAP_ENV_VAR} must be positive, got {value}")
        return value
    return FORGE_CONFIG['enumeration_cap']


def tolerance() -> float:
    return FORGE_CONFIG['tolerance']


def setup_logging(verbose: bool = False, log_file: Optional[str] = None):
    """Configure root logging for CLI runs; stdout stays reserved for reports"""
    handlers = []
    target = log_file or FORGE_CONFIG['log_file']
    if target:
        handlers.append(logging.FileHandler(target))
    handlers.append(logging.StreamHandler(sys.stderr))

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True
    )


def utc_timestamp() -> str:
    """Current UTC time in ISO-8601"""
    return datetime.now(tz.tzutc()).replace(microsecond=0).isoformat()


def parse_timestamp(value: str) -> datetime:
    try:
        return date_parser.isoparse(value)
    except (ValueError, TypeError) as e:
        raise MalformedInput(f"Bad timestamp {value!r}: {e}")


def load_constants(path: Optional[str] = None) -> Dict[str, Any]:
    """Load the calibrated constants file"""
    target = Path(path or FORGE_CONFIG['constants_file'])
    try:
        with open(target, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise MalformedInput(f"Constants file not found: {target}")
    except json.JSONDecodeError as e:
        raise MalformedInput(f"Constants file {target} is not valid JSON: {e}")

    for name in CONSTANT_NAMES:
        entry = data.get(name)
        if not isinstance(entry, dict) or 'value' not in entry:
            raise MalformedInput(f"Constants file {target} has no value for {name}")
        if 'timestamp' in entry:
            parse_timestamp(entry['timestamp'])
    return data


def save_constants(constants: Dict[str, Any], path: Optional[str] = None,
                   stamp: Optional[str] = None) -> Path:
    """Write the calibrated constants file, each entry stamped with the write time"""
    target = Path(path or FORGE_CONFIG['constants_file'])
    target.parent.mkdir(parents=True, exist_ok=True)
    # calibrate reports carry no stamp
    stamp = stamp or utc_timestamp()
    stamped = {name: dict(entry, timestamp=stamp) for name, entry in constants.items()}
    with open(target, 'w') as f:
        json.dump(stamped, f, indent=2, sort_keys=True)
        f.write('\n')
    logger.info(f"Saved calibrated constants to {target}")
    return target


_constants_cache: Dict[str, float] = {}


def constant_value(name: str) -> float:
    """Calibrated value of K, K_prime or K_basic3"""
    if name not in CONSTANT_NAMES:
        raise PreconditionViolation(f"Unknown constant {name}")
    if name not in _constants_cache:
        data = load_constants()
        for key in CONSTANT_NAMES:
            _constants_cache[key] = float(data[key]['value'])
    return _constants_cache[name]


def check_cap(what: str, predicted: int, cap: Optional[int] = None):
    """Refuse an enumeration whose predicted output count exceeds the cap"""
    limit = enumeration_cap(cap)
    if predicted > limit:
        raise TooLarge(what, predicted, limit)
