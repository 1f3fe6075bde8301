#!/usr/bin/python3
"""
Report Builder
Canonical JSON for every command and tabulate rendering for the human summaries
"""

import json
import math
from typing import Dict, List, Any, Optional

from tabulate import tabulate

from hamming_forge import TOOL_NAME, __version__

FLOAT_DIGITS = 12


def _canonical(value: Any) -> Any:
    """Floats to 12 significant digits, infinities as strings, tuples as lists"""
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return float(f"{value:.{FLOAT_DIGITS}g}")
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if hasattr(value, 'item'):
        # numpy scalars
        return _canonical(value.item())
    return value


def canonical_json(data: Any) -> str:
    return json.dumps(_canonical(data), indent=2, sort_keys=True, ensure_ascii=False)


def build_report(command: str, config: Dict[str, Any], seed: Optional[int], body: Dict[str, Any]) -> Dict[str, Any]:
    """Wrap a command result with tool, version, command, config and seed"""
    report = {
        'tool': TOOL_NAME,
        'version': __version__,
        'command': command,
        'config': config,
        'seed': seed,
    }
    report.update(body)
    return report


def status_mark(ok: bool) -> str:
    return "✅" if ok else "❌"


def render_table(rows: List[Dict[str, Any]], columns: List[str], title: Optional[str] = None) -> str:
    """Render dict rows as a grid table with the given columns"""
    table = [[_cell(row.get(column)) for column in columns] for row in rows]
    text = tabulate(table, headers=columns, tablefmt='grid')
    if title:
        return f"{title}\n{'=' * len(title)}\n{text}"
    return text


def render_pairs(pairs: Dict[str, Any], title: Optional[str] = None) -> str:
    """Two-column key/value table"""
    table = [[key, _cell(value)] for key, value in pairs.items()]
    text = tabulate(table, tablefmt='simple')
    if title:
        return f"{title}\n{'=' * len(title)}\n{text}"
    return text


def _cell(value: Any) -> str:
    if value is None:
        return '-'
    if isinstance(value, bool):
        return status_mark(value)
    if isinstance(value, float):
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return json.dumps(_canonical(value))
    return str(value)
