"""Result writers: CSV with '#' header comments, or JSON."""

import enum
import json
import logging
import math
import sys
from typing import Any, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FORMATS = ('csv', 'json')


def to_builtin(value: Any) -> Any:
    """Convert numpy scalars/arrays and enums to JSON-friendly values; NaN becomes None."""
    if isinstance(value, Mapping):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ('inf' if value > 0 else '-inf')
    return value


def sort_rows(rows: Iterable[Mapping[str, Any]]) -> List[dict]:
    """Stable sort by algorithm, then seed."""
    def key(row):
        return (str(row.get('algorithm', '')), row.get('seed') if row.get('seed') is not None else -1)
    return sorted((dict(r) for r in rows), key=key)


def render(rows: Sequence[Mapping[str, Any]], config: Mapping[str, Any], fmt: str = 'csv',
           checks: Optional[Sequence[Mapping[str, Any]]] = None) -> str:
    """Render rows with the resolved config (and check outcomes) attached."""
    config = to_builtin(dict(config))
    checks = [to_builtin(dict(c)) for c in (checks or [])]
    if fmt == 'json':
        payload = {'config': config, 'records': [to_builtin(dict(r)) for r in rows]}
        if checks:
            payload['checks'] = checks
        return json.dumps(payload, indent=2) + '\n'
    if fmt != 'csv':
        raise ValueError(f"unknown output format {fmt!r}")

    lines = [f"# config: {json.dumps(config, sort_keys=True)}"]
    for check in checks:
        status = 'PASS' if check['passed'] else 'FAIL'
        lines.append(f"# check: {check['name']} {status} {check['detail']}")
    frame = pd.DataFrame([dict(r) for r in rows])
    body = frame.to_csv(index=False, float_format='%.10g', lineterminator='\n')
    return '\n'.join(lines) + '\n' + body


def write_report(rows: Sequence[Mapping[str, Any]], config: Mapping[str, Any], out: Optional[str] = None,
                 fmt: str = 'csv', checks: Optional[Sequence[Mapping[str, Any]]] = None) -> str:
    """Render and write to `out`, or to stdout when no path is given."""
    text = render(rows, config, fmt, checks)
    if out:
        with open(out, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
        logger.info(f"Wrote {len(rows)} rows to {out}")
    else:
        sys.stdout.write(text)
    return text


def read_csv_report(path: str) -> pd.DataFrame:
    """Load a CSV report, skipping its comment lines."""
    return pd.read_csv(path, comment='#')
