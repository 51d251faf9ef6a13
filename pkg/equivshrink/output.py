"""Tools for writing tables and reports as CSV or JSON."""

import collections
import datetime
import json
import math

import numpy as np

import equivshrink
from equivshrink import DomainError
from equivshrink import helpers


_FIELDS = ('fmt', 'float_digits', 'newline', 'csv_meta')

_FORMATS = ('csv', 'json')
_NEWLINES = ('\n', '\r\n')


class OutputOptions(collections.namedtuple('OutputOptions', _FIELDS)):

    def __new__(cls, fmt='csv', float_digits=helpers.FLOAT_DIGITS, newline='\n', csv_meta=False):
        if fmt not in _FORMATS:
            raise DomainError('output format must be one of %s, got %r' % (_FORMATS, fmt))
        if isinstance(float_digits, bool) or not isinstance(float_digits, int):
            raise DomainError('float_digits must be an integer, got %r' % (float_digits,))
        if not 1 <= float_digits <= 17:
            raise DomainError('float_digits must lie in [1, 17], got %d' % float_digits)
        if newline not in _NEWLINES:
            raise DomainError('newline must be LF or CRLF')
        return tuple.__new__(cls, (fmt, float_digits, newline, bool(csv_meta)))

    def with_options(self, **kwargs):
        opts = self._asdict()
        opts.update(kwargs)
        return OutputOptions(**opts)


DEFAULT_OUTPUT_OPTIONS = OutputOptions()


def build_meta(command, params, seed=None):
    """The ``meta`` envelope of JSON outputs; ``created`` is the only varying field."""
    return {
        'command': command,
        'params': params,
        'seed': seed,
        'version': equivshrink.__version__,
        'created': datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


def _cell(value, options):
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return '%.*g' % (options.float_digits, value)
    text = str(value)
    if any(char in text for char in ',"\n\r'):
        return '"%s"' % text.replace('"', '""')
    return text


def _plain(value):
    """Helper to turn numpy values and non-finite floats into JSON friendly ones."""
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def render_table(rows, columns, meta=None, options=None):
    """Render rows (dicts) as CSV with the given column order, or as JSON with a meta block.

    With ``csv_meta`` the CSV starts with one ``# {...}`` comment line holding the meta block
    as compact JSON.
    """
    options = options or DEFAULT_OUTPUT_OPTIONS
    if options.fmt == 'json':
        return render_report(rows, meta, options)
    lines = []
    if options.csv_meta and meta:
        lines.append('# ' + json.dumps(
            _plain(meta), sort_keys=True, allow_nan=False, ensure_ascii=False,
            separators=(',', ':')))
    lines.append(','.join(columns))
    for row in rows:
        lines.append(','.join(_cell(row.get(column), options) for column in columns))
    return options.newline.join(lines) + options.newline


def render_report(data, meta=None, options=None):
    options = options or DEFAULT_OUTPUT_OPTIONS
    document = {'meta': _plain(meta or {}), 'data': _plain(data)}
    text = json.dumps(document, indent=2, sort_keys=True, allow_nan=False, ensure_ascii=False)
    return text.replace('\n', options.newline) + options.newline


def write(text, path=None, stream=None):
    """Write rendered text to ``path`` (UTF-8, newlines untouched) or to ``stream``."""
    if path is None or path == '-':
        stream.write(text)
        return
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(text)
