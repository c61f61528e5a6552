import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

DECIMALS = 4
ERR = 'ERR'


@dataclass
class Table:
    title: str
    headers: Sequence[str]
    rows: List[Sequence[object]] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    # Set when any cell could not be computed or failed a check
    failed: bool = False


def format_cell(value: object) -> str:
    """Numbers with four decimals, infinities as Unbounded, missing values as undefined."""
    if value is None:
        return 'undefined'
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return ERR
        if math.isinf(value):
            return 'Unbounded' if value < 0 else '+Unbounded'
        return f'{value:.{DECIMALS}f}'
    return str(value)


def to_csv(table: Table) -> str:
    """RFC-4180 text: CRLF line ends, quoting where needed."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\r\n')
    writer.writerow(table.headers)
    for row in table.rows:
        writer.writerow([format_cell(v) for v in row])
    return buffer.getvalue()


def to_markdown(table: Table) -> str:
    lines = [f'### {table.title}', '']
    lines.append('| ' + ' | '.join(table.headers) + ' |')
    lines.append('|' + '|'.join('---' for _ in table.headers) + '|')
    for row in table.rows:
        lines.append('| ' + ' | '.join(format_cell(v).replace('|', '\\|') for v in row) + ' |')
    if table.notes:
        lines.append('')
        lines.extend(table.notes)
    return '\n'.join(lines) + '\n'


def render(table: Table, fmt: str) -> str:
    if fmt == 'csv':
        return to_csv(table)
    if fmt == 'markdown':
        return to_markdown(table)
    raise ValueError(f'Unknown table format {fmt!r}')


def parse_csv(text: str) -> List[List[str]]:
    return [row for row in csv.reader(io.StringIO(text))]


def find_row(table: Table, key: object) -> Optional[Sequence[object]]:
    for row in table.rows:
        if row and row[0] == key:
            return row
    return None
