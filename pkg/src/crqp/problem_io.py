"""Text serialization of problems and CSV output of solve results.

Problem files look like::

    crqp 1
    2 3
    # comments run to the end of the line
    H
    2 0
    0 2
    c
    -2 0
    A
    ...

The first two lines are the magic/version and the dimensions ``n m``.
Sections ``H``, ``c``, ``A``, ``b``, ``x0`` and ``lambda0`` follow in any
order, each at most once. Matrices are written one row per line; the reader
only cares about the count of whitespace-separated values.
"""

import csv
import io
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .model import Problem

MAGIC = "crqp"
VERSION = "1"
REQUIRED = ("H", "c", "A", "b")
OPTIONAL = ("x0", "lambda0")
CSV_HEADER = ("problem_id", "rule", "n", "m", "seed", "iterations", "avg_q", "time_ms",
              "final_e", "status", "f_final")


class ProblemFormatError(ValueError):
    """Malformed problem file."""


def _fmt(v) -> str:
    return "%.17g" % v


def write_problem(p: Problem, comment=None) -> str:
    """Serialize `p`; every float is printed with 17 significant digits."""
    lines = [f"{MAGIC} {VERSION}", f"{p.n} {p.m}"]
    if comment:
        lines.extend("# " + line for line in str(comment).splitlines())
    for name in REQUIRED + OPTIONAL:
        arr = getattr(p, name)
        if arr is None:
            continue
        lines.append(name)
        if arr.ndim == 2:
            lines.extend(" ".join(map(_fmt, row)) for row in arr)
        else:
            lines.append(" ".join(map(_fmt, arr)))
    return "\n".join(lines) + "\n"


def _shape(name, n, m):
    return {"H": (n, n), "A": (m, n), "c": (n,), "x0": (n,), "b": (m,), "lambda0": (m,)}[name]


def read_problem(text: str) -> Problem:
    """Parse the output of :func:`write_problem`.

    Raises
    ------
    ProblemFormatError
        On a bad header, unknown or repeated section, wrong value count,
        unparsable or non-finite value, or a missing H, c, A or b section.
    """
    content = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            content.append((lineno, line))
    if len(content) < 2:
        raise ProblemFormatError("file too short: expected 'crqp 1' header and dimensions")

    lineno, head = content[0]
    if head.split() != [MAGIC, VERSION]:
        raise ProblemFormatError(f"line {lineno}: expected '{MAGIC} {VERSION}', got {head!r}")
    lineno, dims = content[1]
    try:
        n, m = (int(t) for t in dims.split())
    except ValueError:
        raise ProblemFormatError(f"line {lineno}: expected '<n> <m>', got {dims!r}") from None
    if n <= 0 or m <= 0:
        raise ProblemFormatError(f"line {lineno}: dimensions must be positive, got {n} {m}")

    tokens = {}
    current = None
    for lineno, line in content[2:]:
        if line in REQUIRED + OPTIONAL:
            if line in tokens:
                raise ProblemFormatError(f"line {lineno}: section {line} repeated")
            current = line
            tokens[current] = []
            continue
        if current is None:
            raise ProblemFormatError(f"line {lineno}: data before any section header")
        tokens[current].extend((lineno, t) for t in line.split())

    missing = [name for name in REQUIRED if name not in tokens]
    if missing:
        raise ProblemFormatError(f"missing section(s): {', '.join(missing)}")

    arrays = {}
    for name, toks in tokens.items():
        shape = _shape(name, n, m)
        if len(toks) != math.prod(shape):
            raise ProblemFormatError(
                f"section {name}: expected {math.prod(shape)} values for shape {shape}, "
                f"got {len(toks)}")
        vals = np.empty(len(toks))
        for j, (lineno, t) in enumerate(toks):
            try:
                vals[j] = float(t)
            except ValueError:
                raise ProblemFormatError(f"line {lineno}: cannot parse {t!r} in section {name}") from None
            if not math.isfinite(vals[j]):
                raise ProblemFormatError(f"line {lineno}: non-finite value {t!r} in section {name}")
        arrays[name] = vals.reshape(shape)
    return Problem(**arrays)


def save_problem(path, p: Problem, comment=None):
    with open(path, "w") as fh:
        fh.write(write_problem(p, comment=comment))


def load_problem(path) -> Problem:
    with open(path) as fh:
        return read_problem(fh.read())


@dataclass(frozen=True)
class ResultRow:
    """One solve in a benchmark table."""

    problem_id: str
    rule: str
    n: int
    m: int
    seed: int
    iterations: int
    avg_q: float  # mean working-set size over iterations
    time_ms: float
    final_e: float
    status: str
    f_final: float

    def formatted(self) -> list:
        return [
            self.problem_id, self.rule, str(self.n), str(self.m), str(self.seed),
            str(self.iterations), f"{self.avg_q:.2f}", f"{self.time_ms:.3f}",
            f"{self.final_e:.2e}", self.status, _fmt(self.f_final),
        ]


def write_csv(rows) -> str:
    """CSV text with a header line and one line per row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow(row.formatted())
    return buf.getvalue()


def read_csv(text: str) -> list:
    """Parse :func:`write_csv` output back into :class:`ResultRow` values.

    Floats come back at the printed precision.
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header!r}")
    out = []
    for rec in reader:
        out.append(ResultRow(*(f.type(v) for f, v in zip(fields(ResultRow), rec))))
    return out


def row_key(row: ResultRow) -> tuple:
    """The row without its timing column."""
    t = astuple(row)
    return t[:7] + t[8:]
