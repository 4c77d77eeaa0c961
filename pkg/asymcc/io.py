"""
File Formats

Plain-text instance files (``cc-instance v1``), LP solution CSVs with a JSON
header line, pivot traces as JSON lines, rounding-function tables as CSV and
JSON reports.

Instance file::

    cc-instance v1
    n <N> [bipartite <L>]
    alpha <a> w <w>
    e <u> <v> <+|-> <weight>
    ...

Complete files must list every pair; bipartite files list exactly the cross
pairs.
"""

import csv
import io as _io
from pathlib import Path
from typing import Iterator, List, Optional, TextIO, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel

from .exceptions import AsymCCError, InstanceFormatError, ModelParameterError, TableFormatError
from .model import EdgeSign, Instance, bipartite_missing_mask, num_pairs, pair_endpoints, pair_index
from .relaxation import MetricSolution, SolveMode, SolverStats
from .rounding import PivotTrace, RoundingFunction, RoundingVariant

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]

MAGIC = "cc-instance v1"
_UNSET = 2
_SIGN_TOKENS = {"+": EdgeSign.POSITIVE, "-": EdgeSign.NEGATIVE}


def _records(text: str) -> Iterator[Tuple[int, List[str]]]:
    """Non-empty lines split into tokens, with 1-based line numbers and comments removed."""
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield number, line.split()


def _number(token: str, line: int, kind=float):
    try:
        return kind(token)
    except ValueError:
        raise InstanceFormatError(f"expected a number, got {token!r}", line=line) from None


def loads_instance(text: str) -> Instance:
    """Parse an instance from its text form."""
    records = _records(text)
    try:
        line, tokens = next(records)
    except StopIteration:
        raise InstanceFormatError("empty instance file") from None
    if " ".join(tokens) != MAGIC:
        raise InstanceFormatError(f"expected header {MAGIC!r}", line=line)

    line, tokens = next(records, (line + 1, []))
    if len(tokens) not in (2, 4) or tokens[0] != "n" or (len(tokens) == 4 and tokens[2] != "bipartite"):
        raise InstanceFormatError("expected 'n <N> [bipartite <L>]'", line=line)
    n = _number(tokens[1], line, int)
    left_size = _number(tokens[3], line, int) if len(tokens) == 4 else None
    if n < 1:
        raise InstanceFormatError("n must be positive", line=line)

    line, tokens = next(records, (line + 1, []))
    if len(tokens) != 4 or tokens[0] != "alpha" or tokens[2] != "w":
        raise InstanceFormatError("expected 'alpha <a> w <w>'", line=line)
    alpha = _number(tokens[1], line)
    w_scale = _number(tokens[3], line)

    within = bipartite_missing_mask(n, left_size) if left_size is not None else None
    signs = np.full(num_pairs(n), _UNSET, dtype=np.int8)
    weights = np.zeros(num_pairs(n))
    for line, tokens in records:
        if len(tokens) != 5 or tokens[0] != "e":
            raise InstanceFormatError("expected 'e <u> <v> <+|-> <weight>'", line=line)
        u, v = _number(tokens[1], line, int), _number(tokens[2], line, int)
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise InstanceFormatError(f"invalid pair ({u}, {v})", line=line)
        if tokens[3] not in _SIGN_TOKENS:
            raise InstanceFormatError(f"sign must be '+' or '-', got {tokens[3]!r}", line=line)
        idx = pair_index(u, v, n)
        if signs[idx] != _UNSET:
            raise InstanceFormatError(f"pair ({u}, {v}) listed twice", line=line)
        if within is not None and within[idx]:
            raise InstanceFormatError(f"pair ({u}, {v}) lies inside one side", line=line)
        signs[idx] = _SIGN_TOKENS[tokens[3]]
        weights[idx] = _number(tokens[4], line)

    if within is not None:
        signs[within] = EdgeSign.MISSING
    unset = np.flatnonzero(signs == _UNSET)
    if unset.size:
        rows, cols = pair_endpoints(n)
        raise InstanceFormatError(
            f"{unset.size} pairs are not listed, first ({rows[unset[0]]}, {cols[unset[0]]})",
            missing=int(unset.size),
        )
    return Instance(n=n, signs=signs, weights=weights, alpha=alpha, w_scale=w_scale, left_size=left_size)


def dumps_instance(inst: Instance) -> str:
    out = _io.StringIO()
    out.write(MAGIC + "\n")
    out.write(f"n {inst.n}" + (f" bipartite {inst.left_size}" if inst.left_size is not None else "") + "\n")
    out.write(f"alpha {inst.alpha!r} w {inst.w_scale!r}\n")
    rows, cols = pair_endpoints(inst.n)
    for u, v, sign, weight in zip(rows.tolist(), cols.tolist(), inst.signs.tolist(), inst.weights.tolist()):
        if sign != EdgeSign.MISSING:
            out.write(f"e {u} {v} {EdgeSign(sign).symbol} {weight!r}\n")
    return out.getvalue()


def read_instance(path: PathLike) -> Instance:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InstanceFormatError(f"cannot read {path}: {e.strerror}") from e
    inst = loads_instance(text)
    logger.debug("instance_loaded", path=str(path), n=inst.n, mode=inst.mode.value)
    return inst


def write_instance(inst: Instance, path: PathLike) -> None:
    Path(path).write_text(dumps_instance(inst), encoding="utf-8")


class SolutionHeader(BaseModel):
    objective: float
    rounds: int
    max_violation: float


def write_solution(solution: MetricSolution, path: PathLike) -> None:
    """JSON header line, then ``u,v,x`` rows for u < v."""
    header = SolutionHeader(
        objective=solution.objective,
        rounds=solution.stats.separation_rounds,
        max_violation=solution.stats.max_violation,
    )
    rows, cols = pair_endpoints(solution.n)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write(header.model_dump_json() + "\n")
        writer = csv.DictWriter(fh, fieldnames=["u", "v", "x"])
        writer.writeheader()
        for u, v, x in zip(rows.tolist(), cols.tolist(), solution.x[rows, cols].tolist()):
            writer.writerow({"u": u, "v": v, "x": repr(x)})


def read_solution(path: PathLike, n: int) -> MetricSolution:
    try:
        with Path(path).open(encoding="utf-8", newline="") as fh:
            header = SolutionHeader.model_validate_json(fh.readline())
            x = np.zeros((n, n))
            for number, row in enumerate(csv.DictReader(fh), start=3):
                u, v, value = int(row["u"]), int(row["v"]), float(row["x"])
                if not (0 <= u < n and 0 <= v < n) or u == v:
                    raise InstanceFormatError(f"invalid pair ({u}, {v})", line=number)
                x[u, v] = x[v, u] = value
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise InstanceFormatError(f"cannot read solution {path}: {e}") from e
    stats = SolverStats(
        mode=SolveMode.FULL, separation_rounds=header.rounds, max_violation=header.max_violation
    )
    return MetricSolution(x=x, objective=header.objective, stats=stats)


def write_trace(trace: PivotTrace, target: Union[PathLike, TextIO]) -> None:
    """One JSON object per step: step, pivot, R, cluster_members."""
    if isinstance(target, (str, Path)):
        Path(target).write_text(trace.to_jsonl(), encoding="utf-8")
    else:
        target.write(trace.to_jsonl())


class TableHeader(BaseModel):
    alpha: float
    A: float
    h: Optional[float] = None


def write_table(f: RoundingFunction, path: PathLike, step: Optional[float] = None) -> None:
    """
    ``x,f`` rows preceded by a ``#`` comment holding the JSON header. A
    tabulated function is written point for point, anything else is sampled
    at ``step``.
    """
    if f.variant == RoundingVariant.TABULATED:
        xs = np.concatenate([f.table_x, [f.tau, 1.0]])
        ys = np.concatenate([f.table_y, [1.0, 1.0]])
    else:
        if step is None:
            raise ModelParameterError("a sampling step is required for closed-form functions")
        xs, ys = f.table(step)
    header = TableHeader(alpha=f.alpha, A=f.A, h=f.step if step is None else step)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write("# " + header.model_dump_json() + "\n")
        writer = csv.DictWriter(fh, fieldnames=["x", "f"])
        writer.writeheader()
        for x, y in zip(xs.tolist(), ys.tolist()):
            writer.writerow({"x": repr(x), "f": repr(y)})


def read_table(path: PathLike, alpha: Optional[float] = None, A: Optional[float] = None) -> RoundingFunction:
    """
    Load a tabulated rounding function. ``alpha`` and ``A`` default to the
    values in the header comment.

    Raises:
        TableFormatError: unreadable file, bad rows, or a table that is not
            a valid rounding function
    """
    try:
        with Path(path).open(encoding="utf-8", newline="") as fh:
            first = fh.readline()
            header = None
            if first.startswith("#"):
                header = TableHeader.model_validate_json(first[1:].strip())
            else:
                fh.seek(0)
            xs, ys = [], []
            for number, row in enumerate(csv.DictReader(fh), start=3 if header else 2):
                try:
                    xs.append(float(row["x"]))
                    ys.append(float(row["f"]))
                except (KeyError, TypeError, ValueError):
                    raise TableFormatError("expected numeric 'x,f' columns", line=number) from None
    except OSError as e:
        raise TableFormatError(f"cannot read {path}: {e.strerror}") from e
    except ValueError as e:
        raise TableFormatError(f"bad table header: {e}") from e

    alpha = alpha if alpha is not None else (header.alpha if header else None)
    A = A if A is not None else (header.A if header else None)
    if alpha is None or A is None:
        raise TableFormatError("alpha and A are neither given nor in the table header")
    try:
        return RoundingFunction.tabulated(alpha, A, xs, ys, step=header.h if header else None)
    except AsymCCError as e:
        raise TableFormatError(e.message) from e


def write_report(report: BaseModel, path: Optional[PathLike]) -> str:
    """Serialize a report; write it to ``path`` when given and return the text."""
    text = report.model_dump_json(indent=2)
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text
