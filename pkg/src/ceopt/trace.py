"""Per-iteration trace rows and their CSV rendering.

All optimizers emit the same row shape so traces can be compared on the
cumulative-evaluation axis.  Batch methods leave the columns that only the
incremental optimizer tracks (gamma_prev, tcmp) empty.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Optional

TRACE_COLUMNS = (
    "t",
    "n_evals",
    "n_updates",
    "H_of_mu",
    "gamma",
    "gamma_prev",
    "tcmp",
    "sigma_trace",
)


@dataclass
class TraceRecord:
    t: int
    n_evals: int
    n_updates: int
    H_of_mu: float
    gamma: float
    gamma_prev: Optional[float]
    tcmp: Optional[float]
    sigma_trace: float

    def row(self) -> tuple:
        return (
            self.t,
            self.n_evals,
            self.n_updates,
            self.H_of_mu,
            self.gamma,
            self.gamma_prev,
            self.tcmp,
            self.sigma_trace,
        )


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    # repr of a float is the shortest string that round-trips, so traces are
    # full precision and byte-stable across identical runs.
    return repr(float(v))


def render_csv(records: Iterable[TraceRecord]) -> str:
    buf = io.StringIO()
    buf.write(",".join(TRACE_COLUMNS) + "\n")
    for rec in records:
        buf.write(",".join(_cell(v) for v in rec.row()) + "\n")
    return buf.getvalue()


def write_csv(path, records: Iterable[TraceRecord]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(render_csv(records))
