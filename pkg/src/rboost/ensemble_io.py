"""Plain-text ensemble files.

Format (one record per line, fields separated by single spaces, every real
number written with 17 significant digits so it reads back bit-identically)::

    rboost-ensemble 1
    dim <m> rounds <T>
    member <alpha> <beta_0> ... <beta_m> <ω00> <ω01> <ω10> <ω11>     (T lines)
    gamma <γ00> <γ01> <γ10> <γ11>                                    (one per round)
    calibration <A> <B>          or          calibration none

``beta_m`` is the bias. The gamma lines may be absent (zero of them) but
otherwise there are exactly T.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .boosting import Ensemble
from .calibration import PlattModel
from .dataset import FlipMatrix
from .errors import ParseError
from .robust_lr import RobustLinearModel

MAGIC = "rboost-ensemble"
VERSION = 1


def _fmt(values) -> str:
    return " ".join("%.17g" % v for v in values)


def dumps(e: Ensemble) -> str:
    m = e.models[0].m if len(e) else 0
    lines = [f"{MAGIC} {VERSION}", f"dim {m} rounds {len(e)}"]
    for alpha, model in zip(e.alphas, e.models):
        lines.append(f"member {_fmt([alpha, *model.beta, *model.omega.p.ravel()])}")
    for g in e.gamma_trace:
        lines.append(f"gamma {_fmt(g.p.ravel())}")
    if e.calibration is None:
        lines.append("calibration none")
    else:
        lines.append(f"calibration {_fmt([e.calibration.A, e.calibration.B])}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Ensemble:
    lines = text.splitlines()
    if not lines or lines[0].split() != [MAGIC, str(VERSION)]:
        raise ParseError(f"not a version-{VERSION} ensemble file")
    try:
        _, m, _, T = lines[1].split()
        m, T = int(m), int(T)
    except (IndexError, ValueError):
        raise ParseError("line 2: expected 'dim <m> rounds <T>'") from None

    body = lines[2:]
    alphas, models, gammas = [], [], []
    calibration = None
    for offset, line in enumerate(body, start=3):
        tag, *fields = line.split()
        try:
            vals = [float(v) for v in fields]
        except ValueError:
            if tag == "calibration" and fields == ["none"]:
                continue
            raise ParseError(f"line {offset}: non-numeric field") from None
        if tag == "member":
            if len(vals) != m + 6:
                raise ParseError(f"line {offset}: member needs {m + 6} numbers, got {len(vals)}")
            alphas.append(vals[0])
            omega = FlipMatrix(np.array(vals[m + 2:]).reshape(2, 2))
            models.append(RobustLinearModel(np.array(vals[1:m + 2]), omega))
        elif tag == "gamma":
            if len(vals) != 4:
                raise ParseError(f"line {offset}: gamma needs 4 numbers")
            gammas.append(FlipMatrix(np.array(vals).reshape(2, 2)))
        elif tag == "calibration":
            if len(vals) != 2:
                raise ParseError(f"line {offset}: calibration needs A and B")
            calibration = PlattModel(vals[0], vals[1])
        else:
            raise ParseError(f"line {offset}: unknown record {tag!r}")

    if len(alphas) != T:
        raise ParseError(f"expected {T} members, found {len(alphas)}")
    if gammas and len(gammas) != T:
        raise ParseError(f"expected 0 or {T} gamma lines, found {len(gammas)}")
    return Ensemble(tuple(alphas), tuple(models), tuple(gammas), calibration)


def save(e: Ensemble, path: str | Path) -> None:
    Path(path).write_text(dumps(e))


def load(path: str | Path) -> Ensemble:
    return loads(Path(path).read_text())
