"""SMPS triplet parsing (CORE/TIME/STOCH subset) and the native format.

The CORE file is MPS, read free-format (whitespace-delimited, so fixed
columns also parse); TIME must declare exactly two implicit periods;
STOCH supports INDEP DISCRETE and BLOCKS DISCRETE.  Second-stage
inequality rows get slack columns appended to W so the recourse problem
is the equality form ``W y = h - T x, y >= 0``; RANGES rows are split in
two during that normalisation.  Stochastic entries landing on W (both
row and column in stage 2) violate fixed recourse and are rejected.

The native format is a JSON document with top-level keys first_stage,
recourse, stochastic and distribution; floats round-trip exactly
(shortest repr, at most 17 significant digits), infinite bounds are
encoded as null.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    MalformedDocument,
    MalformedLine,
    StochasticRecourse,
    UnknownRowOrColumn,
    UnsupportedSection,
)
from .instance import (
    BlockDiscrete,
    FiniteList,
    IndependentDiscrete,
    Scenario,
    TwoStageProblem,
    validate,
)

logger = logging.getLogger(__name__)

_INF = float("inf")


@dataclass
class SmpsTriplet:
    core_text: str
    time_text: str
    stoch_text: str
    core_name: str = "core"
    time_name: str = "time"
    stoch_name: str = "stoch"


def _lines(text: str, source: str):
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        is_header = not raw[0].isspace()
        yield no, line.strip(), is_header


def _num(tok: str, source: str, no: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MalformedLine(f"expected a number, got {tok!r}", source, no)


class _Core:
    def __init__(self):
        self.name = ""
        self.obj_row = None
        self.row_order = []          # constraint rows only, in ROWS order
        self.row_sense = {}
        self.col_order = []
        self.col_entries = {}        # col -> list[(row, val)]
        self.rhs = {}
        self.ranges = {}
        self.bounds = {}             # col -> dict(lb=, ub=)


def _parse_core(text: str, source: str) -> _Core:
    core = _Core()
    section = None
    for no, line, is_header in _lines(text, source):
        toks = line.split()
        if is_header:
            key = toks[0].upper()
            if key == "NAME":
                core.name = toks[1] if len(toks) > 1 else ""
            elif key in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS"):
                section = key
            elif key == "ENDATA":
                section = None
                break
            elif key == "OBJSENSE":
                section = "OBJSENSE"
            else:
                raise UnsupportedSection(f"{source}:{no}: unsupported CORE section {key!r}")
            continue
        if section == "OBJSENSE":
            if toks[0].upper() not in ("MIN", "MINIMIZE"):
                raise UnsupportedSection(f"{source}:{no}: only minimisation is supported")
        elif section == "ROWS":
            if len(toks) != 2:
                raise MalformedLine("ROWS line needs sense and name", source, no)
            sense, name = toks[0].upper(), toks[1]
            if sense == "N":
                if core.obj_row is None:
                    core.obj_row = name
                else:
                    raise UnsupportedSection(f"{source}:{no}: additional N-type row {name!r}")
            elif sense in ("L", "G", "E"):
                core.row_order.append(name)
                core.row_sense[name] = {"L": "<=", "G": ">=", "E": "="}[sense]
            else:
                raise MalformedLine(f"unknown row sense {sense!r}", source, no)
        elif section == "COLUMNS":
            if "MARKER" in line.upper():
                raise UnsupportedSection(f"{source}:{no}: integer markers not supported")
            if len(toks) not in (3, 5):
                raise MalformedLine("COLUMNS line needs (col row val) pairs", source, no)
            col = toks[0]
            if col not in core.col_entries:
                core.col_entries[col] = []
                core.col_order.append(col)
            for i in range(1, len(toks), 2):
                core.col_entries[col].append((toks[i], _num(toks[i + 1], source, no)))
        elif section == "RHS":
            if len(toks) not in (3, 5):
                raise MalformedLine("RHS line needs (row val) pairs", source, no)
            for i in range(1, len(toks), 2):
                core.rhs[toks[i]] = _num(toks[i + 1], source, no)
        elif section == "RANGES":
            if len(toks) not in (3, 5):
                raise MalformedLine("RANGES line needs (row val) pairs", source, no)
            for i in range(1, len(toks), 2):
                core.ranges[toks[i]] = _num(toks[i + 1], source, no)
        elif section == "BOUNDS":
            kind = toks[0].upper()
            if kind in ("UP", "LO", "FX") and len(toks) == 4:
                col, val = toks[2], _num(toks[3], source, no)
            elif kind in ("FR", "MI", "PL") and len(toks) == 3:
                col, val = toks[2], None
            else:
                raise MalformedLine(f"malformed BOUNDS line (kind {kind!r})", source, no)
            if kind in ("BV", "UI", "LI"):
                raise UnsupportedSection(f"{source}:{no}: integer bounds not supported")
            b = core.bounds.setdefault(col, {})
            if kind == "UP":
                b["ub"] = val
            elif kind == "LO":
                b["lb"] = val
            elif kind == "FX":
                b["lb"] = b["ub"] = val
            elif kind == "FR":
                b["lb"], b["ub"] = -_INF, _INF
            elif kind == "MI":
                b["lb"] = -_INF
            elif kind == "PL":
                b["ub"] = _INF
        elif section is None:
            raise MalformedLine("data before any section header", source, no)
    return core


def _parse_time(text: str, source: str, core: _Core):
    name = ""
    markers = []
    section = None
    for no, line, is_header in _lines(text, source):
        toks = line.split()
        if is_header:
            key = toks[0].upper()
            if key == "TIME":
                name = toks[1] if len(toks) > 1 else ""
            elif key == "PERIODS":
                if len(toks) > 1 and toks[1].upper() not in ("IMPLICIT", "LP"):
                    raise UnsupportedSection(f"{source}:{no}: only implicit PERIODS supported")
                section = "PERIODS"
            elif key == "ENDATA":
                break
            else:
                raise UnsupportedSection(f"{source}:{no}: unsupported TIME section {key!r}")
            continue
        if section != "PERIODS" or len(toks) != 3:
            raise MalformedLine("PERIODS line needs col row period", source, no)
        markers.append((toks[0], toks[1], toks[2]))
    if len(markers) != 2:
        raise UnsupportedSection(f"{source}: need exactly two periods, found {len(markers)}")
    col2, row2 = markers[1][0], markers[1][1]
    if col2 not in core.col_order:
        raise UnknownRowOrColumn(f"{source}: period-2 column {col2!r} not in CORE")
    if row2 not in core.row_order:
        raise UnknownRowOrColumn(f"{source}: period-2 row {row2!r} not in CORE")
    return name, core.col_order.index(col2), core.row_order.index(row2)


def parse_smps(triplet: SmpsTriplet, run_validation: bool = True) -> TwoStageProblem:
    """Assemble a TwoStageProblem from the CORE/TIME/STOCH triplet."""
    core = _parse_core(triplet.core_text, triplet.core_name)
    if core.obj_row is None:
        raise MalformedLine("CORE has no objective (N) row", triplet.core_name, 0)
    time_name, col_split, row_split = _parse_time(triplet.time_text, triplet.time_name, core)

    cols1 = core.col_order[:col_split]
    cols2 = core.col_order[col_split:]
    rows1 = core.row_order[:row_split]
    rows2 = core.row_order[row_split:]
    col1_idx = {c: i for i, c in enumerate(cols1)}
    col2_idx = {c: i for i, c in enumerate(cols2)}
    row1_idx = {r: i for i, r in enumerate(rows1)}
    row2_idx = {r: i for i, r in enumerate(rows2)}

    n = len(cols1)
    c = np.zeros(n)
    A = np.zeros((len(rows1), n))
    senses1 = [core.row_sense[r] for r in rows1]
    b1 = np.array([core.rhs.get(r, 0.0) for r in rows1])
    lb = np.zeros(n)
    ub = np.full(n, _INF)
    for j, col in enumerate(cols1):
        bnd = core.bounds.get(col, {})
        if "lb" in bnd:
            lb[j] = bnd["lb"]
        if "ub" in bnd:
            ub[j] = bnd["ub"]

    l_struct = len(cols2)
    r2 = len(rows2)
    T = np.zeros((r2, n))
    W_struct = np.zeros((r2, l_struct))
    q = np.zeros(l_struct)
    h = np.array([core.rhs.get(r, 0.0) for r in rows2])

    for col, entries in core.col_entries.items():
        if col in col1_idx:
            j = col1_idx[col]
            for row, val in entries:
                if row == core.obj_row:
                    c[j] = val
                elif row in row1_idx:
                    A[row1_idx[row], j] = val
                elif row in row2_idx:
                    T[row2_idx[row], j] = val
                else:
                    raise UnknownRowOrColumn(f"row {row!r} in CORE COLUMNS unknown")
        else:
            j = col2_idx[col]
            for row, val in entries:
                if row == core.obj_row:
                    q[j] = val
                elif row in row2_idx:
                    W_struct[row2_idx[row], j] = val
                elif row in row1_idx:
                    raise UnsupportedSection(
                        f"stage-1 row {row!r} references stage-2 column {col!r}"
                    )
                else:
                    raise UnknownRowOrColumn(f"row {row!r} in CORE COLUMNS unknown")

    # second-stage variable bounds become rows of W (y >= 0 is the base form)
    extra_rows = []   # (col2 local index, sense, rhs)
    for col, bnd in core.bounds.items():
        if col in col1_idx or col not in col2_idx:
            continue
        if bnd.get("lb", 0.0) == -_INF or ("ub" in bnd and bnd["ub"] == _INF and bnd.get("lb", 0.0) == -_INF):
            raise UnsupportedSection(f"free second-stage column {col!r} not supported")
        lo = bnd.get("lb", 0.0)
        hi = bnd.get("ub", _INF)
        if lo < 0:
            raise UnsupportedSection(f"negative lower bound on second-stage column {col!r}")
        if lo > 0:
            extra_rows.append((col2_idx[col], ">=", lo))
        if np.isfinite(hi):
            extra_rows.append((col2_idx[col], "<=", hi))

    # RANGES: duplicate the row with the implied second bound
    range_rows = []  # (stage, local row index or None, sense, rhs, base row name)
    for row, rng in core.ranges.items():
        if row == core.obj_row or row not in core.row_sense:
            raise UnknownRowOrColumn(f"RANGES row {row!r} unknown")
        sense = core.row_sense[row]
        base = core.rhs.get(row, 0.0)
        if sense == "<=":
            dup = (">=", base - abs(rng))
        elif sense == ">=":
            dup = ("<=", base + abs(rng))
        else:
            dup = ("<=", base + rng) if rng >= 0 else (">=", base + rng)
            # the original E row relaxes to the other side
        range_rows.append((row, dup))

    first_extra = []
    for row, (dsense, drhs) in range_rows:
        if row in row1_idx:
            first_extra.append((row1_idx[row], dsense, drhs))
            if core.row_sense[row] == "=":
                senses1[row1_idx[row]] = ">=" if dsense == "<=" else "<="
        else:
            i = row2_idx[row]
            extra2 = ("row", i, dsense, drhs)
            extra_rows.append(extra2)
            if core.row_sense[row] == "=":
                # relax original to one side; slack added below
                core.row_sense[row] = ">=" if dsense == "<=" else "<="

    if first_extra:
        A = np.vstack([A] + [A[i : i + 1] for i, _, _ in first_extra])
        senses1 = senses1 + [s for _, s, _ in first_extra]
        b1 = np.concatenate([b1, [v for _, _, v in first_extra]])

    # normalise second stage to equality form with slack columns
    senses2 = [core.row_sense[r] for r in rows2]
    extra2_mat = []
    for item in extra_rows:
        if item[0] == "row":
            _, i, dsense, drhs = item
            extra2_mat.append((None, i, dsense, drhs))
        else:
            jloc, dsense, drhs = item
            extra2_mat.append((jloc, None, dsense, drhs))
    n_extra = len(extra2_mat)
    W_rows = np.vstack([W_struct] + [np.zeros((n_extra, l_struct))]) if n_extra else W_struct
    T_rows = np.vstack([T] + [np.zeros((n_extra, n))]) if n_extra else T
    h_rows = np.concatenate([h, np.zeros(n_extra)]) if n_extra else h
    all_senses2 = list(senses2)
    for eidx, (jloc, i, dsense, drhs) in enumerate(extra2_mat):
        ridx = r2 + eidx
        if jloc is not None:
            W_rows[ridx, jloc] = 1.0
        else:
            W_rows[ridx, :] = W_struct[i]
            T_rows[ridx, :] = T[i]
        h_rows[ridx] = drhs
        all_senses2.append(dsense)
    slack_cols = [i for i, s in enumerate(all_senses2) if s != "="]
    W = np.hstack([W_rows, np.zeros((W_rows.shape[0], len(slack_cols)))])
    for k, i in enumerate(slack_cols):
        W[i, l_struct + k] = 1.0 if all_senses2[i] == "<=" else -1.0
    q_full = np.concatenate([q, np.zeros(len(slack_cols))])

    ranged_row2 = {row for row, _ in range_rows if row in row2_idx}
    distribution = _parse_stoch(
        triplet.stoch_text,
        triplet.stoch_name,
        core,
        col1_idx,
        col2_idx,
        row1_idx,
        row2_idx,
        ranged_row2,
    )

    if core.name and time_name and core.name != time_name:
        logger.warning("NAME mismatch between CORE (%s) and TIME (%s)", core.name, time_name)

    problem = TwoStageProblem(
        c=c,
        A=A,
        senses=senses1,
        rhs=b1,
        lb=lb,
        ub=ub,
        W=W,
        base_T=T_rows,
        base_q=q_full,
        base_h=h_rows,
        distribution=distribution,
        name=core.name or "smps",
        second_stage_structural=l_struct,
        first_stage_names=cols1,
        second_stage_names=cols2,
    )
    if run_validation:
        validate(problem)
    return problem


def _parse_stoch(text, source, core, col1_idx, col2_idx, row1_idx, row2_idx, ranged_row2):
    indep = {}
    blocks = {}
    block_order = []
    section = None
    current_block = None
    stoch_name = ""
    rhs_names = {"RHS", "RIGHT"}

    def classify(colname, rowname, no):
        """Map a (col,row) pair to a stochastic address."""
        is_rhs = colname.upper() in rhs_names or colname == "RHS"
        if rowname == core.obj_row:
            if colname in col2_idx:
                return ("q", 0, col2_idx[colname])
            if colname in col1_idx:
                raise UnsupportedSection(f"{source}:{no}: stochastic first-stage cost not supported")
            raise UnknownRowOrColumn(f"{source}:{no}: column {colname!r} unknown")
        if is_rhs:
            if rowname in row2_idx:
                if rowname in ranged_row2:
                    raise UnsupportedSection(f"{source}:{no}: stochastic RHS on a RANGES row")
                return ("h", row2_idx[rowname], 0)
            if rowname in row1_idx:
                raise UnsupportedSection(f"{source}:{no}: stochastic first-stage RHS not supported")
            raise UnknownRowOrColumn(f"{source}:{no}: row {rowname!r} unknown")
        if rowname in row2_idx and colname in col2_idx:
            raise StochasticRecourse(
                f"{source}:{no}: entry ({colname},{rowname}) targets W, violating fixed recourse"
            )
        if rowname in row2_idx and colname in col1_idx:
            return ("T", row2_idx[rowname], col1_idx[colname])
        if rowname in row1_idx:
            raise UnsupportedSection(f"{source}:{no}: stochastic first-stage row not supported")
        raise UnknownRowOrColumn(f"{source}:{no}: pair ({colname!r},{rowname!r}) unknown")

    for no, line, is_header in _lines(text, source):
        toks = line.split()
        key = toks[0].upper()
        if is_header:
            if key == "STOCH":
                stoch_name = toks[1] if len(toks) > 1 else ""
            elif key == "INDEP":
                if len(toks) < 2 or toks[1].upper() != "DISCRETE":
                    raise UnsupportedSection(f"{source}:{no}: only INDEP DISCRETE supported")
                section = "INDEP"
            elif key == "BLOCKS":
                if len(toks) < 2 or toks[1].upper() != "DISCRETE":
                    raise UnsupportedSection(f"{source}:{no}: only BLOCKS DISCRETE supported")
                section = "BLOCKS"
            elif key == "ENDATA":
                break
            elif key in ("SCENARIOS", "EXP", "DISTRIB", "SIMPLE", "CHANCE", "ICC"):
                raise UnsupportedSection(f"{source}:{no}: STOCH section {key!r} not supported")
            else:
                raise UnsupportedSection(f"{source}:{no}: unknown STOCH section {key!r}")
            continue
        if section == "INDEP":
            if len(toks) == 5:
                colname, rowname, val, _, prob = toks
            elif len(toks) == 4:
                colname, rowname, val, prob = toks
            else:
                raise MalformedLine("INDEP line needs col row value [period] prob", source, no)
            addr = classify(colname, rowname, no)
            indep.setdefault(addr, ([], []))
            indep[addr][0].append(_num(val, source, no))
            indep[addr][1].append(_num(prob, source, no))
        elif section == "BLOCKS":
            if key == "BL":
                if len(toks) not in (3, 4):
                    raise MalformedLine("BL line needs name [period] prob", source, no)
                bname = toks[1]
                prob = _num(toks[-1], source, no)
                if bname not in blocks:
                    blocks[bname] = ([], [])
                    block_order.append(bname)
                blocks[bname][0].append([])
                blocks[bname][1].append(prob)
                current_block = bname
            else:
                if current_block is None:
                    raise MalformedLine("BLOCKS entry before any BL line", source, no)
                if len(toks) not in (3, 5):
                    raise MalformedLine("BLOCKS entry needs (col row val) pairs", source, no)
                colname = toks[0]
                for i in range(1, len(toks), 2):
                    addr = classify(colname, toks[i], no)
                    blocks[current_block][0][-1].append(
                        (addr[0], addr[1], addr[2], _num(toks[i + 1], source, no))
                    )
        else:
            raise MalformedLine("data before any STOCH section header", source, no)

    if core.name and stoch_name and core.name != stoch_name:
        logger.warning("NAME mismatch between CORE (%s) and STOCH (%s)", core.name, stoch_name)

    marginals = [
        ((t, r, cc), values, probs) for (t, r, cc), (values, probs) in indep.items()
    ]
    if not marginals and not blocks:
        return FiniteList([Scenario([], 1.0)])
    if blocks:
        all_blocks = [
            (blocks[nm][0], blocks[nm][1]) for nm in block_order
        ]
        # independent entries become single-address blocks
        for addr, values, probs in marginals:
            all_blocks.append(
                ([[(addr[0], addr[1], addr[2], v)] for v in values], list(probs))
            )
        dist = BlockDiscrete(all_blocks)
    else:
        dist = IndependentDiscrete(marginals)
    dist.validate()
    return dist


# ---------------------------------------------------------------------------
# native structured format (JSON)
# ---------------------------------------------------------------------------

_FORMAT = "lshaped-instance"


def _enc_bounds(arr):
    return [None if not np.isfinite(v) else float(v) for v in arr]


def _dec_bounds(vals, side):
    fill = -_INF if side == "lb" else _INF
    return np.array([fill if v is None else float(v) for v in vals])


def write_native(problem: TwoStageProblem) -> str:
    """Lossless single-document serialisation of a problem."""
    dist = problem.distribution
    if isinstance(dist, FiniteList):
        dd = {
            "type": "finite",
            "scenarios": [
                {"weight": s.weight, "overrides": [list(o) for o in s.overrides]}
                for s in dist.scenarios
            ],
        }
    elif isinstance(dist, IndependentDiscrete):
        dd = {
            "type": "independent",
            "marginals": [
                {"address": list(addr), "values": list(map(float, values)), "probs": list(map(float, probs))}
                for addr, values, probs in dist.marginals
            ],
        }
    elif isinstance(dist, BlockDiscrete):
        dd = {
            "type": "blocks",
            "blocks": [
                {
                    "realizations": [[list(o) for o in real] for real in realizations],
                    "probs": list(map(float, probs)),
                }
                for realizations, probs in dist.blocks
            ],
        }
    else:
        raise MalformedDocument(f"cannot serialise distribution {type(dist).__name__}")
    doc = {
        "format": _FORMAT,
        "version": 1,
        "name": problem.name,
        "first_stage": {
            "c": problem.c.tolist(),
            "rows": [
                {"coeffs": problem.A[i].tolist(), "sense": problem.senses[i], "rhs": float(problem.rhs[i])}
                for i in range(problem.m)
            ],
            "lb": _enc_bounds(problem.lb),
            "ub": _enc_bounds(problem.ub),
        },
        "recourse": {
            "W": problem.W.tolist(),
            "structural": int(problem.second_stage_structural),
        },
        "stochastic": {
            "T": problem.base_T.tolist(),
            "q": problem.base_q.tolist(),
            "h": problem.base_h.tolist(),
        },
        "distribution": dd,
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_native(text: str) -> TwoStageProblem:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != _FORMAT:
        raise MalformedDocument("missing or wrong format marker")
    try:
        fs = doc["first_stage"]
        rec = doc["recourse"]
        st = doc["stochastic"]
        dd = doc["distribution"]
        rows = fs["rows"]
        A = np.array([r["coeffs"] for r in rows]) if rows else np.zeros((0, len(fs["c"])))
        if dd["type"] == "finite":
            dist = FiniteList(
                [Scenario([tuple(o) for o in s["overrides"]], float(s["weight"])) for s in dd["scenarios"]]
            )
        elif dd["type"] == "independent":
            dist = IndependentDiscrete(
                [(tuple(m["address"]), list(m["values"]), list(m["probs"])) for m in dd["marginals"]]
            )
        elif dd["type"] == "blocks":
            dist = BlockDiscrete(
                [
                    ([[tuple(o) for o in real] for real in b["realizations"]], list(b["probs"]))
                    for b in dd["blocks"]
                ]
            )
        else:
            raise MalformedDocument(f"unknown distribution type {dd['type']!r}")
        problem = TwoStageProblem(
            c=np.array(fs["c"], dtype=float),
            A=A,
            senses=[r["sense"] for r in rows],
            rhs=np.array([r["rhs"] for r in rows], dtype=float),
            lb=_dec_bounds(fs["lb"], "lb"),
            ub=_dec_bounds(fs["ub"], "ub"),
            W=np.array(rec["W"], dtype=float),
            base_T=np.array(st["T"], dtype=float),
            base_q=np.array(st["q"], dtype=float),
            base_h=np.array(st["h"], dtype=float),
            distribution=dist,
            name=doc.get("name", "instance"),
            second_stage_structural=int(rec["structural"]),
        )
    except MalformedDocument:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise MalformedDocument(f"schema violation: {exc}") from exc
    dist.validate()
    problem.check_addresses()
    return problem
