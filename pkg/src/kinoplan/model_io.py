"""CPLEX-LP and MPS text interchange for MilpModel.

Supported subset, both directions: minimize objective, <=/>=/= rows,
variable bounds, continuous and binary variables. Maximization, ranges,
quadratic terms and special-ordered sets are out of scope.

Writers are canonical: rows appear in model order, while terms inside a row,
bound lines, binary lists and MPS columns are ordered by variable name.
Numbers use shortest round-trip repr. Because name order does not depend on
internal column numbering, export -> import -> export reproduces the exact
bytes. The MPS writer keeps the classic fixed field layout but lets long
names widen their field; the reader splits fields on whitespace.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import ModelFormatError
from .model import MilpModel


def _fmt(value):
    value = float(value)
    if value == 0.0:
        return "0.0"  # normalize -0.0
    return repr(value)


def export_model(model, fmt):
    """Serialize a model as LP or MPS text."""
    fmt = fmt.lower()
    if fmt == "lp":
        return _write_lp(model)
    if fmt == "mps":
        return _write_mps(model)
    raise ValueError(f"unsupported model format {fmt!r}")


def import_model(text, fmt):
    """Parse LP or MPS text into a MilpModel."""
    fmt = fmt.lower()
    if fmt == "lp":
        return _LpParser(text).parse()
    if fmt == "mps":
        return _parse_mps(text)
    raise ValueError(f"unsupported model format {fmt!r}")


# ---------------------------------------------------------------- LP writer

def _terms_text(names, coefs):
    order = np.argsort(names)
    parts = []
    for k in order:
        c = float(coefs[k])
        if c == 0.0:
            continue
        mag = _fmt(abs(c))
        if not parts:
            parts.append(f"{'-' if c < 0 else ''}{mag} {names[k]}")
        else:
            parts.append(f"{'-' if c < 0 else '+'} {mag} {names[k]}")
    return " ".join(parts)


_SENSE_OP = {"L": "<=", "G": ">=", "E": "="}


def _write_lp(model):
    out = ["Minimize"]
    obj_names = [model.var_names[j] for j in np.flatnonzero(model.objective)]
    obj_coefs = model.objective[np.flatnonzero(model.objective)]
    out.append(f" obj: {_terms_text(np.array(obj_names), obj_coefs)}".rstrip())
    out.append("Subject To")
    for r, name in enumerate(model.row_names):
        cols, vals = model.row_entries(r)
        names = np.array([model.var_names[c] for c in cols])
        body = _terms_text(names, vals)
        op = _SENSE_OP[str(model.senses[r])]
        out.append(f" {name}: {body} {op} {_fmt(model.rhs[r])}")
    out.append("Bounds")
    for j in np.argsort(model.var_names):
        name = model.var_names[j]
        lo, hi = float(model.lower[j]), float(model.upper[j])
        if lo == hi:
            out.append(f" {name} = {_fmt(lo)}")
        elif lo == -np.inf and hi == np.inf:
            out.append(f" {name} free")
        else:
            lo_tok = "-infinity" if lo == -np.inf else _fmt(lo)
            hi_tok = "+infinity" if hi == np.inf else _fmt(hi)
            out.append(f" {lo_tok} <= {name} <= {hi_tok}")
    binaries = sorted(
        model.var_names[j] for j in np.flatnonzero(model.is_integer)
    )
    if binaries:
        out.append("Binaries")
        for name in binaries:
            out.append(f" {name}")
    out.append("End")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- LP parser

_TOKEN_RE = re.compile(
    r"(?P<num>(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)"
    r"|(?P<op><=|>=|=<|=>|=|\+|-|:)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_.]*)"
)

_SECTIONS = {
    "minimize": "minimize", "min": "minimize",
    "maximize": "maximize", "max": "maximize",
    "subject": "subject", "st": "subject", "s.t.": "subject", "such": "subject",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "binaries", "binary": "binaries", "bin": "binaries",
    "generals": "generals", "general": "generals", "gen": "generals",
    "end": "end",
}


class _LpParser:
    def __init__(self, text):
        self.tokens = []
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("\\", 1)[0]
            pos = 0
            while pos < len(line):
                if line[pos].isspace():
                    pos += 1
                    continue
                m = _TOKEN_RE.match(line, pos)
                if not m:
                    raise ModelFormatError(
                        f"unexpected character {line[pos]!r}", line_no
                    )
                kind = m.lastgroup
                self.tokens.append((kind, m.group(), line_no))
                pos = m.end()
        self.pos = 0
        self.vars = {}  # name -> column
        self.lower = []
        self.upper = []
        self.bounds_seen = []
        self.integer = []
        self.obj = {}
        self.rows = []  # (name, {col: coef}, sense, rhs)

    def _peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None, None)

    def _next(self):
        tok = self._peek()
        if tok[0] is None:
            raise ModelFormatError("unexpected end of file")
        self.pos += 1
        return tok

    def _at_section(self):
        kind, text, _ = self._peek()
        if kind != "name":
            return None
        section = _SECTIONS.get(text.lower())
        if section == "subject":
            return "subject"
        return section

    def _skip_section_header(self, section):
        kind, text, line = self._next()
        if section == "subject":
            # consume the optional "to" of "subject to" / "such that"
            k2, t2, _ = self._peek()
            if k2 == "name" and t2.lower() in ("to", "that"):
                self._next()

    def _column(self, name):
        if name not in self.vars:
            self.vars[name] = len(self.vars)
            self.lower.append(0.0)
            self.upper.append(np.inf)
            self.bounds_seen.append(False)
            self.integer.append(False)
        return self.vars[name]

    def _linear_terms(self):
        """Parse a linear expression; stops at relational ops or sections."""
        terms = {}
        sign = 1.0
        coef = None
        while True:
            kind, text, line = self._peek()
            if kind is None or kind == "op" and text in ("<=", ">=", "=<", "=>", "="):
                break
            if kind == "name" and self._at_section() and coef is None and sign == 1.0:
                break
            self._next()
            if kind == "op" and text == "+":
                continue
            if kind == "op" and text == "-":
                sign = -sign
                continue
            if kind == "num":
                if coef is not None:
                    raise ModelFormatError("two numbers in a row", line)
                coef = float(text)
                continue
            if kind == "name":
                col = self._column(text)
                terms[col] = terms.get(col, 0.0) + sign * (1.0 if coef is None else coef)
                sign, coef = 1.0, None
                continue
            raise ModelFormatError(f"unexpected token {text!r}", line)
        if coef is not None:
            _, _, line = self._peek()
            raise ModelFormatError("dangling coefficient without variable", line)
        return terms

    def _relop(self):
        kind, text, line = self._next()
        if kind != "op" or text not in ("<=", ">=", "=<", "=>", "="):
            raise ModelFormatError(f"expected relational operator, got {text!r}", line)
        if text in ("<=", "=<"):
            return "L"
        if text in (">=", "=>"):
            return "G"
        return "E"

    def _signed_value(self):
        sign = 1.0
        while True:
            kind, text, line = self._peek()
            if kind == "op" and text in ("+", "-"):
                self._next()
                if text == "-":
                    sign = -sign
                continue
            break
        kind, text, line = self._next()
        if kind == "num":
            return sign * float(text)
        if kind == "name" and text.lower() in ("inf", "infinity"):
            return sign * np.inf
        raise ModelFormatError(f"expected a number, got {text!r}", line)

    def parse(self):
        section = self._at_section()
        if section == "maximize":
            raise ModelFormatError("maximization not supported (minimize only)")
        if section != "minimize":
            raise ModelFormatError("model must start with a Minimize section")
        self._skip_section_header(section)
        # optional objective label
        if self._peek()[0] == "name" and self.pos + 1 < len(self.tokens) \
                and self.tokens[self.pos + 1][:2] == ("op", ":"):
            self._next()
            self._next()
        obj_terms = self._linear_terms()
        self.obj = obj_terms
        if self._at_section() != "subject":
            raise ModelFormatError("expected a Subject To section")
        self._skip_section_header("subject")
        row_counter = 0
        while True:
            section = self._at_section()
            if section:
                break
            if self._peek()[0] is None:
                raise ModelFormatError("unexpected end of file inside Subject To")
            name = None
            if self._peek()[0] == "name" and self.pos + 1 < len(self.tokens) \
                    and self.tokens[self.pos + 1][:2] == ("op", ":"):
                name = self._next()[1]
                self._next()
            if name is None:
                name = f"r{row_counter}"
            terms = self._linear_terms()
            sense = self._relop()
            rhs = self._signed_value()
            self.rows.append((name, terms, sense, rhs))
            row_counter += 1
        while section not in (None, "end"):
            self._skip_section_header(section)
            if section == "bounds":
                self._parse_bounds()
            elif section == "binaries":
                self._parse_binaries()
            elif section == "generals":
                raise ModelFormatError("General integer section not supported")
            else:
                raise ModelFormatError(f"unsupported section {section!r}")
            section = self._at_section()
        if section == "end":
            self._next()
        kind, text, line = self._peek()
        if kind is not None:
            raise ModelFormatError(f"trailing content {text!r}", line)
        return self._build()

    def _parse_bounds(self):
        while True:
            if self._at_section() or self._peek()[0] is None:
                return
            kind, text, line = self._peek()
            if kind == "name":
                name = self._next()[1]
                k2, t2, l2 = self._peek()
                if k2 == "name" and t2.lower() == "free":
                    self._next()
                    self._set_bounds(name, -np.inf, np.inf)
                    continue
                sense = self._relop()
                value = self._signed_value()
                if sense == "L":
                    self._set_bounds(name, None, value)
                elif sense == "G":
                    self._set_bounds(name, value, None)
                else:
                    self._set_bounds(name, value, value)
                continue
            # value-first form: v <= name [<= v2]
            value = self._signed_value()
            sense = self._relop()
            if sense != "L":
                raise ModelFormatError("expected '<=' after leading bound value", line)
            kind, name, line = self._next()
            if kind != "name":
                raise ModelFormatError("expected variable name in bound", line)
            self._set_bounds(name, value, None)
            k2, t2, _ = self._peek()
            if k2 == "op" and t2 in ("<=", "=<"):
                self._next()
                upper = self._signed_value()
                self._set_bounds(name, None, upper)

    def _set_bounds(self, name, lo, hi):
        # only the sides a statement mentions are updated; defaults are [0, inf)
        col = self._column(name)
        self.bounds_seen[col] = True
        if lo is not None:
            self.lower[col] = lo
        if hi is not None:
            self.upper[col] = hi

    def _parse_binaries(self):
        while True:
            if self._at_section() or self._peek()[0] is None:
                return
            kind, text, line = self._next()
            if kind != "name":
                raise ModelFormatError(f"expected variable name, got {text!r}", line)
            col = self._column(text)
            self.integer[col] = True
            if not self.bounds_seen[col]:
                self.lower[col], self.upper[col] = 0.0, 1.0

    def _build(self):
        seen = set()
        for name, _, _, _ in self.rows:
            if name in seen:
                raise ModelFormatError(f"duplicate row name {name!r}")
            seen.add(name)
        n = len(self.vars)
        names = [None] * n
        for name, col in self.vars.items():
            names[col] = name
        objective = np.zeros(n)
        for col, coef in self.obj.items():
            objective[col] = coef
        rows_i, cols_i, vals = [], [], []
        row_names, senses, rhs = [], [], []
        for r, (name, terms, sense, b) in enumerate(self.rows):
            row_names.append(name)
            senses.append(sense)
            rhs.append(b)
            for col, coef in terms.items():
                rows_i.append(r)
                cols_i.append(col)
                vals.append(coef)
        return MilpModel(
            names,
            np.array(self.lower),
            np.array(self.upper),
            np.array(self.integer, dtype=bool),
            objective,
            row_names,
            np.array(senses, dtype="U1"),
            np.array(rhs),
            (np.array(rows_i, dtype=np.int64),
             np.array(cols_i, dtype=np.int64),
             np.array(vals)),
        )


# --------------------------------------------------------------- MPS writer

def _write_mps(model):
    lines = ["NAME          MODEL", "ROWS", " N  obj"]
    for r, name in enumerate(model.row_names):
        lines.append(f" {model.senses[r]}  {name}")
    lines.append("COLUMNS")
    csc = model.matrix.tocsc()
    in_integer_block = False
    marker = 0
    for j in np.argsort(model.var_names):
        name = model.var_names[j]
        if bool(model.is_integer[j]) != in_integer_block:
            tag = "'INTORG'" if not in_integer_block else "'INTEND'"
            lines.append(f"    MK{marker:<10}'MARKER'                 {tag}")
            marker += 1
            in_integer_block = not in_integer_block
        entries = []
        if model.objective[j] != 0.0:
            entries.append(("obj", model.objective[j]))
        lo, hi = csc.indptr[j], csc.indptr[j + 1]
        for r, v in sorted(zip(csc.indices[lo:hi], csc.data[lo:hi])):
            entries.append((model.row_names[r], v))
        if not entries:
            entries.append(("obj", 0.0))  # declare otherwise-unreferenced columns
        for row_name, v in entries:
            lines.append(f"    {name:<12}  {row_name:<12}  {_fmt(v)}")
    if in_integer_block:
        lines.append(f"    MK{marker:<10}'MARKER'                 'INTEND'")
    lines.append("RHS")
    for r, name in enumerate(model.row_names):
        if model.rhs[r] != 0.0:
            lines.append(f"    RHS           {name:<12}  {_fmt(model.rhs[r])}")
    lines.append("BOUNDS")
    for j in np.argsort(model.var_names):
        name = model.var_names[j]
        lo, hi = float(model.lower[j]), float(model.upper[j])
        if lo == hi:
            lines.append(f" FX BND           {name:<12}  {_fmt(lo)}")
            continue
        if lo == -np.inf:
            lines.append(f" MI BND           {name}")
        else:
            lines.append(f" LO BND           {name:<12}  {_fmt(lo)}")
        if hi == np.inf:
            lines.append(f" PL BND           {name}")
        else:
            lines.append(f" UP BND           {name:<12}  {_fmt(hi)}")
    lines.append("ENDATA")
    return "\n".join(line.rstrip() for line in lines) + "\n"


# --------------------------------------------------------------- MPS parser

def _parse_mps(text):
    section = None
    obj_name = None
    row_names = []
    row_sense = {}
    var_order = {}
    lower, upper, integer, bounds_seen = [], [], [], []
    obj = {}
    entries = {}  # (row, col) -> coef
    rhs = {}
    in_integer_block = False

    def column(name, line):
        if name not in var_order:
            var_order[name] = len(var_order)
            lower.append(0.0)
            upper.append(np.inf)
            integer.append(in_integer_block)
            bounds_seen.append(False)
            if in_integer_block:
                upper[-1] = 1.0  # classic default for marker-declared integers
        return var_order[name]

    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            keyword = head[0].upper()
            if keyword == "NAME":
                section = "NAME"
            elif keyword in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
                section = keyword
            elif keyword == "RANGES":
                raise ModelFormatError("RANGES section not supported", line_no)
            else:
                raise ModelFormatError(f"unknown section {head[0]!r}", line_no)
            if section == "ENDATA":
                break
            continue
        fields = raw.split()
        if section == "ROWS":
            if len(fields) != 2:
                raise ModelFormatError("ROWS entries need sense and name", line_no)
            sense, name = fields[0].upper(), fields[1]
            if sense == "N":
                if obj_name is not None:
                    raise ModelFormatError("multiple objective rows", line_no)
                obj_name = name
            elif sense in ("L", "G", "E"):
                if name in row_sense:
                    raise ModelFormatError(f"duplicate row name {name!r}", line_no)
                row_sense[name] = sense
                row_names.append(name)
            else:
                raise ModelFormatError(f"unknown row sense {fields[0]!r}", line_no)
        elif section == "COLUMNS":
            if len(fields) >= 3 and fields[1] == "'MARKER'":
                if fields[2] == "'INTORG'":
                    in_integer_block = True
                elif fields[2] == "'INTEND'":
                    in_integer_block = False
                else:
                    raise ModelFormatError(f"unknown marker {fields[2]!r}", line_no)
                continue
            if len(fields) not in (3, 5):
                raise ModelFormatError("COLUMNS entries come in row/value pairs", line_no)
            col = column(fields[0], line_no)
            for k in range(1, len(fields), 2):
                row, value = fields[k], _float(fields[k + 1], line_no)
                if row == obj_name:
                    obj[col] = obj.get(col, 0.0) + value
                elif row in row_sense:
                    entries[(row, col)] = entries.get((row, col), 0.0) + value
                else:
                    raise ModelFormatError(f"unknown row {row!r}", line_no)
        elif section == "RHS":
            if len(fields) not in (3, 5):
                raise ModelFormatError("RHS entries come in row/value pairs", line_no)
            for k in range(1, len(fields), 2):
                row, value = fields[k], _float(fields[k + 1], line_no)
                if row not in row_sense:
                    raise ModelFormatError(f"unknown row {row!r}", line_no)
                rhs[row] = value
        elif section == "BOUNDS":
            btype = fields[0].upper()
            if btype in ("UP", "LO", "FX") and len(fields) == 4:
                col = column(fields[2], line_no)
                value = _float(fields[3], line_no)
                if not bounds_seen[col]:
                    bounds_seen[col] = True
                    if integer[col]:
                        upper[col] = np.inf  # explicit bounds replace the default
                if btype == "UP":
                    upper[col] = value
                elif btype == "LO":
                    lower[col] = value
                else:
                    lower[col] = upper[col] = value
            elif btype in ("MI", "PL", "BV") and len(fields) == 3:
                col = column(fields[2], line_no)
                if not bounds_seen[col]:
                    bounds_seen[col] = True
                    if integer[col]:
                        upper[col] = np.inf
                if btype == "MI":
                    lower[col] = -np.inf
                elif btype == "BV":
                    integer[col] = True
                    lower[col], upper[col] = 0.0, 1.0
                # PL leaves the +inf default
            else:
                raise ModelFormatError(f"unsupported bound entry {raw.strip()!r}", line_no)
        elif section == "NAME":
            raise ModelFormatError("unexpected continuation in NAME section", line_no)
        elif section is None:
            raise ModelFormatError("data before any section header", line_no)
    n = len(var_order)
    names = [None] * n
    for name, col in var_order.items():
        names[col] = name
    objective = np.zeros(n)
    for col, coef in obj.items():
        objective[col] = coef
    row_pos = {name: r for r, name in enumerate(row_names)}
    rows_i = [row_pos[row] for (row, _c) in entries]
    cols_i = [c for (_row, c) in entries]
    vals = list(entries.values())
    return MilpModel(
        names,
        np.array(lower),
        np.array(upper),
        np.array(integer, dtype=bool),
        objective,
        row_names,
        np.array([row_sense[r] for r in row_names], dtype="U1"),
        np.array([rhs.get(r, 0.0) for r in row_names]),
        (np.array(rows_i, dtype=np.int64),
         np.array(cols_i, dtype=np.int64),
         np.array(vals)),
    )


def _float(token, line):
    try:
        return float(token)
    except ValueError:
        raise ModelFormatError(f"bad numeric value {token!r}", line) from None
