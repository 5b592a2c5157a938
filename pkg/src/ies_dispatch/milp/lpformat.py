"""CPLEX-style LP text export and import.

Formatting is deterministic: coefficients use 12 significant digits, rows are
written in declaration order, every variable gets one line in ``Bounds`` (in
declaration order, so a re-import preserves variable order), and binaries are
listed in ``Binaries``. A nonzero objective constant is written as a trailing
numeric term of the objective.
"""

from __future__ import annotations

import math
import re
from typing import Dict, List, Tuple

from .problem import Integrality, MilpProblem, Relation

TERMS_PER_LINE = 8
_NAME_OK = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]()]*$")


def fmt(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    s = f"{v:.12g}"
    return "0" if s == "-0" else s


def _check_name(name: str) -> str:
    if not _NAME_OK.match(name):
        raise ValueError(f"name {name!r} is not LP-format safe")
    return name


def _terms(coefs: Dict[int, float], names: List[str]) -> List[str]:
    out = []
    for k in sorted(coefs):
        v = coefs[k]
        sign = "-" if v < 0 else "+"
        out.append(f"{sign} {fmt(abs(v))} {names[k]}")
    return out


def _wrap(head: str, terms: List[str], tail: str = "") -> List[str]:
    lines = []
    chunk = [head] if head else []
    for i, t in enumerate(terms):
        chunk.append(t)
        if (i + 1) % TERMS_PER_LINE == 0 and i + 1 < len(terms):
            lines.append(" " + " ".join(chunk))
            chunk = [" "]
    if tail:
        chunk.append(tail)
    lines.append(" " + " ".join(chunk))
    return lines


def export_problem(problem: MilpProblem) -> str:
    """Render ``problem`` as LP-format text."""
    names = [_check_name(v.name) for v in problem.variables]
    lines = [f"\\ Problem: {problem.name}", "Minimize"]
    obj_terms = _terms(problem.objective, names)
    tail = ""
    if problem.objective_offset != 0.0 or not obj_terms:
        off = problem.objective_offset
        tail = f"{'-' if off < 0 else '+'} {fmt(abs(off))}"
    lines += _wrap("obj:", obj_terms, tail)
    lines.append("Subject To")
    for c in problem.constraints:
        _check_name(c.name)
        rel = {"<=": "<=", "=": "=", ">=": ">="}[c.relation.value]
        terms = _terms(c.coefficients, names) or [f"+ 0 {names[0]}"]
        lines += _wrap(f"{c.name}:", terms, f"{rel} {fmt(c.rhs)}")
    lines.append("Bounds")
    for v in problem.variables:
        lo, hi = v.lower, v.upper
        if lo == hi:
            lines.append(f" {v.name} = {fmt(lo)}")
        elif math.isinf(lo) and math.isinf(hi):
            lines.append(f" {v.name} free")
        elif math.isinf(hi):
            lines.append(f" {v.name} >= {fmt(lo)}")
        else:
            lines.append(f" {fmt(lo)} <= {v.name} <= {fmt(hi)}")
    bins = [v.name for v in problem.variables if v.integrality is Integrality.BINARY]
    if bins:
        lines.append("Binaries")
        for i in range(0, len(bins), TERMS_PER_LINE):
            lines.append(" " + " ".join(bins[i : i + TERMS_PER_LINE]))
    lines.append("End")
    return "\n".join(lines) + "\n"


# -- import -------------------------------------------------------------------

_SECTIONS = {
    "minimize": "min", "minimise": "min", "min": "min",
    "maximize": "max", "maximise": "max", "max": "max",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "generals": "gen", "general": "gen", "gen": "gen",
    "end": "end",
}
_TOKEN = re.compile(r"\s*(<=|>=|=<|=>|<|>|=|[+-]|:|[^\s+\-<>=:]+)")


def _num(tok: str):
    t = tok.lower()
    if t in ("inf", "infinity", "+inf", "+infinity"):
        return math.inf
    try:
        return float(tok)
    except ValueError:
        return None


def _join_exponents(toks: List[str]) -> List[str]:
    out: List[str] = []
    i = 0
    while i < len(toks):
        t = toks[i]
        if re.fullmatch(r"(\d+\.?\d*|\.\d+)[eE]", t) and i + 2 < len(toks) and toks[i + 1] in "+-":
            out.append(t + toks[i + 1] + toks[i + 2])
            i += 3
            continue
        out.append(t)
        i += 1
    return out


def _linear(tokens: List[str]) -> Tuple[Dict[str, float], float]:
    """Parse ``[+|-] [coef] name ...`` into coefficients and a constant."""
    coefs: Dict[str, float] = {}
    const = 0.0
    sign = 1.0
    coef = None
    for t in tokens:
        if t == "+":
            continue
        if t == "-":
            sign = -sign
            continue
        v = _num(t)
        if v is not None:
            if coef is not None:
                const += sign * coef
                sign = 1.0
            coef = v
            continue
        c = sign * (1.0 if coef is None else coef)
        coefs[t] = coefs.get(t, 0.0) + c
        sign, coef = 1.0, None
    if coef is not None:
        const += sign * coef
    return coefs, const


def parse_lp(text: str) -> MilpProblem:
    """Parse LP-format text produced by :func:`export_problem` (and common variants)."""
    name = "problem"
    chunks: Dict[str, List[str]] = {k: [] for k in ("min", "max", "st", "bounds", "bin", "gen")}
    section = None
    for raw in text.splitlines():
        if raw.lstrip().startswith("\\"):
            m = re.match(r"\\\s*Problem:\s*(\S+)", raw.strip())
            if m:
                name = m.group(1)
            continue
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "end":
                break
            continue
        if section is None:
            raise ValueError(f"content outside any section: {line!r}")
        chunks[section].append(line)
    if chunks["gen"]:
        raise ValueError("general integer variables are not supported")

    problem = MilpProblem(name=name)
    var_lo: Dict[str, float] = {}
    var_hi: Dict[str, float] = {}
    order: List[str] = []

    def touch(v: str) -> None:
        if v not in var_lo:
            var_lo[v], var_hi[v] = 0.0, math.inf
            order.append(v)

    # bounds first so variable order follows the Bounds section
    for line in chunks["bounds"]:
        toks = _join_exponents([t for t in _TOKEN.findall(line)])
        low = [t.lower() for t in toks]
        if len(toks) == 2 and low[1] == "free":
            touch(toks[0])
            var_lo[toks[0]], var_hi[toks[0]] = -math.inf, math.inf
            continue
        nums = _signed_numbers(toks)
        if len(nums) == 5 and nums[1] in ("<=", "=<") and nums[3] in ("<=", "=<"):
            v = nums[2]
            touch(v)
            var_lo[v], var_hi[v] = nums[0], nums[4]
        elif len(nums) == 3:
            a, rel, b = nums
            if isinstance(a, str) and not isinstance(b, str):
                v, val = a, b
                flip = False
            else:
                v, val = b, a
                flip = True
            touch(v)
            rel = {"=<": "<=", "=>": ">=", "<": "<=", ">": ">="}.get(rel, rel)
            if flip and rel != "=":
                rel = "<=" if rel == ">=" else ">="
            if rel == "=":
                var_lo[v] = var_hi[v] = val
            elif rel == "<=":
                var_hi[v] = val
            else:
                var_lo[v] = val
        else:
            raise ValueError(f"cannot parse bound line {line!r}")

    sense = "max" if chunks["max"] else "min"
    obj_text = " ".join(chunks[sense])
    obj_toks = _join_exponents(_TOKEN.findall(obj_text))
    if ":" in obj_toks:
        obj_toks = obj_toks[obj_toks.index(":") + 1 :]
    obj_coefs, obj_const = _linear(obj_toks)

    rows = []
    current: List[str] = []
    for line in chunks["st"]:
        current.append(line)
        toks = _TOKEN.findall(line)
        if any(t in ("<=", ">=", "=<", "=>", "<", ">", "=") for t in toks):
            rows.append(" ".join(current))
            current = []
    if current:
        raise ValueError("unterminated constraint in Subject To")
    parsed_rows = []
    for i, row in enumerate(rows):
        toks = _join_exponents(_TOKEN.findall(row))
        cname = f"r{i}"
        if len(toks) > 1 and toks[1] == ":":
            cname = toks[0]
            toks = toks[2:]
        rel_pos = next(k for k, t in enumerate(toks) if t in ("<=", ">=", "=<", "=>", "<", ">", "="))
        rel = {"=<": "<=", "=>": ">=", "<": "<=", ">": ">="}.get(toks[rel_pos], toks[rel_pos])
        coefs, const = _linear(toks[:rel_pos])
        rhs_coefs, rhs = _linear(toks[rel_pos + 1 :])
        for v, c in rhs_coefs.items():
            coefs[v] = coefs.get(v, 0.0) - c
        parsed_rows.append((cname, coefs, rel, rhs - const))

    for v in list(obj_coefs):
        touch(v)
    for _, coefs, _, _ in parsed_rows:
        for v in coefs:
            touch(v)
    binaries = set()
    for line in chunks["bin"]:
        for v in line.split():
            touch(v)
            binaries.add(v)

    for v in order:
        lo, hi = var_lo[v], var_hi[v]
        if v in binaries:
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        problem.add_var(v, lo, hi, binary=v in binaries)
    scale = -1.0 if sense == "max" else 1.0
    problem.add_objective({problem.var_index(v): c for v, c in obj_coefs.items()}, scale)
    problem.objective_offset += scale * obj_const
    for cname, coefs, rel, rhs in parsed_rows:
        problem.add_constraint(
            {problem.var_index(v): c for v, c in coefs.items() if c != 0.0},
            Relation(rel), rhs, name=cname,
        )
    return problem


def _signed_numbers(toks: List[str]) -> list:
    """Fold sign tokens into the following number; keep names and relations."""
    out: list = []
    sign = 1.0
    for t in toks:
        if t in ("+", "-"):
            sign = -sign if t == "-" else sign
            continue
        v = _num(t)
        if v is not None:
            out.append(sign * v)
        elif t.lower() in ("-inf", "-infinity"):
            out.append(-math.inf)
        else:
            out.append(t)
        sign = 1.0
    return out
