"""CPLEX LP text export of the integrated 0-1 design model, plus a small reader.

Variable names: ``x_f_t`` pilot at subband f, slot t; ``e_f_t_g_s`` grid
point (f, t) served by pilot location (g, s); ``z_i`` line i is redundant.
The reader understands the subset this module writes and is enough to
re-check a solution against every row.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import enumerate_modular_lines, symmetric_triple_table
from .patterns import PilotPattern

LINE_WIDTH = 200


def _links(k, r):
    """Pairs ``((f, t), (g, s), cost)`` with cost within the radius cap."""
    out = []
    for f in range(k):
        for t in range(k):
            for g in range(k):
                df = abs(f - g)
                if df > r:
                    continue
                for s in range(k):
                    c = df + (t - s) % k
                    if c <= r:
                        out.append(((f, t), (g, s), c))
    return out


def _fmt_terms(terms):
    parts = []
    for coef, name in terms:
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        parts.append(f"{sign} {name}" if mag == 1 else f"{sign} {mag} {name}")
    text = " ".join(parts) if parts else "0"
    if text.startswith("+ "):
        text = text[2:]
    return text


def _wrap(text, indent="   "):
    """Break long rows at term boundaries."""
    if len(text) <= LINE_WIDTH:
        return [text]
    rows, cur = [], ""
    for tok in re.split(r"(?= [+-] )", text):
        if cur and len(cur) + len(tok) > LINE_WIDTH:
            rows.append(cur)
            cur = indent + tok.lstrip()
        else:
            cur += tok
    rows.append(cur)
    return rows


@dataclass
class LPStats:
    n_x: int
    n_e: int
    n_z: int
    n_rows: int

    @property
    def n_vars(self):
        return self.n_x + self.n_e + self.n_z


def build_lp(config, radius: int) -> tuple[str, LPStats]:
    """LP text for ``config`` with the radius cap fixed at ``radius``."""
    k = config.k
    use_lines = (config.budget is not None or config.objective == "collinearity") and k >= 2
    links = _links(k, radius) if config.objective == "coverage" else []
    lines = enumerate_modular_lines(k) if use_lines else ()
    xs = [f"x_{f}_{t}" for f in range(k) for t in range(k)]
    ename = {(p, q): f"e_{p[0]}_{p[1]}_{q[0]}_{q[1]}" for p, q, _ in links}

    out = ["\\ pilot pattern design model", f"\\ k={k} radius={radius}", "Minimize"]
    if config.objective == "coverage":
        obj = [(c, ename[(p, q)]) for p, q, c in links if c != 0]
    else:
        obj = [(1, f"z_{i}") for i in range(len(lines))]
    out += _wrap(" obj: " + _fmt_terms(obj))
    out.append("Subject To")
    rows = []
    for t in range(k):
        rows.append((f"slot_{t}", [(1, f"x_{f}_{t}") for f in range(k)], "=", 1))
    for f in range(k):
        rows.append((f"sub_{f}", [(1, f"x_{f}_{t}") for t in range(k)], "=", 1))
    if links:
        by_point = {}
        for p, q, _ in links:
            by_point.setdefault(p, []).append(ename[(p, q)])
        for f in range(k):
            for t in range(k):
                rows.append((f"assign_{f}_{t}", [(1, n) for n in by_point.get((f, t), [])], "=", 1))
        for p, q, _ in links:
            rows.append((f"link_{ename[(p, q)][2:]}", [(1, ename[(p, q)]), (-1, f"x_{q[0]}_{q[1]}")], "<=", 0))
    if lines:
        # a redundant line holds one extra pilot, or any number when four are allowed
        extra = 1 if config.forbid_four_collinear else k - 2
        for i, line in enumerate(lines):
            terms = [(1, f"x_{f}_{t}") for f, t in line.points] + [(-extra, f"z_{i}")]
            rows.append((f"line_{i}", terms, "<=", 2))
        if config.budget is not None:
            rows.append(("budget", [(1, f"z_{i}") for i in range(len(lines))], "<=", config.budget))
    if config.symmetric_exclusion and k >= 3:
        for j, (_, tri) in enumerate(symmetric_triple_table(k)):
            rows.append((f"sym_{j}", [(1, f"x_{f}_{t}") for f, t in tri], "<=", 2))
    for name, terms, sense, rhs in rows:
        out += _wrap(f" {name}: {_fmt_terms(terms)} {sense} {rhs}")
    out.append("Binaries")
    names = xs + list(ename.values()) + [f"z_{i}" for i in range(len(lines))]
    for i in range(0, len(names), 10):
        out.append(" " + " ".join(names[i:i + 10]))
    out.append("End")
    stats = LPStats(len(xs), len(ename), len(lines), len(rows))
    return "\n".join(out) + "\n", stats


def export_lp(config, path, radius: int | None = None) -> LPStats:
    """Write the model for ``config``; the radius cap defaults to stage one's value."""
    if radius is None:
        radius = config.radius
    if radius is None:
        from .solver import min_covering_radius
        radius = min_covering_radius(config.k, config.time_limit)
    text, stats = build_lp(config, radius)
    Path(path).write_text(text)
    return stats


# --- reader ------------------------------------------------------------------

@dataclass
class LPModel:
    sense: str
    objective: dict
    rows: list = field(default_factory=list)
    binaries: list = field(default_factory=list)

    @property
    def variables(self):
        seen = dict.fromkeys(self.binaries)
        for v in self.objective:
            seen.setdefault(v)
        for _, coefs, _, _ in self.rows:
            for v in coefs:
                seen.setdefault(v)
        return list(seen)


_TERM = re.compile(r"([+-])?\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)?\s*([A-Za-z_][\w.]*)")


def _parse_expr(text):
    coefs = {}
    text = text.strip()
    if text in ("", "0"):
        return coefs
    pos = 0
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse LP expression near {text[pos:pos + 30]!r}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        coef = float(m.group(2)) if m.group(2) else 1.0
        coefs[m.group(3)] = coefs.get(m.group(3), 0.0) + sign * coef
        pos = m.end()
        while pos < len(text) and text[pos] == " ":
            pos += 1
    return coefs


def parse_lp(text: str) -> LPModel:
    section = None
    statements = []
    binaries = []
    sense = "min"
    cur = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].rstrip()
        if not line.strip():
            continue
        head = line.strip().lower()
        if head in ("minimize", "maximize", "subject to", "binaries", "bounds", "generals", "end"):
            if cur is not None:
                statements.append((section, cur))
                cur = None
            section = head
            if head == "maximize":
                sense = "max"
            continue
        if section == "binaries":
            binaries.extend(line.split())
        elif section in ("minimize", "maximize", "subject to"):
            if raw.startswith(" ") and ":" in line.split()[0] and cur is not None:
                statements.append((section, cur))
                cur = None
            cur = line.strip() if cur is None else cur + " " + line.strip()
    if cur is not None:
        statements.append((section, cur))

    model = LPModel(sense=sense, objective={}, binaries=binaries)
    for sec, stmt in statements:
        name, _, body = stmt.partition(":")
        if sec in ("minimize", "maximize"):
            model.objective = _parse_expr(body)
            continue
        m = re.match(r"(.*?)(<=|>=|=)\s*(-?[\d.eE+-]+)\s*$", body)
        if not m:
            raise ValueError(f"malformed row {name!r}")
        model.rows.append((name.strip(), _parse_expr(m.group(1)), m.group(2), float(m.group(3))))
    return model


def violated_rows(model: LPModel, values: dict, tol: float = 1e-9) -> list[str]:
    """Names of rows not satisfied by ``values`` (missing variables count as 0)."""
    bad = []
    for name, coefs, op, rhs in model.rows:
        lhs = sum(c * values.get(v, 0) for v, c in coefs.items())
        ok = (lhs <= rhs + tol) if op == "<=" else (lhs >= rhs - tol) if op == ">=" else abs(lhs - rhs) <= tol
        if not ok:
            bad.append(name)
    return bad


def objective_value(model: LPModel, values: dict) -> float:
    return sum(c * values.get(v, 0) for v, c in model.objective.items())


def incidence_solution(pattern: PilotPattern, radius: int, use_lines: bool = True) -> dict:
    """Full 0-1 assignment for ``pattern``: pilots, nearest-pilot links and line flags."""
    k = pattern.k
    vals = {}
    pilots = pattern.pilots()
    for f, t in pilots:
        vals[f"x_{f}_{t}"] = 1
    for f in range(k):
        for t in range(k):
            best = min(pilots, key=lambda q: (abs(f - q[0]) + (t - q[1]) % k, q))
            c = abs(f - best[0]) + (t - best[1]) % k
            if c <= radius:
                vals[f"e_{f}_{t}_{best[0]}_{best[1]}"] = 1
    if use_lines and k >= 2:
        occ = np.zeros((k, k), dtype=int)
        for f, t in pilots:
            occ[f, t] += 1
        for i, line in enumerate(enumerate_modular_lines(k)):
            if sum(occ[f, t] for f, t in line.points) >= 3:
                vals[f"z_{i}"] = 1
    return vals
