"""Extended Butcher tableaus for two-stage-family SRK schemes.

Coefficients are held as :class:`fractions.Fraction` so that order conditions
of the built-in schemes can be evaluated exactly. Float views for the solver
are derived once and cached.
"""

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

NOISE_MODES = ("general-ito", "general-strat", "commutative-ito", "commutative-strat", "additive")
UNKNOWN_BEYOND_2 = "unknown-beyond-2"

_VECTORS = ("c0", "c1", "alpha", "beta1", "beta2")
_MATRICES = ("A0", "A1", "B1")


class TableauFormatError(ValueError):
    """Malformed or inconsistent tableau document."""


def _frac(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    try:
        return Fraction(x)
    except (OverflowError, ValueError) as exc:
        raise ValueError(f"tableau entries must be finite, got {x!r}") from exc


def _vec(v, s, name):
    v = tuple(_frac(x) for x in v)
    if len(v) != s:
        raise ValueError(f"{name} has length {len(v)}, expected s={s}")
    return v


def _mat(M, s, name):
    rows = tuple(tuple(_frac(x) for x in row) for row in M)
    if len(rows) != s or any(len(r) != s for r in rows):
        raise ValueError(f"{name} must be {s}x{s}")
    return rows


def _zeros(s):
    return tuple(Fraction(0) for _ in range(s))


def _zeros2(s):
    return tuple(_zeros(s) for _ in range(s))


@dataclass(frozen=True)
class ExtendedTableau:
    """Coefficients (c0, c1, alpha, A0, A1, B1, beta1, beta2) of an s-stage scheme.

    Missing vectors and matrices default to zero. ``noise_mode_hint`` is set by
    the parser when a document omits ``beta2`` (reduced additive-noise tableau)
    and takes no part in equality.
    """

    s: int
    alpha: tuple
    beta1: tuple
    beta2: tuple = None
    c0: tuple = None
    c1: tuple = None
    A0: tuple = None
    A1: tuple = None
    B1: tuple = None
    name: str = ""
    noise_mode_hint: str = field(default=None, compare=False)

    def __post_init__(self):
        s = int(self.s)
        if s < 1:
            raise ValueError("stage count s must be positive")
        object.__setattr__(self, "s", s)
        for name in _VECTORS:
            v = getattr(self, name)
            object.__setattr__(self, name, _zeros(s) if v is None else _vec(v, s, name))
        for name in _MATRICES:
            M = getattr(self, name)
            object.__setattr__(self, name, _zeros2(s) if M is None else _mat(M, s, name))
        for i in range(s):
            for j in range(i, s):
                if self.B1[i][j] != 0:
                    raise ValueError("B1 not strictly lower triangular")

    @property
    def explicit(self):
        return all(self.A0[i][j] == 0 for i in range(self.s) for j in range(i, self.s))

    @cached_property
    def arrays(self):
        """Float64 views: dict of numpy arrays keyed by coefficient name."""
        out = {}
        for name in _VECTORS:
            out[name] = np.array([float(x) for x in getattr(self, name)])
        for name in _MATRICES:
            out[name] = np.array([[float(x) for x in row] for row in getattr(self, name)])
        return out

    def replace(self, **changes):
        kw = {k: getattr(self, k) for k in ("s", "name", *_VECTORS, *_MATRICES)}
        kw.update(changes)
        return ExtendedTableau(**kw)


@dataclass(frozen=True)
class Condition:
    id: str
    lhs: object
    required: object
    satisfied: bool


@dataclass(frozen=True)
class OrderReport:
    conditions: list
    pS: float
    pD: object
    noise_mode: str

    def failed(self, stochastic_only=False):
        return [c for c in self.conditions
                if not c.satisfied and not (stochastic_only and c.id.startswith("det:"))]


def _dot(u, v):
    return sum((a * b for a, b in zip(u, v)), type(u[0])(0))


def _matvec(M, v):
    return [_dot(row, v) for row in M]


def check_order_conditions(t, mode, tol=1e-12, exact=False):
    """Evaluate the strong order conditions of ``t`` for the given noise mode.

    With ``exact=True`` the evaluation runs in rational arithmetic and equality
    is tested exactly; otherwise in float64 with absolute tolerance ``tol``.
    """
    if mode not in NOISE_MODES:
        raise ValueError(f"unknown noise mode {mode!r}; expected one of {NOISE_MODES}")
    if exact:
        conv, tol = (lambda x: x), 0
    else:
        conv = float
    alpha = [conv(x) for x in t.alpha]
    beta1 = [conv(x) for x in t.beta1]
    beta2 = [conv(x) for x in t.beta2]
    c0 = [conv(x) for x in t.c0]
    c1 = [conv(x) for x in t.c1]
    A0 = [[conv(x) for x in r] for r in t.A0]
    A1 = [[conv(x) for x in r] for r in t.A1]
    B1 = [[conv(x) for x in r] for r in t.B1]
    e = [conv(Fraction(1))] * t.s
    one, zero, half = conv(Fraction(1)), conv(Fraction(0)), conv(Fraction(1, 2))

    def cond(cid, lhs, req):
        return Condition(cid, lhs, req, abs(lhs - req) <= tol)

    if mode == "additive":
        stoch = [cond("alpha.e", _dot(alpha, e), one), cond("beta1.e", _dot(beta1, e), one)]
        pS = 1.0 if all(c.satisfied for c in stoch) else None
    else:
        half_order = [
            cond("alpha.e", _dot(alpha, e), one),
            cond("beta1.e", _dot(beta1, e), one),
            cond("beta2.e", _dot(beta2, e), zero),
            cond("beta2.c1", _dot(beta2, c1), zero),
            cond("beta2.A1e", _dot(beta2, _matvec(A1, e)), zero),
        ]
        first = [cond("beta2.B1e", _dot(beta2, _matvec(B1, e)), one)]
        stoch = half_order + first
        if all(c.satisfied for c in stoch):
            pS = 1.0
        elif mode.endswith("ito") and all(c.satisfied for c in half_order):
            pS = 0.5
        else:
            # Stratonovich variants have no order-1/2 subset of conditions
            pS = None

    A0e = _matvec(A0, e)
    det1 = [cond("det:alpha.e", _dot(alpha, e), one)]
    det2 = [cond("det:alpha.c0", _dot(alpha, c0), half),
            cond("det:alpha.A0e", _dot(alpha, A0e), half)]
    third, sixth = conv(Fraction(1, 3)), conv(Fraction(1, 6))
    det3 = [cond("det:alpha.c0^2", _dot(alpha, [x * x for x in c0]), third),
            cond("det:alpha.A0c0", _dot(alpha, _matvec(A0, c0)), sixth)]
    if not all(c.satisfied for c in det1):
        pD = None
    elif not all(c.satisfied for c in det2):
        pD = 1
    elif not all(c.satisfied for c in det3):
        pD = 2
    else:
        pD = UNKNOWN_BEYOND_2
    return OrderReport(stoch + det1 + det2, pS, pD, mode)


_F = Fraction


def _builtin_table():
    half = _F(1, 2)
    return {
        "EM": dict(s=1, alpha=[1], beta1=[1], beta2=[0]),
        "SSBE": dict(s=1, alpha=[1], beta1=[1], beta2=[0], c0=[1], c1=[1], A0=[[1]], A1=[[1]]),
        "SRI2s1": dict(s=2, alpha=[1, 0], beta1=[1, 0], beta2=[-1, 1], B1=[[0, 0], [1, 0]]),
        "SRI2s2": dict(s=2, alpha=[half, half], beta1=[1, 0], beta2=[-1, 1], c0=[0, 1],
                       A0=[[0, 0], [1, 0]], B1=[[0, 0], [1, 0]]),
        "SRA2s1": dict(s=1, alpha=[1], beta1=[1]),
        "SRA2s2": dict(s=2, alpha=[half, half], beta1=[1, 0], c0=[0, 1], A0=[[0, 0], [1, 0]]),
    }


BUILTIN_NAMES = tuple(_builtin_table())


def builtin(name):
    """Built-in tableau by scheme name (EM, SSBE, SRI2s1, SRI2s2, SRA2s1, SRA2s2)."""
    table = _builtin_table()
    if name not in table:
        raise KeyError(f"unknown built-in tableau {name!r}; known: {', '.join(table)}")
    return ExtendedTableau(name=name, **table[name])


# --- text format --------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\[)|(\])|(,)|([-+]?[0-9][0-9.eE+\-]*(?:/[0-9]+)?))")


def _parse_value(text, key):
    text = text.strip()
    if text.startswith('"') or text.startswith("'"):
        q = text[0]
        if len(text) < 2 or not text.endswith(q):
            raise TableauFormatError(f"unterminated string for {key!r}")
        return text[1:-1]
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise TableauFormatError(f"cannot parse value of {key!r} near {text[pos:pos + 12]!r}")
        pos = m.end()
        if m.group(4) is not None:
            try:
                tokens.append(("num", Fraction(m.group(4))))
            except (ValueError, ZeroDivisionError) as exc:
                raise TableauFormatError(f"bad number {m.group(4)!r} in {key!r}") from exc
        else:
            tokens.append((m.group(1) or m.group(2) or m.group(3), None))
        if text[pos:].strip() == "":
            break

    def parse(i):
        kind, val = tokens[i]
        if kind == "num":
            return val, i + 1
        if kind != "[":
            raise TableauFormatError(f"unexpected {kind!r} in {key!r}")
        items = []
        i += 1
        if i < len(tokens) and tokens[i][0] == "]":
            return items, i + 1
        while True:
            if i >= len(tokens):
                raise TableauFormatError(f"unbalanced brackets in {key!r}")
            item, i = parse(i)
            items.append(item)
            if i >= len(tokens):
                raise TableauFormatError(f"unbalanced brackets in {key!r}")
            if tokens[i][0] == ",":
                i += 1
                if i < len(tokens) and tokens[i][0] == "]":
                    return items, i + 1
            elif tokens[i][0] == "]":
                return items, i + 1
            else:
                raise TableauFormatError(f"expected ',' or ']' in {key!r}")

    if not tokens:
        raise TableauFormatError(f"empty value for {key!r}")
    value, end = parse(0)
    if end != len(tokens):
        raise TableauFormatError(f"trailing tokens in {key!r}")
    return value


def parse_tableau(text):
    """Parse a tableau document (``key = value`` lines, ``#`` comments)."""
    entries = {}
    pending_key, pending = None, ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if pending_key is None:
            if "=" not in line:
                raise TableauFormatError(f"line {lineno}: expected 'key = value'")
            key, val = (p.strip() for p in line.split("=", 1))
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", key):
                raise TableauFormatError(f"line {lineno}: bad key {key!r}")
            if key in entries:
                raise TableauFormatError(f"line {lineno}: duplicate key {key!r}")
            pending_key, pending = key, val
        else:
            pending += " " + line
        if pending.count("[") <= pending.count("]"):
            entries[pending_key] = _parse_value(pending, pending_key)
            pending_key, pending = None, ""
    if pending_key is not None:
        raise TableauFormatError(f"unbalanced brackets in {pending_key!r}")

    known = {"s", "name", *_VECTORS, *_MATRICES}
    unknown = set(entries) - known
    if unknown:
        raise TableauFormatError(f"unknown keys: {', '.join(sorted(unknown))}")
    for req in ("s", "alpha", "beta1"):
        if req not in entries:
            raise TableauFormatError(f"missing required key {req!r}")
    s = entries["s"]
    if not isinstance(s, Fraction) or s.denominator != 1 or s < 1:
        raise TableauFormatError("s must be a positive integer")
    hint = None
    if "beta2" not in entries:
        hint = "additive"
    kw = {k: v for k, v in entries.items() if k not in ("s", "name")}
    for k in _VECTORS:
        if k in kw and (not isinstance(kw[k], list) or any(isinstance(x, list) for x in kw[k])):
            raise TableauFormatError(f"{k} must be a flat array")
    for k in _MATRICES:
        if k in kw and (not isinstance(kw[k], list) or not all(isinstance(r, list) for r in kw[k])):
            raise TableauFormatError(f"{k} must be an array of row arrays")
    try:
        return ExtendedTableau(s=int(s), name=str(entries.get("name", "")), noise_mode_hint=hint, **kw)
    except ValueError as exc:
        raise TableauFormatError(str(exc)) from exc


def _fmt(x):
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def serialize_tableau(t):
    lines = [f'name = "{t.name}"', f"s = {t.s}"]
    for k in _VECTORS:
        lines.append(f"{k} = [{', '.join(_fmt(x) for x in getattr(t, k))}]")
    for k in _MATRICES:
        rows = ", ".join("[" + ", ".join(_fmt(x) for x in r) + "]" for r in getattr(t, k))
        lines.append(f"{k} = [{rows}]")
    return "\n".join(lines) + "\n"
