"""Text format for network descriptions, with parser and elaborator.

A ``.slh`` document declares modes, parameters, subsystems (coupling and
Hamiltonian expressions), the connections between subsystems (series chain
plus at most one feedback loop), one drive statement, optional local damping,
and any number of sweep blocks.  The grammar is line oriented, LL(1), and
documented normatively in docs/grammar.md; ``#`` starts a comment.

The parser never throws on malformed input: it collects positioned
diagnostics (capped) and resynchronizes at the next line.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np

from . import slh
from .operators import MECHANICAL, OPTICAL, ModeRegistry, OperatorExpr

MAX_DIAGNOSTICS = 20

SWEEP_BUILTINS = ("delta_over_chi", "x", "y", "z")


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str
    token: str = ""

    def __str__(self) -> str:
        tok = f" near {self.token!r}" if self.token else ""
        return f"{self.line}:{self.col}: {self.message}{tok}"


class DocumentError(ValueError):
    """Raised by loading/elaboration wrappers when a document is unusable."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)[:MAX_DIAGNOSTICS]
        super().__init__("; ".join(str(d) for d in self.diagnostics))


# ---------------------------------------------------------------------------
# expression AST (positions excluded from equality for round-trip tests)


@dataclass(frozen=True)
class Num:
    value: complex
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Name:
    ident: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Ladder:
    dag: bool
    mode: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Sqrt:
    arg: "Expr"


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # '+', '-', '*'
    left: "Expr"
    right: "Expr"


Expr = Num | Name | Ladder | Sqrt | Neg | BinOp


def _walk(e: Expr):
    yield e
    if isinstance(e, (Sqrt, Neg)):
        yield from _walk(e.arg)
    elif isinstance(e, BinOp):
        yield from _walk(e.left)
        yield from _walk(e.right)


# ---------------------------------------------------------------------------
# document model


@dataclass(frozen=True)
class ModeDecl:
    label: str
    kind: str
    dim: int
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ParamDecl:
    name: str
    value: float
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SubsystemDecl:
    name: str
    scattering: Expr
    coupling: Expr
    hamiltonian: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SeriesDecl:
    upstream: str
    downstream: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class FeedbackDecl:
    plant: str
    controller: str
    return_coupling: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class DriveDecl:
    mode: str
    amplitude: Expr
    frequency: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class DampDecl:
    mode: str
    rate: Expr
    nth: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SweepDecl:
    variable: str
    start: float
    stop: float
    points: int
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class NetworkDoc:
    version: int
    modes: tuple[ModeDecl, ...]
    params: tuple[ParamDecl, ...]
    subsystems: tuple[SubsystemDecl, ...]
    series: tuple[SeriesDecl, ...]
    feedback: FeedbackDecl | None
    drive: DriveDecl
    damps: tuple[DampDecl, ...]
    sweeps: tuple[SweepDecl, ...]


# ---------------------------------------------------------------------------
# lexer


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT NUMBER IMAG PUNCT NEWLINE EOF
    text: str
    line: int
    col: int


_PUNCT_SINGLE = set("+-*=(){}")


def _lex(source: str) -> tuple[list[Token], list[Diagnostic]]:
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    lineno = 0
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        i = 0
        n = len(line)
        while i < n:
            ch = line[i]
            col = i + 1
            if ch in " \t\r":
                i += 1
                continue
            if line[i : i + 2] == "->":
                tokens.append(Token("PUNCT", "->", lineno, col))
                i += 2
                continue
            if ch.isdigit() or (ch == "." and i + 1 < n and line[i + 1].isdigit()):
                j = i
                seen_dot = seen_exp = False
                while j < n:
                    cj = line[j]
                    if cj.isdigit():
                        j += 1
                    elif cj == "." and not seen_dot and not seen_exp:
                        seen_dot = True
                        j += 1
                    elif cj in "eE" and not seen_exp and j + 1 < n and (
                        line[j + 1].isdigit() or line[j + 1] in "+-"
                    ):
                        seen_exp = True
                        j += 2 if line[j + 1] in "+-" else 1
                    else:
                        break
                text = line[i:j]
                if j < n and line[j] in "ij":
                    tokens.append(Token("IMAG", text, lineno, col))
                    j += 1
                else:
                    tokens.append(Token("NUMBER", text, lineno, col))
                i = j
                continue
            if ch.isalpha() or ch == "_":
                j = i
                while j < n and (line[j].isalnum() or line[j] == "_"):
                    j += 1
                tokens.append(Token("IDENT", line[i:j], lineno, col))
                i = j
                continue
            if ch in _PUNCT_SINGLE:
                tokens.append(Token("PUNCT", ch, lineno, col))
                i += 1
                continue
            if len(diags) < MAX_DIAGNOSTICS:
                diags.append(Diagnostic(lineno, col, "unexpected character", ch))
            i += 1
        tokens.append(Token("NEWLINE", "", lineno, n + 1))
    tokens.append(Token("EOF", "", lineno + 1, 1))
    return tokens, diags


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, tokens: list[Token], diags: list[Diagnostic]):
        self.tokens = tokens
        self.pos = 0
        self.diags = diags

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.cur
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.cur
        return tok.kind == kind and (text is None or tok.text == text)

    def at_ident(self, text: str) -> bool:
        return self.at("IDENT", text)

    def error(self, message: str, tok: Token | None = None) -> None:
        tok = tok or self.cur
        if len(self.diags) < MAX_DIAGNOSTICS:
            self.diags.append(Diagnostic(tok.line, tok.col, message, tok.text))

    def expect(self, kind: str, text: str | None = None, what: str = "") -> Token | None:
        if self.at(kind, text):
            return self.advance()
        expected = what or (f"'{text}'" if text is not None else kind.lower())
        self.error(f"expected {expected}")
        return None

    def skip_line(self) -> None:
        while not self.at("NEWLINE") and not self.at("EOF"):
            self.advance()
        if self.at("NEWLINE"):
            self.advance()

    def end_line(self) -> None:
        if self.at("NEWLINE"):
            self.advance()
        elif not self.at("EOF"):
            self.error("expected end of line")
            self.skip_line()

    def skip_blank(self) -> None:
        while self.at("NEWLINE"):
            self.advance()

    # -- expressions --

    def parse_expr(self) -> Expr:
        left = self.parse_term()
        while self.at("PUNCT", "+") or self.at("PUNCT", "-"):
            op = self.advance().text
            right = self.parse_term()
            left = BinOp(op, left, right)
        return left

    def parse_term(self) -> Expr:
        left = self.parse_unary()
        while self.at("PUNCT", "*"):
            self.advance()
            right = self.parse_unary()
            left = BinOp("*", left, right)
        return left

    def parse_unary(self) -> Expr:
        if self.at("PUNCT", "-"):
            self.advance()
            return Neg(self.parse_unary())
        if self.at("PUNCT", "+"):
            self.advance()
            return self.parse_unary()
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        tok = self.cur
        if tok.kind == "NUMBER":
            self.advance()
            return Num(complex(float(tok.text)), tok.line, tok.col)
        if tok.kind == "IMAG":
            self.advance()
            return Num(complex(0.0, float(tok.text)), tok.line, tok.col)
        if tok.kind == "IDENT" and tok.text in ("A", "Adag"):
            self.advance()
            open_tok = self.cur
            if self.expect("PUNCT", "(") is None:
                return Num(0.0, tok.line, tok.col)
            mode_tok = self.expect("IDENT", what="mode name")
            if mode_tok is None:
                return Num(0.0, tok.line, tok.col)
            if not self.at("PUNCT", ")"):
                self.error("expected ')' to close ladder operator", open_tok)
                return Num(0.0, tok.line, tok.col)
            self.advance()
            return Ladder(tok.text == "Adag", mode_tok.text, tok.line, tok.col)
        if tok.kind == "IDENT" and tok.text == "sqrt":
            self.advance()
            open_tok = self.cur
            if self.expect("PUNCT", "(") is None:
                return Num(0.0, tok.line, tok.col)
            arg = self.parse_expr()
            if not self.at("PUNCT", ")"):
                self.error("expected ')' to close 'sqrt('", open_tok)
                return Num(0.0, tok.line, tok.col)
            self.advance()
            return Sqrt(arg)
        if tok.kind == "IDENT":
            self.advance()
            return Name(tok.text, tok.line, tok.col)
        if tok.kind == "PUNCT" and tok.text == "(":
            open_tok = self.advance()
            inner = self.parse_expr()
            if not self.at("PUNCT", ")"):
                self.error("expected ')' to close '('", open_tok)
                return inner
            self.advance()
            return inner
        self.error("expected expression")
        if not self.at("NEWLINE") and not self.at("EOF"):
            self.advance()
        return Num(0.0, tok.line, tok.col)

    def parse_number(self, what: str) -> float:
        neg = False
        while self.at("PUNCT", "-") or self.at("PUNCT", "+"):
            neg ^= self.advance().text == "-"
        tok = self.expect("NUMBER", what=what)
        if tok is None:
            return 0.0
        v = float(tok.text)
        return -v if neg else v

    def parse_int(self, what: str) -> int:
        tok = self.expect("NUMBER", what=what)
        if tok is None:
            return 0
        try:
            return int(tok.text)
        except ValueError:
            self.error(f"expected integer {what}", tok)
            return 0

    # -- statements --

    def parse_document(self) -> NetworkDoc | None:
        version = 1
        modes: list[ModeDecl] = []
        params: list[ParamDecl] = []
        subsystems: list[SubsystemDecl] = []
        series_decls: list[SeriesDecl] = []
        feedbacks: list[FeedbackDecl] = []
        drives: list[DriveDecl] = []
        damps: list[DampDecl] = []
        sweeps: list[SweepDecl] = []

        self.skip_blank()
        while not self.at("EOF"):
            tok = self.cur
            if tok.kind != "IDENT":
                self.error("expected a statement keyword")
                self.skip_line()
                self.skip_blank()
                continue
            word = tok.text
            if word == "slh":
                self.advance()
                self.expect("IDENT", "version")
                version = self.parse_int("version number")
                self.end_line()
            elif word == "mode":
                self.advance()
                name = self.expect("IDENT", what="mode label")
                kind_tok = self.expect("IDENT", what="'optical' or 'mechanical'")
                kind = kind_tok.text if kind_tok else OPTICAL
                if kind_tok and kind not in (OPTICAL, MECHANICAL):
                    self.error("mode kind must be 'optical' or 'mechanical'", kind_tok)
                    kind = OPTICAL
                dim = 5
                if self.at_ident("dim"):
                    self.advance()
                    dim = self.parse_int("truncation dimension")
                if name:
                    modes.append(ModeDecl(name.text, kind, dim, tok.line, tok.col))
                self.end_line()
            elif word == "param":
                self.advance()
                name = self.expect("IDENT", what="parameter name")
                self.expect("PUNCT", "=")
                value = self.parse_number("parameter value")
                if name:
                    params.append(ParamDecl(name.text, value, tok.line, tok.col))
                self.end_line()
            elif word == "subsystem":
                decl = self.parse_subsystem()
                if decl:
                    subsystems.append(decl)
            elif word == "series":
                self.advance()
                up = self.expect("IDENT", what="subsystem name")
                self.expect("PUNCT", "->")
                down = self.expect("IDENT", what="subsystem name")
                if up and down:
                    series_decls.append(SeriesDecl(up.text, down.text, tok.line, tok.col))
                self.end_line()
            elif word == "feedback":
                self.advance()
                plant = self.expect("IDENT", what="plant subsystem name")
                self.expect("PUNCT", "->")
                controller = self.expect("IDENT", what="controller subsystem name")
                self.expect("IDENT", "return")
                expr = self.parse_expr()
                if plant and controller:
                    feedbacks.append(
                        FeedbackDecl(plant.text, controller.text, expr, tok.line, tok.col)
                    )
                self.end_line()
            elif word == "drive":
                self.advance()
                mode = self.expect("IDENT", what="driven mode label")
                self.expect("IDENT", "amplitude")
                amp = self.parse_expr()
                freq: Expr = Num(0.0)
                if self.at_ident("frequency"):
                    self.advance()
                    freq = self.parse_expr()
                if mode:
                    drives.append(DriveDecl(mode.text, amp, freq, tok.line, tok.col))
                self.end_line()
            elif word == "damp":
                self.advance()
                mode = self.expect("IDENT", what="damped mode label")
                self.expect("IDENT", "rate")
                rate = self.parse_expr()
                nth: Expr = Num(0.0)
                if self.at_ident("nth"):
                    self.advance()
                    nth = self.parse_expr()
                if mode:
                    damps.append(DampDecl(mode.text, rate, nth, tok.line, tok.col))
                self.end_line()
            elif word == "sweep":
                self.advance()
                var = self.expect("IDENT", what="sweep variable")
                self.expect("IDENT", "from")
                start = self.parse_number("sweep start")
                self.expect("IDENT", "to")
                stop = self.parse_number("sweep stop")
                self.expect("IDENT", "points")
                npts = self.parse_int("point count")
                if var:
                    sweeps.append(SweepDecl(var.text, start, stop, npts, tok.line, tok.col))
                self.end_line()
            else:
                self.error(f"unknown statement '{word}'")
                self.skip_line()
            self.skip_blank()

        if not subsystems and not self.diags:
            self.diags.append(Diagnostic(1, 1, "no subsystem declared"))
        if not drives and not self.diags:
            self.diags.append(Diagnostic(1, 1, "exactly one drive statement required"))
        for extra in drives[1:]:
            self.error(
                "exactly one drive statement allowed",
                Token("IDENT", "drive", extra.line, extra.col),
            )
        for extra in feedbacks[1:]:
            self.error(
                "only one feedback loop is supported",
                Token("IDENT", "feedback", extra.line, extra.col),
            )
        if self.diags:
            return None
        return NetworkDoc(
            version=version,
            modes=tuple(modes),
            params=tuple(params),
            subsystems=tuple(subsystems),
            series=tuple(series_decls),
            feedback=feedbacks[0] if feedbacks else None,
            drive=drives[0],
            damps=tuple(damps),
            sweeps=tuple(sweeps),
        )

    def parse_subsystem(self) -> SubsystemDecl | None:
        head = self.advance()  # 'subsystem'
        name = self.expect("IDENT", what="subsystem name")
        if self.expect("PUNCT", "{") is None:
            self.skip_line()
            return None
        self.end_line()
        fields: dict[str, Expr] = {}
        while True:
            self.skip_blank()
            if self.at("PUNCT", "}"):
                self.advance()
                self.end_line()
                break
            if self.at("EOF"):
                self.error("unterminated subsystem block (missing '}')", head)
                break
            field_tok = self.cur
            if field_tok.kind == "IDENT" and field_tok.text in ("S", "L", "H"):
                self.advance()
                self.expect("PUNCT", "=")
                fields[field_tok.text] = self.parse_expr()
                self.end_line()
            else:
                self.error("expected 'S', 'L', 'H' or '}' in subsystem block")
                self.skip_line()
        if name is None:
            return None
        if "L" not in fields or "H" not in fields:
            self.error(f"subsystem '{name.text}' needs both L and H", name)
            return None
        return SubsystemDecl(
            name=name.text,
            scattering=fields.get("S", Num(1.0)),
            coupling=fields["L"],
            hamiltonian=fields["H"],
            line=head.line,
            col=head.col,
        )


def _validate(doc: NetworkDoc) -> list[Diagnostic]:
    """Declaration-level checks: uniqueness, references, kinds."""
    diags: list[Diagnostic] = []

    def err(line: int, col: int, msg: str, tok: str = "") -> None:
        if len(diags) < MAX_DIAGNOSTICS:
            diags.append(Diagnostic(line, col, msg, tok))

    mode_kinds: dict[str, str] = {}
    for m in doc.modes:
        if m.label in mode_kinds:
            err(m.line, m.col, f"duplicate mode '{m.label}'")
        if m.dim < 2:
            err(m.line, m.col, f"mode '{m.label}' needs truncation dimension >= 2")
        mode_kinds[m.label] = m.kind

    param_names: set[str] = set()
    for p in doc.params:
        if p.name in param_names:
            err(p.line, p.col, f"duplicate parameter '{p.name}'")
        param_names.add(p.name)

    def check_expr(e: Expr, owner_line: int, owner_col: int, in_coupling: bool) -> None:
        for node in _walk(e):
            if isinstance(node, Name) and node.ident not in param_names:
                err(node.line, node.col, f"undeclared parameter '{node.ident}'", node.ident)
            elif isinstance(node, Ladder):
                kind = mode_kinds.get(node.mode)
                if kind is None:
                    err(node.line, node.col, f"undeclared mode '{node.mode}'", node.mode)
                elif in_coupling and kind == MECHANICAL:
                    err(
                        node.line, node.col,
                        f"mechanical mode '{node.mode}' in a scattering channel",
                        node.mode,
                    )

    sub_names: set[str] = set()
    for sub in doc.subsystems:
        if sub.name in sub_names:
            err(sub.line, sub.col, f"duplicate subsystem '{sub.name}'")
        sub_names.add(sub.name)
        check_expr(sub.scattering, sub.line, sub.col, in_coupling=False)
        check_expr(sub.coupling, sub.line, sub.col, in_coupling=True)
        check_expr(sub.hamiltonian, sub.line, sub.col, in_coupling=False)

    for s in doc.series:
        for end in (s.upstream, s.downstream):
            if end not in sub_names:
                err(s.line, s.col, f"series references unknown subsystem '{end}'", end)
    if doc.feedback:
        fb = doc.feedback
        for end in (fb.plant, fb.controller):
            if end not in sub_names:
                err(fb.line, fb.col, f"feedback references unknown subsystem '{end}'", end)
        check_expr(fb.return_coupling, fb.line, fb.col, in_coupling=True)

    d = doc.drive
    if d.mode not in mode_kinds:
        err(d.line, d.col, f"drive references undeclared mode '{d.mode}'", d.mode)
    elif mode_kinds[d.mode] == MECHANICAL:
        err(d.line, d.col, "drive must target an optical mode", d.mode)
    check_expr(d.amplitude, d.line, d.col, in_coupling=False)
    check_expr(d.frequency, d.line, d.col, in_coupling=False)

    for dm in doc.damps:
        if dm.mode not in mode_kinds:
            err(dm.line, dm.col, f"damp references undeclared mode '{dm.mode}'", dm.mode)
        check_expr(dm.rate, dm.line, dm.col, in_coupling=False)
        check_expr(dm.nth, dm.line, dm.col, in_coupling=False)

    for sw in doc.sweeps:
        if sw.points < 1:
            err(sw.line, sw.col, f"sweep over '{sw.variable}' needs at least one point")
        if sw.variable not in SWEEP_BUILTINS and sw.variable not in param_names:
            err(sw.line, sw.col, f"sweep references unknown variable '{sw.variable}'", sw.variable)
    return diags


@dataclass
class ParseResult:
    document: NetworkDoc | None
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return self.document is not None and not self.diagnostics


def parse(source: str) -> ParseResult:
    """Parse and validate a network document.

    Returns either a validated document or positioned diagnostics; malformed
    input never raises.
    """
    tokens, lex_diags = _lex(source)
    parser = _Parser(tokens, list(lex_diags))
    doc = parser.parse_document()
    diags = parser.diags[:MAX_DIAGNOSTICS]
    if doc is not None:
        diags = diags + _validate(doc)
        if diags:
            doc = None
    return ParseResult(document=doc, diagnostics=diags[:MAX_DIAGNOSTICS])


def load_document(path: str) -> NetworkDoc:
    with open(path, "r", encoding="utf-8") as fh:
        result = parse(fh.read())
    if result.document is None:
        raise DocumentError(result.diagnostics)
    return result.document


# ---------------------------------------------------------------------------
# printing (canonical form; parse(print_document(doc)) == doc)


def _format_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def format_expr(e: Expr) -> str:
    if isinstance(e, Num):
        v = e.value
        if v.imag == 0:
            return _format_number(v.real)
        if v.real == 0:
            return _format_number(v.imag) + "i"
        return f"({_format_number(v.real)} + {_format_number(v.imag)}i)"
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, Ladder):
        return f"{'Adag' if e.dag else 'A'}({e.mode})"
    if isinstance(e, Sqrt):
        return f"sqrt({format_expr(e.arg)})"
    if isinstance(e, Neg):
        inner = format_expr(e.arg)
        if isinstance(e.arg, BinOp):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, BinOp):
        left = format_expr(e.left)
        right = format_expr(e.right)
        if e.op == "*":
            if isinstance(e.left, (BinOp, Neg)):
                left = f"({left})"
            if isinstance(e.right, (BinOp, Neg)):
                right = f"({right})"
            return f"{left} * {right}"
        if isinstance(e.right, (BinOp, Neg)) and e.op == "-":
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"unknown expression node {e!r}")


def print_document(doc: NetworkDoc) -> str:
    """Canonical text form of a document."""
    lines = [f"slh version {doc.version}", ""]
    for m in doc.modes:
        lines.append(f"mode {m.label} {m.kind} dim {m.dim}")
    if doc.modes:
        lines.append("")
    for p in doc.params:
        lines.append(f"param {p.name} = {_format_number(p.value)}")
    if doc.params:
        lines.append("")
    for sub in doc.subsystems:
        lines.append(f"subsystem {sub.name} {{")
        lines.append(f"  S = {format_expr(sub.scattering)}")
        lines.append(f"  L = {format_expr(sub.coupling)}")
        lines.append(f"  H = {format_expr(sub.hamiltonian)}")
        lines.append("}")
        lines.append("")
    for s in doc.series:
        lines.append(f"series {s.upstream} -> {s.downstream}")
    if doc.feedback:
        fb = doc.feedback
        lines.append(
            f"feedback {fb.plant} -> {fb.controller} return {format_expr(fb.return_coupling)}"
        )
    d = doc.drive
    lines.append(
        f"drive {d.mode} amplitude {format_expr(d.amplitude)} frequency {format_expr(d.frequency)}"
    )
    for dm in doc.damps:
        lines.append(f"damp {dm.mode} rate {format_expr(dm.rate)} nth {format_expr(dm.nth)}")
    for sw in doc.sweeps:
        lines.append(
            f"sweep {sw.variable} from {_format_number(sw.start)} to "
            f"{_format_number(sw.stop)} points {sw.points}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# elaboration


@dataclass
class ElaboratedNetwork:
    """Validated document mapped onto solver inputs."""

    registry: ModeRegistry
    dims: dict[str, int]
    params: dict[str, float]
    triple: slh.SlhTriple
    drive_mode: str
    drive_amplitude: float
    drive_frequency: float
    extra_channels: list[tuple[OperatorExpr, float]]
    sweeps: list[SweepDecl]


class _ExprEval:
    """Evaluate expression ASTs to scalars or operator expressions."""

    def __init__(self, registry: ModeRegistry, params: dict[str, float],
                 diags: list[Diagnostic]):
        self.registry = registry
        self.params = params
        self.diags = diags

    def fail(self, line: int, col: int, message: str) -> complex:
        if len(self.diags) < MAX_DIAGNOSTICS:
            self.diags.append(Diagnostic(line, col, message))
        return 0.0j

    def eval(self, e: Expr):
        if isinstance(e, Num):
            return e.value
        if isinstance(e, Name):
            return complex(self.params[e.ident])
        if isinstance(e, Ladder):
            op = OperatorExpr.annihilator(self.registry, e.mode)
            return op.dagger() if e.dag else op
        if isinstance(e, Sqrt):
            arg = self.eval(e.arg)
            if isinstance(arg, OperatorExpr):
                return self.fail(0, 0, "sqrt() of an operator expression is not defined")
            return cmath.sqrt(arg)
        if isinstance(e, Neg):
            return -self.eval(e.arg)
        if isinstance(e, BinOp):
            left = self.eval(e.left)
            right = self.eval(e.right)
            if e.op == "+":
                return left + right
            if e.op == "-":
                return left - right
            return left * right
        raise TypeError(f"unknown expression node {e!r}")

    def eval_scalar(self, e: Expr, what: str) -> complex:
        v = self.eval(e)
        if isinstance(v, OperatorExpr):
            return self.fail(0, 0, f"{what} must be a scalar expression")
        return v

    def eval_operator(self, e: Expr) -> OperatorExpr:
        v = self.eval(e)
        if not isinstance(v, OperatorExpr):
            v = OperatorExpr.scalar(self.registry, v)
        return v


def elaborate(doc: NetworkDoc) -> ElaboratedNetwork:
    """Map a validated document onto composition and solver inputs.

    Composes the series chain, closes the feedback loop, attaches the drive
    term, and moves to the frame rotating at the drive frequency.  Semantic
    failures raise :class:`DocumentError` with all collected diagnostics.
    """
    diags = _validate(doc)
    if diags:
        raise DocumentError(diags)

    def fail(line: int, col: int, msg: str) -> None:
        if len(diags) < MAX_DIAGNOSTICS:
            diags.append(Diagnostic(line, col, msg))

    registry = ModeRegistry()
    dims: dict[str, int] = {}
    for m in doc.modes:
        registry.register(m.label, m.kind)
        dims[m.label] = m.dim
    params = {p.name: p.value for p in doc.params}
    ev = _ExprEval(registry, params, diags)

    triples: dict[str, slh.SlhTriple] = {}
    for sub in doc.subsystems:
        s_val = ev.eval_scalar(sub.scattering, f"subsystem '{sub.name}' scattering")
        if abs(s_val - 1.0) > 1e-12:
            fail(sub.line, sub.col,
                 f"subsystem '{sub.name}': only identity scattering (S = 1) is supported")
        coupling = ev.eval_operator(sub.coupling)
        hamiltonian = ev.eval_operator(sub.hamiltonian)
        if diags:
            continue
        if not hamiltonian.is_hermitian():
            fail(sub.line, sub.col, f"subsystem '{sub.name}': Hamiltonian is not Hermitian")
            continue
        triples[sub.name] = slh.SlhTriple(np.eye(1), (coupling,), hamiltonian)
    if diags:
        raise DocumentError(diags)

    # connection graph: a single chain, optionally closed by one feedback loop
    if doc.series:
        downstream: dict[str, str] = {}
        indegree = {name: 0 for name in triples}
        for s in doc.series:
            if s.upstream in downstream:
                fail(s.line, s.col,
                     f"subsystem '{s.upstream}' feeds more than one downstream system")
                continue
            downstream[s.upstream] = s.downstream
            indegree[s.downstream] += 1
        heads = [n for n in triples if indegree[n] == 0]
        if diags or len(heads) != 1 or any(v > 1 for v in indegree.values()):
            fail(doc.series[0].line, doc.series[0].col,
                 "series statements must form a single acyclic chain")
            raise DocumentError(diags)
        chain = [heads[0]]
        while chain[-1] in downstream:
            nxt = downstream[chain[-1]]
            if nxt in chain:
                fail(doc.series[0].line, doc.series[0].col,
                     "series statements form a cycle; use 'feedback' to close a loop")
                raise DocumentError(diags)
            chain.append(nxt)
        if len(chain) != len(triples):
            fail(doc.series[0].line, doc.series[0].col,
                 "series statements leave disconnected subsystems")
            raise DocumentError(diags)
    elif doc.feedback:
        chain = [doc.feedback.plant, doc.feedback.controller]
    else:
        chain = [sub.name for sub in doc.subsystems]
        if len(chain) > 1:
            fail(doc.subsystems[1].line, doc.subsystems[1].col,
                 "multiple subsystems need series or feedback statements")
            raise DocumentError(diags)

    if doc.feedback:
        fb = doc.feedback
        if chain != [fb.plant, fb.controller]:
            fail(fb.line, fb.col,
                 "feedback loop must close the chain plant -> controller")
            raise DocumentError(diags)
        ret = ev.eval_operator(fb.return_coupling)
        controller_only = triples[fb.controller].support() - triples[fb.plant].support()
        if ret.support() & controller_only:
            fail(fb.line, fb.col, "feedback return coupling must act on plant modes only")
            raise DocumentError(diags)
        triple = slh.feedback_loop(triples[fb.plant], triples[fb.controller], ret)
    else:
        triple = triples[chain[0]]
        for name in chain[1:]:
            triple = slh.series(triple, triples[name])

    # drive term, then rotating frame at the drive frequency
    amp = ev.eval_scalar(doc.drive.amplitude, "drive amplitude")
    freq = ev.eval_scalar(doc.drive.frequency, "drive frequency")
    if abs(amp.imag) > 1e-12 or abs(freq.imag) > 1e-12:
        fail(doc.drive.line, doc.drive.col, "drive amplitude and frequency must be real")
    if diags:
        raise DocumentError(diags)
    drive_op = OperatorExpr.annihilator(registry, doc.drive.mode)
    driven_h = triple.hamiltonian + amp.real * (drive_op.dagger() + drive_op)
    triple = slh.SlhTriple(triple.scattering, triple.coupling, driven_h)
    triple = slh.rotating_frame(triple, freq.real)

    extra: list[tuple[OperatorExpr, float]] = []
    for dm in doc.damps:
        rate = ev.eval_scalar(dm.rate, "damping rate")
        nth = ev.eval_scalar(dm.nth, "thermal occupation")
        if rate.real < 0 or abs(rate.imag) > 1e-12 or nth.real < 0:
            fail(dm.line, dm.col, f"damp '{dm.mode}': rate and nth must be nonnegative reals")
            continue
        op = OperatorExpr.annihilator(registry, dm.mode)
        extra.append((op, rate.real * (nth.real + 1.0)))
        if nth.real > 0:
            extra.append((op.dagger(), rate.real * nth.real))
    if diags:
        raise DocumentError(diags)

    return ElaboratedNetwork(
        registry=registry,
        dims=dims,
        params=params,
        triple=triple,
        drive_mode=doc.drive.mode,
        drive_amplitude=amp.real,
        drive_frequency=freq.real,
        extra_channels=extra,
        sweeps=list(doc.sweeps),
    )


def sweep_grid(sw: SweepDecl) -> np.ndarray:
    if sw.points == 1:
        return np.array([float(sw.start)])
    return np.linspace(sw.start, sw.stop, sw.points)
