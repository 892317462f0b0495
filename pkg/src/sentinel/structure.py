"""Token-level declaration scanning.

This is deliberately shallow: it recognises class/method/field/variable
declarations from token shapes, without name binding or type analysis.
That is enough for mechanics checks and for choosing rename candidates;
anything subtler is left to the compile oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lexer import IDENT, KEYWORD, OP, Token, significant, tokenize

CLASS_WORDS = {"class", "interface", "enum", "record"}

_PRIMITIVES = {
    "int", "long", "short", "byte", "char", "boolean", "float", "double",
    "void", "var", "unsigned", "signed", "const", "struct", "bool",
}
_TYPE_ENDERS = {">", "]", "*"}
_DECL_FOLLOWERS = {"=", ";", ",", ":", ")"}


@dataclass
class ClassInfo:
    name: str
    supers: list[str] = field(default_factory=list)
    methods: list[str] = field(default_factory=list)
    fields: list[str] = field(default_factory=list)
    start: int = 0  # char offset of the declaration keyword
    end: int = 0  # char offset just past the closing brace
    depth: int = 0


@dataclass
class Declarations:
    classes: set[str] = field(default_factory=set)
    methods: set[str] = field(default_factory=set)
    variables: set[str] = field(default_factory=set)
    packages: set[str] = field(default_factory=set)

    def merge(self, other: "Declarations") -> None:
        self.classes |= other.classes
        self.methods |= other.methods
        self.variables |= other.variables
        self.packages |= other.packages

    def all(self) -> set[str]:
        return self.classes | self.methods | self.variables | self.packages


def _typeish(tok: Token | None) -> bool:
    if tok is None:
        return False
    if tok.kind == IDENT:
        return True
    if tok.kind == KEYWORD and tok.text in _PRIMITIVES:
        return True
    return tok.kind == OP and tok.text in _TYPE_ENDERS


def _match_close(sig: list[Token], i: int, open_: str, close: str) -> int:
    depth = 0
    for j in range(i, len(sig)):
        t = sig[j].text
        if sig[j].kind != OP:
            continue
        if t == open_:
            depth += 1
        elif t == close:
            depth -= 1
            if depth == 0:
                return j
    return len(sig) - 1


# ---------------------------------------------------------------- C family


def scan_classes(text: str, language) -> list[ClassInfo]:
    """Classes (Java) or structs (C) with their directly declared members."""
    if str(getattr(language, "value", language)).lower() == "python":
        return _python_classes(text)
    sig = significant(tokenize(text, language))
    out: list[ClassInfo] = []
    _scan_body(sig, 0, len(sig), 0, out)
    return out


def _scan_body(sig: list[Token], lo: int, hi: int, depth: int, out: list[ClassInfo]) -> None:
    i = lo
    while i < hi:
        tok = sig[i]
        if (
            tok.kind == KEYWORD
            and tok.text in CLASS_WORDS | {"struct"}
            and i + 1 < hi
            and sig[i + 1].kind == IDENT
            and not (i > 0 and sig[i - 1].text in (".", "@"))
        ):
            j = i + 2
            supers: list[str] = []
            angle = 0
            while j < hi and sig[j].text not in ("{", ";"):
                t = sig[j]
                if t.text == "<":
                    angle += 1
                elif t.text == ">":
                    angle -= 1
                elif t.text == "(":
                    j = _match_close(sig, j, "(", ")")
                elif t.kind == IDENT and angle == 0 and sig[j - 1].text in ("extends", "implements", ","):
                    supers.append(t.text)
                j += 1
            if j < hi and sig[j].text == "{":
                close = _match_close(sig, j, "{", "}")
                info = ClassInfo(sig[i + 1].text, supers, start=tok.start, end=sig[close].end, depth=depth)
                out.append(info)
                _scan_members(sig, j + 1, close, info, depth + 1, out)
                i = close + 1
                continue
        if tok.kind == OP and tok.text == "{":
            close = _match_close(sig, i, "{", "}")
            _scan_body(sig, i + 1, close, depth + 1, out)
            i = close + 1
            continue
        i += 1


def _scan_members(sig, lo, hi, info: ClassInfo, depth: int, out: list[ClassInfo]) -> None:
    i = lo
    while i < hi:
        tok = sig[i]
        if tok.kind == KEYWORD and tok.text in CLASS_WORDS and i + 1 < hi and sig[i + 1].kind == IDENT:
            nested: list[ClassInfo] = []
            # find the end of the nested declaration, then scan it on its own
            j = i
            while j < hi and sig[j].text != "{":
                j += 1
            close = _match_close(sig, j, "{", "}") if j < hi else hi - 1
            _scan_body(sig, i, close + 1, depth, nested)
            out.extend(nested)
            i = close + 1
            continue
        if tok.kind == OP and tok.text == "{":
            i = _match_close(sig, i, "{", "}") + 1
            continue
        if tok.kind == OP and tok.text == "(":
            i = _match_close(sig, i, "(", ")") + 1
            continue
        if tok.kind == IDENT and i + 1 < hi:
            prev = sig[i - 1] if i > lo else None
            nxt = sig[i + 1].text
            if nxt == "(":
                if _typeish(prev) and tok.text != info.name:
                    info.methods.append(tok.text)
                i += 1
                continue
            if nxt in ("=", ";", ",") and _typeish(prev):
                i = _field_declarators(sig, i, hi, info)
                continue
        i += 1


def _field_declarators(sig, i, hi, info: ClassInfo) -> int:
    """Record ``a = 1, b, c = f(x);`` starting at the first name; return the
    index just past the statement."""
    while i < hi and sig[i].kind == IDENT:
        info.fields.append(sig[i].text)
        j = i + 1
        while j < hi and sig[j].text not in (";", ","):
            if sig[j].text in ("(", "{", "["):
                pair = {"(": ")", "{": "}", "[": "]"}[sig[j].text]
                j = _match_close(sig, j, sig[j].text, pair)
            j += 1
        if j < hi and sig[j].text == ",":
            i = j + 1
            continue
        return j + 1
    return i + 1


def declarations(text: str, language) -> Declarations:
    lang = str(getattr(language, "value", language)).lower()
    if lang == "python":
        return _python_declarations(text)
    sig = significant(tokenize(text, lang))
    decl = Declarations()
    for k, tok in enumerate(sig):
        prev = sig[k - 1] if k else None
        nxt = sig[k + 1] if k + 1 < len(sig) else None
        if tok.kind == KEYWORD and tok.text == "package":
            j = k + 1
            while j < len(sig) and sig[j].text != ";":
                if sig[j].kind == IDENT:
                    decl.packages.add(sig[j].text)
                j += 1
        if tok.kind != IDENT:
            continue
        if prev is not None and prev.kind == KEYWORD and prev.text in CLASS_WORDS | {"struct", "union"} and not (
            k >= 2 and sig[k - 2].text == "."
        ):
            decl.classes.add(tok.text)
            continue
        if prev is not None and prev.text == "." or nxt is None:
            continue
        if nxt.text == "(" and _typeish(prev):
            close = _match_close(sig, k + 1, "(", ")")
            after = sig[close + 1].text if close + 1 < len(sig) else ""
            if after in ("{", ";", "throws"):
                decl.methods.add(tok.text)
            continue
        if nxt.text in _DECL_FOLLOWERS and _typeish(prev):
            decl.variables.add(tok.text)
    for info in scan_classes(text, lang):
        decl.variables.update(info.fields)
        decl.methods.update(info.methods)
    # later tokens can reveal a name as a class (e.g. constructor tokens)
    decl.variables -= decl.classes
    decl.methods -= decl.classes
    return decl


# ------------------------------------------------------------------ python


def _python_declarations(text: str) -> Declarations:
    decl = Declarations()
    toks = tokenize(text, "python")
    sig = significant(toks)
    paren = 0
    in_def_params = False
    def_paren_level = 0
    for k, tok in enumerate(sig):
        prev = sig[k - 1] if k else None
        nxt = sig[k + 1] if k + 1 < len(sig) else None
        if tok.kind == OP and tok.text in "([{":
            paren += 1
        elif tok.kind == OP and tok.text in ")]}":
            paren -= 1
            if in_def_params and paren == def_paren_level:
                in_def_params = False
        if tok.kind != IDENT:
            continue
        if prev is not None and prev.text == "class":
            decl.classes.add(tok.text)
            continue
        if prev is not None and prev.text == "def":
            decl.methods.add(tok.text)
            in_def_params = True
            def_paren_level = paren
            continue
        if in_def_params and prev is not None and prev.text in ("(", ",", "*", "**") and (
            nxt is not None and nxt.text in (",", ")", ":", "=")
        ):
            decl.variables.add(tok.text)
            continue
        if prev is not None and prev.text in ("for", "as", "global", "nonlocal"):
            decl.variables.add(tok.text)
            continue
        if prev is not None and prev.text == "." and not (k >= 2 and sig[k - 2].text == "self"):
            continue
        if nxt is not None and nxt.kind == OP and (nxt.text == "=" or (nxt.text.endswith("=") and nxt.text not in ("==", "!=", "<=", ">="))):
            if paren == 0 or prev is None or prev.text != "(":
                if paren == 0:
                    decl.variables.add(tok.text)
            continue
        if nxt is not None and nxt.text == "," and paren == 0 and _line_is_assignment(sig, k):
            decl.variables.add(tok.text)
    return decl


def _line_is_assignment(sig, k) -> bool:
    line = sig[k].line
    return any(t.line == line and t.text == "=" for t in sig[k:])


def _python_classes(text: str) -> list[ClassInfo]:
    import ast

    try:
        tree = ast.parse(text)
    except SyntaxError:
        return []
    out = []
    for node in ast.walk(tree):
        if isinstance(node, ast.ClassDef):
            info = ClassInfo(node.name, [getattr(b, "id", getattr(b, "attr", "")) for b in node.bases])
            for item in node.body:
                if isinstance(item, (ast.FunctionDef, ast.AsyncFunctionDef)):
                    info.methods.append(item.name)
                elif isinstance(item, ast.Assign):
                    info.fields.extend(t.id for t in item.targets if isinstance(t, ast.Name))
                elif isinstance(item, ast.AnnAssign) and isinstance(item.target, ast.Name):
                    info.fields.append(item.target.id)
            out.append(info)
    return out


# ------------------------------------------------------------ java layout


@dataclass
class TypeSegment:
    name: str
    public: bool
    start: int  # char offset where the segment text starts
    end: int
    first_line: int


def java_top_level_types(text: str) -> tuple[str, list[TypeSegment]]:
    """Split a Java compilation unit into its header (package/imports) and
    one segment per top-level type."""
    toks = tokenize(text, "java")
    sig = significant(toks)
    classes = [c for c in scan_classes(text, "java") if c.depth == 0]
    if not classes:
        return "", []
    # header ends after the last ';' preceding the first type keyword
    header_end = 0
    for t in sig:
        if t.start >= classes[0].start:
            break
        if t.text == ";":
            header_end = t.end
    header = text[:header_end]
    segments = []
    cursor = header_end
    for c in classes:
        # walk back over modifiers and annotations
        j = next(i for i, t in enumerate(sig) if t.start == c.start) - 1
        public = False
        while j >= 0 and sig[j].start >= cursor and sig[j].text not in (";", "}"):
            public = public or sig[j].text == "public"
            j -= 1
        line = text.count("\n", 0, cursor) + 1
        segments.append(TypeSegment(c.name, public, cursor, c.end, line))
        cursor = c.end
    if segments:
        last = segments[-1]
        segments[-1] = TypeSegment(last.name, last.public, last.start, len(text), last.first_line)
    return header, segments
