"""Lossless, language-aware tokenizer for Java, Python and C sources.

Concatenating the ``text`` of every token returned by :func:`tokenize`
reproduces the input exactly, which is what lets the metamorphic generator
and the mechanics checks rewrite or inspect code without disturbing bytes
they do not own.
"""

from __future__ import annotations

import builtins
import keyword
import re
from dataclasses import dataclass
from typing import Iterable

from .errors import UnlexableSource

IDENT = "ident"
KEYWORD = "keyword"
NUMBER = "number"
STRING = "string"
CHAR = "char"
COMMENT = "comment"
PREPROC = "preproc"
OP = "op"
WS = "ws"

JAVA_KEYWORDS = frozenset(
    """
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while true false null
    _ var record yield sealed permits non-sealed
    """.split()
)

C_KEYWORDS = frozenset(
    """
    auto break case char const continue default do double else enum extern
    float for goto if inline int long register restrict return short signed
    sizeof static struct switch typedef union unsigned void volatile while
    _Alignas _Alignof _Atomic _Bool _Complex _Generic _Imaginary _Noreturn
    _Static_assert _Thread_local bool true false
    """.split()
)

PYTHON_KEYWORDS = frozenset(keyword.kwlist) | frozenset(getattr(keyword, "softkwlist", ()))

# Names owned by the platform. They are never renamed and never produced as
# fresh names.
JAVA_BUILTINS = frozenset(
    """
    String Object System out err in println print printf format Integer Long
    Double Float Boolean Character Byte Short Math StringBuilder Exception
    RuntimeException Error Throwable Override Deprecated SuppressWarnings
    FunctionalInterface List ArrayList Map HashMap Set HashSet Iterator
    Iterable Runnable Thread Class Comparable Cloneable main toString equals
    hashCode clone finalize compareTo run call close iterator length size get
    set add put remove contains valueOf parseInt java lang util io args
    getClass wait notify notifyAll
    """.split()
)

C_BUILTINS = frozenset(
    """
    main printf fprintf sprintf snprintf scanf puts putchar getchar malloc
    calloc realloc free strlen strcpy strncpy strcmp strcat memcpy memset
    exit abort NULL size_t stdin stdout stderr FILE fopen fclose stdio stdlib
    string include define argc argv
    """.split()
)

PYTHON_BUILTINS = frozenset(dir(builtins)) | {"self", "cls", "__init__", "__name__", "__main__"}

_JAVA_OPS = r">>>=|<<=|>>=|>>>|\.\.\.|->|::|\+\+|--|&&|\|\||[=!<>+\-*/%&|^]=|<<|>>"
_C_OPS = r"<<=|>>=|\.\.\.|->|\+\+|--|&&|\|\||[=!<>+\-*/%&|^]=|<<|>>|##"
_PY_OPS = r"\*\*=|//=|>>=|<<=|->|:=|\*\*|//|<<|>>|[=!<>+\-*/%&|^@]="

_SPECS = {
    "java": [
        (COMMENT, r"//[^\n]*|/\*[\s\S]*?\*/"),
        (STRING, r'"""[\s\S]*?"""|"(?:\\.|[^"\\\n])*"'),
        (CHAR, r"'(?:\\.|[^'\\\n])+'"),
        (NUMBER, r"0[xX][0-9a-fA-F_]+[lL]?|0[bB][01_]+[lL]?"
                 r"|(?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[fFdDlL]?"),
        (IDENT, r"[^\W\d][\w$]*|\$[\w$]*"),
        (WS, r"\s+"),
        (OP, _JAVA_OPS + r"|[^\s\w]"),
    ],
    "c": [
        (PREPROC, r"(?m:^[ \t]*#(?:[^\n\\]|\\.)*)"),
        (COMMENT, r"//[^\n]*|/\*[\s\S]*?\*/"),
        (STRING, r'(?:u8|[uUL])?"(?:\\.|[^"\\\n])*"'),
        (CHAR, r"(?:[uUL])?'(?:\\.|[^'\\\n])+'"),
        (NUMBER, r"0[xX][0-9a-fA-F]+[uUlL]*"
                 r"|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?[uUlLfF]*"),
        (IDENT, r"[^\W\d]\w*"),
        (WS, r"\s+"),
        (OP, _C_OPS + r"|[^\s\w]"),
    ],
    "python": [
        (COMMENT, r"#[^\n]*"),
        (STRING, r"(?i:[rbuf]{0,2})(?:'''[\s\S]*?'''|\"\"\"[\s\S]*?\"\"\""
                 r"|'(?:\\.|[^'\\\n])*'|\"(?:\\.|[^\"\\\n])*\")"),
        (NUMBER, r"0[xX][0-9a-fA-F_]+|0[oO][0-7_]+|0[bB][01_]+"
                 r"|(?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[jJ]?"),
        (IDENT, r"[^\W\d]\w*"),
        (WS, r"\s+"),
        (OP, _PY_OPS + r"|[^\s\w]"),
    ],
}


_COMPILED = {
    lang: re.compile("|".join(f"(?P<{kind}>{pat})" for kind, pat in spec))
    for lang, spec in _SPECS.items()
}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    start: int
    line: int

    @property
    def end(self) -> int:
        return self.start + len(self.text)


def keywords_for(language: str) -> frozenset[str]:
    return {"java": JAVA_KEYWORDS, "python": PYTHON_KEYWORDS, "c": C_KEYWORDS}[_lang(language)]


def builtins_for(language: str) -> frozenset[str]:
    return {"java": JAVA_BUILTINS, "python": PYTHON_BUILTINS, "c": C_BUILTINS}[_lang(language)]


def reserved_for(language: str) -> frozenset[str]:
    return keywords_for(language) | builtins_for(language)


def _lang(language) -> str:
    name = getattr(language, "value", language)
    name = str(name).lower()
    if name not in _COMPILED:
        raise ValueError(f"unsupported language: {language!r}")
    return name


def tokenize(text: str, language) -> list[Token]:
    """Split ``text`` into tokens; raises UnlexableSource on unterminated
    strings or block comments."""
    lang = _lang(language)
    pattern = _COMPILED[lang]
    kws = keywords_for(lang)
    tokens: list[Token] = []
    pos = 0
    line = 1
    n = len(text)
    while pos < n:
        m = pattern.match(text, pos)
        if m is None or m.end() == pos:
            raise UnlexableSource(f"cannot lex {lang} source at offset {pos}", offset=pos, line=line)
        kind = m.lastgroup
        value = m.group()
        if kind == OP and (value in ("'", '"') or (value == "/" and text.startswith("/*", pos) and lang != "python")):
            raise UnlexableSource(f"unterminated literal or comment at line {line}", offset=pos, line=line)
        if kind == IDENT and value in kws:
            kind = KEYWORD
        tokens.append(Token(kind, value, pos, line))
        line += value.count("\n")
        pos = m.end()
    return tokens


def untokenize(tokens: Iterable[Token]) -> str:
    return "".join(t.text for t in tokens)


def significant(tokens: Iterable[Token]) -> list[Token]:
    """Tokens with whitespace and comments removed."""
    return [t for t in tokens if t.kind not in (WS, COMMENT)]


def identifiers(text: str, language) -> set[str]:
    return {t.text for t in tokenize(text, language) if t.kind == IDENT}


def is_identifier(name: str, language) -> bool:
    lang = _lang(language)
    toks = _COMPILED[lang].fullmatch(name)
    return bool(toks) and toks.lastgroup == IDENT and name not in keywords_for(lang)
