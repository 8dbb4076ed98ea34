"""Exact symbolic algebra of multi-qubit Pauli operators.

A :class:`PauliTerm` is a coefficient times a word of single-site letters
(X, Y, Z; identity letters are simply absent).  Products track the phase as
an exact power of i, so commutators of integer-coefficient terms cancel
exactly, with no floating-point phase drift.  A :class:`PauliSum` is a
canonically ordered, combined list of terms.

Text form (used in model files and reports)::

    term  := [coeff "*"] letter-token*   e.g.  "1.0 * Z1 Z2 Y5"
    sum   := term (" + " term)*
    coeff := real or complex written with an "i" suffix, e.g. "-2i", "(1+2i)"

A term with no letter tokens is a multiple of the identity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import DimensionMismatchError, ModelFormatError
from .tensor import SiteSpace, SupportedOperator, embed, kron

_LETTERS = ("X", "Y", "Z")
_MATS = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# single-site products a*b -> (resulting letter or None for identity, power of i)
_PRODUCT = {
    ("X", "X"): (None, 0), ("Y", "Y"): (None, 0), ("Z", "Z"): (None, 0),
    ("X", "Y"): ("Z", 1), ("Y", "Z"): ("X", 1), ("Z", "X"): ("Y", 1),
    ("Y", "X"): ("Z", 3), ("Z", "Y"): ("X", 3), ("X", "Z"): ("Y", 3),
}


def _times_i_power(c: complex, k: int) -> complex:
    """Multiply by i**k exactly (component swaps and sign flips only)."""
    k %= 4
    if k == 0:
        return c
    if k == 1:
        return complex(-c.imag, c.real)
    if k == 2:
        return complex(-c.real, -c.imag)
    return complex(c.imag, -c.real)


@dataclass(frozen=True)
class PauliTerm:
    """A coefficient times a Pauli word; ``word`` is sorted by site id."""

    coeff: complex
    word: tuple[tuple[int, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "coeff", complex(self.coeff))
        word = tuple((int(s), str(l).upper()) for s, l in self.word)
        if [s for s, _ in word] != sorted({s for s, _ in word}):
            raise ModelFormatError(f"word sites must be sorted and unique: {word}")
        if any(l not in _LETTERS for _, l in word):
            raise ModelFormatError(f"letters must be X/Y/Z: {word}")
        object.__setattr__(self, "word", word)

    @classmethod
    def from_letters(cls, coeff: complex, letters: Mapping[int, str]) -> "PauliTerm":
        return cls(coeff, tuple(sorted((s, l) for s, l in letters.items())))

    @classmethod
    def identity(cls, coeff: complex = 1.0) -> "PauliTerm":
        return cls(coeff, ())

    @property
    def letters(self) -> dict[int, str]:
        return dict(self.word)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.word)

    def adjoint(self) -> "PauliTerm":
        return PauliTerm(self.coeff.conjugate(), self.word)

    def __mul__(self, other: Union["PauliTerm", complex]) -> "PauliTerm":
        if not isinstance(other, PauliTerm):
            return PauliTerm(self.coeff * complex(other), self.word)
        phase = 0
        out: list[tuple[int, str]] = []
        a, b = self.word, other.word
        i = j = 0
        while i < len(a) or j < len(b):
            if j >= len(b) or (i < len(a) and a[i][0] < b[j][0]):
                out.append(a[i])
                i += 1
            elif i >= len(a) or b[j][0] < a[i][0]:
                out.append(b[j])
                j += 1
            else:
                site = a[i][0]
                letter, k = _PRODUCT[(a[i][1], b[j][1])]
                phase += k
                if letter is not None:
                    out.append((site, letter))
                i += 1
                j += 1
        coeff = _times_i_power(self.coeff * other.coeff, phase)
        return PauliTerm(coeff, tuple(out))

    __rmul__ = __mul__

    def __neg__(self) -> "PauliTerm":
        return PauliTerm(-self.coeff, self.word)

    def __str__(self) -> str:
        body = " ".join(f"{l}{s}" for s, l in self.word)
        c = _format_coeff(self.coeff)
        return f"{c} * {body}" if body else c

    def to_supported(self, space: SiteSpace) -> SupportedOperator:
        """Dense matrix on the word's own support (sorted site order)."""
        for s, _ in self.word:
            if space.dim(s) != 2:
                raise DimensionMismatchError(
                    f"Pauli letter on site {s} requires dimension 2, got {space.dim(s)}")
        mats = [_MATS[l] for _, l in self.word]
        return SupportedOperator(self.support, self.coeff * kron(*mats))


def commutes(a: PauliTerm, b: PauliTerm) -> bool:
    """True iff the two words commute (even number of differing shared letters)."""
    la, lb = dict(a.word), dict(b.word)
    clashes = sum(1 for s in la.keys() & lb.keys() if la[s] != lb[s])
    return clashes % 2 == 0


@dataclass(frozen=True)
class PauliSum:
    """Canonically ordered sum of Pauli terms (combined, exact zeros dropped)."""

    terms: tuple[PauliTerm, ...]

    def __post_init__(self):
        combined: dict[tuple[tuple[int, str], ...], complex] = {}
        for t in self.terms:
            combined[t.word] = combined.get(t.word, 0j) + t.coeff
        canon = tuple(PauliTerm(c, w) for w, c in sorted(combined.items())
                      if c != 0)
        object.__setattr__(self, "terms", canon)

    @classmethod
    def of(cls, *terms: PauliTerm) -> "PauliSum":
        return cls(tuple(terms))

    @classmethod
    def zero(cls) -> "PauliSum":
        return cls(())

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def support(self) -> tuple[int, ...]:
        out: set[int] = set()
        for t in self.terms:
            out.update(t.support)
        return tuple(sorted(out))

    def adjoint(self) -> "PauliSum":
        return PauliSum(tuple(t.adjoint() for t in self.terms))

    @property
    def is_hermitian(self) -> bool:
        return self.adjoint() == self

    def __add__(self, other: Union["PauliSum", PauliTerm]) -> "PauliSum":
        other_terms = other.terms if isinstance(other, PauliSum) else (other,)
        return PauliSum(self.terms + tuple(other_terms))

    def __sub__(self, other: Union["PauliSum", PauliTerm]) -> "PauliSum":
        return self + (-other if isinstance(other, PauliTerm) else other * -1)

    def __mul__(self, other: Union["PauliSum", PauliTerm, complex]) -> "PauliSum":
        if isinstance(other, PauliTerm):
            other = PauliSum.of(other)
        if isinstance(other, PauliSum):
            return PauliSum(tuple(a * b for a in self.terms for b in other.terms))
        return PauliSum(tuple(t * complex(other) for t in self.terms))

    def __rmul__(self, other: complex) -> "PauliSum":
        return self * other

    def __neg__(self) -> "PauliSum":
        return self * -1

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(str(t) for t in self.terms)

    def to_supported(self, space: SiteSpace) -> SupportedOperator:
        """Dense matrix on the union support of all terms."""
        sup = self.support
        sub = space.subspace(sup)
        d = sub.total_dim
        out = np.zeros((d, d), dtype=complex)
        for t in self.terms:
            out += embed(t.to_supported(sub), sub)
        return SupportedOperator(sup, out)

    def to_dense(self, space: SiteSpace) -> np.ndarray:
        """Dense matrix on the full space."""
        return embed(self.to_supported(space), space)


def as_sum(obj: Union[PauliSum, PauliTerm]) -> PauliSum:
    return obj if isinstance(obj, PauliSum) else PauliSum.of(obj)


def commutator(a: Union[PauliSum, PauliTerm], b: Union[PauliSum, PauliTerm]) -> PauliSum:
    """[a, b] as an exact Pauli sum; commuting pairs cancel to the empty sum."""
    sa, sb = as_sum(a), as_sum(b)
    out: list[PauliTerm] = []
    for ta in sa.terms:
        for tb in sb.terms:
            if commutes(ta, tb):
                continue
            out.append((ta * tb) * 2)
    return PauliSum(tuple(out))


_TOKEN_RE = re.compile(r"^([XYZI])(\d+)$", re.IGNORECASE)


def _format_coeff(c: complex) -> str:
    if c.imag == 0.0:
        return repr(c.real)
    if c.real == 0.0:
        return f"{c.imag!r}i"
    sign = "+" if c.imag >= 0 else "-"
    return f"({c.real!r}{sign}{abs(c.imag)!r}i)"


def _parse_coeff(text: str) -> complex:
    raw = text.strip()
    if raw.startswith("(") and raw.endswith(")"):
        raw = raw[1:-1].strip()
    raw = raw.replace("i", "j").replace("I", "j").replace(" ", "")
    if raw in ("", "+"):
        return 1.0 + 0j
    if raw == "-":
        return -1.0 + 0j
    try:
        return complex(raw)
    except ValueError:
        raise ModelFormatError(f"cannot parse coefficient {text!r}") from None


def parse_term(text: str) -> PauliTerm:
    """Parse a single term such as ``"1.0 * Z1 Z2 Y5"`` or ``"Z1 Z2"``."""
    text = text.strip()
    if "*" in text:
        coeff_str, _, body = text.partition("*")
        coeff = _parse_coeff(coeff_str)
        tokens = body.split()
    else:
        tokens = text.split()
        coeff = 1.0 + 0j
        if tokens and not _TOKEN_RE.match(tokens[0]):
            coeff = _parse_coeff(tokens[0])
            tokens = tokens[1:]
    letters: dict[int, str] = {}
    for tok in tokens:
        m = _TOKEN_RE.match(tok)
        if not m:
            raise ModelFormatError(f"bad Pauli token {tok!r} in {text!r}")
        letter, site = m.group(1).upper(), int(m.group(2))
        if site in letters:
            raise ModelFormatError(f"site {site} repeated in {text!r}")
        if letter != "I":
            letters[site] = letter
    return PauliTerm.from_letters(coeff, letters)


def parse_sum(text: str) -> PauliSum:
    """Parse a sum of terms separated by `` + `` / `` - ``."""
    parts = re.split(r"\s([+-])\s", text.strip())
    if parts == [""]:
        return PauliSum.zero()
    terms = [parse_term(parts[0])]
    for k in range(1, len(parts), 2):
        t = parse_term(parts[k + 1])
        terms.append(t if parts[k] == "+" else -t)
    return PauliSum(tuple(terms))
