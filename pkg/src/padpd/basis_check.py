"""Symbolic check that a tanh of a filter-tap sum spawns PA basis terms.

Works in exact rational arithmetic over a fixed symbol alphabet: the I, Q,
and envelope entries of a feature-graph window at each delay, plus a bias
symbol b. Expanding tanh(sum of taps) as a Taylor polynomial and collecting
monomials shows which products I(n)|x(n-q)|^k / Q(n)|x(n-q)|^k the network's
first layer can synthesize before any weight tuning.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "Polynomial",
    "window_alphabet",
    "filter_tap_sum",
    "expand_power",
    "tanh_taylor",
    "BasisEntry",
    "BasisReport",
    "contains_basis_terms",
]


def window_alphabet(n_delays: int = 3) -> tuple[str, ...]:
    """Symbols of one kernel window: i/q/envelope per delay, plus bias b."""
    if n_delays < 1:
        raise ValueError("n_delays must be >= 1")
    names = []
    for row in ("i", "q", "e"):
        names.extend(f"{row}{d}" for d in range(n_delays))
    names.append("b")
    return tuple(names)


class Polynomial:
    """Multivariate polynomial with Fraction coefficients.

    Terms map exponent tuples (one slot per alphabet symbol) to nonzero
    rational coefficients. All arithmetic is exact.
    """

    def __init__(self, alphabet: tuple[str, ...], terms: dict | None = None):
        self.alphabet = tuple(alphabet)
        clean: dict[tuple[int, ...], Fraction] = {}
        for exps, coeff in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != len(self.alphabet):
                raise ValueError("exponent tuple length does not match alphabet")
            if any(e < 0 for e in exps):
                raise ValueError("exponents must be non-negative")
            frac = Fraction(coeff)
            if frac != 0:
                clean[exps] = frac
        self.terms = clean

    @classmethod
    def zero(cls, alphabet) -> "Polynomial":
        return cls(alphabet)

    @classmethod
    def constant(cls, alphabet, value) -> "Polynomial":
        zeros = (0,) * len(alphabet)
        return cls(alphabet, {zeros: Fraction(value)})

    @classmethod
    def symbol(cls, alphabet, name: str) -> "Polynomial":
        alphabet = tuple(alphabet)
        idx = alphabet.index(name)
        exps = tuple(1 if i == idx else 0 for i in range(len(alphabet)))
        return cls(alphabet, {exps: Fraction(1)})

    def _check_same(self, other: "Polynomial") -> None:
        if self.alphabet != other.alphabet:
            raise ValueError("polynomials use different alphabets")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check_same(other)
        out = dict(self.terms)
        for exps, coeff in other.terms.items():
            out[exps] = out.get(exps, Fraction(0)) + coeff
        return Polynomial(self.alphabet, out)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + other.scale(-1)

    def scale(self, factor) -> "Polynomial":
        factor = Fraction(factor)
        return Polynomial(
            self.alphabet, {e: c * factor for e, c in self.terms.items()}
        )

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        self._check_same(other)
        out: dict[tuple[int, ...], Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                key = tuple(a + b for a, b in zip(e1, e2))
                out[key] = out.get(key, Fraction(0)) + c1 * c2
        return Polynomial(self.alphabet, out)

    def __pow__(self, k: int) -> "Polynomial":
        if not isinstance(k, int) or k < 0:
            raise ValueError("power must be a non-negative integer")
        result = Polynomial.constant(self.alphabet, 1)
        for _ in range(k):
            result = result * self
        return result

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.alphabet == other.alphabet
            and self.terms == other.terms
        )

    def __len__(self) -> int:
        return len(self.terms)

    def coefficient(self, assignment: dict) -> Fraction:
        """Coefficient of the monomial with the given symbol exponents."""
        exps = tuple(int(assignment.get(name, 0)) for name in self.alphabet)
        return self.terms.get(exps, Fraction(0))

    def contains(self, assignment: dict, ignore: tuple[str, ...] = ()) -> bool:
        """True if any stored monomial matches, up to the ignored symbols."""
        keep = [i for i, name in enumerate(self.alphabet) if name not in ignore]
        target = tuple(int(assignment.get(self.alphabet[i], 0)) for i in keep)
        for exps in self.terms:
            if tuple(exps[i] for i in keep) == target:
                return True
        return False

    def evaluate(self, values: dict) -> float:
        total = 0.0
        for exps, coeff in self.terms.items():
            prod = float(coeff)
            for name, e in zip(self.alphabet, exps):
                if e:
                    prod *= float(values[name]) ** e
            total += prod
        return total


def filter_tap_sum(n_delays: int = 3, exclude: tuple[str, ...] = ()) -> Polynomial:
    """Sum of all window symbols (unit weights) plus the bias symbol.

    This is the pre-activation of one feature-map element when every kernel
    weight is 1; symbols in ``exclude`` are left out, which models removing
    a row or column from the window.
    """
    alphabet = window_alphabet(n_delays)
    unknown = set(exclude) - set(alphabet)
    if unknown:
        raise ValueError(f"cannot exclude unknown symbols {sorted(unknown)}")
    total = Polynomial.zero(alphabet)
    for name in alphabet:
        if name not in exclude:
            total = total + Polynomial.symbol(alphabet, name)
    return total


def expand_power(p: Polynomial, k: int) -> Polynomial:
    """Exact expansion of p**k for the orders the tanh series needs."""
    if k not in (1, 2, 3, 5):
        raise ValueError(f"power {k} not supported (expected 1, 2, 3, or 5)")
    return p**k


def tanh_taylor(p: Polynomial, order: int = 3) -> Polynomial:
    """tanh(p) as p - p^3/3 (order 3) or p - p^3/3 + 2p^5/15 (order 5)."""
    if order == 3:
        return p - (p**3).scale(Fraction(1, 3))
    if order == 5:
        return p - (p**3).scale(Fraction(1, 3)) + (p**5).scale(Fraction(2, 15))
    raise ValueError(f"order {order} not supported (expected 3 or 5)")


@dataclass(frozen=True)
class BasisEntry:
    kind: str  # "linear" or "cross"
    component: str  # "I" or "Q"
    delay: int
    order: int
    present: bool

    def label(self) -> str:
        base = f"{self.component}(n)"
        if self.kind == "linear":
            return base
        return f"{base}*env(n-{self.delay})^{self.order}"


@dataclass(frozen=True)
class BasisReport:
    memory_depth: int
    max_order: int
    entries: tuple

    @property
    def all_present(self) -> bool:
        return all(e.present for e in self.entries)

    @property
    def n_missing(self) -> int:
        return sum(not e.present for e in self.entries)

    def format_table(self) -> str:
        width = max(len(e.label()) for e in self.entries)
        lines = [f"{'term':<{width}}  status"]
        for e in self.entries:
            status = "present" if e.present else "MISSING"
            lines.append(f"{e.label():<{width}}  {status}")
        return "\n".join(lines)


def contains_basis_terms(expansion: Polynomial, memory_depth: int, max_order: int) -> BasisReport:
    """Check the expansion for linear and envelope cross-terms.

    Looks for I(n) and Q(n) alone, and for I(n)|x(n-q)|^k, Q(n)|x(n-q)|^k
    with q = 0..memory_depth and k = 1..max_order. Bias powers are ignored:
    a term like b^2 I(n)|x(n-1)| still witnesses the basis product, because
    the bias is a constant at inference time.
    """
    if memory_depth < 0 or max_order < 1:
        raise ValueError("memory_depth must be >= 0 and max_order >= 1")
    needed_delays = memory_depth + 1
    available = sum(1 for name in expansion.alphabet if name.startswith("e"))
    if needed_delays > available:
        raise ValueError(
            f"expansion alphabet only covers {available} delays, need {needed_delays}"
        )
    entries = []
    for comp, sym in (("I", "i0"), ("Q", "q0")):
        present = expansion.contains({sym: 1}, ignore=("b",))
        entries.append(BasisEntry("linear", comp, 0, 0, present))
    for comp, sym in (("I", "i0"), ("Q", "q0")):
        for q in range(memory_depth + 1):
            for k in range(1, max_order + 1):
                present = expansion.contains({sym: 1, f"e{q}": k}, ignore=("b",))
                entries.append(BasisEntry("cross", comp, q, k, present))
    return BasisReport(memory_depth, max_order, tuple(entries))
