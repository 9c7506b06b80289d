"""Words over a symmetric generating set.

Symbols are nonzero ints: +i is the i-th declared generator (1-based),
-i its formal inverse. String form: "a" / "a^-1".
"""

from __future__ import annotations

from dataclasses import dataclass, field


class UnknownSymbolError(ValueError):
    def __init__(self, symbol, position):
        self.symbol = symbol
        self.position = position
        super().__init__(f"unknown symbol {symbol!r} at position {position}")


@dataclass(frozen=True)
class GeneratingSet:
    """Symmetric generating set with per-peripheral marks.

    names: positive-generator labels; the formal inverse of names[i] is
    always present (symbol -(i+1)).
    peripheral_marks: peripheral id -> subset of names generating that
    peripheral (must be nonempty: the set is adapted).
    """

    names: tuple
    peripheral_marks: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate generator names")
        for pid, marked in self.peripheral_marks.items():
            if not marked:
                raise ValueError(f"peripheral {pid!r} has empty mark set (set not adapted)")
            for name in marked:
                if name not in self.names:
                    raise ValueError(f"peripheral {pid!r} marks unknown generator {name!r}")

    @property
    def rank(self) -> int:
        return len(self.names)

    def symbols(self):
        """All 2*rank symbols, positive generators first."""
        r = self.rank
        return list(range(1, r + 1)) + list(range(-1, -r - 1, -1))

    def symbol_name(self, s: int) -> str:
        name = self.names[abs(s) - 1]
        return name if s > 0 else name + "^-1"

    def parse_symbol(self, text: str, position: int = 0) -> int:
        inv = text.endswith("^-1")
        base = text[:-3] if inv else text
        try:
            i = self.names.index(base) + 1
        except ValueError:
            raise UnknownSymbolError(text, position) from None
        return -i if inv else i

    def parse_word(self, text: str) -> tuple:
        if not text.strip():
            return ()
        return tuple(self.parse_symbol(tok, i) for i, tok in enumerate(text.split()))

    def format_word(self, word) -> str:
        return " ".join(self.symbol_name(s) for s in word)

    def peripheral_symbols(self, pid) -> set:
        marked = self.peripheral_marks[pid]
        out = set()
        for name in marked:
            i = self.names.index(name) + 1
            out.add(i)
            out.add(-i)
        return out


def free_reduce(word) -> tuple:
    """Cancel adjacent inverse pairs until none remain. Idempotent."""
    out = []
    for s in word:
        if out and out[-1] == -s:
            out.pop()
        else:
            out.append(s)
    return tuple(out)


def invert_word(word) -> tuple:
    return tuple(-s for s in reversed(word))


def word_key(word) -> tuple:
    """Canonical sort key: (length, symbol sequence)."""
    return (len(word), word)
