"""Finitely generated matrix groups with designated peripheral subgroups.

The word problem is delegated to a faithful exact-rational matrix image:
two elements are equal iff their matrices are exactly equal. Faithfulness
is declared by the config and certified for the built-in groups by a
ping-pong certificate on explicit boundary intervals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import exact
from .words import GeneratingSet, free_reduce, invert_word, word_key


class MembershipUnsupportedError(RuntimeError):
    pass


class CertificateError(ValueError):
    pass


class MemoryBudgetExceeded(RuntimeError):
    def __init__(self, partial):
        self.partial = partial
        super().__init__("element budget exceeded; partial ball flagged")


@dataclass(frozen=True)
class GroupElement:
    """A reduced word plus its exact matrix image."""

    word: tuple
    matrix: tuple

    @property
    def length(self) -> int:
        return len(self.word)

    def __eq__(self, other):
        return self.matrix == other.matrix

    def __hash__(self):
        return hash(self.matrix)


@dataclass(frozen=True)
class PeripheralSubgroup:
    """A marked peripheral subgroup with a declared membership procedure.

    membership modes:
      "free_subgroup": the ambient group is free on its generators and P is
        generated by a subset of them; g in P iff its reduced word only uses
        marked symbols.
      "fixed_vector": g in P iff the matrix fixes the declared vector exactly.
    """

    id: str
    marked: tuple
    membership: str = "free_subgroup"
    fixed_vector: tuple | None = None


class Group:
    def __init__(self, gens: GeneratingSet, matrices: dict, peripherals=(),
                 faithful: bool = False, certificate=None):
        """matrices: name -> exact matrix for each positive generator."""
        self.gens = gens
        self.peripherals = list(peripherals)
        self.faithful = faithful
        self.certificate = certificate
        self.dim = len(next(iter(matrices.values())))
        self._images = {}
        for i, name in enumerate(gens.names):
            m = exact.mat(matrices[name])
            if exact.mat_det(m) != 1:
                raise ValueError(f"generator {name!r} must have determinant 1")
            self._images[i + 1] = m
            self._images[-(i + 1)] = exact.mat_inv(m)

    def generator_matrix(self, symbol: int):
        return self._images[symbol]

    @property
    def identity(self) -> GroupElement:
        return GroupElement((), exact.identity(self.dim))

    def element(self, word) -> GroupElement:
        if isinstance(word, str):
            word = self.gens.parse_word(word)
        w = free_reduce(tuple(word))
        return GroupElement(w, self.word_matrix(w))

    def word_matrix(self, word) -> tuple:
        """Exact matrix of a (not necessarily reduced) word, run-compressed."""
        m = exact.identity(self.dim)
        i, n = 0, len(word)
        while i < n:
            j = i
            while j < n and word[j] == word[i]:
                j += 1
            m = exact.mat_mul(m, exact.mat_pow(self._images[word[i]], j - i))
            i = j
        return m

    def multiply(self, g: GroupElement, h: GroupElement) -> GroupElement:
        w = free_reduce(g.word + h.word)
        return GroupElement(w, exact.mat_mul(g.matrix, h.matrix))

    def inverse(self, g: GroupElement) -> GroupElement:
        return GroupElement(invert_word(g.word), exact.mat_inv(g.matrix))

    def power(self, g: GroupElement, n: int) -> GroupElement:
        w = free_reduce(g.word * n) if n >= 0 else free_reduce(invert_word(g.word) * (-n))
        return GroupElement(w, exact.mat_pow(g.matrix, n))

    def enumerate_ball(self, radius: int, max_elements: int | None = None):
        """All distinct elements of word length <= radius, canonically ordered.

        Dedupe is by exact matrix (hash + exact equality); the stored word is
        the first (shortest, then lexicographically least) word discovered.
        """
        if radius < 0:
            raise ValueError("radius must be >= 0")
        if not self.faithful:
            raise RuntimeError("ball enumeration requires a declared-faithful representation")
        seen = {self.identity.matrix: self.identity}
        frontier = [self.identity]
        symbols = self.gens.symbols()
        for _ in range(radius):
            nxt = []
            for g in sorted(frontier, key=lambda e: word_key(e.word)):
                for s in sorted(symbols):
                    if g.word and g.word[-1] == -s:
                        continue
                    m = exact.mat_mul(g.matrix, self._images[s])
                    if m not in seen:
                        h = GroupElement(g.word + (s,), m)
                        seen[m] = h
                        nxt.append(h)
                        if max_elements is not None and len(seen) > max_elements:
                            partial = sorted(seen.values(), key=lambda e: word_key(e.word))
                            raise MemoryBudgetExceeded(partial)
            frontier = nxt
        return sorted(seen.values(), key=lambda e: word_key(e.word))

    def peripheral(self, pid: str) -> PeripheralSubgroup:
        for p in self.peripherals:
            if p.id == pid:
                return p
        raise KeyError(pid)

    def peripheral_membership(self, g: GroupElement, p: PeripheralSubgroup) -> bool:
        if p.membership == "free_subgroup":
            allowed = self.gens.peripheral_symbols(p.id)
            return all(s in allowed for s in g.word)
        if p.membership == "fixed_vector":
            v = tuple(Fraction(x) for x in p.fixed_vector)
            gv = tuple(sum(row[j] * v[j] for j in range(len(v))) for row in g.matrix)
            return gv == v
        raise MembershipUnsupportedError(
            f"peripheral {p.id!r} declares no supported membership procedure")

    def coset_decomposition(self, g: GroupElement, p: PeripheralSubgroup):
        """Split g = h * q with q the maximal trailing peripheral subword.

        Valid for free_subgroup peripherals: h is the canonical coset key of
        g*P and q the peripheral coordinate.
        """
        if p.membership != "free_subgroup":
            raise MembershipUnsupportedError(
                "coset decomposition needs a free_subgroup peripheral")
        allowed = self.gens.peripheral_symbols(p.id)
        w = g.word
        i = len(w)
        while i > 0 and w[i - 1] in allowed:
            i -= 1
        return w[:i], w[i:]


# ---------------------------------------------------------------------------
# Ping-pong certificates on RP^1 with exact rational endpoints
# ---------------------------------------------------------------------------

INF = None  # the point at infinity of RP^1


def _lt(x, y) -> bool:
    """Linear order on RP^1 points with infinity greatest."""
    if x is INF:
        return False
    if y is INF:
        return True
    return x < y


def moebius(m, x):
    a, b = m[0]
    c, d = m[1]
    if x is INF:
        return INF if c == 0 else a / c
    den = c * x + d
    if den == 0:
        return INF
    return (a * x + b) / den


@dataclass(frozen=True)
class Arc:
    """Closed oriented arc of RP^1 from start to end in increasing direction,
    wrapping through infinity when start > end."""

    start: object
    end: object

    def contains(self, x, strict: bool = False) -> bool:
        p, q = self.start, self.end
        if p == q:
            return x == p and not strict
        le = (lambda u, v: _lt(u, v)) if strict else (lambda u, v: u == v or _lt(u, v))
        if _lt(p, q):
            return le(p, x) and le(x, q)
        return le(p, x) or le(x, q)

    def image(self, m) -> "Arc":
        # det(m) > 0 so the map preserves the cyclic orientation of RP^1 and
        # the image of an oriented arc is the oriented arc of the endpoint images
        return Arc(moebius(m, self.start), moebius(m, self.end))

    def contained_in(self, outer: "Arc") -> bool:
        if not (outer.contains(self.start) and outer.contains(self.end)):
            return False
        return not (self.contains(outer.start, strict=True)
                    or self.contains(outer.end, strict=True))

    def disjoint_from(self, other: "Arc") -> bool:
        return not (other.contains(self.start) or other.contains(self.end)
                    or self.contains(other.start) or self.contains(other.end))


@dataclass(frozen=True)
class PingPongCertificate:
    """Interval data certifying that <a> * <b> is free of rank 2.

    a_plus / a_minus absorb every positive / negative power of a applied to
    the b-side set; b_right / b_left (arcs ending / starting at infinity)
    absorb powers of the parabolic b applied to the a-side set.
    """

    a_plus: Arc
    a_minus: Arc
    b_right: Arc
    b_left: Arc

    @property
    def b_side(self) -> Arc:
        return Arc(self.b_right.start, self.b_left.end)


def verify_pingpong(a, b, cert: PingPongCertificate) -> None:
    """Raise CertificateError naming the first failed inclusion."""
    checks = []
    a_inv = exact.mat_inv(a)
    b_inv = exact.mat_inv(b)
    xb = cert.b_side
    for arc in (cert.a_plus, cert.a_minus):
        checks.append(("a-side disjoint from b-side", arc.disjoint_from(xb)))
    checks.append(("a_plus disjoint from a_minus", cert.a_plus.disjoint_from(cert.a_minus)))
    checks.append(("a(b_side) inside a_plus", xb.image(a).contained_in(cert.a_plus)))
    checks.append(("a(a_plus) inside a_plus", cert.a_plus.image(a).contained_in(cert.a_plus)))
    checks.append(("a^-1(b_side) inside a_minus", xb.image(a_inv).contained_in(cert.a_minus)))
    checks.append(("a^-1(a_minus) inside a_minus",
                   cert.a_minus.image(a_inv).contained_in(cert.a_minus)))
    for arc in (cert.a_plus, cert.a_minus):
        checks.append(("b(a-side) inside b_right", arc.image(b).contained_in(cert.b_right)))
        checks.append(("b^-1(a-side) inside b_left", arc.image(b_inv).contained_in(cert.b_left)))
    checks.append(("b(b_right) inside b_right", cert.b_right.image(b).contained_in(cert.b_right)))
    checks.append(("b^-1(b_left) inside b_left", cert.b_left.image(b_inv).contained_in(cert.b_left)))
    for name, ok in checks:
        if not ok:
            raise CertificateError(f"ping-pong certificate failed: {name}")


# ---------------------------------------------------------------------------
# Built-in groups and representations
# ---------------------------------------------------------------------------

PINGPONG_A = exact.mat([["5/4", "3/4"], ["3/4", "5/4"]])  # hyperbolic, axis (-1, 1)
PINGPONG_B = exact.mat([["1", "8"], ["0", "1"]])          # parabolic fixing infinity


def pingpong_certificate() -> PingPongCertificate:
    f = Fraction
    return PingPongCertificate(
        a_plus=Arc(f(0), f(3)),
        a_minus=Arc(f(-3), f(-1, 2)),
        b_right=Arc(f(4), INF),
        b_left=Arc(INF, f(-4)),
    )


def pingpong_group() -> Group:
    """Rank-2 free group < a, b > in SL(2,Q) with peripheral <b>.

    a is hyperbolic, b parabolic; freeness (hence faithfulness of the
    inclusion) is certified at construction time by explicit ping-pong
    intervals on RP^1.
    """
    cert = pingpong_certificate()
    verify_pingpong(PINGPONG_A, PINGPONG_B, cert)
    gens = GeneratingSet(names=("a", "b"), peripheral_marks={"P0": ("b",)})
    periph = PeripheralSubgroup(id="P0", marked=("b",), membership="free_subgroup")
    return Group(gens, {"a": PINGPONG_A, "b": PINGPONG_B},
                 peripherals=[periph], faithful=True, certificate=cert)


class MatrixRep:
    """A representation given by exact generator images, evaluated on words."""

    def __init__(self, name: str, gens: GeneratingSet, images: dict):
        self.name = name
        self.gens = gens
        self.dim = len(next(iter(images.values())))
        self._images = {}
        for gname, m in images.items():
            i = gens.names.index(gname) + 1
            m = exact.mat(m)
            self._images[i] = m
            self._images[-i] = exact.mat_inv(m)

    def image(self, symbol: int):
        return self._images[symbol]

    def evaluate(self, word) -> tuple:
        m = exact.identity(self.dim)
        i, n = 0, len(word)
        while i < n:
            j = i
            while j < n and word[j] == word[i]:
                j += 1
            m = exact.mat_mul(m, exact.mat_pow(self._images[word[i]], j - i))
            i = j
        return m

    def evaluate_float(self, word):
        return exact.to_float(self.evaluate(word))


def _poly_mul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, x in enumerate(p):
        if x:
            for j, y in enumerate(q):
                out[i + j] += x * y
    return out


def _poly_pow(p, n):
    out = [Fraction(1)]
    for _ in range(n):
        out = _poly_mul(out, p)
    return out


def sym_power_matrix(m, k: int):
    """Matrix of Sym^k(m) on the monomial basis e1^k, e1^(k-1)e2, ..., e2^k."""
    (a, b), (c, d) = m
    cols = []
    for i in range(k + 1):
        # image of e1^(k-i) e2^i = (a e1 + c e2)^(k-i) (b e1 + d e2)^i
        poly = _poly_mul(_poly_pow([a, c], k - i), _poly_pow([b, d], i))
        cols.append(poly)
    return tuple(tuple(cols[j][i] for j in range(k + 1)) for i in range(k + 1))


def sym_rep(group: Group, k: int) -> MatrixRep:
    images = {name: sym_power_matrix(group.generator_matrix(i + 1), k)
              for i, name in enumerate(group.gens.names)}
    return MatrixRep(f"sym{k}", group.gens, images)


def inclusion_rep(group: Group) -> MatrixRep:
    images = {name: group.generator_matrix(i + 1)
              for i, name in enumerate(group.gens.names)}
    return MatrixRep("inclusion", group.gens, images)


def _direct_sum(m1, m2):
    d1, d2 = len(m1), len(m2)
    z1 = tuple(tuple(Fraction(0) for _ in range(d2)) for _ in range(d1))
    top = tuple(row + z for row, z in zip(m1, z1))
    bottom = tuple(tuple(Fraction(0) for _ in range(d1)) + row for row in m2)
    return top + bottom


def intro_family_rep(group: Group, t) -> MatrixRep:
    """The SL(4) family: a -> id_2 (+) a~, b -> [[1,t],[0,1]] (+) b~.

    t = 0 is relatively Anosov at k = 1; t != 0 is not.
    """
    t = Fraction(t)
    i2 = exact.identity(2)
    ut = exact.mat([[1, t], [0, 1]])
    images = {
        "a": _direct_sum(i2, group.generator_matrix(group.gens.names.index("a") + 1)),
        "b": _direct_sum(ut, group.generator_matrix(group.gens.names.index("b") + 1)),
    }
    return MatrixRep(f"rho_t={t}", group.gens, images)


def heisenberg_generators() -> dict:
    """Generators of the discrete Heisenberg group in SL(3,Z)."""
    return {
        "x": exact.mat([[1, 1, 0], [0, 1, 0], [0, 0, 1]]),
        "y": exact.mat([[1, 0, 0], [0, 1, 1], [0, 0, 1]]),
    }


def builtin_rep(group: Group, name: str) -> MatrixRep:
    if name == "inclusion":
        return inclusion_rep(group)
    if name.startswith("sym"):
        return sym_rep(group, int(name[3:]))
    if name == "rho0":
        return intro_family_rep(group, 0)
    if name == "rho1":
        return intro_family_rep(group, 1)
    raise KeyError(f"unknown built-in representation {name!r}")
