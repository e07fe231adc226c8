"""Families of step functions whose rearranged series reach finitely many limits.

Every family here is an instance of one generation-chain model.  A family
with r generations lives on the union of cubes 1..2r-3 and contains, for
each level n up to the truncation depth, terms of generations 0..r-1:

* generation 0: the indicator of one cell of an equal partition of
  coordinate n on cube 1 (partition size |M_n|, default n);
* generation g >= 1: minus the product of two consecutive generation-(g-1)
  "cell indicators" (a two-coordinate box on cube 2g-1), plus a small
  constant correction on cube 2g-2 for g >= 2, plus, for g <= r-2, two
  positive pieces on cubes 2g and 2g+1 that make the next product step
  possible.

Index tuples flatten level by level: a generation-g index (i0, ..., ig) at
level n corresponds to cell (flat(i0..i_{g-1}) - 1) * s' + ig of a finer
partition, where s' is the generation-(g-1) cell count at level n+1.  All
row, column and cross-level cancellations used by the schedules are exact
consequences of these formulas.

The classic two-kind family (kinds "a", "b", one cube, sum range {0, 1})
is the r=2 case; the three-kind family (kinds "f", "g", "h", three cubes,
three limits) is r=3; general r gives r limit points.  An affine transform
acting on cube-wise averages yields the "transformed" flavor.
"""

from __future__ import annotations

import itertools
import re
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Sequence

from .stepfn import Box, Interval, StepFunction, cell, cube_constants, equal_cells

_CACHE_LIMIT = 100_000


class ConfigError(ValueError):
    """Invalid build parameters (depth, sizes, matrix dimensions)."""


class StructuralError(ValueError):
    """A family lacks the structure an operation requires."""


# --- partition sizes --------------------------------------------------------


class IndexSizes:
    """Per-level partition sizes |M_n|.

    Accepts nothing (default |M_n| = n), an explicit 1-indexed sequence,
    or a callable.  Sizes must be positive, nondecreasing and actually
    grow over every range they are validated for; a constant sequence
    never has the cancellation geometry the schedules rely on.
    """

    def __init__(self, spec: Sequence[int] | Callable[[int], int] | None = None):
        if spec is None or callable(spec):
            self._fn = spec
            self._values = None
        else:
            self._values = tuple(int(v) for v in spec)
            self._fn = None

    def __call__(self, n: int) -> int:
        if n < 1:
            raise ConfigError(f"levels start at 1, got {n}")
        if self._values is not None:
            if n > len(self._values):
                raise ConfigError(
                    f"sizes defined only through level {len(self._values)}, need level {n}")
            return self._values[n - 1]
        if self._fn is None:
            return n
        v = self._fn(n)
        if not isinstance(v, int):
            raise ConfigError(f"size at level {n} is not an integer: {v!r}")
        return v

    def validate_through(self, last_level: int) -> None:
        vals = [self(n) for n in range(1, last_level + 1)]
        if any(v < 1 for v in vals):
            raise ConfigError(f"partition sizes must be positive, got {vals}")
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise ConfigError(f"partition sizes must be nondecreasing, got {vals}")
        if len(vals) > 1 and vals[-1] == vals[0]:
            raise ConfigError(
                f"partition sizes must grow over levels 1..{last_level}, got constant {vals[0]}")

    def spec_list(self, last_level: int) -> list[int]:
        return [self(n) for n in range(1, last_level + 1)]


# --- term identifiers -------------------------------------------------------


class TermId(NamedTuple):
    """One term of a family: kind, level, and index tuple."""

    kind: str
    level: int
    index: tuple[int, ...]

    def __str__(self) -> str:
        return f"{self.kind}^{self.level}({','.join(map(str, self.index))})"


_TERM_RE = re.compile(r"^([A-Za-z][A-Za-z0-9]*)\^(\d+)\((\d+(?:,\d+)*)\)$")


def parse_term_id(text: str) -> TermId:
    m = _TERM_RE.match(text.strip())
    if not m:
        raise ValueError(f"bad term id {text!r}; expected like 'b^2(1,3)'")
    kind, level, idx = m.groups()
    return TermId(kind, int(level), tuple(int(p) for p in idx.split(",")))


_KINDS = {
    "kadets": ("a", "b"),
    "three-kadets": ("f", "g", "h"),
}


def kinds_for(flavor: str, points: int) -> tuple[str, ...]:
    if flavor in _KINDS:
        return _KINDS[flavor]
    return tuple(f"d{g}" for g in range(points))


def cube_label(cube: int) -> str:
    return f"Q{cube}"


def parse_cube_label(text: str) -> int:
    m = re.match(r"^Q(\d+)$", text.strip())
    if not m:
        raise ValueError(f"bad cube label {text!r}")
    return int(m.group(1))


# --- the family -------------------------------------------------------------


class Family:
    """An immutable indexed collection of step functions.

    Terms are normally produced from the generation formulas on demand;
    families loaded from a file carry an explicit term table instead, and
    `with_replaced` overlays individual substitutes for fault injection.
    """

    def __init__(self, flavor: str, points: int, depth: int,
                 sizes: IndexSizes | None = None, *,
                 table: Mapping[TermId, StepFunction] | None = None,
                 overrides: Mapping[TermId, StepFunction] | None = None,
                 base: "Family | None" = None,
                 transform: "TransformSpec | None" = None,
                 structure: str | None = None):
        if points < 2:
            raise ConfigError(f"need at least 2 generations, got {points}")
        if depth < 1:
            raise ConfigError(f"depth must be at least 1, got {depth}")
        self.flavor = flavor
        self.points = points
        self.depth = depth
        self.sizes = sizes if sizes is not None else IndexSizes()
        self.sizes.validate_through(depth + points - 1)
        self.domain = tuple(range(1, 2 * points - 2))
        self.kinds = kinds_for(base.flavor if base is not None else flavor, points)
        self._table = dict(table) if table is not None else None
        self._overrides = dict(overrides) if overrides else None
        self._base = base
        self._transform = transform
        self._structure = structure
        self._flat_sizes: dict[tuple[int, int], int] = {}
        self._cache: dict[TermId, StepFunction] | None = (
            {} if self.term_count() <= _CACHE_LIMIT else None)

    # --- structure ---

    @property
    def structure(self) -> str:
        """The underlying construction, ignoring an applied transform."""
        if self._structure is not None:
            return self._structure
        return self._base.structure if self._base is not None else self.flavor

    @property
    def base(self) -> "Family | None":
        return self._base

    @property
    def transform(self) -> "TransformSpec | None":
        return self._transform

    def generation(self, kind: str) -> int:
        try:
            return self.kinds.index(kind)
        except ValueError:
            raise KeyError(f"unknown kind {kind!r}; family has {self.kinds}") from None

    def size(self, n: int) -> int:
        return self.sizes(n)

    def flat_size(self, g: int, n: int) -> int:
        """Cell count of the generation-g partition at level n."""
        if g == 0:
            return self.sizes(n)
        key = (g, n)
        got = self._flat_sizes.get(key)
        if got is None:
            got = self.flat_size(g - 1, n) * self.flat_size(g - 1, n + 1)
            self._flat_sizes[key] = got
        return got

    def flat_index(self, g: int, n: int, index: tuple[int, ...]) -> int:
        """Position of a generation-g index tuple in its flat partition (1-based)."""
        if len(index) != g + 1:
            raise ValueError(f"generation {g} index needs {g + 1} components, got {index}")
        if g == 0:
            return index[0]
        return (self.flat_index(g - 1, n, index[:-1]) - 1) * self.flat_size(g - 1, n + 1) + index[-1]

    def unflatten(self, g: int, n: int, flat: int) -> tuple[int, ...]:
        if not 1 <= flat <= self.flat_size(g, n):
            raise ValueError(f"flat index {flat} out of range for generation {g} level {n}")
        if g == 0:
            return (flat,)
        q, rem = divmod(flat - 1, self.flat_size(g - 1, n + 1))
        return self.unflatten(g - 1, n, q + 1) + (rem + 1,)

    def index_ranges(self, g: int, n: int) -> tuple[int, ...]:
        """Maximum of each index component for generation g at level n."""
        if g == 0:
            return (self.sizes(n),)
        out = [self.sizes(n), self.sizes(n + 1)]
        for i in range(2, g + 1):
            out.append(self.flat_size(i - 1, n + 1))
        return tuple(out)

    def index_tuples(self, g: int, n: int) -> Iterator[tuple[int, ...]]:
        ranges = [range(1, top + 1) for top in self.index_ranges(g, n)]
        return itertools.product(*ranges)

    def level_count(self, g: int, n: int) -> int:
        return self.flat_size(g, n)

    def term_count(self) -> int:
        return sum(self.flat_size(g, n)
                   for n in range(1, self.depth + 1) for g in range(self.points))

    def term_ids(self, level: int | None = None,
                 kinds: Iterable[str] | None = None) -> Iterator[TermId]:
        """All term ids in canonical order: level, then kind, then index."""
        levels = range(1, self.depth + 1) if level is None else (level,)
        wanted = tuple(kinds) if kinds is not None else self.kinds
        for n in levels:
            for g, kind in enumerate(self.kinds):
                if kind not in wanted:
                    continue
                for idx in self.index_tuples(g, n):
                    yield TermId(kind, n, idx)

    # --- term functions ---

    def _term_parts(self, g: int, n: int, index: tuple[int, ...]):
        """(cube, {coordinate: (cell index, cell count)}, value) pieces of one term."""
        parts = []
        if g == 0:
            parts.append((1, {n: (index[0], self.sizes(n))}, Fraction(1)))
        else:
            fl = self.flat_index(g - 1, n, index[:-1])
            parts.append((2 * g - 1,
                          {n: (fl, self.flat_size(g - 1, n)),
                           n + 1: (index[-1], self.flat_size(g - 1, n + 1))},
                          Fraction(-1)))
            if g >= 2:
                mid = self.flat_index(g - 2, n, index[:-2])
                parts.append((2 * g - 2, {n: (mid, self.flat_size(g - 2, n))},
                              Fraction(-1, self.flat_size(g - 1, n + 1)
                                       * self.flat_size(g - 2, n + 1))))
        if 1 <= g <= self.points - 2:
            fl = self.flat_index(g - 1, n, index[:-1])
            parts.append((2 * g, {n: (fl, self.flat_size(g - 1, n))},
                          Fraction(1, self.flat_size(g - 1, n + 1))))
            parts.append((2 * g + 1, {n: (self.flat_index(g, n, index), self.flat_size(g, n))},
                          Fraction(1)))
        return parts

    def _formula_fn(self, g: int, n: int, index: tuple[int, ...]) -> StepFunction:
        terms = []
        for cube, spec, value in sorted(self._term_parts(g, n, index), key=lambda p: p[0]):
            bounds = tuple((coord, cell(i, size))
                           for coord, (i, size) in sorted(spec.items()) if size > 1)
            terms.append((Box(cube, bounds), value))
        return StepFunction._raw(self.domain, tuple(terms))

    def _validate_id(self, tid: TermId) -> int:
        g = self.generation(tid.kind)
        if not 1 <= tid.level <= self.depth:
            raise KeyError(f"level of {tid} outside 1..{self.depth}")
        ranges = self.index_ranges(g, tid.level)
        if len(tid.index) != len(ranges) or any(
                not 1 <= i <= top for i, top in zip(tid.index, ranges)):
            raise KeyError(f"index of {tid} outside ranges {ranges}")
        return g

    def fn(self, tid: TermId) -> StepFunction:
        """The step function of one term."""
        if self._overrides is not None and tid in self._overrides:
            return self._overrides[tid]
        if self._table is not None:
            try:
                return self._table[tid]
            except KeyError:
                raise KeyError(f"term {tid} missing from the loaded table") from None
        if self._cache is not None:
            got = self._cache.get(tid)
            if got is not None:
                return got
        g = self._validate_id(tid)
        if self._base is not None:
            out = _transformed_fn(self, self._base.fn(tid))
        else:
            out = self._formula_fn(g, tid.level, tid.index)
        if self._cache is not None:
            self._cache[tid] = out
        return out

    def reference_fn(self, g: int, n: int, index: tuple[int, ...]) -> StepFunction:
        """Formula value for any level, including beyond the truncation depth."""
        if self._base is not None:
            return self._base.reference_fn(g, n, index)
        return self._formula_fn(g, n, index)

    def with_replaced(self, overrides: Mapping[TermId, StepFunction]) -> "Family":
        merged = dict(self._overrides or {})
        merged.update(overrides)
        return Family(self.flavor, self.points, self.depth, self.sizes,
                      table=self._table, overrides=merged,
                      base=self._base, transform=self._transform,
                      structure=self._structure)

    @property
    def is_table_backed(self) -> bool:
        return self._table is not None

    def table_ids(self) -> Iterator[TermId]:
        if self._table is None:
            raise StructuralError("family has no explicit term table")
        return iter(self._table)

    def __repr__(self) -> str:
        return (f"Family(flavor={self.flavor!r}, points={self.points}, "
                f"depth={self.depth}, terms={self.term_count()})")


def _transformed_fn(fam: Family, base_fn: StepFunction) -> StepFunction:
    shift = fam.transform.apply(paired_means(fam.points, base_fn))
    return base_fn + y_constants(fam.points, fam.domain, shift)


# --- builders ---------------------------------------------------------------


def build_kadets(depth: int, sizes: IndexSizes | Sequence[int] | None = None) -> Family:
    """Two kinds a, b on one cube; the series can be rearranged to 0 or to 1."""
    return Family("kadets", 2, depth, _as_sizes(sizes))


def build_three_kadets(depth: int, sizes: IndexSizes | Sequence[int] | None = None) -> Family:
    """Three kinds f, g, h on three cubes; three reachable limits."""
    return Family("three-kadets", 3, depth, _as_sizes(sizes))


def build_multipoint(points: int, depth: int,
                     sizes: IndexSizes | Sequence[int] | None = None) -> Family:
    """A generation chain with the given number of reachable limits (>= 2)."""
    if points < 2:
        raise ConfigError(f"point count must be at least 2, got {points}")
    if points == 2:
        return build_kadets(depth, sizes)
    if points == 3:
        return build_three_kadets(depth, sizes)
    return Family("multipoint", points, depth, _as_sizes(sizes))


def extend_multipoint(fam: Family, depth: int | None = None) -> Family:
    """One more generation: the last two kinds keep their role as the
    product pair on the last cube, the new kind closes rows beneath them."""
    if fam.structure not in ("kadets", "three-kadets", "multipoint"):
        raise StructuralError(f"cannot extend flavor {fam.flavor!r}")
    if fam.flavor == "transformed":
        raise StructuralError("extend the base family before applying a transform")
    return build_multipoint(fam.points + 1, depth if depth is not None else fam.depth,
                            fam.sizes)


def _as_sizes(sizes) -> IndexSizes | None:
    if sizes is None or isinstance(sizes, IndexSizes):
        return sizes
    return IndexSizes(sizes)


# --- cube averages and affine transforms ------------------------------------


def cube_means(f: StepFunction) -> tuple[Fraction, ...]:
    """Per-cube average of f; cubes have measure one, so this is the
    orthogonal projection onto cube-wise constant functions."""
    return tuple(f.integral(c) for c in f.domain)


def y_groups(points: int) -> tuple[tuple[int, ...], ...]:
    """Cubes grouped by shared constant value: cube 1 alone, then pairs."""
    groups: list[tuple[int, ...]] = [(1,)]
    for j in range(1, points - 1):
        groups.append((2 * j, 2 * j + 1))
    return tuple(groups)


def paired_means(points: int, f: StepFunction) -> tuple[Fraction, ...]:
    """Cube means collapsed along the pairing; callers must know the pairing holds."""
    return tuple(f.integral(group[0]) for group in y_groups(points))


def y_constants(points: int, domain: tuple[int, ...],
                values: Sequence[Fraction]) -> StepFunction:
    spread = {}
    for group, v in zip(y_groups(points), values):
        for c in group:
            spread[c] = v
    return cube_constants(domain, spread)


def point_to_y(points: int, point: Sequence[Fraction]) -> tuple[Fraction, ...]:
    return tuple(point[group[0] - 1] for group in y_groups(points))


def y_to_point(points: int, y: Sequence[Fraction]) -> tuple[Fraction, ...]:
    out = [Fraction(0)] * (2 * points - 3)
    for group, v in zip(y_groups(points), y):
        for c in group:
            out[c - 1] = Fraction(v)
    return tuple(out)


class TransformSpec:
    """A square rational matrix acting on the paired cube averages."""

    def __init__(self, rows: Sequence[Sequence[Fraction | int | str]]):
        self.rows = tuple(tuple(Fraction(x) for x in row) for row in rows)
        n = len(self.rows)
        if n == 0 or any(len(row) != n for row in self.rows):
            raise ConfigError("transform matrix must be square and non-empty")

    @property
    def dim(self) -> int:
        return len(self.rows)

    def apply(self, vector: Sequence[Fraction]) -> tuple[Fraction, ...]:
        if len(vector) != self.dim:
            raise ConfigError(f"vector length {len(vector)} != matrix dimension {self.dim}")
        return tuple(sum(a * x for a, x in zip(row, vector)) for row in self.rows)

    @classmethod
    def zero(cls, dim: int) -> "TransformSpec":
        return cls([[0] * dim for _ in range(dim)])

    @classmethod
    def identity(cls, dim: int) -> "TransformSpec":
        return cls([[1 if i == j else 0 for j in range(dim)] for i in range(dim)])

    def __eq__(self, other) -> bool:
        return isinstance(other, TransformSpec) and self.rows == other.rows

    def __repr__(self) -> str:
        return f"TransformSpec({[[str(x) for x in row] for row in self.rows]})"


def apply_transform(fam: Family, spec: TransformSpec) -> Family:
    """Shift every term by the transform of its paired cube averages."""
    if fam.flavor == "transformed":
        raise StructuralError("family already carries a transform")
    if spec.dim != fam.points - 1:
        raise ConfigError(
            f"matrix dimension {spec.dim} != {fam.points - 1} independent cube values")
    for tid in fam.term_ids():
        f = fam.fn(tid)
        for group in y_groups(fam.points):
            vals = {f.integral(c) for c in group}
            if len(vals) > 1:
                raise StructuralError(
                    f"term {tid} breaks the cube pairing on {tuple(map(cube_label, group))}")
    return Family("transformed", fam.points, fam.depth, fam.sizes,
                  base=fam, transform=spec)


# --- advertised limits ------------------------------------------------------


def expected_sum_range(fam: Family) -> tuple[tuple[Fraction, ...], ...]:
    """The limit points the construction advertises, as per-cube constants."""
    base_points = tuple(
        tuple(Fraction(1 if c <= 2 * i - 1 else 0) for c in range(1, 2 * fam.points - 2))
        for i in range(fam.points))
    if fam.flavor != "transformed":
        return base_points
    out = []
    for p in base_points:
        y = point_to_y(fam.points, p)
        shifted = tuple(a + b for a, b in zip(y, fam.transform.apply(y)))
        out.append(y_to_point(fam.points, shifted))
    return tuple(out)
