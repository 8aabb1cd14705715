"""Stacky fans with ordered rays, divisor labels and distinguished structure.

A fan is a lattice rank, an ordered list of rays (list position = birth
order), a set of simplicial cones given as ray-index sets, an ordered
list of divisor labels (oldest first), a partial labeling of rays by
divisors, and a set of distinguished labels.  The two stacky
modifications (star subdivision and root construction) return new fans;
nothing here mutates.

Cones are ray-index frozensets.  The tie-break order on cones compares
the index sets sorted descending, lexicographically, so younger rays
weigh more; this order is preserved by subfan restriction and by
relabelings that keep ray order, which is what the functoriality
arguments need.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .exact import (
    FinAbGroup,
    IntMatrix,
    cokernel_of_rows,
    kernel_columns,
    smith_normal_form,
)


class FanError(Exception):
    """Base class for fan-layer errors."""


class UnknownCone(FanError):
    pass


class UnknownRay(FanError):
    pass


class ZeroCone(FanError):
    pass


class NonpositiveWeight(FanError):
    pass


class NotAFan(FanError):
    pass


class FanFormatError(FanError):
    """Malformed fan document."""


@dataclass(frozen=True)
class Ray:
    """A ray with its stacky lattice point beta = stacky_multiple * primitive."""

    beta: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta", tuple(int(x) for x in self.beta))

    @property
    def stacky_multiple(self) -> int:
        g = math.gcd(*self.beta) if self.beta else 0
        return g if g else 1

    @property
    def primitive(self) -> tuple[int, ...]:
        g = math.gcd(*self.beta) if self.beta else 0
        if g == 0:
            return self.beta
        return tuple(x // g for x in self.beta)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def cone_key(cone) -> tuple[int, ...]:
    """Canonical comparison key: indices sorted descending, lexicographic."""
    return tuple(sorted(cone, reverse=True))


@dataclass(frozen=True)
class StackyFan:
    rank: int
    rays: tuple[Ray, ...]
    maximal_cones: tuple[frozenset[int], ...]
    labels: tuple[str | None, ...] = None  # type: ignore[assignment]
    divisors: tuple[str, ...] = None  # type: ignore[assignment]
    distinguished: frozenset[str] = frozenset()
    _cache: dict = field(default_factory=dict, init=False, repr=False,
                         compare=False, hash=False)

    def __post_init__(self) -> None:
        rays = tuple(r if isinstance(r, Ray) else Ray(tuple(r)) for r in self.rays)
        object.__setattr__(self, "rays", rays)
        raw = self.maximal_cones
        if all(type(c) is frozenset for c in raw):
            cones = set(raw)
        else:
            cones = {frozenset(int(i) for i in c) for c in raw}
        # A proper subset is strictly shorter, so testing against kept
        # longer cones suffices; pure-dimensional input needs no tests.
        by_len: dict[int, list] = {}
        for c in cones:
            by_len.setdefault(len(c), []).append(c)
        keep: list[frozenset] = []
        for ln in sorted(by_len, reverse=True):
            fresh = [c for c in by_len[ln]
                     if not any(c < d for d in keep)]
            keep.extend(fresh)
        maximal = tuple(sorted(keep, key=cone_key))
        object.__setattr__(self, "maximal_cones", maximal)
        labels = self.labels
        if labels is None:
            labels = (None,) * len(rays)
        labels = tuple(labels)
        if len(labels) != len(rays):
            raise ValueError("labels must align with rays")
        object.__setattr__(self, "labels", labels)
        divisors = self.divisors
        if divisors is None:
            seen = []
            for lab in labels:
                if lab is not None and lab not in seen:
                    seen.append(lab)
            divisors = tuple(seen)
        object.__setattr__(self, "divisors", tuple(divisors))
        object.__setattr__(self, "distinguished", frozenset(self.distinguished))

    # ------------------------------------------------------------------
    # structure

    @property
    def n_rays(self) -> int:
        return len(self.rays)

    @property
    def label_of(self) -> dict[int, str]:
        return {i: lab for i, lab in enumerate(self.labels) if lab is not None}

    def rays_of_label(self, label: str) -> tuple[int, ...]:
        return tuple(i for i, lab in enumerate(self.labels) if lab == label)

    def cones(self) -> tuple[frozenset[int], ...]:
        """Every face of every maximal cone, including the zero cone."""
        if "cones" not in self._cache:
            out = {frozenset()}
            for c in self.maximal_cones:
                idx = sorted(c)
                for size in range(1, len(idx) + 1):
                    for sub in itertools.combinations(idx, size):
                        out.add(frozenset(sub))
            self._cache["cones"] = tuple(sorted(out, key=lambda c: (len(c), cone_key(c))))
        return self._cache["cones"]

    def has_cone(self, cone) -> bool:
        c = frozenset(cone)
        return any(c <= m for m in self.maximal_cones)

    def _coerce_cone(self, cone) -> frozenset[int]:
        c = frozenset(int(i) for i in cone)
        for i in c:
            if not 0 <= i < self.n_rays:
                raise UnknownCone(f"ray index {i} out of range")
        if not self.has_cone(c):
            raise UnknownCone(f"{sorted(c)} is not a cone of the fan")
        return c

    def beta_matrix(self, cone, primitive: bool = False) -> IntMatrix:
        """Columns are the (primitive) generators of the cone's rays, in
        ascending ray-index order."""
        idx = sorted(cone)
        cols = [self.rays[i].primitive if primitive else self.rays[i].beta
                for i in idx]
        return IntMatrix.from_columns(cols, rows=self.rank)

    # ------------------------------------------------------------------
    # multiplicities and parallelotopes

    def multiplicity(self, cone) -> int:
        c = self._coerce_cone(cone)
        key = ("mult", c)
        if key not in self._cache:
            if not c:
                self._cache[key] = 1
            else:
                snf = smith_normal_form(self.beta_matrix(c, primitive=True))
                self._cache[key] = math.prod(snf.diagonal)
        return self._cache[key]

    def _parallelotope(self, c: frozenset[int]):
        """All lattice points of the half-open parallelotope on the
        primitive generators, each with its coordinate vector; the point
        count equals the multiplicity."""
        key = ("para", c)
        if key in self._cache:
            return self._cache[key]
        idx = sorted(c)
        if not idx:
            out = ((tuple(0 for _ in range(self.rank)), ()),)
            self._cache[key] = out
            return out
        m = self.beta_matrix(c, primitive=True)
        snf = smith_normal_form(m)
        diag = snf.diagonal
        k = len(idx)
        pts = []
        for mu in itertools.product(*[range(d) for d in diag]):
            lam = []
            for i in range(k):
                s = Fraction(0)
                for j in range(k):
                    if mu[j]:
                        s += Fraction(snf.v.entries[i][j] * mu[j], diag[j])
                s -= math.floor(s)
                lam.append(s)
            point = []
            for row in range(self.rank):
                s = sum(lam[i] * m.entries[row][i] for i in range(k))
                point.append(s)
            assert all(x.denominator == 1 for x in map(Fraction, point))
            pts.append((tuple(int(x) for x in point), tuple(lam)))
        pts.sort(key=lambda pl: pl[0])
        out = tuple(pts)
        self._cache[key] = out
        return out

    def parallelotope_points(self, cone, relative_interior: bool = False):
        c = self._coerce_cone(cone)
        pts = self._parallelotope(c)
        if relative_interior:
            return tuple(p for p, lam in pts if all(x > 0 for x in lam))
        return tuple(p for p, lam in pts)

    def parallelotope_lambdas(self, cone, relative_interior: bool = False):
        """(point, coordinates over the primitive generators) pairs."""
        c = self._coerce_cone(cone)
        pts = self._parallelotope(c)
        if relative_interior:
            return tuple((p, lam) for p, lam in pts if all(x > 0 for x in lam))
        return pts

    def independent_at(self, cone, ray: int) -> bool:
        c = self._coerce_cone(cone)
        if not 0 <= ray < self.n_rays:
            raise UnknownRay(f"ray index {ray} out of range")
        if ray not in c:
            return True
        return self.multiplicity(c - {ray}) == self.multiplicity(c)

    def chart_group(self, cone):
        """(A, weights, marks) of the chart at a cone.

        A is Z^cone(1) modulo the rows of the transposed beta matrix;
        weights are the classes of the standard basis vectors, in
        ascending ray-index order, marks the divisor labels of the rays
        in the same order.
        """
        c = self._coerce_cone(cone)
        key = ("chart", c)
        if key not in self._cache:
            idx = sorted(c)
            rows = []
            for j in range(self.rank):
                rows.append(tuple(self.rays[i].beta[j] for i in idx))
            mat = IntMatrix.from_rows(rows, cols=len(idx)) if rows else \
                IntMatrix.zeros(0, len(idx))
            group, images = cokernel_of_rows(mat)
            marks = tuple(self.labels[i] for i in idx)
            self._cache[key] = (group, images, marks)
        return self._cache[key]

    # ------------------------------------------------------------------
    # modifications

    def stacky_star_subdivision(self, cone) -> tuple["StackyFan", int]:
        """Star subdivision at a cone.

        The exceptional ray gets beta = sum of the beta values of the
        cone's rays and is appended as the youngest ray; every cone
        containing the centre is subdivided.  A 1-dimensional centre is
        the trivial blow-up: the fan is returned unchanged and the
        centre's own ray plays the exceptional role.
        """
        c = self._coerce_cone(cone)
        if not c:
            raise ZeroCone("cannot subdivide the zero cone")
        if len(c) == 1:
            return self, next(iter(c))
        eps_beta = tuple(sum(self.rays[i].beta[j] for i in c)
                         for j in range(self.rank))
        eps = self.n_rays
        new_cones = []
        for m in self.maximal_cones:
            if c <= m:
                for rho in sorted(c):
                    new_cones.append((m - {rho}) | {eps})
            else:
                new_cones.append(m)
        fan = StackyFan(
            rank=self.rank,
            rays=self.rays + (Ray(eps_beta),),
            maximal_cones=tuple(frozenset(x) for x in new_cones),
            labels=self.labels + (None,),
            divisors=self.divisors,
            distinguished=self.distinguished,
        )
        return fan, eps

    def root_construction(self, weights: dict[int, int]) -> "StackyFan":
        """Scale beta on the given rays; move their labels to the young
        end of the divisor order, preserving relative order."""
        weights = {int(i): int(d) for i, d in weights.items()}
        for i, d in weights.items():
            if not 0 <= i < self.n_rays:
                raise UnknownRay(f"ray index {i} out of range")
            if d < 1:
                raise NonpositiveWeight(f"root weight {d} on ray {i}")
        rays = list(self.rays)
        for i, d in weights.items():
            rays[i] = Ray(tuple(d * x for x in rays[i].beta))
        rooted_labels = {self.labels[i] for i in weights if self.labels[i] is not None}
        divisors = tuple(lab for lab in self.divisors if lab not in rooted_labels) + \
            tuple(lab for lab in self.divisors if lab in rooted_labels)
        return replace(self, rays=tuple(rays), divisors=divisors)

    def with_ray_label(self, ray: int, label: str,
                       distinguished: bool = False) -> "StackyFan":
        """Attach a divisor label to an unlabeled ray, appending the
        label as the youngest divisor if it is new."""
        if not 0 <= ray < self.n_rays:
            raise UnknownRay(f"ray index {ray} out of range")
        if self.labels[ray] is not None and self.labels[ray] != label:
            raise ValueError(f"ray {ray} already labeled {self.labels[ray]}")
        labels = list(self.labels)
        labels[ray] = label
        divisors = self.divisors if label in self.divisors \
            else self.divisors + (label,)
        dist = self.distinguished | {label} if distinguished else self.distinguished
        return replace(self, labels=tuple(labels), divisors=divisors,
                       distinguished=dist)

    def forget_distinguished(self) -> "StackyFan":
        return replace(self, distinguished=frozenset())

    def subfan(self, cones) -> "StackyFan":
        """Restrict to a subset of cones, retaining the global ray list
        (and hence global ray indices), labels and divisor order."""
        sub = [frozenset(int(i) for i in c) for c in cones]
        for c in sub:
            for i in c:
                if not 0 <= i < self.n_rays:
                    raise NotAFan(f"ray index {i} out of range")
            if not self.has_cone(c):
                raise NotAFan(f"{sorted(c)} is not a cone of the fan")
        return replace(self, maximal_cones=tuple(sub))

    # ------------------------------------------------------------------
    # geometry helpers

    def cone_coordinates(self, cone, point):
        """Coordinates of a point over the cone's primitive generators,
        or None if the point is outside the cone's span.  Exact."""
        idx = sorted(cone)
        cols = [self.rays[i].primitive for i in idx]
        return _solve_fractions(cols, point, self.rank)

    def cone_contains_point(self, cone, point) -> bool:
        coords = self.cone_coordinates(cone, point)
        return coords is not None and all(x >= 0 for x in coords)

    def support_contains_point(self, point) -> bool:
        return any(self.cone_contains_point(c, point) for c in self.maximal_cones)

    def refines(self, other: "StackyFan") -> bool:
        """True if every maximal cone of self lies inside a cone of other.

        Together with equality of supports this is fan refinement; the
        support comparison is left to sampling-based tests.
        """
        for c in self.maximal_cones:
            found = False
            for m in other.maximal_cones:
                if all(other.cone_contains_point(m, self.rays[i].primitive)
                       for i in c):
                    found = True
                    break
            if not found:
                return False
        return True

    # ------------------------------------------------------------------
    # validation

    def validate(self, full: bool = True) -> ValidationReport:
        out: list[str] = []
        if self.rank < 1:
            out.append("rank must be at least 1")
        for i, ray in enumerate(self.rays):
            if len(ray.beta) != self.rank:
                out.append(f"ray {i}: beta has wrong dimension")
            elif not any(ray.beta):
                out.append(f"ray {i}: zero beta vector")
        if out:
            return ValidationReport(tuple(out))

        for c in self.maximal_cones:
            for i in c:
                if not 0 <= i < self.n_rays:
                    out.append(f"cone {sorted(c)}: ray index {i} out of range")
        if out:
            return ValidationReport(tuple(out))

        used = sorted({i for c in self.maximal_cones for i in c})
        directions: dict[tuple[int, ...], int] = {}
        for i in used:
            p = self.rays[i].primitive
            if p in directions:
                out.append(f"rays {directions[p]} and {i} span the same ray")
            else:
                directions[p] = i

        for c in self.maximal_cones:
            m = self.beta_matrix(c, primitive=True)
            rank = sum(1 for d in smith_normal_form(m).diagonal if d)
            if rank != len(c):
                out.append(f"cone {sorted(c)}: generators are linearly dependent")

        if out:
            return ValidationReport(tuple(out))

        if full:
            for c1, c2 in itertools.combinations(self.maximal_cones, 2):
                if not self._proper_intersection(c1, c2):
                    out.append(f"cones {sorted(c1)} and {sorted(c2)} "
                               "do not intersect in a common face")

        span = IntMatrix.from_columns([self.rays[i].primitive for i in used],
                                      rows=self.rank) if used else \
            IntMatrix.zeros(self.rank, 0)
        span_rank = sum(1 for d in smith_normal_form(span).diagonal if d)
        if span_rank != self.rank:
            out.append("the cones do not span the ambient space")

        if len(set(self.divisors)) != len(self.divisors):
            out.append("duplicate divisor labels")
        for i, lab in enumerate(self.labels):
            if lab is not None and lab not in self.divisors:
                out.append(f"ray {i}: label {lab!r} missing from the divisor list")
        for lab in self.distinguished:
            if lab not in self.divisors:
                out.append(f"distinguished label {lab!r} missing from the divisor list")
        seen_distinguished = False
        for lab in self.divisors:
            if lab in self.distinguished:
                seen_distinguished = True
            elif seen_distinguished:
                out.append("distinguished labels must be the youngest divisors")
                break
        for c in self.maximal_cones:
            labs = [self.labels[i] for i in c if self.labels[i] is not None]
            if len(labs) != len(set(labs)):
                out.append(f"cone {sorted(c)}: two rays share a divisor label")

        return ValidationReport(tuple(out))

    def _proper_intersection(self, c1: frozenset[int], c2: frozenset[int]) -> bool:
        """Exact test that cone(c1) meets cone(c2) exactly in the cone on
        their common rays.

        Every extreme ray of {(lam, mu) >= 0 : A lam = B mu} is supported
        on a column set with one-dimensional kernel, so enumerating
        sign-definite kernel vectors over small supports and checking
        their images against the common face is a complete test.
        """
        common = sorted(c1 & c2)
        a_idx = sorted(c1)
        b_idx = sorted(c2)
        acols = [self.rays[i].primitive for i in a_idx]
        bcols = [self.rays[i].primitive for i in b_idx]
        cols = acols + [tuple(-x for x in b) for b in bcols]
        m = len(cols)
        ccols = [self.rays[i].primitive for i in common]
        max_size = min(m, self.rank + 1)
        for size in range(1, max_size + 1):
            for sub in itertools.combinations(range(m), size):
                mat = IntMatrix.from_columns([cols[j] for j in sub], rows=self.rank)
                ker = kernel_columns(mat)
                if ker.cols != 1:
                    continue
                vec = ker.col(0)
                if all(x > 0 for x in vec):
                    z = vec
                elif all(x < 0 for x in vec):
                    z = tuple(-x for x in vec)
                else:
                    continue
                point = [0] * self.rank
                for pos, j in enumerate(sub):
                    if j < len(acols):
                        for r in range(self.rank):
                            point[r] += z[pos] * acols[j][r]
                coords = _solve_fractions(ccols, point, self.rank)
                if coords is None or any(x < 0 for x in coords):
                    return False
        return True

    # ------------------------------------------------------------------
    # serialisation

    def to_doc(self) -> dict:
        dist = [lab for lab in self.divisors if lab in self.distinguished]
        return {
            "rank": self.rank,
            "rays": [{"beta": list(r.beta), "label": self.labels[i]}
                     for i, r in enumerate(self.rays)],
            "maximal_cones": [sorted(c) for c in self.maximal_cones],
            "divisors": list(self.divisors),
            "distinguished": dist,
        }

    @classmethod
    def from_doc(cls, doc) -> "StackyFan":
        if not isinstance(doc, dict):
            raise FanFormatError("fan document must be an object")
        try:
            rank = int(doc["rank"])
            rays_doc = doc["rays"]
            cones_doc = doc["maximal_cones"]
        except (KeyError, TypeError, ValueError) as exc:
            raise FanFormatError(f"missing or malformed field: {exc}") from exc
        if not isinstance(rays_doc, list) or not isinstance(cones_doc, list):
            raise FanFormatError("rays and maximal_cones must be lists")
        rays = []
        labels = []
        for entry in rays_doc:
            if not isinstance(entry, dict) or "beta" not in entry:
                raise FanFormatError("each ray needs a beta field")
            beta = entry["beta"]
            if not isinstance(beta, list) or \
                    not all(isinstance(x, int) for x in beta):
                raise FanFormatError("beta must be a list of integers")
            rays.append(Ray(tuple(beta)))
            lab = entry.get("label")
            if lab is not None and not isinstance(lab, str):
                raise FanFormatError("ray label must be a string or null")
            labels.append(lab)
        cones = []
        for c in cones_doc:
            if not isinstance(c, list) or not all(isinstance(i, int) for i in c):
                raise FanFormatError("each maximal cone must be a list of ray indices")
            for i in c:
                if not 0 <= i < len(rays):
                    raise FanFormatError(f"cone index {i} out of range")
            cones.append(frozenset(c))
        divisors = doc.get("divisors")
        if divisors is not None:
            if not isinstance(divisors, list) or \
                    not all(isinstance(x, str) for x in divisors):
                raise FanFormatError("divisors must be a list of strings")
            divisors = tuple(divisors)
        distinguished = doc.get("distinguished", [])
        if not isinstance(distinguished, list) or \
                not all(isinstance(x, str) for x in distinguished):
            raise FanFormatError("distinguished must be a list of strings")
        return cls(rank=rank, rays=tuple(rays), maximal_cones=tuple(cones),
                   labels=tuple(labels), divisors=divisors,
                   distinguished=frozenset(distinguished))


def _solve_fractions(columns, target, nrows):
    """Solve sum x_j col_j = target exactly; None when target is outside
    the column span.  Columns must be linearly independent."""
    ncols = len(columns)
    a = [[Fraction(columns[j][i]) for j in range(ncols)] + [Fraction(target[i])]
         for i in range(nrows)]
    r = 0
    piv_cols = []
    for c in range(ncols):
        pivot = next((i for i in range(r, nrows) if a[i][c]), None)
        if pivot is None:
            raise ValueError("columns are dependent")
        a[r], a[pivot] = a[pivot], a[r]
        pv = a[r][c]
        a[r] = [x / pv for x in a[r]]
        for i in range(nrows):
            if i != r and a[i][c]:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        piv_cols.append(c)
        r += 1
    for i in range(r, nrows):
        if a[i][ncols]:
            return None
    return tuple(a[j][ncols] for j in range(ncols))
