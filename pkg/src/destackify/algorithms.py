"""Destackification algorithms on stacky fans.

The module drives the combinatorial side of the theory: the partial toric
resolution (`algorithm_a`), toric destackification (`algorithm_b`),
divisorialification plain and along distinguished divisors, the recipe-fan
construction with its global replay (`destackify`), component splitting,
certification of the final state, and the restriction-based equivalence
check on blow-up sequences.

Every run is deterministic: ties between cones are broken by `cone_key`,
formal ray sums by their coefficient vectors with the oldest ray most
significant, and fresh divisor labels come from an allocator that walks
"e1", "e2", ... skipping names already taken.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .conormal import (
    ConormalData,
    DivisorialType,
    NotDivisorial,
    conormal_at,
    divisorial_index,
    divisorial_index_along,
    divisorial_type,
    independency_index,
    relative_generic_order,
    toroidal_index,
)
from .exact import subgroup_generated
from .fans import StackyFan, cone_key


class AlgorithmError(Exception):
    pass


class StepLimitExceeded(AlgorithmError):
    """Raised when a run exceeds limits.max_steps; carries the partial
    sequence for diagnosis."""

    def __init__(self, message: str, sequence: "BlowupSequence" = None):
        super().__init__(message)
        self.sequence = sequence


class NonSmoothLocus(AlgorithmError):
    """The centres of a maximal locus are not pairwise disjoint."""


class EmptyType(AlgorithmError):
    """A recipe fan was requested for a trivial divisorial type."""


class PostconditionError(AlgorithmError):
    """An asserted invariant of a run failed."""


class NotASubfan(AlgorithmError):
    pass


# ----------------------------------------------------------------------
# formal ray sums


@dataclass(frozen=True)
class FormalRaySum:
    """Effective formal sum of rays, stored as (ray, coefficient) pairs
    with positive coefficients, ascending ray index."""

    coefficients: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        seen = {}
        for i, c in self.coefficients:
            i, c = int(i), int(c)
            if c < 0:
                raise ValueError(f"negative coefficient {c} on ray {i}")
            if c:
                seen[i] = seen.get(i, 0) + c
        object.__setattr__(
            self, "coefficients", tuple(sorted(seen.items())))

    @classmethod
    def from_dict(cls, coeffs) -> "FormalRaySum":
        return cls(tuple(coeffs.items()))

    @property
    def support(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.coefficients)

    def coefficient(self, ray: int) -> int:
        for i, c in self.coefficients:
            if i == ray:
                return c
        return 0

    def beta(self, fan: StackyFan) -> tuple[int, ...]:
        out = [0] * fan.rank
        for i, c in self.coefficients:
            b = fan.rays[i].beta
            for j in range(fan.rank):
                out[j] += c * b[j]
        return tuple(out)

    def vector(self, n_rays: int) -> tuple[int, ...]:
        """Coefficient vector for the lexicographic order: oldest ray
        most significant."""
        return tuple(self.coefficient(i) for i in range(n_rays))

    def __bool__(self) -> bool:
        return bool(self.coefficients)


# ----------------------------------------------------------------------
# steps and sequences


@dataclass(frozen=True)
class BlowupStep:
    """One stacky blow-up: either a star subdivision step (possibly at
    several disjoint centres sharing one exceptional label) or a root
    construction."""

    index: int
    kind: str  # "star" | "root"
    centres: tuple[tuple[int, ...], ...] = ()
    rays: tuple[tuple[int, int], ...] = ()
    exceptional: str | None = None
    labels: tuple[tuple[str, int], ...] = ()
    psi: tuple[tuple[int, int], ...] | None = None
    snapshot: dict | None = None

    def to_doc(self) -> dict:
        doc = {"index": self.index, "kind": self.kind}
        if self.kind == "star":
            doc["centres"] = [list(c) for c in self.centres]
            doc["exceptional"] = self.exceptional
        else:
            doc["rays"] = [list(p) for p in self.rays]
            doc["labels"] = [list(p) for p in self.labels]
        if self.psi is not None:
            doc["psi"] = [list(p) for p in self.psi]
        if self.snapshot is not None:
            doc["snapshot"] = self.snapshot
        return doc


@dataclass(frozen=True)
class BlowupSequence:
    initial: StackyFan
    steps: tuple[BlowupStep, ...]
    final: StackyFan

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def kinds(self) -> tuple[str, ...]:
        return tuple(s.kind for s in self.steps)

    def to_docs(self) -> list[dict]:
        return [s.to_doc() for s in self.steps]


@dataclass(frozen=True)
class RunLimits:
    max_steps: int = 10_000
    snapshots: bool = False

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass(frozen=True)
class AggregateInvariant:
    """Independency index, toroidal index and divisorial type, compared
    lexicographically in that order."""

    independency: int
    toroidal: int
    divisorial_type: DivisorialType

    def _key(self):
        return (self.independency, self.toroidal, self.divisorial_type)

    def __lt__(self, other):
        return self._key() < other._key()

    def __le__(self, other):
        return self._key() <= other._key()

    def __gt__(self, other):
        return self._key() > other._key()

    def __ge__(self, other):
        return self._key() >= other._key()


@dataclass(frozen=True)
class CertReport:
    coarse_smooth: bool
    coarse_snc: bool
    root_data: dict[str, int]
    gerbe_ok: bool
    failures: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.failures and self.coarse_smooth and \
            self.coarse_snc and self.gerbe_ok

    def to_doc(self) -> dict:
        return {
            "pass": self.ok,
            "coarse_smooth": self.coarse_smooth,
            "coarse_snc": self.coarse_snc,
            "root_data": dict(sorted(self.root_data.items())),
            "gerbe_ok": self.gerbe_ok,
            "failures": list(self.failures),
        }


class _LabelAllocator:
    """Deterministic fresh divisor labels: e1, e2, ... skipping taken
    names."""

    def __init__(self, taken=()):
        self._taken = set(taken)
        self._next = 1

    def fresh(self) -> str:
        while True:
            name = f"e{self._next}"
            self._next += 1
            if name not in self._taken:
                self._taken.add(name)
                return name

    def reserve(self, name: str) -> None:
        self._taken.add(name)


class _Run:
    """Mutable state of one algorithm run: evolving fan, recorded steps,
    step budget shared with any nested runs."""

    def __init__(self, fan: StackyFan, limits: RunLimits,
                 alloc: _LabelAllocator | None = None):
        self.initial = fan
        self.fan = fan
        self.limits = limits
        self.alloc = alloc if alloc is not None else \
            _LabelAllocator(fan.divisors)
        self.steps: list[BlowupStep] = []
        self.count = 0
        # Memos survive fan rebuilds: multiplicity and relative-interior
        # tests depend only on primitive generators, which subdivisions
        # and roots never alter on surviving rays.
        self.maximal = set(fan.maximal_cones)
        self.mult_memo: dict = {}
        self.relint_memo: dict = {}
        self.cand_memo: dict = {}
        self.star_events: list = []

    def charge(self) -> None:
        self.count += 1
        if self.count > self.limits.max_steps:
            raise StepLimitExceeded(
                f"exceeded {self.limits.max_steps} steps",
                self.sequence())

    def record(self, **kw) -> None:
        self.charge()
        snap = self.fan.to_doc() if self.limits.snapshots else None
        self.steps.append(
            BlowupStep(index=len(self.steps), snapshot=snap, **kw))

    def sequence(self) -> BlowupSequence:
        return BlowupSequence(self.initial, tuple(self.steps), self.fan)


# ----------------------------------------------------------------------
# invariants and maximal loci


def _aggregate(fan: StackyFan, cone) -> AggregateInvariant:
    cd = conormal_at(fan, cone)
    return AggregateInvariant(
        independency_index(cd), toroidal_index(cd), divisorial_type(cd))


_NAMED_INVARIANTS = {
    "independency": lambda fan, c: independency_index(conormal_at(fan, c)),
    "toroidal": lambda fan, c: toroidal_index(conormal_at(fan, c)),
    "divisorial": lambda fan, c: divisorial_index(conormal_at(fan, c)),
    "multiplicity": lambda fan, c: fan.multiplicity(c),
    "aggregate": _aggregate,
}


def max_locus(fan: StackyFan, invariant):
    """Maximum of an invariant over all cones and the minimal cones
    attaining it.

    `invariant` is a name from independency/toroidal/divisorial/
    multiplicity/aggregate or a callable (fan, cone) -> value; a return
    of None excludes the cone.  The centres must have pairwise disjoint
    orbit closures: no cone of the fan may contain two of them.
    """
    fn = _NAMED_INVARIANTS.get(invariant, invariant)
    if not callable(fn):
        raise ValueError(f"unknown invariant {invariant!r}")
    values = {}
    for c in fan.cones():
        v = fn(fan, c)
        if v is not None:
            values[c] = v
    if not values:
        return None, []
    top = max(values.values())
    attaining = [c for c, v in values.items() if v == top]
    minimal = [c for c in attaining
               if not any(o < c for o in attaining)]
    minimal.sort(key=cone_key)
    for c1, c2 in itertools.combinations(minimal, 2):
        union = c1 | c2
        if any(union <= m for m in fan.maximal_cones):
            raise NonSmoothLocus(
                f"centres {sorted(c1)} and {sorted(c2)} meet inside "
                "a cone of the fan")
    return top, minimal


def _distinguished_rays(fan: StackyFan, cone=None):
    rays = range(fan.n_rays) if cone is None else sorted(cone)
    return [i for i in rays
            if fan.labels[i] is not None
            and fan.labels[i] in fan.distinguished]


def _star_at(run: _Run, centres, label: str, *, distinguished: bool,
             psi=None) -> list[int]:
    """Star subdivide at each centre in order, all exceptional rays
    sharing one fresh label.  Returns the exceptional ray indices."""
    eps_rays = []
    for c in centres:
        centre = frozenset(c)
        fan, eps = run.fan.stacky_star_subdivision(centre)
        fan = fan.with_ray_label(eps, label, distinguished=distinguished)
        run.fan = fan
        eps_rays.append(eps)
        if len(centre) > 1:
            affected = [m for m in run.maximal if centre <= m]
            children = {(m - {r}) | {eps}
                        for m in affected for r in centre}
            run.maximal.difference_update(affected)
            run.maximal.update(children)
            run.star_events.append((centre, eps, tuple(children)))
    run.record(kind="star",
               centres=tuple(tuple(sorted(c)) for c in centres),
               exceptional=label, psi=psi)
    return eps_rays


# ----------------------------------------------------------------------
# Algorithm A: the inner loop on a formal ray sum


def _psi_pairs(psi: FormalRaySum):
    return psi.coefficients


def _cone_mult(run: _Run, cone) -> int:
    key = tuple(sorted(run.fan.rays[i].primitive for i in cone))
    v = run.mult_memo.get(key)
    if v is None:
        v = run.mult_memo[key] = run.fan.multiplicity(cone)
    return v


def _cone_has_relint(run: _Run, cone) -> bool:
    key = tuple(sorted(run.fan.rays[i].primitive for i in cone))
    v = run.relint_memo.get(key)
    if v is None:
        v = run.relint_memo[key] = bool(
            run.fan.parallelotope_points(cone, relative_interior=True))
    return v


def _resolve_ray_sum(run: _Run, psi: FormalRaySum) -> None:
    """Steps A3 to A5: root distinguished rays at their coefficients,
    then star subdivide at the support until it is a single ray.  The
    image beta(psi) is conserved across every transition."""
    conserved = psi.beta(run.fan)
    while True:
        # A3: root the distinguished rays of the support.
        support = sorted(psi.support)
        dist = [i for i in support
                if run.fan.labels[i] is not None
                and run.fan.labels[i] in run.fan.distinguished]
        weights = {i: psi.coefficient(i) for i in dist
                   if psi.coefficient(i) > 1}
        if weights:
            pairs = _psi_pairs(psi)
            run.fan = run.fan.root_construction(weights)
            coeffs = dict(psi.coefficients)
            for i in weights:
                coeffs[i] = 1
            psi = FormalRaySum.from_dict(coeffs)
            run.record(
                kind="root",
                rays=tuple(sorted(weights.items())),
                labels=tuple(sorted((run.fan.labels[i], w)
                                    for i, w in weights.items())),
                psi=pairs)
            if psi.beta(run.fan) != conserved:
                raise PostconditionError("beta(psi) changed across a root")
        if len(psi.support) <= 1:
            return
        # A4: stacky star subdivision at the cone spanned by the support.
        centre = frozenset(psi.support)
        if not any(centre <= m for m in run.maximal):
            raise PostconditionError(
                f"support {sorted(centre)} does not span a cone")
        if not _distinguished_rays(run.fan, centre):
            raise PostconditionError(
                f"inadmissible centre {sorted(centre)}: no distinguished ray")
        label = run.alloc.fresh()
        pairs = _psi_pairs(psi)
        (eps,) = _star_at(run, [centre], label, distinguished=True,
                          psi=pairs)
        # A5: transform psi across the subdivision.
        coeffs = dict(psi.coefficients)
        for i in centre:
            coeffs[i] = coeffs.get(i, 0) - 1
        coeffs[eps] = coeffs.get(eps, 0) + 1
        psi = FormalRaySum.from_dict(coeffs)
        if psi.beta(run.fan) != conserved:
            raise PostconditionError("beta(psi) changed across a star")


def resolve_ray_sum(fan: StackyFan, psi, limits: RunLimits | None = None
                    ) -> BlowupSequence:
    """Run the inner loop of the partial toric resolution on one
    seeded formal ray sum."""
    if not isinstance(psi, FormalRaySum):
        psi = FormalRaySum.from_dict(dict(psi))
    run = _Run(fan, limits or RunLimits())
    _resolve_ray_sum(run, psi)
    return run.sequence()


def _a_candidates(fan: StackyFan, cone) -> list[FormalRaySum]:
    """Minimal integer formal sums whose beta image lies on the ray
    through a nonzero lattice point of the cone's parallelotope and
    whose support meets the distinguished locus."""
    out = {}
    idx = sorted(cone)
    multiples = [fan.rays[i].stacky_multiple for i in idx]
    for point, lam in fan.parallelotope_lambdas(cone):
        if all(x == 0 for x in lam):
            continue
        fracs = [Fraction(l) / m for l, m in zip(lam, multiples)]
        t = math.lcm(*[f.denominator for f in fracs])
        coeffs = [int(f * t) for f in fracs]
        g = math.gcd(*coeffs)
        coeffs = [c // g for c in coeffs]
        psi = FormalRaySum(tuple(
            (i, c) for i, c in zip(idx, coeffs) if c))
        support = psi.support
        if not any(fan.labels[i] is not None
                   and fan.labels[i] in fan.distinguished
                   for i in support):
            continue
        out[psi.coefficients] = psi
    return list(out.values())


def _a_worklist(fan: StackyFan):
    """Cones with a distinguished ray whose parallelotope has a lattice
    point in its relative interior."""
    out = []
    for c in fan.cones():
        if not c or not _distinguished_rays(fan, c):
            continue
        if fan.parallelotope_points(c, relative_interior=True):
            out.append(c)
    return out


def _a_key(run: _Run, cone):
    return (len(cone) - len(_distinguished_rays(run.fan, cone)),
            _cone_mult(run, cone))


def _select_psi(candidates: list[FormalRaySum]) -> FormalRaySum:
    # Youngest coefficients are most significant, so the freshest
    # distinguished rays take the smallest root weights available.
    # Reversed sparse pairs compare identically to the reversed
    # coefficient vector because every coefficient is positive.
    return min(candidates, key=lambda p: p.coefficients[::-1])


def _a_candidates_memo(run: _Run, cone):
    key = tuple(sorted((i, run.fan.rays[i].primitive,
                        run.fan.rays[i].stacky_multiple) for i in cone))
    v = run.cand_memo.get(key)
    if v is None:
        v = run.cand_memo[key] = _a_candidates(run.fan, cone)
    return v


def _run_algorithm_a(run: _Run) -> None:
    worklist = {c: _a_key(run, c) for c in _a_worklist(run.fan)}
    while worklist:
        run.star_events.clear()
        top = max(worklist.values())
        s_max = [c for c, k in worklist.items() if k == top]
        candidates = []
        for c in s_max:
            candidates.extend(_a_candidates_memo(run, c))
        if not candidates:
            raise PostconditionError(
                "no admissible candidate at a nonempty worklist")
        psi = _select_psi(candidates)
        _resolve_ray_sum(run, psi)
        # Each star removes exactly the cones containing its centre and
        # every cone it adds contains its exceptional ray.
        for centre, eps, children in run.star_events:
            for f in [f for f in worklist if centre <= f]:
                del worklist[f]
            seen = set()
            for child in children:
                rest = sorted(child - {eps})
                for r in range(len(rest) + 1):
                    for sub in itertools.combinations(rest, r):
                        f = frozenset(sub) | {eps}
                        if f in seen or f in worklist:
                            continue
                        seen.add(f)
                        # A later star in the same chain may have destroyed
                        # this face already.
                        if not any(f <= m for m in run.maximal):
                            continue
                        if _distinguished_rays(run.fan, f) \
                                and _cone_has_relint(run, f):
                            worklist[f] = _a_key(run, f)
    run.star_events.clear()
    for c in run.fan.cones():
        for i in _distinguished_rays(run.fan, c):
            mc = _cone_mult(run, c)
            if len(c) > 1 and _cone_mult(run, c - {i}) != mc:
                raise PostconditionError(
                    f"distinguished ray {i} not independent in {sorted(c)}")


def algorithm_a(fan: StackyFan, limits: RunLimits | None = None
                ) -> BlowupSequence:
    """Partial toric resolution: after the run every distinguished ray
    is independent at every cone."""
    run = _Run(fan, limits or RunLimits())
    _run_algorithm_a(run)
    return run.sequence()


# ----------------------------------------------------------------------
# Algorithm B: toric destackification


def _run_algorithm_b(run: _Run) -> None:
    while True:
        worklist = []
        for c in run.fan.cones():
            if len(c) < 2:
                continue
            mc = _cone_mult(run, c)
            if all(_cone_mult(run, c - {i}) != mc for i in c):
                worklist.append(c)
        if not worklist:
            break
        centre = max(worklist, key=lambda c: (len(c), cone_key(c)))
        label = run.alloc.fresh()
        (eps,) = _star_at(run, [centre], label, distinguished=True)
        _run_algorithm_a(run)
        run.fan = run.fan.forget_distinguished()
        # Cached candidate lists were filtered by the old distinguished
        # set and are stale once it changes.
        run.cand_memo.clear()
    for c in run.fan.cones():
        if _cone_mult(run, c) != 1:
            raise PostconditionError(
                f"cone {sorted(c)} has multiplicity {_cone_mult(run, c)}")


def algorithm_b(fan: StackyFan, limits: RunLimits | None = None
                ) -> BlowupSequence:
    """Toric destackification: the output fan refines the input, has
    every ray independent at every cone and every multiplicity 1.  Any
    distinguished structure on the input is dropped; the algorithm
    creates and forgets its own per iteration."""
    run = _Run(fan.forget_distinguished(), limits or RunLimits())
    _run_algorithm_b(run)
    return run.sequence()


# ----------------------------------------------------------------------
# divisorialification


def divisorialify(fan: StackyFan, limits: RunLimits | None = None
                  ) -> BlowupSequence:
    """Blow up the maximal locus of the divisorial index until it
    vanishes; each exceptional divisor is labeled as the youngest
    divisor (not distinguished)."""
    run = _Run(fan.forget_distinguished(), limits or RunLimits())
    previous = None
    while True:
        value, centres = max_locus(run.fan, "divisorial")
        if value == 0:
            break
        if previous is not None and value >= previous:
            raise PostconditionError(
                f"divisorial index did not decrease: {previous} -> {value}")
        previous = value
        label = run.alloc.fresh()
        _star_at(run, centres, label, distinguished=False)
    return run.sequence()


def _check_divisorial(fan: StackyFan) -> None:
    for c in fan.cones():
        if divisorial_index(conormal_at(fan, c)) != 0:
            raise NotDivisorial(
                f"cone {sorted(c)} has positive divisorial index")


def _along_profile(fan: StackyFan, label: str) -> int:
    """Maximum of the divisorial index along a divisor over the cones
    meeting it."""
    best = 0
    for c in fan.cones():
        if any(fan.labels[i] == label for i in c):
            best = max(best, divisorial_index_along(
                conormal_at(fan, c), label))
    return best


def _along_tuple(fan: StackyFan, bound: int) -> tuple[int, ...]:
    """(w_N, ..., w_1): the number of distinguished components whose
    along-index maximum equals each value, largest first."""
    counts = [0] * (bound + 1)
    for label in fan.divisors:
        if label not in fan.distinguished:
            continue
        v = _along_profile(fan, label)
        if v > bound:
            raise PostconditionError(
                f"along-index {v} exceeded the initial bound {bound}")
        counts[v] += 1
    return tuple(counts[j] for j in range(bound, 0, -1))


def _run_along(run: _Run) -> None:
    _check_divisorial(run.fan)
    bound = None
    previous = None
    while True:
        target = None
        for label in run.fan.divisors:
            if label in run.fan.distinguished and \
                    _along_profile(run.fan, label) > 0:
                target = label
                break
        if target is None:
            break
        if bound is None:
            bound = max(_along_profile(run.fan, lab)
                        for lab in run.fan.distinguished)
            previous = _along_tuple(run.fan, bound)

        def along(fan, c, _lab=target):
            if not any(fan.labels[i] == _lab for i in c):
                return None
            return divisorial_index_along(conormal_at(fan, c), _lab)

        value, centres = max_locus(run.fan, along)
        for c in centres:
            dist = _distinguished_rays(run.fan, c)
            if len(dist) != 1 or run.fan.labels[dist[0]] != target:
                raise PostconditionError(
                    f"centre {sorted(c)} does not lie in exactly the "
                    f"component {target}")
        label = run.alloc.fresh()
        _star_at(run, centres, label, distinguished=True)
        current = _along_tuple(run.fan, bound)
        if not current < previous:
            raise PostconditionError(
                f"along-index tuple did not decrease: {previous} -> {current}")
        previous = current


def divisorialify_along(fan: StackyFan, limits: RunLimits | None = None
                        ) -> BlowupSequence:
    """Remove the divisorial index along every distinguished divisor,
    oldest first; exceptional divisors join the distinguished set."""
    run = _Run(fan, limits or RunLimits())
    _run_along(run)
    return run.sequence()


# ----------------------------------------------------------------------
# recipe fans and destackification


def recipe_fan(t: DivisorialType, labels):
    """Stacky fan of the single cone presenting a divisorial type.

    The canonical matrix is restricted to its nonzero block C (the
    columns that are not standard basis vectors); the fan lives in Z^k
    with beta(rho_i) the i-th column of C transposed.  Returns the fan
    and the recipe-ray to label correspondence."""
    mat = t.canonical
    positions = []
    for j in range(mat.cols):
        col = tuple(mat.entries[i][j] for i in range(mat.rows))
        unit = tuple(1 if i == j else 0 for i in range(mat.rows))
        if col != unit:
            positions.append(j)
    k = len(positions)
    if k == 0:
        raise EmptyType("all components are independent")
    labels = tuple(labels)
    if len(labels) != k:
        raise ValueError(f"need {k} labels, got {len(labels)}")
    rays = []
    for i in positions:
        rays.append(tuple(mat.entries[i][j] for j in positions))
    fan = StackyFan(
        rank=k,
        rays=tuple(rays),
        maximal_cones=(frozenset(range(k)),),
        labels=labels,
    )
    return fan, {i: labels[i] for i in range(k)}


def _replay_star(run: _Run, labels, exceptional: str) -> None:
    """Star subdivide every cone made of exactly one ray per label, all
    exceptional rays sharing the recipe's fresh label."""
    want = frozenset(labels)
    matched = []
    for c in run.fan.cones():
        if len(c) != len(want):
            continue
        got = [run.fan.labels[i] for i in c]
        if None not in got and frozenset(got) == want:
            matched.append(c)
    if not matched:
        return
    matched.sort(key=cone_key)
    run.alloc.reserve(exceptional)
    _star_at(run, matched, exceptional, distinguished=True)


def _replay_root(run: _Run, label_weights) -> None:
    weights = {}
    for label, w in label_weights:
        for i in run.fan.rays_of_label(label):
            weights[i] = w
    if not weights:
        return
    run.fan = run.fan.root_construction(weights)
    run.record(kind="root",
               rays=tuple(sorted(weights.items())),
               labels=tuple(sorted(label_weights)))


def _participating_positions(t: DivisorialType) -> list[int]:
    mat = t.canonical
    out = []
    for j in range(mat.cols):
        col = tuple(mat.entries[i][j] for i in range(mat.rows))
        unit = tuple(1 if i == j else 0 for i in range(mat.rows))
        if col != unit:
            out.append(j)
    return out


def _run_destackify(run: _Run) -> None:
    _check_divisorial(run.fan)
    run.fan = run.fan.forget_distinguished()
    previous = None
    while True:
        value, centres = max_locus(run.fan, "aggregate")
        if value.independency == 0:
            if value.toroidal != 0 or \
                    value.divisorial_type.stripped().rows != 0:
                raise PostconditionError(
                    "independency vanished but the aggregate did not")
            break
        if previous is not None and not value < previous:
            raise PostconditionError(
                f"aggregate maximum did not decrease: "
                f"{previous} -> {value}")
        previous = value

        # Blow up the locus; the exceptional divisor is distinguished.
        t = value.divisorial_type
        positions = _participating_positions(t)
        part_labels = [run.fan.divisors[p] for p in positions]
        label = run.alloc.fresh()
        _star_at(run, centres, label, distinguished=True)

        # Build the recipe, subdivide it the same way, resolve it, and
        # replay its steps through the label correspondence.
        rfan, _ = recipe_fan(t, part_labels)
        if rfan.n_rays == 1:
            # Trivial subdivision: in the chart dominated by the
            # exceptional divisor the single recipe ray tracks that
            # divisor, so it takes over the fresh label.
            rfan = replace(rfan, labels=(label,), divisors=(label,),
                           distinguished=frozenset({label}))
        else:
            rfan, reps = rfan.stacky_star_subdivision(
                frozenset(range(rfan.n_rays)))
            rfan = rfan.with_ray_label(reps, label, distinguished=True)
        recipe = _Run(rfan, run.limits, run.alloc)
        recipe.count = run.count
        _run_algorithm_a(recipe)
        run.count = recipe.count
        state = rfan
        for step in recipe.steps:
            if step.kind == "star":
                (centre,) = step.centres
                names = [state.labels[i] for i in centre]
                _replay_star(run, names, step.exceptional)
                sub, eps = state.stacky_star_subdivision(frozenset(centre))
                state = sub.with_ray_label(eps, step.exceptional,
                                           distinguished=True)
            else:
                names = [(state.labels[i], w) for i, w in step.rays]
                _replay_root(run, names)
                state = state.root_construction(dict(step.rays))

        # Clean up the divisorial index along the distinguished divisors,
        # then forget them.
        _check_divisorial(run.fan)
        _run_along(run)
        run.fan = run.fan.forget_distinguished()
    for c in run.fan.cones():
        if independency_index(conormal_at(run.fan, c)) != 0:
            raise PostconditionError(
                f"cone {sorted(c)} kept a positive independency index")


def destackify(fan: StackyFan, limits: RunLimits | None = None
               ) -> BlowupSequence:
    """Destackification of a divisorial stacky fan: after the run the
    independency index vanishes at every cone."""
    run = _Run(fan, limits or RunLimits())
    _run_destackify(run)
    return run.sequence()


# ----------------------------------------------------------------------
# component splitting and certification


def _ray_order(fan: StackyFan, ray: int, label: str) -> int:
    """Relative generic order of a label at one of its rays; constant
    over the cones containing the ray."""
    orders = set()
    for c in fan.cones():
        if ray in c:
            orders.add(relative_generic_order(conormal_at(fan, c), label))
    if len(orders) != 1:
        raise PostconditionError(
            f"relative generic order varies over the star of ray {ray}: "
            f"{sorted(orders)}")
    return orders.pop()


def split_components(fan: StackyFan, limits: RunLimits | None = None
                     ) -> tuple[BlowupSequence, StackyFan]:
    """Split every divisor label into parts of constant relative generic
    order.

    The part with the smallest order keeps the label; each further part
    gets a fresh label, recorded as one trivial blow-up whose centres
    are the rays being relabeled.  Labels without rays are retained."""
    run = _Run(fan, limits or RunLimits())
    for label in fan.divisors:
        rays = run.fan.rays_of_label(label)
        if not rays:
            continue
        by_order: dict[int, list[int]] = {}
        for r in rays:
            by_order.setdefault(_ray_order(run.fan, r, label), []).append(r)
        if len(by_order) == 1:
            continue
        for order in sorted(by_order)[1:]:
            part = sorted(by_order[order])
            fresh = run.alloc.fresh()
            labels = list(run.fan.labels)
            for r in part:
                labels[r] = fresh
            run.fan = replace(run.fan, labels=tuple(labels),
                              divisors=run.fan.divisors + (fresh,))
            run.record(kind="star",
                       centres=tuple((r,) for r in part),
                       exceptional=fresh)
    return run.sequence(), run.fan


def certify(fan: StackyFan) -> CertReport:
    """Check the destackification exit conditions: smooth coarse fan,
    constant root data per divisor consistent with the stacky multiples,
    and the orbifold gerbe condition (no relevant residual part)."""
    failures: list[str] = []

    coarse_smooth = True
    for c in fan.cones():
        m = fan.multiplicity(c)
        if m != 1:
            coarse_smooth = False
            failures.append(
                f"coarse: cone {sorted(c)} has multiplicity {m}")
    coarse_snc = coarse_smooth

    gerbe_ok = True
    for c in fan.cones():
        cd = conormal_at(fan, c)
        if toroidal_index(cd) != 0:
            gerbe_ok = False
            failures.append(
                f"gerbe: cone {sorted(c)} has a relevant residual part")

    # Local direct sums: the marked weights generate their span freely.
    for c in fan.cones():
        cd = conormal_at(fan, c)
        marked = cd.marked_weights()
        if not marked:
            continue
        span = subgroup_generated(cd.group, marked).order()
        prod = math.prod(cd.group.element_order(w) for w in marked)
        if span != prod:
            failures.append(
                f"roots: cone {sorted(c)} is not a direct sum of its "
                "divisor weights")

    root_data: dict[str, int] = {}
    for label in fan.divisors:
        rays = fan.rays_of_label(label)
        if not rays:
            continue
        orders = set()
        for c in fan.cones():
            if any(fan.labels[i] == label for i in c):
                orders.add(relative_generic_order(conormal_at(fan, c), label))
        if len(orders) != 1:
            failures.append(
                f"roots: {label} has non-constant relative generic order "
                f"{sorted(orders)}")
            continue
        d = orders.pop()
        bad = [i for i in rays if fan.rays[i].stacky_multiple != d]
        if bad:
            failures.append(
                f"roots: {label} has order {d} but rays {bad} carry "
                "different multiples")
            continue
        root_data[label] = d

    if failures:
        root_data = {}
    return CertReport(
        coarse_smooth=coarse_smooth,
        coarse_snc=coarse_snc,
        root_data=root_data,
        gerbe_ok=gerbe_ok,
        failures=tuple(failures),
    )


# ----------------------------------------------------------------------
# sequence restriction and comparison


def _require_subfan(full: StackyFan, sub: StackyFan) -> None:
    if sub.rank != full.rank or sub.rays != full.rays:
        raise NotASubfan("the subfan must share the ray list of the "
                         "initial fan")
    for c in sub.maximal_cones:
        if not full.has_cone(c):
            raise NotASubfan(f"{sorted(c)} is not a cone of the initial fan")


def restrict_steps(seq: BlowupSequence, sub: StackyFan
                   ) -> list[BlowupStep]:
    """Restrict a blow-up sequence to a subfan of its initial fan,
    pruning the steps that become empty.

    Centres survive when their translated ray set is a cone of the
    evolving restricted fan; root constructions keep the rays present
    in the restriction.  The returned steps use the restricted fan's
    ray indices."""
    _require_subfan(seq.initial, sub)
    ray_map = {i: i for i in range(seq.initial.n_rays)}
    state = sub
    full_count = seq.initial.n_rays
    out: list[BlowupStep] = []
    for step in seq.steps:
        if step.kind == "star":
            kept = []
            for centre in step.centres:
                if len(centre) >= 2:
                    full_eps = full_count
                    full_count += 1
                else:
                    full_eps = centre[0]
                translated = [ray_map.get(i) for i in centre]
                if None in translated:
                    continue
                t = frozenset(translated)
                if not state.has_cone(t):
                    continue
                state, eps = state.stacky_star_subdivision(t)
                ray_map[full_eps] = eps
                kept.append(tuple(sorted(translated)))
            if kept:
                out.append(BlowupStep(
                    index=len(out), kind="star",
                    centres=tuple(kept), exceptional=step.exceptional))
        else:
            translated = {ray_map[i]: w for i, w in step.rays
                          if i in ray_map}
            present = {i: w for i, w in translated.items()
                       if any(i in c for c in state.maximal_cones)}
            if present:
                state = state.root_construction(present)
                out.append(BlowupStep(
                    index=len(out), kind="root",
                    rays=tuple(sorted(present.items()))))
    return out


def restrict_and_compare(seq: BlowupSequence, sub: StackyFan,
                         other: BlowupSequence) -> bool:
    """True when the restriction of `seq` to the subfan equals `other`
    step by step: same kinds, same centres under the shared ray
    indexing, same root weights.  Labels are not compared."""
    restricted = restrict_steps(seq, sub)
    if len(restricted) != len(other.steps):
        return False
    for mine, theirs in zip(restricted, other.steps):
        if mine.kind != theirs.kind:
            return False
        if mine.kind == "star":
            if mine.centres != tuple(tuple(sorted(c))
                                     for c in theirs.centres):
                return False
        else:
            if mine.rays != theirs.rays:
                return False
    return True
