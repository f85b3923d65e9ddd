"""Finite common dominators for a family of mm-spaces, level by level.

Every level refines a partition of each family member into blocks of
diameter below the level's eps, reads off a finite space whose atoms are the
nonempty joint blocks, and certifies how it sits between the family, the
ambient chain and the neighbouring levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from mmkit.core import (
    ConstructionFailed,
    EpsWitness,
    FinitePseudoMetric,
    MapWitness,
    MMSpace,
    PreconditionFailed,
    enforce_guard,
    pseudo_to_metric,
    push_vector,
    to_rat,
)
from mmkit.construct import joint_quotient, product
from mmkit.order import ChainCertificate, chain_compress
from mmkit.verify import lipschitz_defect, require_valid, tight_eps, verify_witness


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class Partition:
    """Blocks of atoms with representatives; ``parent_of[b]`` is the enclosing coarser block."""

    eps: Fraction
    blocks: tuple[tuple[int, ...], ...]
    reps: tuple[int, ...]
    parent_of: tuple[int, ...] | None = None

    def block_of(self) -> list[int]:
        out = [0] * sum(len(b) for b in self.blocks)
        for k, block in enumerate(self.blocks):
            for x in block:
                out[x] = k
        return out


def _check_partition(Y: MMSpace, part: Partition, parent: Partition | None) -> None:
    seen = sorted(x for b in part.blocks for x in b)
    if seen != list(range(Y.n)):
        raise ConstructionFailed("blocks do not form a disjoint cover")
    for k, block in enumerate(part.blocks):
        if part.reps[k] not in block:
            raise ConstructionFailed(f"representative of block {k} lies outside it")
        diam = max(Y.d(a, b) for a in block for b in block)
        if not diam < part.eps:
            raise ConstructionFailed(f"block {k} has diameter {diam}, not below {part.eps}")
        if parent is not None and not set(block) <= set(parent.blocks[part.parent_of[k]]):
            raise ConstructionFailed(f"block {k} is not nested in its parent")


def eps_partition(Y: MMSpace, eps, parent: Partition | None = None) -> Partition:
    """Greedy partition into blocks of diameter below ``eps``, refining ``parent``.

    Within each parent block, seed at the lowest unassigned atom and absorb
    atoms closer than ``eps`` to the seed while the diameter stays below
    ``eps``. Seeds are the representatives.
    """
    eps = to_rat(eps)
    if eps <= 0:
        raise PreconditionFailed("eps must be positive")
    if parent is not None and not eps < parent.eps:
        raise PreconditionFailed(f"eps {eps} does not refine the parent scale {parent.eps}")
    groups = parent.blocks if parent is not None else (tuple(range(Y.n)),)
    blocks, reps, parents = [], [], []
    for p, group in enumerate(groups):
        left = sorted(group)
        while left:
            seed = left[0]
            block = [seed]
            for x in left[1:]:
                if Y.d(seed, x) < eps and all(Y.d(x, b) < eps for b in block):
                    block.append(x)
            left = [x for x in left if x not in block]
            blocks.append(tuple(block))
            reps.append(seed)
            parents.append(p)
    part = Partition(eps, tuple(blocks), tuple(reps), tuple(parents) if parent is not None else None)
    _check_partition(Y, part, parent)
    return part


# ---------------------------------------------------------------------------
# configuration and ambient chain


@dataclass(frozen=True)
class PipelineConfig:
    eps_schedule: tuple[Fraction, ...]
    mode: str = "free"
    ambient: MMSpace | None = None
    ambient_witnesses: tuple[MapWitness, ...] | None = None

    def __post_init__(self):
        sched = tuple(to_rat(e) for e in self.eps_schedule)
        if not sched:
            raise PreconditionFailed("the schedule needs at least one level")
        if any(e <= 0 for e in sched) or any(b >= a for a, b in zip(sched, sched[1:])):
            raise PreconditionFailed("the schedule must be positive and strictly decreasing")
        if self.mode not in ("free", "ambient"):
            raise PreconditionFailed(f"unknown mode {self.mode!r}")
        if self.mode == "ambient" and (self.ambient is None or self.ambient_witnesses is None):
            raise PreconditionFailed("ambient mode needs the ambient space and one witness per member")
        object.__setattr__(self, "eps_schedule", sched)
        if self.ambient_witnesses is not None:
            object.__setattr__(self, "ambient_witnesses", tuple(self.ambient_witnesses))


@dataclass(frozen=True)
class AmbientChain:
    """``spaces[l]`` dominates ``spaces[l-1]`` via ``links[l-1]`` and the member ``l`` via ``onto[l]``.

    ``to_family[k]`` maps the top space onto member ``k``; ``from_ambient``
    maps the ambient space onto the top space (ambient mode only).
    """

    spaces: tuple[MMSpace, ...]
    links: tuple[MapWitness, ...]
    onto: tuple[MapWitness, ...]
    to_family: tuple[MapWitness, ...]
    from_ambient: MapWitness | None = None

    @property
    def top(self) -> MMSpace:
        return self.spaces[-1]


def _compose(*maps: Sequence[int]) -> tuple[int, ...]:
    """``_compose(f, g)`` is ``g ∘ f``: apply the maps left to right."""
    out = list(maps[0])
    for g in maps[1:]:
        out = [g[v] for v in out]
    return tuple(out)


def _assert_onto(f: Sequence[int], target: MMSpace, what: str) -> None:
    if set(f) != set(range(target.n)):
        raise ConstructionFailed(f"{what} does not hit every atom of its target")


def build_ambient_chain(family: Sequence[MMSpace], config: PipelineConfig) -> AmbientChain:
    """Increasing chain ``W_1 ≺ W_2 ≺ ...`` with ``Y_l ≺ W_l``.

    Free mode uses products; ambient mode uses joint quotients of the ambient
    space, so each ``W_l`` is itself dominated by it.
    """
    family = list(family)
    if not family:
        raise PreconditionFailed("the family is empty")
    spaces, links, onto = [], [], []
    from_ambient = None
    if config.mode == "free":
        W = family[0]
        spaces.append(W)
        onto.append(MapWitness(tuple(range(W.n))))
        for Y in family[1:]:
            W, px, py = product(W, Y)
            spaces.append(W)
            links.append(px)
            onto.append(py)
    else:
        A, fs = config.ambient, config.ambient_witnesses
        if len(fs) != len(family):
            raise PreconditionFailed("need one ambient witness per family member")
        for k, (Y, f) in enumerate(zip(family, fs)):
            if not verify_witness(A, Y, f).valid:
                raise PreconditionFailed(f"ambient witness {k} does not verify")
        projections = []
        for l in range(1, len(family) + 1):
            W, induced, proj = joint_quotient(A, family[:l], fs[:l])
            if projections:
                prev = projections[-1]
                link: list[int | None] = [None] * W.n
                for a, k in enumerate(proj.f):
                    if link[k] is None:
                        link[k] = prev.f[a]
                    elif link[k] != prev.f[a]:
                        raise ConstructionFailed("consecutive quotients are not nested")
                lw = MapWitness(tuple(link))
                require_valid(verify_witness(W, spaces[-1], lw), "chain link")
                links.append(lw)
            spaces.append(W)
            onto.append(induced[-1])
            projections.append(proj)
        from_ambient = projections[-1]

    for l, (W, g) in enumerate(zip(spaces, onto)):
        require_valid(verify_witness(W, family[l], g), "chain member map")
        _assert_onto(g.f, family[l], "member map")
    for l, link in enumerate(links):
        _assert_onto(link.f, spaces[l], "chain link")
    to_family = []
    for k in range(len(family)):
        f = _compose(*[links[l].f for l in range(len(links) - 1, k - 1, -1)], onto[k].f)
        w = MapWitness(f)
        require_valid(verify_witness(spaces[-1], family[k], w), "top-to-member map")
        to_family.append(w)
    return AmbientChain(tuple(spaces), tuple(links), tuple(onto), tuple(to_family), from_ambient)


# ---------------------------------------------------------------------------
# one level


@dataclass(frozen=True)
class DominatorLevel:
    """``atoms[k]`` is the block-index tuple of quotient class ``k``.

    ``members[j]`` certifies ``Y_j ≺_eps X``; ``to_level`` certifies
    ``X ≺_{2 eps}`` the top chain space; ``from_ambient`` certifies
    ``X ≺_{2 eps}`` the ambient space when there is one.
    """

    eps: Fraction
    space: MMSpace
    atoms: tuple[tuple[int, ...], ...]
    members: tuple[EpsWitness, ...]
    to_level: EpsWitness
    from_ambient: EpsWitness | None
    top_map: tuple[int, ...]
    tight: dict = field(default_factory=dict, compare=False)


def common_dominator_step(
    family: Sequence[MMSpace],
    partitions: Sequence[Partition],
    chain: AmbientChain,
    eps,
    ambient: MMSpace | None = None,
    limit: int | None = None,
) -> DominatorLevel:
    """Build the level space from the joint blocks of the top chain space."""
    eps = to_rat(eps)
    top = chain.top
    block_maps = [p.block_of() for p in partitions]
    phi = [
        tuple(block_maps[k][chain.to_family[k].f[w]] for k in range(len(family))) for w in range(top.n)
    ]
    atoms = sorted(set(phi))
    enforce_guard("DOMINATOR_ATOMS", len(atoms), limit)
    index = {a: i for i, a in enumerate(atoms)}
    reps = [[partitions[k].reps[a[k]] for k in range(len(family))] for a in atoms]
    pseudo = FinitePseudoMetric(
        tuple("[" + ",".join(str(b) for b in a) + "]" for a in atoms),
        tuple(
            tuple(max(Y.d(r[k], s[k]) for k, Y in enumerate(family)) for s in reps)
            for r in reps
        ),
    )
    atom_mass = push_vector(top.mass, [index[a] for a in phi], len(atoms))
    X, proj = pseudo_to_metric(pseudo, atom_mass)
    classes: list[tuple[int, ...] | None] = [None] * X.n
    for i, k in enumerate(proj.f):
        if classes[k] is None:
            classes[k] = atoms[i]
    tight = {}

    members = []
    for k, Y in enumerate(family):
        psi = tuple(partitions[k].reps[c[k]] for c in classes)
        w = EpsWitness(psi, tuple(range(X.n)), eps)
        require_valid(verify_witness(X, Y, w), f"member {k} witness")
        if lipschitz_defect(X, Y, psi) != 0:
            raise ConstructionFailed("member map is not 1-Lipschitz")
        tight[f"member{k}"] = tight_eps(X, Y, psi, range(X.n))
        members.append(w)

    top_map = tuple(proj.f[index[a]] for a in phi)
    to_level = EpsWitness(top_map, tuple(range(top.n)), 2 * eps)
    require_valid(verify_witness(top, X, to_level), "level-to-chain witness")
    tight["to_level"] = tight_eps(top, X, top_map, range(top.n))

    from_ambient = None
    if ambient is not None and chain.from_ambient is not None:
        amb = _compose(chain.from_ambient.f, top_map)
        from_ambient = EpsWitness(amb, tuple(range(ambient.n)), 2 * eps)
        require_valid(verify_witness(ambient, X, from_ambient), "level-to-ambient witness")
        tight["from_ambient"] = tight_eps(ambient, X, amb, range(ambient.n))
    return DominatorLevel(eps, X, tuple(classes), tuple(members), to_level, from_ambient, top_map, tight)


# ---------------------------------------------------------------------------
# the whole schedule


@dataclass(frozen=True)
class PipelineCertificate:
    """``steps[n]`` maps level ``n+1`` onto level ``n`` and certifies ``X_n ≺_{2 eps_n} X_{n+1}``."""

    family: tuple[MMSpace, ...]
    config: PipelineConfig
    chain: AmbientChain
    partitions: tuple[tuple[Partition, ...], ...]
    levels: tuple[DominatorLevel, ...]
    steps: tuple[EpsWitness, ...]
    compressed: ChainCertificate
    cauchy_bound: Fraction


def common_dominator(family: Sequence[MMSpace], config: PipelineConfig) -> PipelineCertificate:
    family = tuple(family)
    chain = build_ambient_chain(family, config)
    ambient = config.ambient if config.mode == "ambient" else None
    partitions = []
    levels = []
    parents = [None] * len(family)
    for eps in config.eps_schedule:
        parts = tuple(eps_partition(Y, eps, parents[k]) for k, Y in enumerate(family))
        partitions.append(parts)
        parents = list(parts)
        levels.append(common_dominator_step(family, parts, chain, eps, ambient))

    steps = []
    for n in range(len(levels) - 1):
        coarse, fine = levels[n], levels[n + 1]
        down: list[int | None] = [None] * fine.space.n
        for w in range(chain.top.n):
            a, b = fine.top_map[w], coarse.top_map[w]
            if down[a] is None:
                down[a] = b
            elif down[a] != b:
                raise ConstructionFailed("level refinement is not a function")
        step = EpsWitness(tuple(down), tuple(range(fine.space.n)), 2 * coarse.eps)
        require_valid(verify_witness(fine.space, coarse.space, step), "refinement step")
        if push_vector(fine.space.mass, step.f, coarse.space.n) != list(coarse.space.mass):
            raise ConstructionFailed("refinement step is not measure preserving")
        if not lipschitz_defect(fine.space, coarse.space, step.f) < 2 * coarse.eps:
            raise ConstructionFailed("refinement step distorts by 2 eps or more")
        steps.append(step)
    compressed = chain_compress([lv.space for lv in levels], steps)
    return PipelineCertificate(
        family,
        config,
        chain,
        tuple(partitions),
        tuple(levels),
        tuple(steps),
        compressed,
        compressed.bound,
    )
