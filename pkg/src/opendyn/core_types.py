"""Typed finite sets of ports and the pullback action on port vectors.

A typed finite set is an ordered list of named ports, each carrying a
Euclidean dimension.  Vectors over a typed finite set use the canonical
layout: ports in declaration order, each one a contiguous slice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class PortType:
    """The Euclidean space R^dim carried by a port."""

    dim: int

    def __post_init__(self):
        if isinstance(self.dim, bool) or not isinstance(self.dim, (int, np.integer)):
            raise TypeError(f"port dimension must be an integer, got {self.dim!r}")
        if self.dim < 0:
            raise ValueError(f"port dimension must be >= 0, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))


def _as_port_type(t) -> PortType:
    return t if isinstance(t, PortType) else PortType(t)


@dataclass(frozen=True)
class TypedFiniteSet:
    """Ordered, uniquely named ports with dimensions.

    >>> s = TypedFiniteSet.of(p=3, q=2)
    >>> s.total_dim, s.slice_of("q")
    (5, slice(3, 5, None))
    """

    ports: tuple[tuple[str, PortType], ...] = ()
    _index: dict = field(init=False, repr=False, compare=False, hash=False)
    _offsets: tuple = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        ports = tuple((str(name), _as_port_type(t)) for name, t in self.ports)
        object.__setattr__(self, "ports", ports)
        index = {}
        offsets = [0]
        for i, (name, t) in enumerate(ports):
            if name in index:
                raise ValueError(f"duplicate port name {name!r}")
            index[name] = i
            offsets.append(offsets[-1] + t.dim)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_offsets", tuple(offsets))

    @classmethod
    def of(cls, *pairs: tuple[str, int], **dims: int) -> "TypedFiniteSet":
        """Build from ``(name, dim)`` pairs and/or keyword dims, in order."""
        return cls(tuple(pairs) + tuple(dims.items()))

    @classmethod
    def scalars(cls, names: Iterable[str] | str) -> "TypedFiniteSet":
        if isinstance(names, str):
            names = [names]
        return cls(tuple((n, 1) for n in names))

    def __len__(self) -> int:
        return len(self.ports)

    def __iter__(self) -> Iterator[str]:
        return (name for name, _ in self.ports)

    def __contains__(self, name) -> bool:
        return name in self._index

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.ports)

    @property
    def total_dim(self) -> int:
        return self._offsets[-1]

    def dim_of(self, name: str) -> int:
        return self.ports[self._index[name]][1].dim

    def offset_of(self, name: str) -> int:
        return self._offsets[self._index[name]]

    def slice_of(self, name: str) -> slice:
        i = self._index[name]
        return slice(self._offsets[i], self._offsets[i + 1])

    def component_labels(self) -> list[str]:
        """One label per vector coordinate: ``name`` for scalars, ``name[i]`` otherwise."""
        labels = []
        for name, t in self.ports:
            if t.dim == 1:
                labels.append(name)
            else:
                labels.extend(f"{name}[{i}]" for i in range(t.dim))
        return labels

    def rename(self, mapping: Mapping[str, str]) -> "TypedFiniteSet":
        return TypedFiniteSet(tuple((mapping.get(n, n), t) for n, t in self.ports))


def total_dim(s: TypedFiniteSet) -> int:
    return s.total_dim


def coproduct(
    sets: Sequence[TypedFiniteSet], tags: Sequence[str]
) -> tuple[TypedFiniteSet, list[dict[str, str]]]:
    """Disjoint union of several typed finite sets.

    Names occurring in more than one summand are qualified as
    ``"<tag>.<name>"``; all other names are kept.  Returns the union and,
    per summand, the map from its original names to names in the union.
    """
    if len(sets) != len(tags):
        raise ValueError("need exactly one tag per summand")
    if len(set(tags)) != len(tags):
        raise ValueError(f"tags must be distinct, got {list(tags)}")
    counts: dict[str, int] = {}
    for s in sets:
        for name in s:
            counts[name] = counts.get(name, 0) + 1
    return _union_with_collisions(sets, tags, {n for n, c in counts.items() if c > 1})


def _union_with_collisions(sets, tags, colliding):
    taken = {n for s in sets for n in s if n not in colliding}
    ports = []
    maps = []
    for s, tag in zip(sets, tags):
        m = {}
        for name, t in s.ports:
            new = name
            if name in colliding:
                new = f"{tag}.{name}"
                while new in taken:
                    new = f"{tag}.{new}"
            taken.add(new)
            m[name] = new
            ports.append((new, t))
        maps.append(m)
    return TypedFiniteSet(tuple(ports)), maps


def disjoint_union(
    s1: TypedFiniteSet, s2: TypedFiniteSet, tags: tuple[str, str] = ("L", "R")
) -> TypedFiniteSet:
    return coproduct([s1, s2], tags)[0]


class TypedFunction:
    """A dimension-preserving map from the ports of one typed set to another."""

    def __init__(self, domain: TypedFiniteSet, codomain: TypedFiniteSet, mapping: Mapping[str, str]):
        self.domain = domain
        self.codomain = codomain
        self.mapping = dict(mapping)
        missing = [a for a in domain if a not in self.mapping]
        if missing:
            raise ValueError(f"map is not total, unmapped ports: {missing}")
        extra = [a for a in self.mapping if a not in domain]
        if extra:
            raise ValueError(f"map has ports outside its domain: {extra}")
        for a, b in self.mapping.items():
            if b not in codomain:
                raise ValueError(f"{a!r} maps to unknown port {b!r}")
            if domain.dim_of(a) != codomain.dim_of(b):
                raise TypeError(
                    f"type mismatch: {a!r} has dim {domain.dim_of(a)}, "
                    f"{b!r} has dim {codomain.dim_of(b)}"
                )

    def __call__(self, name: str) -> str:
        return self.mapping[name]

    def __eq__(self, other):
        if not isinstance(other, TypedFunction):
            return NotImplemented
        return (self.domain, self.codomain, self.mapping) == (other.domain, other.codomain, other.mapping)

    def __repr__(self):
        return f"{type(self).__name__}({self.mapping!r})"

    def then(self, other: "TypedFunction") -> "TypedFunction":
        """``other ∘ self``."""
        if self.codomain != other.domain:
            raise ValueError("functions are not composable")
        mapping = {a: other.mapping[b] for a, b in self.mapping.items()}
        cls = TypedBijection if isinstance(self, TypedBijection) and isinstance(other, TypedBijection) else TypedFunction
        return cls(self.domain, other.codomain, mapping)

    @classmethod
    def identity(cls, s: TypedFiniteSet) -> "TypedBijection":
        return TypedBijection(s, s, {a: a for a in s})


class TypedBijection(TypedFunction):
    def __init__(self, domain, codomain, mapping):
        super().__init__(domain, codomain, mapping)
        image = set(self.mapping.values())
        if len(image) != len(self.mapping):
            raise ValueError("map is not injective")
        if image != set(codomain):
            raise ValueError(f"map is not surjective, missed: {sorted(set(codomain) - image)}")

    def inverse(self) -> "TypedBijection":
        return TypedBijection(self.codomain, self.domain, {b: a for a, b in self.mapping.items()})


def pullback(q: TypedFunction, v) -> np.ndarray:
    """Pull a codomain vector back along ``q``: the slice at port ``a`` is ``v`` at ``q(a)``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (q.codomain.total_dim,):
        raise ValueError(f"expected vector of length {q.codomain.total_dim}, got shape {v.shape}")
    return v[pullback_index(q)]


def pullback_index(q: TypedFunction) -> np.ndarray:
    """Gather indices realizing :func:`pullback` as ``v[index]``."""
    idx = []
    for a in q.domain:
        off = q.codomain.offset_of(q.mapping[a])
        idx.extend(range(off, off + q.domain.dim_of(a)))
    return np.asarray(idx, dtype=np.intp)
