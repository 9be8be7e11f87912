"""Fluid network topology and the node-load matrix.

A topology is described by four 0/1 matrices over nodes, links and users
plus a capacity per link:

* ``constituency`` (nodes x links): link ``l`` belongs to node ``m``.
* ``routing`` (links x links): output of link ``i`` feeds link ``j``.
* ``input`` (links x users): user ``n`` enters the network at link ``l``.

The load matrix ``xi = C diag(p)^-1 (I - R^T)^-1 A`` maps user send rates to
normalised node utilisations; a rate vector is lossless iff every entry of
``xi @ x`` is strictly below one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError

#: Utilisations at or above ``1 - BINDING_TOL`` are reported as binding.
BINDING_TOL = 1e-12

__all__ = [
    "BINDING_TOL",
    "LoadMatrix",
    "NetworkTopology",
    "StabilityReport",
    "build_topology",
    "check_stability",
    "compute_load_matrix",
    "klimov",
    "neumann_inverse",
    "reentrant",
    "single_server",
]


def _binary(name: str, values, shape: tuple[int, int]) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1 and shape[0] == 1:
        arr = arr.reshape(1, -1)
    if arr.shape != shape:
        raise ValidationError(f"{name} must have shape {shape}, got {arr.shape}", name)
    if not np.all((arr == 0) | (arr == 1)):
        raise ValidationError(f"{name} entries must be 0 or 1", name)
    return arr.astype(np.int64)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    """Validated network description. Build with :func:`build_topology`."""

    num_nodes: int
    num_links: int
    num_users: int
    constituency: np.ndarray
    capacities: np.ndarray
    routing: np.ndarray
    input: np.ndarray

    def __repr__(self) -> str:
        return (
            f"NetworkTopology(num_nodes={self.num_nodes}, num_links={self.num_links}, "
            f"num_users={self.num_users}, capacities={self.capacities.tolist()})"
        )


def build_topology(
    num_nodes: int,
    num_links: int,
    num_users: int,
    constituency,
    capacities,
    routing,
    input,
) -> NetworkTopology:
    """Validate the matrices of a network and return a :class:`NetworkTopology`.

    Raises
    ------
    ValidationError
        On dimension mismatch, non-binary entries, a link assigned to zero or
        several nodes, a user without exactly one entry link, a non-positive
        capacity, or routing that is not acyclic (``R^L != 0``) or not
        deterministic (a link feeding more than one successor).
    """
    for name, count in (("num_nodes", num_nodes), ("num_links", num_links), ("num_users", num_users)):
        if int(count) != count or count < 1:
            raise ValidationError(f"{name} must be a positive integer, got {count!r}", name)
    m, l, n = int(num_nodes), int(num_links), int(num_users)

    c = _binary("constituency", constituency, (m, l))
    r = _binary("routing", routing, (l, l))
    a = _binary("input", input, (l, n))

    p = np.asarray(capacities, dtype=float).reshape(-1)
    if p.shape != (l,):
        raise ValidationError(f"capacities must have length {l}, got {p.size}", "capacities")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise ValidationError("capacities must be finite and strictly positive", "capacities")

    per_link = c.sum(axis=0)
    if np.any(per_link != 1):
        bad = int(np.flatnonzero(per_link != 1)[0])
        raise ValidationError(f"link {bad} belongs to {per_link[bad]} nodes, expected exactly 1", "constituency")
    per_user = a.sum(axis=0)
    if np.any(per_user != 1):
        bad = int(np.flatnonzero(per_user != 1)[0])
        raise ValidationError(f"user {bad} enters at {per_user[bad]} links, expected exactly 1", "input")
    if np.any(r.sum(axis=1) > 1):
        raise ValidationError("routing must be deterministic: at most one successor per link", "routing")
    if np.any(np.linalg.matrix_power(r, l) != 0):
        raise ValidationError("routing is cyclic (R^L != 0)", "routing")

    return NetworkTopology(
        num_nodes=m,
        num_links=l,
        num_users=n,
        constituency=_frozen(c),
        capacities=_frozen(p.copy()),
        routing=_frozen(r),
        input=_frozen(a),
    )


def neumann_inverse(routing: np.ndarray) -> np.ndarray:
    """Return ``(I - R^T)^-1`` as the finite series ``sum_{k<L} (R^T)^k``.

    Only valid for nilpotent ``routing``; the series is then exact.
    """
    rt = np.asarray(routing).T
    size = rt.shape[0]
    total = np.eye(size, dtype=rt.dtype)
    term = np.eye(size, dtype=rt.dtype)
    for _ in range(1, size):
        term = term @ rt
        total = total + term
    return total


@dataclass(frozen=True, eq=False)
class LoadMatrix:
    """Node-by-user load matrix; row ``j`` of ``xi @ x`` is node ``j``'s utilisation."""

    xi: np.ndarray

    @property
    def num_rows(self) -> int:
        return self.xi.shape[0]

    @property
    def num_users(self) -> int:
        return self.xi.shape[1]

    def utilizations(self, rates) -> np.ndarray:
        x = np.asarray(rates, dtype=float)
        if x.shape != (self.num_users,):
            raise ValidationError(
                f"rates must have length {self.num_users}, got shape {x.shape}", "rates"
            )
        return self.xi @ x


def compute_load_matrix(topology: NetworkTopology) -> LoadMatrix:
    """Compute ``xi = C P^-1 (I - R^T)^-1 A`` for a validated topology."""
    visits = neumann_inverse(topology.routing) @ topology.input
    xi = topology.constituency @ (visits / topology.capacities[:, None])
    if np.any(xi.max(axis=0) <= 0):
        bad = int(np.flatnonzero(xi.max(axis=0) <= 0)[0])
        raise ValidationError(f"user {bad} loads no node", "input")
    return LoadMatrix(_frozen(np.ascontiguousarray(xi, dtype=float)))


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    utilizations: np.ndarray = field(repr=True)
    binding_rows: frozenset[int] = frozenset()


def check_stability(load_matrix: LoadMatrix | np.ndarray, rates) -> StabilityReport:
    """Evaluate the lossless condition ``xi @ rates < 1`` componentwise.

    Rows with utilisation at or above ``1 - BINDING_TOL`` are binding, and the
    rate vector is stable iff there are none.
    """
    if not isinstance(load_matrix, LoadMatrix):
        load_matrix = LoadMatrix(np.asarray(load_matrix, dtype=float))
    x = np.asarray(rates, dtype=float)
    if x.ndim != 1 or x.size != load_matrix.num_users:
        raise ValidationError(
            f"rates must have length {load_matrix.num_users}, got shape {x.shape}", "rates"
        )
    if np.any(x < 0):
        raise ValidationError("rates must be nonnegative", "rates")
    util = load_matrix.xi @ x
    binding = frozenset(int(j) for j in np.flatnonzero(util >= 1.0 - BINDING_TOL))
    return StabilityReport(stable=not binding, utilizations=util, binding_rows=binding)


# -- builtin topologies ------------------------------------------------------


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be positive, got {value!r}", name)
    return value


def _user_count(num_users: int) -> int:
    if int(num_users) != num_users or num_users < 1:
        raise ValidationError(f"number of users must be >= 1, got {num_users!r}", "users")
    return int(num_users)


def single_server(p: float, num_users: int) -> NetworkTopology:
    """One node, one link of capacity ``p``, all users entering there."""
    p = _positive("capacity", p)
    n = _user_count(num_users)
    return build_topology(1, 1, n, [[1]], [p], [[0]], np.ones((1, n)))


def klimov(capacities: Sequence[float]) -> NetworkTopology:
    """One node with a dedicated link per user sharing the node budget."""
    caps = [_positive("capacities", v) for v in capacities]
    n = len(caps)
    if n < 1:
        raise ValidationError("klimov needs at least one link", "capacities")
    return build_topology(1, n, n, np.ones((1, n)), caps, np.zeros((n, n)), np.eye(n))


def reentrant(p1: float, p2: float, p3: float, num_users: int) -> NetworkTopology:
    """Two-node re-entrant line.

    Traffic enters link 1 (node 1), passes link 2 (node 2) and returns to
    link 3 (node 1) before leaving, so node 1 carries every flow twice.
    """
    caps = [_positive("p1", p1), _positive("p2", p2), _positive("p3", p3)]
    n = _user_count(num_users)
    constituency = [[1, 0, 1], [0, 1, 0]]
    routing = [[0, 1, 0], [0, 0, 1], [0, 0, 0]]
    entry = np.zeros((3, n))
    entry[0, :] = 1
    return build_topology(2, 3, n, constituency, caps, routing, entry)
