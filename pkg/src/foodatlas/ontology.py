"""Hierarchical ingredient ontology.

Nodes form a single-rooted is-a tree of abstract classes (dairy, meat) with
concrete ingredients (cow's milk, chicken) at the leaves. The tree answers
the distance / ancestor / similarity questions behind query expansion and
recipe similarity, so ingestion is strict: cycles, dangling parents,
duplicate ids and extra roots are all rejected with the offending ids.

The graph is immutable after :func:`load_ontology`; reads need no locking.
"""

from __future__ import annotations

import csv
import enum
import io
import warnings
from dataclasses import dataclass, field

from .errors import (
    CycleError,
    DanglingParentError,
    DuplicateNodeError,
    OntologyError,
    RootCountError,
    UnknownNodeError,
)


class NodeKind(enum.Enum):
    ABSTRACT = "abstract"
    CONCRETE = "concrete"


@dataclass(frozen=True)
class IngredientNode:
    """One ontology entry: either a class of ingredients or an actual one."""

    id: str
    name: str
    kind: NodeKind
    synonyms: frozenset[str] = frozenset()
    parents: frozenset[str] = frozenset()
    default_density: float | None = None  # g/ml, for volume -> mass


ONTOLOGY_HEADER = ["id", "name", "parent_id", "kind", "synonyms", "density"]


class OntologyGraph:
    """Validated single-rooted is-a tree with precomputed depths.

    Construct via :func:`load_ontology` or :meth:`from_nodes`; instances are
    immutable and safe for unrestricted concurrent reads.
    """

    def __init__(self, nodes: dict[str, IngredientNode], parent: dict[str, str | None]):
        self._nodes = nodes
        self._parent = parent
        self._children: dict[str, list[str]] = {nid: [] for nid in nodes}
        root = None
        for nid, pid in parent.items():
            if pid is None:
                root = nid
            else:
                self._children[pid].append(nid)
        for kids in self._children.values():
            kids.sort()
        assert root is not None
        self.root_id: str = root
        # Depths via one walk from the root; also the cycle-free certificate.
        self._depth: dict[str, int] = {root: 0}
        stack = [root]
        while stack:
            nid = stack.pop()
            for child in self._children[nid]:
                self._depth[child] = self._depth[nid] + 1
                stack.append(child)

    # -- basic access ---------------------------------------------------

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def node(self, node_id: str) -> IngredientNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown ontology node {node_id!r}") from None

    def nodes(self) -> list[IngredientNode]:
        return [self._nodes[nid] for nid in sorted(self._nodes)]

    def parent(self, node_id: str) -> str | None:
        self.node(node_id)
        return self._parent[node_id]

    def children(self, node_id: str) -> list[str]:
        self.node(node_id)
        return list(self._children[node_id])

    def depth(self, node_id: str) -> int:
        self.node(node_id)
        return self._depth[node_id]

    def ancestors(self, node_id: str) -> list[str]:
        """Ancestor chain from the node's parent up to the root."""
        self.node(node_id)
        chain = []
        cur = self._parent[node_id]
        while cur is not None:
            chain.append(cur)
            cur = self._parent[cur]
        return chain

    def is_concrete(self, node_id: str) -> bool:
        return self.node(node_id).kind is NodeKind.CONCRETE

    # -- hierarchy questions ---------------------------------------------

    def lca(self, a: str, b: str) -> str:
        """Deepest common ancestor of two nodes (a node is its own ancestor)."""
        self.node(a), self.node(b)
        seen = set()
        cur: str | None = a
        while cur is not None:
            seen.add(cur)
            cur = self._parent[cur]
        cur = b
        while cur is not None:
            if cur in seen:
                return cur
            cur = self._parent[cur]
        return self.root_id  # unreachable on a validated tree

    def path_distance(self, a: str, b: str) -> int:
        """Hop count of the shortest undirected is-a path between two nodes."""
        anc = self.lca(a, b)
        return self._depth[a] + self._depth[b] - 2 * self._depth[anc]

    def similarity(self, a: str, b: str) -> float:
        """Wu-Palmer similarity: 2*depth(lca) / (depth(a)+depth(b)), in [0, 1].

        Both-at-root is defined as 1 (identical nodes are maximally similar).
        """
        anc = self.lca(a, b)
        denom = self._depth[a] + self._depth[b]
        if denom == 0:
            return 1.0
        return 2.0 * self._depth[anc] / denom

    def descendants(self, node_id: str) -> set[str]:
        """All concrete node ids in the subtree; includes the node if concrete."""
        self.node(node_id)
        out = set()
        stack = [node_id]
        while stack:
            nid = stack.pop()
            if self._nodes[nid].kind is NodeKind.CONCRETE:
                out.add(nid)
            stack.extend(self._children[nid])
        return out

    def class_of(self, node_id: str, depth: int = 1) -> str:
        """Ancestor of the node at the given depth (the node itself if shallower)."""
        self.node(node_id)
        cur = node_id
        while self._depth[cur] > depth:
            cur = self._parent[cur]  # type: ignore[assignment]
        return cur

    def nearest_density(self, node_id: str) -> float | None:
        """Density of the node, or of its nearest ancestor that defines one."""
        cur: str | None = node_id
        self.node(node_id)
        while cur is not None:
            d = self._nodes[cur].default_density
            if d is not None:
                return d
            cur = self._parent[cur]
        return None

    def to_rows(self) -> list[dict[str, str]]:
        """Table rows in the ingestion format, sorted by id (for snapshots)."""
        rows = []
        for nid in sorted(self._nodes):
            n = self._nodes[nid]
            rows.append({
                "id": n.id,
                "name": n.name,
                "parent_id": self._parent[nid] or "",
                "kind": n.kind.value,
                "synonyms": "|".join(sorted(n.synonyms)),
                "density": "" if n.default_density is None else repr(n.default_density),
            })
        return rows


@dataclass
class _RawRow:
    id: str
    name: str
    parent_ids: list[str]
    kind: NodeKind
    synonyms: frozenset[str]
    density: float | None
    line: int = field(default=0)


def _parse_rows(text: str) -> list[_RawRow]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ONTOLOGY_HEADER:
        raise OntologyError(
            f"ontology table must have header {','.join(ONTOLOGY_HEADER)!r}"
        )
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        nid = (rec["id"] or "").strip()
        name = (rec["name"] or "").strip()
        if not nid or not name:
            raise OntologyError(f"line {lineno}: id and name are required")
        parent_field = (rec["parent_id"] or "").strip()
        parent_ids = [p.strip() for p in parent_field.split("|") if p.strip()]
        kind_text = (rec["kind"] or "").strip().lower()
        try:
            kind = NodeKind(kind_text)
        except ValueError:
            raise OntologyError(
                f"line {lineno}: kind must be 'abstract' or 'concrete', got {kind_text!r}"
            ) from None
        synonyms = frozenset(
            s.strip() for s in (rec["synonyms"] or "").split("|") if s.strip()
        )
        density_text = (rec["density"] or "").strip()
        density = None
        if density_text:
            try:
                density = float(density_text)
            except ValueError:
                raise OntologyError(f"line {lineno}: bad density {density_text!r}") from None
            if density <= 0:
                raise OntologyError(f"line {lineno}: density must be positive")
        rows.append(_RawRow(nid, name, parent_ids, kind, synonyms, density, lineno))
    return rows


def load_ontology(source: str | io.TextIOBase) -> OntologyGraph:
    """Build a validated ontology from the delimited table format.

    The table is UTF-8 CSV with header ``id,name,parent_id,kind,synonyms,density``;
    ``synonyms`` is ``|``-separated and an empty ``parent_id`` marks the root.
    A ``|``-separated parent list is tolerated: the first parent wins and the
    extras are dropped with a warning, keeping the graph a tree.

    Raises :class:`OntologyError` subclasses naming the offending ids on
    duplicate ids, dangling parents, cycles, and zero or multiple roots.
    """
    text = source if isinstance(source, str) else source.read()
    rows = _parse_rows(text)
    if not rows:
        raise RootCountError("ontology table is empty: no root node")

    by_id: dict[str, _RawRow] = {}
    for row in rows:
        if row.id in by_id:
            raise DuplicateNodeError(f"duplicate node id {row.id!r}")
        by_id[row.id] = row

    parent: dict[str, str | None] = {}
    roots = []
    for row in rows:
        if not row.parent_ids:
            roots.append(row.id)
            parent[row.id] = None
            continue
        if len(row.parent_ids) > 1:
            warnings.warn(
                f"node {row.id!r}: multiple parents {row.parent_ids!r}; "
                f"keeping {row.parent_ids[0]!r}",
                stacklevel=2,
            )
        first = row.parent_ids[0]
        if first not in by_id:
            raise DanglingParentError(f"node {row.id!r} references unknown parent {first!r}")
        parent[row.id] = first

    if len(roots) == 0:
        raise RootCountError("no root node (every row has a parent)")
    if len(roots) > 1:
        raise RootCountError(f"multiple roots: {sorted(roots)!r}")

    # Cycle check: follow parents from each node; any node that never reaches
    # the root sits on (or under) a cycle.
    state: dict[str, int] = {}  # 1 = in progress, 2 = reaches root
    for start in by_id:
        path = []
        cur: str | None = start
        while cur is not None and state.get(cur) != 2:
            if state.get(cur) == 1:
                cycle = path[path.index(cur):]
                raise CycleError(f"parent cycle involving {sorted(cycle)!r}")
            state[cur] = 1
            path.append(cur)
            cur = parent[cur]
        for nid in path:
            state[nid] = 2

    nodes: dict[str, IngredientNode] = {}
    for row in rows:
        nodes[row.id] = IngredientNode(
            id=row.id,
            name=row.name,
            kind=row.kind,
            synonyms=row.synonyms,
            parents=frozenset([] if parent[row.id] is None else [parent[row.id]]),  # type: ignore[list-item]
            default_density=row.density,
        )

    for row in rows:
        pid = parent[row.id]
        if pid is not None and by_id[pid].kind is NodeKind.CONCRETE:
            raise OntologyError(
                f"concrete node {pid!r} cannot have children (child {row.id!r})"
            )

    return OntologyGraph(nodes, parent)


def dump_ontology(graph: OntologyGraph) -> str:
    """Inverse of :func:`load_ontology` (canonical row order)."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=ONTOLOGY_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in graph.to_rows():
        writer.writerow(row)
    return buf.getvalue()
