"""Graph datasets, seeded node splits and transductive/inductive masking.

Edge files hold one undirected edge ``i j`` per line; label files hold
``node_id class_id`` per line.  Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

TRANSDUCTIVE = "transductive"
INDUCTIVE = "inductive"
MODES = (TRANSDUCTIVE, INDUCTIVE)

# Label order of the Planetoid release of Cora, so class ids line up with the
# commonly used version of the dataset.
CORA_CLASS_ORDER = (
    "Theory",
    "Reinforcement_Learning",
    "Genetic_Algorithms",
    "Neural_Networks",
    "Probabilistic_Methods",
    "Case_Based",
    "Rule_Learning",
)

# name -> (train_size, val_size); everything else uses 20 x num_classes.
PLANETOID_SIZES = {
    "cora": (140, 500),
    "citeseer": (120, 500),
    "pubmed": (60, 500),
}


class DatasetFormatError(ValueError):
    """A dataset file contains a row that cannot be parsed."""

    def __init__(self, path, lineno, line, reason):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {reason}: {line.rstrip()!r}")


class DatasetValidationError(ValueError):
    """Parsed dataset violates a structural invariant."""


@dataclass(frozen=True)
class GraphDataset:
    """Undirected, unweighted graph with one class label per node.

    ``edges`` is an ``(E, 2)`` int array with ``edges[:, 0] < edges[:, 1]``,
    sorted lexicographically and free of duplicates.
    """

    num_nodes: int
    edges: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = ""

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "labels", labels)
        _validate(self)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency as CSR with sorted indices."""
        return _adjacency(self.edges, self.num_nodes)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes)
        np.add.at(deg, self.edges.ravel(), 1.0)
        return deg


def _validate(ds: GraphDataset):
    n = ds.num_nodes
    if n < 1:
        raise DatasetValidationError("graph must have at least one node")
    if ds.labels.shape != (n,):
        raise DatasetValidationError(
            f"expected {n} labels, got shape {ds.labels.shape}")
    if ds.labels.min() < 0 or ds.labels.max() >= ds.num_classes:
        raise DatasetValidationError(
            f"labels must lie in [0, {ds.num_classes})")
    e = ds.edges
    if len(e):
        if e.min() < 0 or e.max() >= n:
            bad = e[(e < 0).any(1) | (e >= n).any(1)][0]
            raise DatasetValidationError(
                f"edge ({bad[0]}, {bad[1]}) has an endpoint outside [0, {n})")
        if np.any(e[:, 0] >= e[:, 1]):
            raise DatasetValidationError("edges must be stored with i < j (no self-loops)")
        if len(np.unique(e[:, 0] * n + e[:, 1])) != len(e):
            raise DatasetValidationError("duplicate undirected edge")


def _adjacency(edges: np.ndarray, n: int) -> sp.csr_matrix:
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    adj.sort_indices()
    return adj


def canonical_edges(pairs, num_nodes: int | None = None) -> np.ndarray:
    """Collapse an arbitrary pair list into sorted unique ``i < j`` edges.

    Self-loops are dropped with a warning.
    """
    e = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    loops = e[:, 0] == e[:, 1]
    if loops.any():
        logger.warning("dropping %d self-loop(s)", int(loops.sum()))
        e = e[~loops]
    e = np.sort(e, axis=1)
    if len(e) == 0:
        return e
    key_base = int(e.max()) + 1 if num_nodes is None else max(num_nodes, int(e.max()) + 1)
    keys = np.unique(e[:, 0] * key_base + e[:, 1])
    return np.stack([keys // key_base, keys % key_base], axis=1)


def _read_int_pairs(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 2:
                raise DatasetFormatError(path, lineno, line, "expected two integers")
            try:
                rows.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise DatasetFormatError(path, lineno, line, "not an integer") from None
    return rows


def load_dataset(edge_path, label_path, name: str | None = None) -> GraphDataset:
    """Read an edge file and a label file into a validated `GraphDataset`.

    Node ids must be ``0..N-1`` and every node needs exactly one label.
    Duplicate and reversed edges are merged.

    Raises:
        DatasetFormatError: a row is malformed (message carries the line number).
        DatasetValidationError: ids out of range, missing or repeated labels.
    """
    label_rows = _read_int_pairs(label_path)
    if not label_rows:
        raise DatasetValidationError(f"{label_path}: no labels")
    ids = np.array([r[0] for r in label_rows])
    classes = np.array([r[1] for r in label_rows])
    num_nodes = len(label_rows)
    if ids.min() < 0 or ids.max() >= num_nodes or len(np.unique(ids)) != num_nodes:
        raise DatasetValidationError(
            f"{label_path}: node ids must be exactly 0..{num_nodes - 1}, one label each")
    if classes.min() < 0:
        raise DatasetValidationError(f"{label_path}: negative class id")
    labels = np.empty(num_nodes, dtype=np.int64)
    labels[ids] = classes

    pairs = _read_int_pairs(edge_path)
    if pairs:
        arr = np.array(pairs, dtype=np.int64)
        bad = (arr < 0).any(1) | (arr >= num_nodes).any(1)
        if bad.any():
            i, j = arr[bad][0]
            raise DatasetValidationError(
                f"edge ({i}, {j}) has an endpoint outside [0, {num_nodes})")
    edges = canonical_edges(pairs, num_nodes)
    if name is None:
        name = Path(edge_path).parent.name
    return GraphDataset(num_nodes, edges, labels, int(labels.max()) + 1, name=name)


def load_dataset_dir(path) -> GraphDataset:
    """Load ``edges.txt`` and ``labels.txt`` from a dataset directory."""
    path = Path(path)
    return load_dataset(path / "edges.txt", path / "labels.txt", name=path.name)


def save_dataset(ds: GraphDataset, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.txt", "w", encoding="utf-8") as fh:
        fh.write(f"# {ds.name}: {ds.num_nodes} nodes, {ds.num_edges} undirected edges\n")
        for i, j in ds.edges:
            fh.write(f"{i} {j}\n")
    with open(out / "labels.txt", "w", encoding="utf-8") as fh:
        fh.write(f"# {ds.name}: node_id class_id, {ds.num_classes} classes\n")
        for i, c in enumerate(ds.labels):
            fh.write(f"{i} {c}\n")
    return out


def convert_linqs(content_path, cites_path, class_order=None, name="") -> GraphDataset:
    """Convert a LINQS-style ``.content``/``.cites`` pair (e.g. Cora).

    Nodes are numbered in ``.content`` order.  Classes follow ``class_order``
    when given, otherwise sorted label names.  Citation direction is
    discarded and citations to unknown papers are skipped.
    """
    index, names = {}, []
    with open(content_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            index[parts[0]] = len(index)
            names.append(parts[-1])
    order = list(class_order) if class_order is not None else sorted(set(names))
    unknown = set(names) - set(order)
    if unknown:
        raise DatasetValidationError(f"labels missing from class order: {sorted(unknown)}")
    labels = np.array([order.index(c) for c in names])
    pairs, skipped = [], 0
    with open(cites_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) != 2:
                continue
            a, b = parts
            if a in index and b in index:
                pairs.append((index[a], index[b]))
            else:
                skipped += 1
    if skipped:
        logger.warning("skipped %d citation(s) to papers without content", skipped)
    n = len(index)
    return GraphDataset(n, canonical_edges(pairs, n), labels, len(order), name=name)


# --------------------------------------------------------------------------
# splits


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint train/val/test/other node sets (each sorted ascending)."""

    seed: int
    train_ids: np.ndarray
    val_ids: np.ndarray
    test_ids: np.ndarray
    other_ids: np.ndarray
    mode: str = TRANSDUCTIVE
    p_test: float = 0.01

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("train_ids", "val_ids", "test_ids", "other_ids"):
            object.__setattr__(self, name, np.sort(np.asarray(getattr(self, name), dtype=np.int64)))

    @property
    def num_nodes(self) -> int:
        return sum(len(getattr(self, k)) for k in ("train_ids", "val_ids", "test_ids", "other_ids"))

    def with_mode(self, mode: str) -> "SplitSpec":
        return SplitSpec(self.seed, self.train_ids, self.val_ids, self.test_ids,
                         self.other_ids, mode=mode, p_test=self.p_test)

    def dumps(self) -> str:
        """Key-value text form; `parse_split` reads it back."""
        lines = [
            f"seed = {self.seed}",
            f"mode = {self.mode}",
            f"p_test = {self.p_test!r}",
        ]
        for key in ("train_ids", "val_ids", "test_ids", "other_ids"):
            lines.append(f"{key} = " + " ".join(str(i) for i in getattr(self, key)))
        return "\n".join(lines) + "\n"


def parse_split(text: str) -> SplitSpec:
    values = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    ids = {k: np.array(values.get(k, "").split(), dtype=np.int64)
           for k in ("train_ids", "val_ids", "test_ids", "other_ids")}
    return SplitSpec(int(values["seed"]), mode=values["mode"],
                     p_test=float(values["p_test"]), **ids)


def split_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox generator; the only RNG used for splits."""
    return np.random.Generator(np.random.Philox(seed))


def default_split_sizes(ds: GraphDataset) -> tuple[int, int]:
    key = ds.name.lower()
    if key in PLANETOID_SIZES:
        return PLANETOID_SIZES[key]
    return 20 * ds.num_classes, 20 * ds.num_classes


def make_split(ds: GraphDataset, seed: int, p_test: float, train_size: int | None = None,
               val_size: int | None = None, mode: str = TRANSDUCTIVE) -> SplitSpec:
    """Seeded uniform split: one permutation, cut into test, train, val, other.

    ``|test| = round(p_test * N)``; missing sizes fall back to
    `default_split_sizes`.
    """
    if not 0 < p_test <= 0.5:
        raise ValueError(f"p_test must lie in (0, 0.5], got {p_test}")
    d_train, d_val = default_split_sizes(ds)
    train_size = d_train if train_size is None else int(train_size)
    val_size = d_val if val_size is None else int(val_size)
    N = ds.num_nodes
    n_test = int(round(p_test * N))
    if train_size < 1 or val_size < 0 or n_test + train_size + val_size > N:
        raise ValueError(
            f"split sizes test={n_test}, train={train_size}, val={val_size} exceed N={N}")
    perm = split_rng(seed).permutation(N)
    cuts = np.cumsum([n_test, train_size, val_size])
    test, train, val, other = np.split(perm, cuts)
    return SplitSpec(seed, train, val, test, other, mode=mode, p_test=p_test)


# --------------------------------------------------------------------------
# visibility


@dataclass(frozen=True)
class VisibleGraph:
    """Graph restricted to the nodes a learner may see at train time.

    ``visible_ids[:n]`` are the labeled (train) nodes, the remaining ``m``
    entries the unlabeled-visible ones.  ``adjacency`` is indexed by position
    in ``visible_ids``.
    """

    visible_ids: np.ndarray
    n: int
    adjacency: sp.csr_matrix
    degree: np.ndarray
    mode: str
    position: dict = field(repr=False, compare=False, default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.visible_ids) - self.n

    @property
    def size(self) -> int:
        return len(self.visible_ids)

    def index_of(self, node_ids) -> np.ndarray:
        """Visible positions of ``node_ids``; raises KeyError when hidden."""
        return np.array([self.position[int(i)] for i in np.atleast_1d(node_ids)], dtype=np.int64)


def mask_visible(ds: GraphDataset, split: SplitSpec, hide_val: bool | None = None) -> VisibleGraph:
    """Build the train-time view of ``ds`` under ``split.mode``.

    Transductive: every node visible, degrees over all edges.  Inductive:
    test nodes and their edges disappear; by default the validation nodes
    are hidden the same way so val accuracy mimics test accuracy
    (``hide_val=False`` keeps them as unlabeled-visible nodes).
    """
    if hide_val is None:
        hide_val = split.mode == INDUCTIVE
    hidden = [split.test_ids] if split.mode == INDUCTIVE else []
    if hide_val and split.mode == INDUCTIVE:
        hidden.append(split.val_ids)
    hidden_set = np.zeros(ds.num_nodes, dtype=bool)
    for h in hidden:
        hidden_set[h] = True
    unlabeled = np.setdiff1d(np.arange(ds.num_nodes), split.train_ids)
    unlabeled = unlabeled[~hidden_set[unlabeled]]
    visible = np.concatenate([split.train_ids, unlabeled])
    adj = ds.adjacency()[visible][:, visible].tocsr()
    adj.sort_indices()
    degree = np.asarray(adj.sum(axis=1)).ravel()
    position = {int(v): i for i, v in enumerate(visible)}
    return VisibleGraph(visible, len(split.train_ids), adj, degree, split.mode, position)
