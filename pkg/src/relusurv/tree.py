"""Tree structure induced by hard activation patterns.

A subject's binary pattern row (layer by layer) is a root-to-leaf path in an
oblique survival tree: the node at layer l is identified by the pattern
prefix over layers 1..l-1, and its split is the layer-l hyperplane. This
module assembles pattern matrices, tracks their exact rank over the reals,
rebuilds the tree, runs the per-node log-rank merge test, maintains the
prune mask, and exports DOT/JSON renderings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .network import ReluNetwork
from .stats import LogRankResult, kaplan_meier, log_rank_test


def build_pattern_matrix(trace) -> np.ndarray:
    """Binary N x P matrix of post-mask patterns from hard forward traces."""
    traces = trace if isinstance(trace, (list, tuple)) else [trace]
    if not traces:
        raise ValueError("no traces given")
    rows = []
    for t in traces:
        if t.mode != "hard":
            raise ValueError("pattern matrices require hard-mode traces")
        rows.append(t.head_in)
    out = np.vstack(rows)
    return out.astype(np.int64)


def _bareiss_rank(m: list) -> int:
    """Rank of an integer matrix by fraction-free elimination (exact)."""
    rows = [list(map(int, r)) for r in m]
    n = len(rows)
    if n == 0:
        return 0
    w = len(rows[0])
    rank = 0
    prev = 1
    r = 0
    for c in range(w):
        piv = next((i for i in range(r, n) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pivot = rows[r][c]
        for i in range(r + 1, n):
            fi = rows[i]
            factor = fi[c]
            fr = rows[r]
            for j in range(c, w):
                fi[j] = (pivot * fi[j] - factor * fr[j]) // prev
        prev = pivot
        r += 1
        rank += 1
        if r == n:
            break
    return rank


def matrix_rank(pattern_matrix) -> int:
    """Exact rank of a binary matrix over the reals; no float tolerance.

    Duplicate rows are collapsed first. Tall matrices are reduced through
    the Gram matrix (same rank over the reals, and only P x P integers).
    """
    o = np.asarray(pattern_matrix)
    if o.ndim != 2 or o.size == 0:
        raise ValueError("pattern matrix must be a non-empty 2-d array")
    u = np.unique(o.astype(np.int64), axis=0)
    if u.shape[0] <= u.shape[1]:
        return _bareiss_rank(u.tolist())
    gram = u.T @ u
    return _bareiss_rank(gram.tolist())


@dataclass
class RankTrace:
    """Per-epoch exact rank of the training pattern matrix."""

    epochs: list = field(default_factory=list)
    ranks: list = field(default_factory=list)
    ratios: list = field(default_factory=list)

    def add(self, epoch, rank, n_rows, n_cols):
        ratio = rank / min(n_rows, n_cols)
        self.epochs.append(int(epoch))
        self.ranks.append(int(rank))
        self.ratios.append(float(ratio))

    def __len__(self):
        return len(self.ranks)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("epoch,rank,rank_ratio\n")
            for e, r, q in zip(self.epochs, self.ranks, self.ratios):
                fh.write("%d,%d,%r\n" % (e, r, q))


def rank_trigger(trace, patience) -> bool:
    """True when the last patience+1 recorded ranks are all equal."""
    if patience < 1:
        raise ValueError("patience must be >= 1")
    ranks = trace.ranks if isinstance(trace, RankTrace) else list(trace)
    if len(ranks) < patience + 1:
        return False
    tail = ranks[-(patience + 1) :]
    return all(r == tail[0] for r in tail)


class PruneMask:
    """Set of pruned pattern prefixes (flattened, prefix-closed).

    A row whose leading coordinates equal a pruned prefix gets everything
    from the prefix end onward forced to 0 (subtree collapse), or only the
    coordinates of the pruned node's own layer when subtree=False. Prefix
    closure guarantees at most one prefix matches any row.
    """

    def __init__(self, widths, prefixes=(), subtree=True):
        self.widths = [int(m) for m in widths]
        self.subtree = bool(subtree)
        self._offsets = set(np.cumsum([0] + self.widths[:-1]).tolist())
        self.prefixes = set()
        for p in prefixes:
            self.add(tuple(int(v) for v in p))

    @property
    def total_width(self):
        return sum(self.widths)

    def copy(self):
        m = PruneMask(self.widths, subtree=self.subtree)
        m.prefixes = set(self.prefixes)
        return m

    def __eq__(self, other):
        return isinstance(other, PruneMask) and self.prefixes == other.prefixes

    def __len__(self):
        return len(self.prefixes)

    def _layer_width_at(self, offset):
        cum = 0
        for m in self.widths:
            if cum == offset:
                return m
            cum += m
        raise ValueError("offset %d is not a layer boundary" % offset)

    def add(self, prefix) -> bool:
        """Insert a prefix, keeping the set prefix-closed; True if it changed."""
        prefix = tuple(int(v) for v in prefix)
        if any(v not in (0, 1) for v in prefix):
            raise ValueError("prefixes are binary")
        if len(prefix) >= self.total_width or len(prefix) not in self._offsets:
            raise ValueError("prefix length %d does not end on a layer boundary"
                             % len(prefix))
        for p in self.prefixes:
            if len(p) <= len(prefix) and prefix[: len(p)] == p:
                return False  # an ancestor already covers it
        self.prefixes = {p for p in self.prefixes
                         if p[: len(prefix)] != prefix}
        self.prefixes.add(prefix)
        return True

    def apply_rows(self, rows):
        """Masked copy of pattern rows; pure function of (rows, mask)."""
        out = np.array(rows, copy=True)
        for p in self.prefixes:
            plen = len(p)
            hit = np.all(out[:, :plen] == np.asarray(p, dtype=out.dtype), axis=1) \
                if plen else np.ones(out.shape[0], dtype=bool)
            if not hit.any():
                continue
            if self.subtree:
                out[hit, plen:] = 0
            else:
                out[hit, plen : plen + self._layer_width_at(plen)] = 0
        return out

    def to_list(self):
        return [list(p) for p in sorted(self.prefixes)]


@dataclass
class LeafSummary:
    risk: float
    km_median: float
    n: int


@dataclass
class TreeNode:
    prefix: tuple  # flattened pattern values at layers 1..layer-1
    layer: int  # 1-based; leaves sit at L+1
    members: np.ndarray
    split: LogRankResult | None = None
    children: list = field(default_factory=list)
    is_leaf: bool = False
    leaf_summary: LeafSummary | None = None

    @property
    def n(self):
        return int(self.members.size)


def _scalar_risks(head_outputs):
    out = np.atleast_2d(np.asarray(head_outputs, dtype=float))
    if out.shape[1] == 1:
        return out[:, 0]
    # PMF-style heads: earlier expected bin means higher risk
    z = out - out.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    return -(p * np.arange(out.shape[1])).sum(axis=1)


def reconstruct_tree(pattern_matrix, times, events, head_outputs,
                     widths=None) -> TreeNode:
    """Rebuild the survival tree by recursive pattern-prefix grouping.

    Children of a depth-l node are the distinct layer-l pattern values among
    its members; a node whose members all agree on layer l gets a single
    pass-through child. Leaves are annotated with the (constant) head risk
    and a Kaplan-Meier summary of their members.
    """
    o = np.asarray(pattern_matrix)
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    n, p_total = o.shape
    if times.shape != (n,) or events.shape != (n,):
        raise ValueError("pattern rows, times and events must align")
    if widths is None:
        widths = [1] * p_total
    offsets = np.cumsum([0] + list(widths))
    if offsets[-1] != p_total:
        raise ValueError("widths do not sum to the pattern length")
    risks = _scalar_risks(head_outputs)
    if risks.shape != (n,):
        raise ValueError("head outputs must align with pattern rows")
    n_layers = len(widths)

    def grow(prefix, members, layer):
        node = TreeNode(prefix=prefix, layer=layer, members=members)
        if layer > n_layers:
            node.is_leaf = True
            km = kaplan_meier(times[members], events[members])
            node.leaf_summary = LeafSummary(
                risk=float(risks[members[0]]),
                km_median=km.median,
                n=members.size,
            )
            return node
        lo, hi = offsets[layer - 1], offsets[layer]
        block = o[members, lo:hi]
        values, inverse = np.unique(block, axis=0, return_inverse=True)
        for vi in range(values.shape[0]):
            sub = members[inverse == vi]
            child_prefix = prefix + tuple(int(v) for v in values[vi])
            node.children.append(grow(child_prefix, sub, layer + 1))
        if len(node.children) == 2:
            # group "a" of the test is the active (o=1) branch
            off, on = node.children
            node.split = log_rank_test(
                times[on.members], events[on.members],
                times[off.members], events[off.members],
            )
        return node

    return grow((), np.arange(n), 1)


def leaves(root: TreeNode) -> list:
    if root.is_leaf:
        return [root]
    out = []
    for c in root.children:
        out.extend(leaves(c))
    return out


def tree_depth(root: TreeNode) -> int:
    """Number of genuine splits on the deepest root-to-leaf path."""
    if root.is_leaf:
        return 0
    extra = 1 if len(root.children) > 1 else 0
    return extra + max(tree_depth(c) for c in root.children)


@dataclass
class ScanDecision:
    prefix: tuple
    result: LogRankResult
    merge: bool


def logrank_scan(root: TreeNode, alpha_level=0.05, n_min=10,
                 literal_inequality=False) -> list:
    """Merge test for every two-branch split node in the tree.

    Default decision: merge when p >= alpha_level, or when either branch is
    thinner than n_min. literal_inequality flips the p comparison to
    merge-when-significant for fidelity experiments.
    """
    decisions = []

    def visit(node):
        if node.is_leaf:
            return
        if len(node.children) == 2 and node.split is not None:
            p = node.split.p_value
            small = min(c.n for c in node.children) < n_min
            if literal_inequality:
                merge = (p < alpha_level) or small
            else:
                merge = (p >= alpha_level) or small
            decisions.append(ScanDecision(node.prefix, node.split, merge))
        for c in node.children:
            visit(c)

    visit(root)
    return decisions


def apply_prune(mask: PruneMask, decisions) -> PruneMask:
    """Fold merge decisions into a new mask; idempotent, prefix-closed."""
    out = mask.copy()
    for d in decisions:
        if d.merge:
            out.add(d.prefix)
    return out


def covariate_importance(net: ReluNetwork) -> list:
    """Per-layer covariate weights: |W| on the raw-input block, normalized.

    Returns one length-d vector per splitting layer, each summing to 1
    unless the whole block is exactly zero (then the zero vector).
    """
    out = []
    for w in net.W:
        block = np.abs(w[:, : net.d]).sum(axis=0)
        total = block.sum()
        out.append(block / total if total > 0 else np.zeros(net.d))
    return out


def _node_json(node: TreeNode, importance) -> dict:
    d = {
        "prefix": list(node.prefix),
        "layer": node.layer,
        "n": node.n,
        "p_value": None if node.split is None else node.split.p_value,
        "importance": None,
        "children": [],
        "leaf": None,
    }
    if node.is_leaf:
        s = node.leaf_summary
        med = s.km_median if np.isfinite(s.km_median) else None
        d["leaf"] = {"risk": s.risk, "km_median": med, "n": s.n}
    else:
        d["importance"] = [float(v) for v in importance[node.layer - 1]]
        d["children"] = [_node_json(c, importance) for c in node.children]
    return d


def _dot_escape(s):
    return s.replace('"', '\\"')


def _collapse(node: TreeNode) -> TreeNode:
    """Skip pass-through chains: next descendant that branches or is a leaf."""
    while not node.is_leaf and len(node.children) == 1:
        node = node.children[0]
    return node


def _tree_dot(root: TreeNode, importance, feature_names=None) -> str:
    lines = ["digraph survival_tree {", '  node [shape=box, fontname="Helvetica"];']
    counter = [0]

    def name_of(i):
        if feature_names and i < len(feature_names):
            return feature_names[i]
        return "x%d" % i

    def emit(node):
        nid = "n%d" % counter[0]
        counter[0] += 1
        if node.is_leaf:
            s = node.leaf_summary
            med = "%.4g" % s.km_median if np.isfinite(s.km_median) else "n/a"
            label = "n=%d\\nrisk=%.4g\\nKM median=%s" % (s.n, s.risk, med)
        else:
            imp = importance[node.layer - 1]
            top = np.argsort(imp)[::-1][:3]
            pieces = ["%s %.2f" % (name_of(i), imp[i]) for i in top if imp[i] > 0]
            pv = "p=%.3g" % node.split.p_value if node.split else "p=n/a"
            label = "layer %d\\n%s\\n%s" % (node.layer, " | ".join(pieces) or "all-zero layer", pv)
        lines.append('  %s [label="%s"];' % (nid, _dot_escape(label)))
        if not node.is_leaf:
            for c in node.children:
                c_eff = _collapse(c)
                cid = emit(c_eff)
                edge = c.prefix[len(node.prefix) :]
                lines.append('  %s -> %s [label="%s"];'
                             % (nid, cid, "".join(str(v) for v in edge)))
        return nid

    emit(_collapse(root))
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_tree(root: TreeNode, net: ReluNetwork, fmt, path, feature_names=None):
    """Write the tree as graphviz DOT (pass-throughs collapsed) or full JSON."""
    importance = covariate_importance(net)
    if fmt == "dot":
        text = _tree_dot(root, importance, feature_names)
    elif fmt == "json":
        text = json.dumps(_node_json(root, importance), indent=1)
    else:
        raise ValueError("format must be 'dot' or 'json'")
    with open(path, "w") as fh:
        fh.write(text)
    return path


def read_tree_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
