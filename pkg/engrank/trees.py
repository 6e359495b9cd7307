"""Least-squares regression trees grown best-first to a leaf budget."""

from dataclasses import dataclass, field

import torch

LEAF = -1


@dataclass
class RegressionTree:
    """Array-backed binary tree; `feature[i] == LEAF` marks node i as a leaf.

    Rows go left when `value <= threshold`. `gain` holds the weighted
    squared-error reduction of every split (0 for leaves)."""
    feature: list
    threshold: list
    left: list
    right: list
    value: list
    gain: list = field(default_factory=list)

    def __post_init__(self):
        if not self.gain:
            self.gain = [0.0] * len(self.feature)
        self._tensors = None

    @property
    def leaf_count(self):
        return sum(1 for f in self.feature if f == LEAF)

    @property
    def node_count(self):
        return len(self.feature)

    def _as_tensors(self):
        if self._tensors is None:
            self._tensors = (torch.tensor(self.feature, dtype=torch.long),
                             torch.tensor(self.threshold, dtype=torch.float64),
                             torch.tensor(self.left, dtype=torch.long),
                             torch.tensor(self.right, dtype=torch.long),
                             torch.tensor(self.value, dtype=torch.float64))
        return self._tensors

    def predict(self, matrix):
        """Leaf values for every row of `matrix`."""
        feature, threshold, left, right, value = self._as_tensors()
        node = torch.zeros(matrix.shape[0], dtype=torch.long)
        for _ in range(self.node_count):
            f = feature[node]
            internal = f != LEAF
            if not bool(internal.any()):
                break
            x = matrix.gather(1, f.clamp(min=0).unsqueeze(1)).squeeze(1)
            step = torch.where(x <= threshold[node], left[node], right[node])
            node = torch.where(internal, step, node)
        return value[node]

    def state_dict(self):
        return {'feature': list(self.feature), 'threshold': list(self.threshold),
                'left': list(self.left), 'right': list(self.right),
                'value': list(self.value), 'gain': list(self.gain)}

    @classmethod
    def from_state_dict(cls, state):
        tree = cls(feature=[int(f) for f in state['feature']],
                   threshold=[float(t) for t in state['threshold']],
                   left=[int(i) for i in state['left']],
                   right=[int(i) for i in state['right']],
                   value=[float(v) for v in state['value']],
                   gain=[float(g) for g in state.get('gain', [])])
        sizes = {len(tree.feature), len(tree.threshold), len(tree.left),
                 len(tree.right), len(tree.value), len(tree.gain)}
        if len(sizes) != 1 or not tree.feature:
            raise ValueError('tree arrays must be non-empty and of equal length')
        return tree


def tree_predict(tree, vector):
    node = 0
    while tree.feature[node] != LEAF:
        if float(vector[tree.feature[node]]) <= tree.threshold[node]:
            node = tree.left[node]
        else:
            node = tree.right[node]
    return tree.value[node]


@dataclass
class _Split:
    gain: float
    feature: int
    threshold: float
    left_rows: torch.Tensor
    right_rows: torch.Tensor


def _best_split(matrix, targets, weights, rows, min_samples_leaf):
    m = rows.shape[0]
    if m < 2 * min_samples_leaf:
        return None
    x = matrix[rows]
    w = weights[rows]
    wy = w * targets[rows]
    total_w = w.sum()
    if total_w <= 0:
        return None
    parent_sse = (w * (targets[rows] - wy.sum() / total_w).pow(2)).sum()
    if parent_sse <= 0:
        return None

    xs, order = torch.sort(x, dim=0, stable=True)
    left_w = w[order].cumsum(0)[:-1]
    left_wy = wy[order].cumsum(0)[:-1]
    right_w = total_w - left_w
    right_wy = wy.sum() - left_wy

    left_count = torch.arange(1, m, dtype=torch.long).unsqueeze(1)
    valid = ((xs[1:] > xs[:-1])
             & (left_count >= min_samples_leaf)
             & (m - left_count >= min_samples_leaf)
             & (left_w > 0) & (right_w > 0))
    safe_left = torch.where(valid, left_w, torch.ones_like(left_w))
    safe_right = torch.where(valid, right_w, torch.ones_like(right_w))
    gain = left_wy.pow(2) / safe_left + right_wy.pow(2) / safe_right - wy.sum().pow(2) / total_w
    gain = torch.where(valid, gain, torch.full_like(gain, float('-inf')))

    best = gain.max()
    if not bool(best > 1e-12 * max(float(parent_sse), 1.0)):
        return None
    # lowest feature index first, then lowest threshold
    feature, position = torch.nonzero((gain == best).T)[0].tolist()
    low, high = float(xs[position, feature]), float(xs[position + 1, feature])
    threshold = (low + high) / 2
    if not threshold < high:
        threshold = low
    goes_left = x[:, feature] <= threshold
    return _Split(float(best), feature, threshold, rows[goes_left], rows[~goes_left])


def fit_regression_tree(matrix, targets, weights=None, max_leaves=10, min_samples_leaf=1,
                        leaf_value=None):
    """Greedy best-first least-squares tree.

    The leaf whose best split removes the most weighted squared error is split
    next, until `max_leaves` leaves exist or no split helps. Leaves predict the
    weighted mean target unless `leaf_value(rows)` is given, which receives
    the row indices of a leaf and returns its output."""
    matrix = torch.as_tensor(matrix, dtype=torch.float64)
    targets = torch.as_tensor(targets, dtype=torch.float64)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ValueError('cannot fit a tree on zero rows')
    if targets.shape != (matrix.shape[0],):
        raise ValueError(f'{targets.shape[0]} targets for {matrix.shape[0]} rows')
    if max_leaves < 1 or min_samples_leaf < 1:
        raise ValueError('max_leaves and min_samples_leaf must be positive')
    if weights is None:
        weights = torch.ones_like(targets)
    else:
        weights = torch.as_tensor(weights, dtype=torch.float64)
        if weights.shape != targets.shape or bool((weights < 0).any()):
            raise ValueError('weights must be non-negative, one per row')

    feature, threshold, left, right, gain = [LEAF], [0.0], [LEAF], [LEAF], [0.0]
    root = torch.arange(matrix.shape[0])
    frontier = {0: (root, _best_split(matrix, targets, weights, root, min_samples_leaf))}

    while len(frontier) < max_leaves:
        splittable = [(s.gain, -node) for node, (_, s) in frontier.items() if s is not None]
        if not splittable:
            break
        node = -max(splittable)[1]
        _, split = frontier.pop(node)
        feature[node], threshold[node], gain[node] = split.feature, split.threshold, split.gain
        for side, rows in ((left, split.left_rows), (right, split.right_rows)):
            child = len(feature)
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            gain.append(0.0)
            side[node] = child
            frontier[child] = (rows, _best_split(matrix, targets, weights, rows, min_samples_leaf))

    value = [0.0] * len(feature)
    for node, (rows, _) in frontier.items():
        if leaf_value is not None:
            value[node] = float(leaf_value(rows))
        else:
            w = weights[rows]
            total = float(w.sum())
            value[node] = float((w * targets[rows]).sum()) / total if total > 0 else 0.0
    return RegressionTree(feature, threshold, left, right, value, gain)
