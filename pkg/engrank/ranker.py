"""MART and LambdaMART boosting, linear blending and the model file."""

from dataclasses import asdict, dataclass, field
import json
import logging
import math
import warnings

import torch
from tqdm.auto import trange

from .featurizer import NUM_FEATURES, FEATURE_NAMES, Normalizer, feature_matrix
from .metrics import MAX_GAIN_EXPONENT, dcg_at_k, mean_ndcg, ranking_order
from .trees import LEAF, RegressionTree, fit_regression_tree
from .utils import open_text

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
NEWTON_EPSILON = 1e-9
BLEND_GRID_STEPS = 20


class DegenerateLabelsWarning(UserWarning):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass
class BoostParams:
    max_trees: int = 1000
    leaves_per_tree: int = 10
    shrinkage: float = 0.1
    early_stop_rounds: int = 50
    ndcg_cutoff: int = 10
    sigma: float = 1.0
    seed: int = 0
    min_samples_leaf: int = 1

    def __post_init__(self):
        if not 0.0 < self.shrinkage <= 1.0:
            raise ValueError(f'shrinkage must be in (0, 1], got {self.shrinkage}')
        for name in ('max_trees', 'leaves_per_tree', 'early_stop_rounds',
                     'ndcg_cutoff', 'min_samples_leaf'):
            if getattr(self, name) < 1:
                raise ValueError(f'{name} must be at least 1, got {getattr(self, name)}')
        if self.sigma <= 0:
            raise ValueError(f'sigma must be positive, got {self.sigma}')


@dataclass
class TreeEnsemble:
    trees: list
    shrinkage: float
    base_score: float = 0.0

    def predict(self, matrix):
        tree_sum = torch.zeros(matrix.shape[0], dtype=torch.float64)
        for tree in self.trees:
            tree_sum = tree_sum + tree.predict(matrix)
        return self.base_score + self.shrinkage * tree_sum

    def truncated(self, n_trees):
        return TreeEnsemble(self.trees[:n_trees], self.shrinkage, self.base_score)

    def state_dict(self):
        return {'base_score': self.base_score, 'shrinkage': self.shrinkage,
                'trees': [t.state_dict() for t in self.trees]}

    @classmethod
    def from_state_dict(cls, state):
        return cls(trees=[RegressionTree.from_state_dict(t) for t in state['trees']],
                   shrinkage=float(state['shrinkage']),
                   base_score=float(state['base_score']))


@dataclass
class BlendMember:
    role: str
    ensemble: TreeEnsemble
    weight: float


def _combine(weights, predictions):
    total = torch.zeros_like(predictions[0])
    for weight, prediction in zip(weights, predictions):
        total = total + weight * prediction
    return total


@dataclass
class LinearBlend:
    members: list = field(default_factory=list)

    def __post_init__(self):
        if not self.members:
            raise ValueError('a blend needs at least one member')

    def predict(self, matrix):
        return _combine([m.weight for m in self.members],
                        [m.ensemble.predict(matrix) for m in self.members])


def score(model, vector):
    return float(model.predict(torch.as_tensor(vector, dtype=torch.float64).unsqueeze(0))[0])


def order_tweets(scores, tweet_ids):
    """tweet_ids by descending score, ties by tweet_id ascending."""
    ranked = sorted(zip(scores, tweet_ids), key=lambda pair: (-pair[0], pair[1]))
    return [tweet_id for _, tweet_id in ranked]


def rank_user(model, group):
    return order_tweets(model.predict(group.features).tolist(), group.tweet_ids)


def compute_lambdas(scores, labels, k, sigma=1.0):
    """λ-gradients and their second derivatives for one query group.

    Every pair with label_i > label_j contributes sigma * rho * |ΔnDCG@k| to
    λ_i and the negation to λ_j, where rho = 1 / (1 + exp(sigma (s_i - s_j)))
    and ΔnDCG@k is the metric change of swapping the two in the current
    ranking. Positive λ pushes an item up."""
    scores = torch.as_tensor(scores, dtype=torch.float64)
    labels = torch.as_tensor(labels, dtype=torch.float64)
    n = scores.shape[0]
    lambdas = torch.zeros(n, dtype=torch.float64)
    hessians = torch.zeros(n, dtype=torch.float64)
    if n < 2:
        return lambdas, hessians
    ideal = dcg_at_k(sorted(labels.tolist(), reverse=True), k)
    if ideal == 0.0:
        return lambdas, hessians

    positions = torch.empty(n, dtype=torch.long)
    positions[torch.tensor(ranking_order(scores), dtype=torch.long)] = torch.arange(n)
    discount = torch.where(positions < k,
                           1.0 / torch.log2(positions.to(torch.float64) + 2.0),
                           torch.zeros(n, dtype=torch.float64))
    gain = torch.pow(2.0, labels.clamp(max=MAX_GAIN_EXPONENT)) - 1.0

    pairs = labels.unsqueeze(1) > labels.unsqueeze(0)
    delta = ((gain.unsqueeze(1) - gain.unsqueeze(0)).abs()
             * (discount.unsqueeze(1) - discount.unsqueeze(0)).abs() / ideal)
    rho = torch.sigmoid(-sigma * (scores.unsqueeze(1) - scores.unsqueeze(0)))
    zero = torch.zeros_like(delta)
    push = torch.where(pairs, sigma * rho * delta, zero)
    curvature = torch.where(pairs, sigma * sigma * rho * (1.0 - rho) * delta, zero)
    lambdas = push.sum(dim=1) - push.sum(dim=0)
    hessians = curvature.sum(dim=1) + curvature.sum(dim=0)
    return lambdas, hessians


class EarlyStopping:
    """Tracks validation mean nDCG after every tree and remembers the best prefix."""

    def __init__(self, groups, base_score, shrinkage, k, patience):
        self.groups = list(groups)
        self.enabled = bool(self.groups)
        self.shrinkage = shrinkage
        self.base_score = base_score
        self.k = k
        self.patience = patience
        self.history = []
        self.best_round = 0
        if self.enabled:
            self.matrix = feature_matrix(self.groups)
            self.sizes = [len(g) for g in self.groups]
            self.tree_sum = torch.zeros(self.matrix.shape[0], dtype=torch.float64)
            self.history.append(self._evaluate())

    def _evaluate(self):
        scores = self.base_score + self.shrinkage * self.tree_sum
        return mean_ndcg(self.groups, torch.split(scores, self.sizes), self.k).mean_ndcg

    @property
    def best(self):
        return self.history[self.best_round] if self.enabled else None

    def update(self, tree):
        """Adds a tree; returns True once `patience` trees passed without improvement."""
        if not self.enabled:
            return False
        self.tree_sum = self.tree_sum + tree.predict(self.matrix)
        self.history.append(self._evaluate())
        current = len(self.history) - 1
        if self.history[current] > self.history[self.best_round]:
            self.best_round = current
        return current - self.best_round >= self.patience

    def truncate(self, ensemble):
        if not self.enabled:
            return ensemble
        return ensemble.truncated(self.best_round)


def _check_training_groups(groups):
    groups = list(groups)
    if not groups or sum(len(g) for g in groups) == 0:
        raise ValueError('cannot train on zero query groups')
    return groups


def train_mart(train, valid, p, progress=False):
    """Pointwise boosting on squared error against the engagement label."""
    train = _check_training_groups(train)
    matrix = feature_matrix(train)
    labels = torch.cat([g.labels for g in train]).to(torch.float64)
    base_score = float(labels.mean())
    ensemble = TreeEnsemble([], p.shrinkage, base_score)
    monitor = EarlyStopping(valid, base_score, p.shrinkage, p.ndcg_cutoff, p.early_stop_rounds)

    tree_sum = torch.zeros_like(labels)
    for _ in trange(p.max_trees, desc='mart', disable=not progress):
        residual = labels - (base_score + p.shrinkage * tree_sum)
        tree = fit_regression_tree(matrix, residual, max_leaves=p.leaves_per_tree,
                                   min_samples_leaf=p.min_samples_leaf)
        ensemble.trees.append(tree)
        tree_sum = tree_sum + tree.predict(matrix)
        if monitor.update(tree):
            break

    ensemble = monitor.truncate(ensemble)
    log.info('mart: %d trees kept of %d grown (validation nDCG@%d %s)',
             len(ensemble.trees), len(monitor.history) - 1 if monitor.enabled else len(ensemble.trees),
             p.ndcg_cutoff, 'n/a' if monitor.best is None else f'{monitor.best:.6f}')
    return ensemble


def train_lambdamart(train, valid, p, progress=False):
    """Boosting on λ-gradients with Newton leaf values, optimizing nDCG@cutoff."""
    train = _check_training_groups(train)
    matrix = feature_matrix(train)
    sizes = [len(g) for g in train]
    ensemble = TreeEnsemble([], p.shrinkage, 0.0)
    monitor = EarlyStopping(valid, 0.0, p.shrinkage, p.ndcg_cutoff, p.early_stop_rounds)

    tree_sum = torch.zeros(matrix.shape[0], dtype=torch.float64)
    for round_ in trange(p.max_trees, desc='lambdamart', disable=not progress):
        scores = p.shrinkage * tree_sum
        parts = [compute_lambdas(s, g.labels, p.ndcg_cutoff, p.sigma)
                 for s, g in zip(torch.split(scores, sizes), train)]
        lambdas = torch.cat([lam for lam, _ in parts])
        hessians = torch.cat([h for _, h in parts])
        if round_ == 0 and not bool(lambdas.any()):
            warnings.warn('all λ-gradients are zero, labels carry no ranking signal; '
                          'returning the base-score model', DegenerateLabelsWarning)
            return ensemble

        def newton_step(rows):
            return float(lambdas[rows].sum() / (hessians[rows].sum() + NEWTON_EPSILON))

        tree = fit_regression_tree(matrix, lambdas, max_leaves=p.leaves_per_tree,
                                   min_samples_leaf=p.min_samples_leaf, leaf_value=newton_step)
        ensemble.trees.append(tree)
        tree_sum = tree_sum + tree.predict(matrix)
        if monitor.update(tree):
            break

    ensemble = monitor.truncate(ensemble)
    log.info('lambdamart: %d trees kept (validation nDCG@%d %s)', len(ensemble.trees),
             p.ndcg_cutoff, 'n/a' if monitor.best is None else f'{monitor.best:.6f}')
    return ensemble


def fit_blend_weights(members, valid, k, roles=None, grid_steps=BLEND_GRID_STEPS):
    """Grid search of (w, 1 - w) over validation mean nDCG@k.

    Ties keep the larger weight on the first member."""
    members = list(members)
    roles = list(roles) if roles is not None else [f'member{i}' for i in range(len(members))]
    if not 1 <= len(members) <= 2:
        raise ValueError(f'a blend takes one or two members, got {len(members)}')
    valid = list(valid)
    if not valid:
        raise ValueError('blend weights need validation groups')
    if len(members) == 1:
        return LinearBlend([BlendMember(roles[0], members[0], 1.0)])

    matrix = feature_matrix(valid)
    sizes = [len(g) for g in valid]
    predictions = [m.predict(matrix) for m in members]
    best_weight, best_value = None, -math.inf
    for step in range(grid_steps, -1, -1):
        w = step / grid_steps
        blended = _combine((w, 1.0 - w), predictions)
        value = mean_ndcg(valid, torch.split(blended, sizes), k).mean_ndcg
        if value > best_value:
            best_weight, best_value = w, value
    log.info('blend: weight %.2f on %s, %.2f on %s (validation nDCG@%d %.6f)',
             best_weight, roles[0], 1.0 - best_weight, roles[1], k, best_value)
    return LinearBlend([BlendMember(roles[0], members[0], best_weight),
                        BlendMember(roles[1], members[1], 1.0 - best_weight)])


def feature_importance(model):
    """Total split gain per feature, summed over every tree of every member."""
    ensembles = [m.ensemble for m in model.members] if isinstance(model, LinearBlend) else [model]
    totals = [0.0] * NUM_FEATURES
    for ensemble in ensembles:
        for tree in ensemble.trees:
            for f, g in zip(tree.feature, tree.gain):
                if f != LEAF:
                    totals[f] += g
    return dict(zip(FEATURE_NAMES, totals))


@dataclass
class TrainedModel:
    blend: LinearBlend
    params: BoostParams
    normalizer: Normalizer

    def predict(self, matrix):
        return self.blend.predict(matrix)

    def state_dict(self):
        return {
            'format_version': FORMAT_VERSION,
            'params': asdict(self.params),
            'normalizer': self.normalizer.state_dict(),
            'members': [dict(role=m.role, weight=m.weight, **m.ensemble.state_dict())
                        for m in self.blend.members],
        }

    @classmethod
    def from_state_dict(cls, state):
        version = state.get('format_version')
        if version != FORMAT_VERSION:
            raise ModelFormatError(f'unsupported model format_version {version!r}')
        try:
            members = [BlendMember(m['role'], TreeEnsemble.from_state_dict(m), float(m['weight']))
                       for m in state['members']]
            return cls(blend=LinearBlend(members),
                       params=BoostParams(**state['params']),
                       normalizer=Normalizer.from_state_dict(state['normalizer']))
        except (KeyError, TypeError) as e:
            raise ModelFormatError(f'malformed model file: {e}') from e


def save_model(model, path):
    with open_text(path, 'w') as f:
        json.dump(model.state_dict(), f, indent=1)
        f.write('\n')
    log.info('saved model to %s', path)


def load_model(path):
    with open_text(path) as f:
        try:
            state = json.load(f)
        except json.JSONDecodeError as e:
            raise ModelFormatError(f'{path}: not a JSON model file ({e.msg})') from e
    if not isinstance(state, dict):
        raise ModelFormatError(f'{path}: not a JSON model file')
    return TrainedModel.from_state_dict(state)
