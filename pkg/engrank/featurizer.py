"""User-item-tweet feature vectors.

Aggregates are built from the training split only. Long-tailed counts are
smoothed with a square root, then every feature is z-scored with statistics
fitted on the (pruned) training matrix.
"""

from bisect import bisect_left
from collections import defaultdict
from dataclasses import dataclass
import logging
import math

import torch

from .dataset import DatasetError, Interaction
from .utils import lower_median

log = logging.getLogger(__name__)

FEATURE_NAMES = (
    'rating',                      # F1
    'rating_minus_prior_median',   # F2
    'sqrt_user_engagement',        # F3
    'user_engaged',                # F4
    'user_mean_rating',            # F5
    'sqrt_user_friend_ratio',      # F6
    'sqrt_user_statuses',          # F7
    'sqrt_item_engagement',        # F8
    'item_engaged',                # F9
    'item_mean_rating',            # F10
    'sqrt_item_friend_ratio',      # F11
    'sqrt_item_statuses',          # F12
    'has_mention',                 # F13
    'is_retweet',                  # F14
    'is_retweeted',                # F15
    'item_retweet_count',          # F16
)
NUM_FEATURES = len(FEATURE_NAMES)
BINARY_FEATURES = (3, 8, 12, 13, 14)

DEFAULT_MIN_INTERACTIONS = 4
DEFAULT_MAX_INTERACTIONS = 200


class PruningError(DatasetError):
    pass


def friend_ratio(friends, followers):
    return friends / max(followers, 1)


@dataclass
class UserAggregate:
    history_times: list
    history_ratings: list
    mean_rating: float
    mean_engagement: float
    friend_ratio: float
    statuses: int

    def prior_ratings(self, timestamp):
        """Ratings strictly earlier than `timestamp`."""
        return self.history_ratings[:bisect_left(self.history_times, timestamp)]


@dataclass
class ItemAggregate:
    mean_engagement: float
    mean_rating: float
    mean_friend_ratio: float
    mean_statuses: float
    retweet_count: int = 0


@dataclass
class AggregateStore:
    users: dict
    items: dict
    retweeted: frozenset


def build_aggregates(train):
    if len(train) == 0:
        raise DatasetError('cannot build aggregates from an empty training split')

    ordered = sorted(train.interactions, key=Interaction.sort_key)
    by_user = defaultdict(list)
    by_item = defaultdict(list)
    for t in ordered:
        by_user[t.user_id].append(t)
        by_item[t.item_id].append(t)

    users = {}
    for user_id, rows in by_user.items():
        latest = rows[-1]
        users[user_id] = UserAggregate(
            history_times=[t.timestamp for t in rows],
            history_ratings=[t.rating for t in rows],
            mean_rating=sum(t.rating for t in rows) / len(rows),
            mean_engagement=sum(t.engagement for t in rows) / len(rows),
            friend_ratio=friend_ratio(latest.user_friends, latest.user_followers),
            statuses=latest.user_statuses)

    items = {}
    for item_id, rows in by_item.items():
        raters = sorted({t.user_id for t in rows})
        items[item_id] = ItemAggregate(
            mean_engagement=sum(t.engagement for t in rows) / len(rows),
            mean_rating=sum(t.rating for t in rows) / len(rows),
            mean_friend_ratio=sum(users[u].friend_ratio for u in raters) / len(raters),
            mean_statuses=sum(users[u].statuses for u in raters) / len(raters))

    retweeted = set()
    for t in ordered:
        if t.retweet_of is None:
            continue
        retweeted.add(t.retweet_of)
        original = train.get(t.retweet_of)
        # an original outside the corpus is assumed to concern the retweet's own item
        item_id = original.item_id if original is not None else t.item_id
        items[item_id].retweet_count += 1

    log.debug('aggregates: %d users, %d items, %d retweeted originals',
              len(users), len(items), len(retweeted))
    return AggregateStore(users=users, items=items, retweeted=frozenset(retweeted))


def _raw_features(t, agg):
    values = [0.0] * NUM_FEATURES
    values[0] = float(t.rating)

    user = agg.users.get(t.user_id)
    if user is not None:
        prior = user.prior_ratings(t.timestamp)
        if prior:
            values[1] = float(t.rating - lower_median(prior))
        values[2] = math.sqrt(user.mean_engagement)
        values[3] = 1.0 if user.mean_engagement > 0 else 0.0
        values[4] = user.mean_rating
        values[5] = math.sqrt(user.friend_ratio)
        values[6] = math.sqrt(user.statuses)

    item = agg.items.get(t.item_id)
    if item is not None:
        values[7] = math.sqrt(item.mean_engagement)
        values[8] = 1.0 if item.mean_engagement > 0 else 0.0
        values[9] = item.mean_rating
        values[10] = math.sqrt(item.mean_friend_ratio)
        values[11] = math.sqrt(item.mean_statuses)
        values[15] = float(item.retweet_count)

    values[12] = 1.0 if t.has_mention else 0.0
    values[13] = 1.0 if t.is_retweet else 0.0
    values[14] = 1.0 if t.tweet_id in agg.retweeted else 0.0
    return values


def extract_features(t, agg):
    return torch.tensor(_raw_features(t, agg), dtype=torch.float64)


@dataclass
class Normalizer:
    mean: torch.Tensor
    std: torch.Tensor

    def state_dict(self):
        return {'mean': self.mean.tolist(), 'std': self.std.tolist()}

    @classmethod
    def from_state_dict(cls, state):
        mean = torch.tensor(state['mean'], dtype=torch.float64)
        std = torch.tensor(state['std'], dtype=torch.float64)
        if mean.shape != (NUM_FEATURES,) or std.shape != (NUM_FEATURES,):
            raise ValueError(f'normalizer must hold {NUM_FEATURES} means and deviations')
        return cls(mean, std)


def fit_normalizer(vectors):
    if not isinstance(vectors, torch.Tensor):
        vectors = list(vectors)
        if not vectors:
            raise ValueError('cannot fit a normalizer on zero vectors')
        vectors = torch.stack(vectors)
    if vectors.shape[0] == 0:
        raise ValueError('cannot fit a normalizer on zero vectors')
    matrix = vectors.to(torch.float64)
    mean = matrix.mean(dim=0)
    std = (matrix - mean).pow(2).mean(dim=0).sqrt()
    # a constant column has zero spread, whatever rounding left in std
    constant = matrix.amax(dim=0) == matrix.amin(dim=0)
    std = torch.where(constant, torch.zeros_like(std), std)
    return Normalizer(mean, std)


def apply_normalizer(n, v):
    """Z-scores a vector or a matrix of row vectors; zero-variance features become 0."""
    nonzero = n.std > 0
    scaled = (v - n.mean) / torch.where(nonzero, n.std, torch.ones_like(n.std))
    return torch.where(nonzero, scaled, torch.zeros_like(scaled))


def prune_outlier_users(dataset, min_interactions=DEFAULT_MIN_INTERACTIONS,
                        max_interactions=DEFAULT_MAX_INTERACTIONS):
    counts = defaultdict(int)
    for t in dataset:
        counts[t.user_id] += 1
    keep = {u for u, n in counts.items() if min_interactions <= n <= max_interactions}
    pruned = dataset.filter(lambda t: t.user_id in keep)
    if len(pruned) == 0:
        raise PruningError(f'pruning to users with {min_interactions}..{max_interactions} '
                           f'interactions removed all {len(dataset)} interactions')
    log.info('pruned %d of %d users (%d interactions kept)',
             len(counts) - len(keep), len(counts), len(pruned))
    return pruned


@dataclass
class QueryGroup:
    """All triples of one user, stored column-wise."""
    user_id: str
    tweet_ids: tuple
    item_ids: tuple
    features: torch.Tensor
    labels: torch.Tensor
    ratings: tuple = ()
    timestamps: tuple = ()

    def __len__(self):
        return len(self.tweet_ids)

    @property
    def entries(self):
        return list(zip(self.tweet_ids, self.item_ids, self.features, self.labels.tolist()))

    def subset(self, rows):
        rows = list(rows)
        index = torch.tensor(rows, dtype=torch.long)
        def pick(column):
            return tuple(column[r] for r in rows) if column else column

        return QueryGroup(self.user_id, pick(self.tweet_ids), pick(self.item_ids),
                          self.features[index], self.labels[index],
                          pick(self.ratings), pick(self.timestamps))

    def with_features(self, features):
        return QueryGroup(self.user_id, self.tweet_ids, self.item_ids, features,
                          self.labels, self.ratings, self.timestamps)


def featurize_dataset(dataset, agg, normalizer=None):
    """One QueryGroup per user (ordered by user_id), entries in time order."""
    groups = []
    for user_id, rows in sorted(dataset.by_user().items()):
        rows = sorted(rows, key=Interaction.sort_key)
        features = torch.tensor([_raw_features(t, agg) for t in rows], dtype=torch.float64)
        if normalizer is not None:
            features = apply_normalizer(normalizer, features)
        groups.append(QueryGroup(
            user_id=user_id,
            tweet_ids=tuple(t.tweet_id for t in rows),
            item_ids=tuple(t.item_id for t in rows),
            features=features,
            labels=torch.tensor([t.engagement for t in rows], dtype=torch.long),
            ratings=tuple(t.rating for t in rows),
            timestamps=tuple(t.timestamp for t in rows)))
    return groups


def feature_matrix(groups):
    if not groups:
        return torch.zeros((0, NUM_FEATURES), dtype=torch.float64)
    return torch.cat([g.features for g in groups])


def normalize_groups(groups, normalizer):
    return [g.with_features(apply_normalizer(normalizer, g.features)) for g in groups]


def split_groups_by_time(groups, holdout=0.2):
    """Holds out the chronologically latest `holdout` share of all entries.

    Entries are ordered by (timestamp, tweet_id) across users; each group is
    cut into its fitting and validation parts and empty parts are dropped."""
    if not 0.0 <= holdout < 1.0:
        raise ValueError(f'holdout must be in [0, 1), got {holdout}')
    keys = sorted((g.timestamps[r], g.tweet_ids[r]) for g in groups for r in range(len(g)))
    n_fit = math.floor(len(keys) * (1.0 - holdout) + 1e-9)
    if n_fit == len(keys):
        return list(groups), []
    boundary = keys[n_fit]
    fit, valid = [], []
    for g in groups:
        early = [r for r in range(len(g)) if (g.timestamps[r], g.tweet_ids[r]) < boundary]
        late = [r for r in range(len(g)) if (g.timestamps[r], g.tweet_ids[r]) >= boundary]
        if early:
            fit.append(g.subset(early))
        if late:
            valid.append(g.subset(late))
    return fit, valid


def write_letor(groups, stream):
    """`<label> qid:<n> 1:<F1> ... 16:<F16> # <tweet_id>`, one line per triple."""
    for qid, g in enumerate(groups, start=1):
        for tweet_id, vector, label in zip(g.tweet_ids, g.features.tolist(), g.labels.tolist()):
            values = ' '.join(f'{i}:{v:.6f}' for i, v in enumerate(vector, start=1))
            stream.write(f'{label} qid:{qid} {values} # {tweet_id}\n')


def read_letor(stream):
    groups = []
    current, rows = None, []

    def flush():
        if current is not None:
            tweet_ids, vectors, labels = zip(*rows)
            groups.append(QueryGroup(current, tweet_ids, ('',) * len(rows),
                                     torch.tensor(vectors, dtype=torch.float64),
                                     torch.tensor(labels, dtype=torch.long)))

    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        body, _, comment = line.partition('#')
        tokens = body.split()
        if len(tokens) != NUM_FEATURES + 2 or not tokens[1].startswith('qid:'):
            raise ValueError(f'line {line_no}: malformed learning-to-rank row')
        qid = tokens[1][4:]
        vector = [0.0] * NUM_FEATURES
        for token in tokens[2:]:
            index, _, value = token.partition(':')
            vector[int(index) - 1] = float(value)
        if qid != current:
            flush()
            current, rows = qid, []
        rows.append((comment.strip(), vector, int(tokens[0])))
    flush()
    return groups
