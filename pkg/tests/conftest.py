import os
import sys

import pytest
import torch

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from engrank.dataset import Dataset, Interaction  # noqa: E402
from engrank.featurizer import NUM_FEATURES, QueryGroup  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: end-to-end runs on a full synthetic dataset')


def tweet(tweet_id, user_id='u1', item_id='i1', rating=7, timestamp=0, retweets=0, favorites=0,
          followers=100, friends=50, statuses=1000, mention=False, retweet_of=None):
    return Interaction(user_id=user_id, item_id=item_id, tweet_id=tweet_id, rating=rating,
                       timestamp=timestamp, retweet_count=retweets, favorite_count=favorites,
                       user_followers=followers, user_friends=friends, user_statuses=statuses,
                       has_mention=mention, retweet_of=retweet_of)


@pytest.fixture
def make_tweet():
    "Factory for Interaction records with neutral defaults."
    return tweet


@pytest.fixture
def small_dataset():
    "Two users with four tweets each, engagement following the rating."
    rows = []
    for u, user_id in enumerate(('ua', 'ub')):
        for n in range(4):
            rating = 5 + n
            rows.append(tweet(f't{u}{n}', user_id=user_id, item_id=f'i{n % 3}', rating=rating,
                              timestamp=100 * n + u, retweets=n, favorites=n,
                              mention=n % 2 == 1))
    return Dataset(rows, 'small')


def query_group(user_id, features, labels, timestamps=None):
    features = torch.as_tensor(features, dtype=torch.float64)
    if features.ndim == 1:
        features = features.unsqueeze(1)
    if features.shape[1] < NUM_FEATURES:
        padding = torch.zeros((features.shape[0], NUM_FEATURES - features.shape[1]), dtype=torch.float64)
        features = torch.cat([features, padding], dim=1)
    n = features.shape[0]
    return QueryGroup(user_id=user_id,
                      tweet_ids=tuple(f'{user_id}-{i:03d}' for i in range(n)),
                      item_ids=tuple(f'i{i}' for i in range(n)),
                      features=features,
                      labels=torch.as_tensor(labels, dtype=torch.long),
                      ratings=tuple([7] * n),
                      timestamps=tuple(range(n)) if timestamps is None else tuple(timestamps))


@pytest.fixture
def make_group():
    "Factory for QueryGroups; missing feature columns are zero-filled."
    return query_group


@pytest.fixture
def noisy_groups():
    "Groups whose labels grow with the first two features plus noise."
    g = torch.Generator().manual_seed(11)
    groups = []
    for u in range(40):
        n = 6 + u % 5
        x = torch.randn(n, 4, generator=g, dtype=torch.float64)
        signal = 1.5 * x[:, 0] + x[:, 1] + 0.5 * torch.randn(n, generator=g, dtype=torch.float64)
        labels = (signal + 2).clamp(min=0).round().clamp(max=5).long()
        groups.append(query_group(f'u{u:02d}', x, labels))
    return groups
