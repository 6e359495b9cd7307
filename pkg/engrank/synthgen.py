"""Seeded synthetic tweet-interaction datasets.

Ratings mix a user propensity and an item quality. Engagement grows with the
rating, with the user's follower count and with mentions, plus gaussian noise,
so a ranker that sees every feature can beat one that sees the rating only.
"""

from dataclasses import dataclass
import logging

import torch

from .dataset import Dataset, Interaction

log = logging.getLogger(__name__)

BASE_RATING = 7.0
RATING_SPREAD = 1.2
NEUTRAL_RATING = 5
MENTION_BOOST = 3.0
START_TIME = 1_360_000_000
TIME_SPAN = 365 * 24 * 3600


def rand_log_normal(shape, loc=0., scale=1., generator=None):
    """Draws samples from a lognormal distribution."""
    return (torch.randn(shape, generator=generator, dtype=torch.float64) * scale + loc).exp()


@dataclass
class SynthConfig:
    user_count: int = 200
    item_count: int = 50
    interactions_per_user: tuple = (4, 30)
    rating_effect: float = 1.0
    metadata_effect: float = 1.0
    noise: float = 1.0
    retweet_fraction: float = 0.05
    mention_rate: float = 0.3
    seed: int = 0

    def __post_init__(self):
        self.interactions_per_user = tuple(self.interactions_per_user)
        if self.user_count < 1 or self.item_count < 1:
            raise ValueError(f'need at least one user and one item, got '
                             f'{self.user_count} users and {self.item_count} items')
        if len(self.interactions_per_user) != 2:
            raise ValueError('interactions_per_user must be a (min, max) pair')
        low, high = self.interactions_per_user
        if not 1 <= low <= high:
            raise ValueError(f'invalid interactions_per_user range ({low}, {high})')
        for name in ('rating_effect', 'metadata_effect', 'noise'):
            if getattr(self, name) < 0:
                raise ValueError(f'{name} must be non-negative, got {getattr(self, name)}')
        for name in ('retweet_fraction', 'mention_rate'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f'{name} must be in [0, 1], got {getattr(self, name)}')


def generate(c):
    g = torch.Generator().manual_seed(c.seed)
    low, high = c.interactions_per_user

    counts = torch.randint(low, high + 1, (c.user_count,), generator=g)
    user_bias = torch.randn(c.user_count, generator=g, dtype=torch.float64)
    followers = rand_log_normal((c.user_count,), 5.0, 1.5, g).floor().long()
    friends = rand_log_normal((c.user_count,), 5.0, 1.0, g).floor().long()
    statuses = rand_log_normal((c.user_count,), 7.0, 1.5, g).floor().long()
    item_quality = torch.randn(c.item_count, generator=g, dtype=torch.float64)
    popularity = rand_log_normal((c.item_count,), 0.0, 1.0, g)

    users = torch.repeat_interleave(torch.arange(c.user_count), counts)
    n = users.shape[0]
    timestamps = START_TIME + torch.randint(0, TIME_SPAN, (n,), generator=g)
    timestamps, order = torch.sort(timestamps, stable=True)
    users = users[order]

    items = torch.multinomial(popularity, n, replacement=True, generator=g)
    mentions = torch.rand(n, generator=g) < c.mention_rate
    retweets = torch.rand(n, generator=g) < c.retweet_fraction
    picks = torch.rand(n, generator=g, dtype=torch.float64)
    retweet_of = [None] * n
    for p in range(1, n):
        if retweets[p]:
            # a retweet repeats an earlier rating tweet, so it concerns the same item
            target = int(picks[p] * p)
            retweet_of[p] = target
            items[p] = items[target]
            mentions[p] = True

    ratings = (BASE_RATING + RATING_SPREAD * user_bias[users] + RATING_SPREAD * item_quality[items]
               + torch.randn(n, generator=g, dtype=torch.float64)).round().clamp(1, 10).long()
    signal = (c.rating_effect * (ratings - NEUTRAL_RATING).double()
              + c.metadata_effect * (torch.log1p(followers[users].double())
                                     + MENTION_BOOST * mentions.double())
              + c.noise * torch.randn(n, generator=g, dtype=torch.float64))
    engagement = signal.clamp(min=0).round().long()
    retweet_count = (engagement.double() * torch.rand(n, generator=g, dtype=torch.float64)).floor().long()
    favorite_count = engagement - retweet_count

    interactions = []
    for p in range(n):
        u = int(users[p])
        interactions.append(Interaction(
            user_id=f'u{u:05d}',
            item_id=f'i{int(items[p]):05d}',
            tweet_id=f't{p:07d}',
            rating=int(ratings[p]),
            timestamp=int(timestamps[p]),
            retweet_count=int(retweet_count[p]),
            favorite_count=int(favorite_count[p]),
            user_followers=int(followers[u]),
            user_friends=int(friends[u]),
            user_statuses=int(statuses[u]),
            has_mention=bool(mentions[p]),
            retweet_of=None if retweet_of[p] is None else f't{retweet_of[p]:07d}'))
    log.info('generated %d interactions for %d users and %d items (seed %d)',
             n, c.user_count, c.item_count, c.seed)
    return Dataset(interactions, name=f'synth-{c.seed}')
