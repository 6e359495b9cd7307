"""Reference recommenders that score a user's triples without training."""

import numpy as np
import torch

from .utils import stable_key


def rec_rating(g):
    """The rating the user gave in the tweet, read from the raw record."""
    if len(g.ratings) != len(g):
        raise ValueError(f'group {g.user_id!r} carries no raw ratings')
    return torch.tensor(g.ratings, dtype=torch.float64)


def rec_hei(g, agg):
    """Mean training engagement of the triple's item; 0.0 for unseen items."""
    scores = []
    for item_id in g.item_ids:
        item = agg.items.get(item_id)
        scores.append(item.mean_engagement if item is not None else 0.0)
    return torch.tensor(scores, dtype=torch.float64)


def rec_random(g, seed):
    """Uniform [0, 1) scores from a counter-based stream keyed by (seed, user_id)."""
    bits = np.random.Philox(key=stable_key(seed, g.user_id))
    return torch.from_numpy(np.random.Generator(bits).random(len(g)))


def rec_ideal(g):
    return g.labels.to(torch.float64)


BASELINES = {
    'recRating': lambda g, agg, seed: rec_rating(g),
    'recHEI': lambda g, agg, seed: rec_hei(g, agg),
    'recRandom': lambda g, agg, seed: rec_random(g, seed),
    'recIdeal': lambda g, agg, seed: rec_ideal(g),
}
