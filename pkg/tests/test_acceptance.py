import logging

import pytest
from pytest import mark

from engrank.dataset import Dataset, chronological_split
from engrank.pipeline import evaluate_scorer, fit_engagement_model
from engrank.ranker import BoostParams
from engrank.synthgen import SynthConfig, generate

_log = logging.getLogger(__name__)


@pytest.fixture(scope='module')
def synthetic_run():
    "Trains on a 500 user synthetic corpus and scores the held-out 20% with every scorer."
    dataset = generate(SynthConfig(user_count=500, item_count=100, interactions_per_user=(20, 40),
                                   rating_effect=1.0, metadata_effect=1.0, seed=7))
    train, test, evaluation = chronological_split(dataset)
    held_out = Dataset(test.interactions + evaluation.interactions, 'held-out')
    model = fit_engagement_model(train, BoostParams(max_trees=300, seed=7))
    results = {name: evaluate_scorer(name, train, held_out, k=10, seed=7).mean_ndcg
               for name in ('recRating', 'recHEI', 'recRandom')}
    results['blend'] = evaluate_scorer(model, train, held_out, k=10).mean_ndcg
    _log.info('mean nDCG@10: %s', results)
    return results


@mark.slow
def test_blend_beats_rating(synthetic_run):
    assert synthetic_run['blend'] - synthetic_run['recRating'] >= 0.02


@mark.slow
def test_rating_beats_random(synthetic_run):
    assert synthetic_run['recRating'] - synthetic_run['recRandom'] >= 0.02


@mark.slow
def test_hei_beats_random(synthetic_run):
    assert synthetic_run['recHEI'] > synthetic_run['recRandom']
