"""Training and scoring procedures shared by the commands."""

import logging

from .baselines import BASELINES
from .featurizer import (build_aggregates, featurize_dataset, feature_matrix, fit_normalizer,
                         normalize_groups, prune_outlier_users, split_groups_by_time,
                         DEFAULT_MIN_INTERACTIONS, DEFAULT_MAX_INTERACTIONS)
from .metrics import mean_ndcg
from .ranker import (BlendMember, LinearBlend, TrainedModel, feature_importance,
                     fit_blend_weights, train_lambdamart, train_mart)

log = logging.getLogger(__name__)

ROLES = ('lambdamart', 'mart')


def fit_engagement_model(train, params, min_interactions=DEFAULT_MIN_INTERACTIONS,
                         max_interactions=DEFAULT_MAX_INTERACTIONS, holdout=0.2,
                         grid_steps=20, progress=False):
    """Learns the LambdaMART + MART blend from a training split.

    Aggregates come from the whole split; pruning only drops the outlier users'
    training rows. The latest `holdout` share of the remaining entries drives
    early stopping and the blend weights."""
    agg = build_aggregates(train)
    pruned = prune_outlier_users(train, min_interactions, max_interactions)
    raw = featurize_dataset(pruned, agg)
    normalizer = fit_normalizer(feature_matrix(raw))
    fit, valid = split_groups_by_time(normalize_groups(raw, normalizer), holdout)
    if not fit:
        raise ValueError(f'holdout {holdout} leaves no training entries')
    log.info('training on %d users (%d entries), validating on %d users (%d entries)',
             len(fit), sum(len(g) for g in fit), len(valid), sum(len(g) for g in valid))

    lambdamart = train_lambdamart(fit, valid, params, progress=progress)
    mart = train_mart(fit, valid, params, progress=progress)
    if valid:
        blend = fit_blend_weights([lambdamart, mart], valid, params.ndcg_cutoff,
                                  roles=ROLES, grid_steps=grid_steps)
    else:
        log.warning('no validation entries; keeping LambdaMART alone')
        blend = LinearBlend([BlendMember(ROLES[0], lambdamart, 1.0),
                             BlendMember(ROLES[1], mart, 0.0)])

    ranked = sorted(feature_importance(blend).items(), key=lambda kv: -kv[1])
    log.debug('feature importance: %s', ', '.join(f'{name}={gain:.4g}' for name, gain in ranked))
    return TrainedModel(blend, params, normalizer)


def featurize_for_scoring(train, data, normalizer=None):
    """Groups of `data` against training aggregates, as (normalized, raw, aggregates)."""
    agg = build_aggregates(train)
    raw = featurize_dataset(data, agg)
    groups = normalize_groups(raw, normalizer) if normalizer is not None else raw
    return groups, raw, agg


def score_groups(scorer, groups, raw_groups, agg, seed=0):
    if isinstance(scorer, str):
        if scorer not in BASELINES:
            raise ValueError(f'unknown baseline {scorer!r}, expected one of {", ".join(BASELINES)}')
        score = BASELINES[scorer]
        return [score(g, agg, seed) for g in raw_groups]
    return [scorer.predict(g.features) for g in groups]


def evaluate_scorer(scorer, train, data, k=10, seed=0):
    normalizer = None if isinstance(scorer, str) else scorer.normalizer
    groups, raw, agg = featurize_for_scoring(train, data, normalizer)
    report = mean_ndcg(raw, score_groups(scorer, groups, raw, agg, seed), k)
    log.info('%s on %d users: %s', scorer if isinstance(scorer, str) else 'model',
             len(raw), report.summary())
    return report
