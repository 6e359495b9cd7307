import copy
import io
import math

import pytest
import torch
from pytest import approx

from engrank.dataset import Dataset, DatasetError, chronological_split
from engrank.featurizer import (FEATURE_NAMES, NUM_FEATURES, Normalizer, PruningError,
                                apply_normalizer, build_aggregates, extract_features,
                                feature_matrix, featurize_dataset, fit_normalizer,
                                normalize_groups, prune_outlier_users, read_letor,
                                split_groups_by_time, write_letor)
from engrank.synthgen import SynthConfig, generate

F = {name: i for i, name in enumerate(FEATURE_NAMES)}


def test_feature_names():
    assert NUM_FEATURES == 16
    assert len(set(FEATURE_NAMES)) == 16


def test_user_mean_engagement(make_tweet):
    agg = build_aggregates(Dataset([make_tweet('a', timestamp=1),
                                    make_tweet('b', timestamp=2, retweets=1, favorites=3)]))
    assert agg.users['u1'].mean_engagement == approx(2.0)


def test_item_mean_rating(make_tweet):
    agg = build_aggregates(Dataset([make_tweet('a', user_id='x', rating=7),
                                    make_tweet('b', user_id='y', rating=9)]))
    assert agg.items['i1'].mean_rating == approx(8.0)


def test_retweeted_set(make_tweet):
    agg = build_aggregates(Dataset([make_tweet('B', timestamp=1),
                                    make_tweet('A', user_id='u2', timestamp=2, retweet_of='B')]))
    assert 'B' in agg.retweeted
    assert 'A' not in agg.retweeted
    assert agg.items['i1'].retweet_count == 1


def test_empty_training_split():
    with pytest.raises(DatasetError):
        build_aggregates(Dataset([]))


def test_rating_feature(make_tweet):
    t = make_tweet('a', rating=8)
    v = extract_features(t, build_aggregates(Dataset([t])))
    assert v.dtype == torch.float64
    assert v.shape == (NUM_FEATURES,)
    assert v[F['rating']] == 8.0


def test_prior_median_lower_middle(make_tweet):
    rows = [make_tweet('a', rating=7, timestamp=1), make_tweet('b', rating=9, timestamp=2),
            make_tweet('c', rating=10, timestamp=3)]
    agg = build_aggregates(Dataset(rows))
    v = extract_features(rows[2], agg)
    assert v[F['rating_minus_prior_median']] == approx(3.0)


def test_prior_median_excludes_same_time(make_tweet):
    rows = [make_tweet('a', rating=2, timestamp=5), make_tweet('b', rating=9, timestamp=5)]
    agg = build_aggregates(Dataset(rows))
    assert extract_features(rows[1], agg)[F['rating_minus_prior_median']] == 0.0


def test_friend_ratio(make_tweet):
    t = make_tweet('a', friends=50, followers=200)
    v = extract_features(t, build_aggregates(Dataset([t])))
    assert v[F['sqrt_user_friend_ratio']] == approx(0.5)


def test_friend_ratio_clamped_denominator(make_tweet):
    t = make_tweet('a', friends=5, followers=0)
    v = extract_features(t, build_aggregates(Dataset([t])))
    assert v[F['sqrt_user_friend_ratio']] == approx(2.23607, abs=1e-5)


def test_user_engagement_features(make_tweet):
    rows = [make_tweet('a', timestamp=1), make_tweet('b', timestamp=2, favorites=4),
            make_tweet('c', timestamp=3, retweets=4)]
    v = extract_features(rows[0], build_aggregates(Dataset(rows)))
    assert v[F['sqrt_user_engagement']] == approx(1.63299, abs=1e-5)
    assert v[F['user_engaged']] == 1.0


def test_cold_start_zeros(make_tweet):
    agg = build_aggregates(Dataset([make_tweet('a')]))
    v = extract_features(make_tweet('z', user_id='new', item_id='unseen', rating=6, mention=True), agg)
    assert v[F['rating']] == 6.0
    assert v[F['has_mention']] == 1.0
    for name in FEATURE_NAMES[1:12] + ('item_retweet_count',):
        assert v[F[name]] == 0.0, name


def test_retweet_flags(make_tweet):
    rows = [make_tweet('B', timestamp=1), make_tweet('A', user_id='u2', timestamp=2, retweet_of='B')]
    agg = build_aggregates(Dataset(rows))
    original, retweet = (extract_features(t, agg) for t in rows)
    assert original[F['is_retweeted']] == 1.0
    assert original[F['is_retweet']] == 0.0
    assert retweet[F['is_retweet']] == 1.0
    assert retweet[F['is_retweeted']] == 0.0


def test_fit_normalizer():
    n = fit_normalizer([torch.full((NUM_FEATURES,), float(x), dtype=torch.float64) for x in (1, 2, 3)])
    assert n.mean[0].item() == approx(2.0)
    assert n.std[0].item() == approx(math.sqrt(2 / 3))


def test_fit_normalizer_constant():
    n = fit_normalizer(torch.full((2, NUM_FEATURES), 5.0, dtype=torch.float64))
    assert n.mean[0].item() == 5.0
    assert n.std[0].item() == 0.0


def test_fit_normalizer_empty():
    with pytest.raises(ValueError):
        fit_normalizer([])


def test_apply_normalizer():
    n = Normalizer(torch.full((NUM_FEATURES,), 2.0, dtype=torch.float64),
                   torch.tensor([0.8165] + [0.0] * (NUM_FEATURES - 1), dtype=torch.float64))
    v = apply_normalizer(n, torch.full((NUM_FEATURES,), 3.0, dtype=torch.float64))
    assert v[0].item() == approx(1.22474, abs=1e-4)
    assert torch.all(v[1:] == 0.0)
    assert apply_normalizer(n, n.mean)[0].item() == 0.0


def test_normalizer_state_round_trip():
    n = fit_normalizer(torch.randn(20, NUM_FEATURES, dtype=torch.float64,
                                   generator=torch.manual_seed(3)))
    restored = Normalizer.from_state_dict(n.state_dict())
    assert torch.equal(restored.mean, n.mean)
    assert torch.equal(restored.std, n.std)


def user_rows(make_tweet, user_id, n):
    return [make_tweet(f'{user_id}-{i:03d}', user_id=user_id, timestamp=i) for i in range(n)]


@pytest.mark.parametrize('count, kept', [(3, False), (4, True), (200, True), (201, False)])
def test_prune_boundaries(make_tweet, count, kept):
    d = Dataset(user_rows(make_tweet, 'candidate', count) + user_rows(make_tweet, 'anchor', 10))
    pruned = prune_outlier_users(d)
    assert ('candidate' in pruned.users()) == kept
    assert 'anchor' in pruned.users()


def test_prune_everything(make_tweet):
    with pytest.raises(PruningError):
        prune_outlier_users(Dataset(user_rows(make_tweet, 'a', 2)))


def test_featurize_groups(small_dataset):
    groups = featurize_dataset(small_dataset, build_aggregates(small_dataset))
    assert [g.user_id for g in groups] == ['ua', 'ub']
    assert [len(g) for g in groups] == [4, 4]
    for g in groups:
        expected = [small_dataset.get(t).engagement for t in g.tweet_ids]
        assert g.labels.tolist() == expected
        assert list(g.timestamps) == sorted(g.timestamps)


def test_featurize_cold_user(small_dataset, make_tweet):
    agg = build_aggregates(small_dataset)
    groups = featurize_dataset(Dataset([make_tweet('x1', user_id='newcomer')]), agg)
    assert len(groups) == 1
    assert groups[0].features[0, F['user_mean_rating']] == 0.0


def test_normalized_training_matrix(small_dataset):
    raw = featurize_dataset(small_dataset, build_aggregates(small_dataset))
    n = fit_normalizer(feature_matrix(raw))
    matrix = feature_matrix(normalize_groups(raw, n))
    for f in range(NUM_FEATURES):
        column = matrix[:, f]
        assert abs(column.mean().item()) < 1e-9
        if n.std[f] > 0:
            assert column.pow(2).mean().sqrt().item() == approx(1.0, abs=1e-9)
        else:
            assert torch.all(column == 0.0)


def test_split_groups_by_time(small_dataset):
    groups = featurize_dataset(small_dataset, build_aggregates(small_dataset))
    fit, valid = split_groups_by_time(groups, 0.25)
    assert sum(len(g) for g in fit) == 6
    assert sum(len(g) for g in valid) == 2
    latest_fit = max(max(g.timestamps) for g in fit)
    earliest_valid = min(min(g.timestamps) for g in valid)
    assert latest_fit <= earliest_valid


def test_split_groups_no_holdout(small_dataset):
    groups = featurize_dataset(small_dataset, build_aggregates(small_dataset))
    fit, valid = split_groups_by_time(groups, 0.0)
    assert valid == []
    assert len(fit) == 2


def test_letor_format(make_tweet):
    t = make_tweet('tw1', rating=8, retweets=2, favorites=1)
    groups = featurize_dataset(Dataset([t]), build_aggregates(Dataset([t])))
    out = io.StringIO()
    write_letor(groups, out)
    line = out.getvalue()
    assert line.startswith('3 qid:1 1:8.000000 2:0.000000 ')
    assert line.endswith(' 16:0.000000 # tw1\n')
    assert len(line.split()) == NUM_FEATURES + 4


def test_letor_reimport(small_dataset):
    groups = featurize_dataset(small_dataset, build_aggregates(small_dataset))
    out = io.StringIO()
    write_letor(groups, out)
    out.seek(0)
    back = read_letor(out)
    assert [g.tweet_ids for g in back] == [g.tweet_ids for g in groups]
    assert torch.allclose(feature_matrix(back), feature_matrix(groups), atol=1e-6)
    assert torch.equal(torch.cat([g.labels for g in back]), torch.cat([g.labels for g in groups]))


def test_letor_malformed():
    with pytest.raises(ValueError):
        read_letor(io.StringIO('1 qid:1 1:0.5 # x\n'))


def test_constant_irrational_column_normalizes_to_zero():
    matrix = torch.full((8, NUM_FEATURES), math.sqrt(0.5), dtype=torch.float64)
    matrix[:, 0] = torch.arange(8, dtype=torch.float64)
    n = fit_normalizer(matrix)
    assert n.std[F['sqrt_user_friend_ratio']].item() == 0.0
    normalized = apply_normalizer(n, matrix)
    assert torch.all(normalized[:, 1:] == 0.0)
    assert abs(normalized[:, 0].mean().item()) < 1e-9
    unseen = torch.full((NUM_FEATURES,), 0.8, dtype=torch.float64)
    assert torch.all(apply_normalizer(n, unseen)[1:] == 0.0)


def synthetic_split():
    dataset = generate(SynthConfig(user_count=30, item_count=10, retweet_fraction=0.2, seed=3))
    train, test, evaluation = chronological_split(dataset)
    return train, Dataset(test.interactions + evaluation.interactions, 'held-out')


def test_scoring_other_splits_leaves_aggregates_unchanged():
    train, held_out = synthetic_split()
    agg = build_aggregates(train)
    before = copy.deepcopy(agg)
    featurize_dataset(held_out, agg)
    assert agg == before
    assert agg == build_aggregates(train)


def test_feature_matrix_is_deterministic():
    train, held_out = synthetic_split()
    first = feature_matrix(featurize_dataset(held_out, build_aggregates(train)))
    second = feature_matrix(featurize_dataset(held_out, build_aggregates(train)))
    assert first.numpy().tobytes() == second.numpy().tobytes()


def test_engaged_flags_follow_engagement_features():
    train, held_out = synthetic_split()
    agg = build_aggregates(train)
    for dataset in (train, held_out):
        matrix = feature_matrix(featurize_dataset(dataset, agg))
        for flag, amount in (('user_engaged', 'sqrt_user_engagement'),
                             ('item_engaged', 'sqrt_item_engagement')):
            expected = (matrix[:, F[amount]] > 0).to(torch.float64)
            assert torch.equal(matrix[:, F[flag]], expected)
