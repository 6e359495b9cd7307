import io
import json

import pytest
from pytest import approx

from engrank.dataset import (Dataset, DuplicateTweetError, ParseError, SchemaError, SplitError,
                             chronological_split, detect_mention, interaction_stats,
                             load_dataset, parse_tweets, rating_engagement_histogram,
                             save_dataset, serialize_tweets)


def record(**overrides):
    base = {'user_id': 'u1', 'item_id': 'i1', 'tweet_id': 't1', 'rating': 8,
            'timestamp': 1360000000, 'retweet_count': 2, 'favorite_count': 1,
            'user_followers': 10, 'user_friends': 5, 'user_statuses': 100,
            'has_mention': False}
    base.update(overrides)
    return base


def lines(*records):
    return io.StringIO(''.join(json.dumps(r) + '\n' for r in records))


def test_parse_engagement():
    d = parse_tweets(lines(record()))
    assert len(d) == 1
    t = d.get('t1')
    assert t.engagement == 3
    assert t.retweet_of is None
    assert not t.is_retweet


def test_parse_retweet():
    d = parse_tweets(lines(record(), record(tweet_id='t2', retweeted_status_id='t1')))
    assert d.get('t2').retweet_of == 't1'
    assert d.get('t2').is_retweet


def test_parse_missing_rating():
    r = record()
    del r['rating']
    with pytest.raises(SchemaError) as e:
        parse_tweets(lines(r))
    assert e.value.field == 'rating'
    assert 'rating' in str(e.value)


@pytest.mark.parametrize('field, value', [
    ('rating', 11),
    ('rating', -1),
    ('retweet_count', -2),
    ('rating', '8'),
    ('has_mention', 'yes'),
])
def test_parse_bad_values(field, value):
    with pytest.raises(SchemaError):
        parse_tweets(lines(record(**{field: value})))


def test_parse_malformed_json_names_line():
    stream = io.StringIO(json.dumps(record()) + '\n{"user_id": \n')
    with pytest.raises(ParseError) as e:
        parse_tweets(stream)
    assert e.value.line_no == 2


def test_parse_duplicate_tweet():
    with pytest.raises(DuplicateTweetError):
        parse_tweets(lines(record(), record(user_id='u2')))


def test_parse_self_retweet():
    with pytest.raises(SchemaError):
        parse_tweets(lines(record(retweeted_status_id='t1')))


def test_parse_skips_blank_lines():
    stream = io.StringIO('\n' + json.dumps(record()) + '\n\n')
    assert len(parse_tweets(stream)) == 1


def test_mention_from_text():
    r = record(text='loved it, thanks @imdb')
    del r['has_mention']
    assert parse_tweets(lines(r)).get('t1').has_mention


@pytest.mark.parametrize('text, expected', [
    ('I rated The Matrix 9/10 @imdb', True),
    ('mail me at someone@', False),
    ('no mentions here', False),
    ('@ alone', False),
])
def test_detect_mention(text, expected):
    assert detect_mention(text) == expected


def test_serialize_round_trip(small_dataset, tmp_path):
    path = tmp_path / 'data.jsonl'
    save_dataset(small_dataset, path)
    loaded = load_dataset(path)
    assert loaded.interactions == small_dataset.interactions


def test_serialize_keeps_retweets(make_tweet):
    d = Dataset([make_tweet('a'), make_tweet('b', retweet_of='a')])
    out = io.StringIO()
    serialize_tweets(d, out)
    out.seek(0)
    assert parse_tweets(out).interactions == d.interactions


def test_dataset_rejects_duplicates(make_tweet):
    with pytest.raises(DuplicateTweetError):
        Dataset([make_tweet('a'), make_tweet('a', user_id='u2')])


def test_split_sizes(make_tweet):
    d = Dataset([make_tweet(f't{i:02d}', timestamp=i) for i in range(10)])
    train, test, evaluation = chronological_split(d)
    assert (len(train), len(test), len(evaluation)) == (8, 1, 1)
    assert [t.tweet_id for t in evaluation] == ['t09']


def test_split_large_sizes(make_tweet):
    d = Dataset([make_tweet(f't{i:06d}', timestamp=i) for i in range(212857)])
    sizes = tuple(len(part) for part in chronological_split(d))
    assert sizes == (170285, 21285, 21287)


def test_split_ties_by_tweet_id(make_tweet):
    d = Dataset([make_tweet('b', timestamp=5), make_tweet('a', timestamp=5)] +
                [make_tweet(f'c{i}', timestamp=i) for i in range(8)])
    train, _, _ = chronological_split(d)
    ids = [t.tweet_id for t in train]
    assert ids == sorted(ids, key=lambda i: (d.get(i).timestamp, i))
    assert ids.index('a') < ids.index('b')


def test_split_is_chronological(make_tweet):
    d = Dataset([make_tweet(f't{i}', timestamp=(i * 7919) % 101) for i in range(50)])
    train, test, evaluation = chronological_split(d)
    assert max(t.timestamp for t in train) <= min(t.timestamp for t in test)
    assert max(t.timestamp for t in test) <= min(t.timestamp for t in evaluation)
    assert len(train) + len(test) + len(evaluation) == len(d)


@pytest.mark.parametrize('fractions', [(0.8, 0.1), (0.8, 0.3, 0.1), (1.0, 0.0, 0.0)])
def test_split_bad_fractions(small_dataset, fractions):
    with pytest.raises(SplitError):
        chronological_split(small_dataset, fractions)


def test_split_empty():
    with pytest.raises(SplitError):
        chronological_split(Dataset([]))


def test_stats(make_tweet):
    d = Dataset([make_tweet('a1', user_id='a', timestamp=3), make_tweet('a2', user_id='a', timestamp=1),
                 make_tweet('a3', user_id='a', timestamp=9), make_tweet('b1', user_id='b', timestamp=4)])
    s = interaction_stats(d)
    assert s.mean_per_user == approx(2.0)
    assert s.median_per_user == 1
    assert s.max_per_user == 3
    assert s.min_per_user == 1
    assert (s.first_timestamp, s.last_timestamp) == (1, 9)
    assert s.user_count == 2


def test_stats_single(make_tweet):
    s = interaction_stats(Dataset([make_tweet('a')]))
    assert s.min_per_user == s.max_per_user == s.median_per_user == 1
    assert s.mean_per_user == 1.0


def test_histogram(make_tweet):
    d = Dataset([make_tweet('a', rating=8), make_tweet('b', rating=8),
                 make_tweet('c', rating=9, favorites=1)])
    assert rating_engagement_histogram(d) == [(8, 0, 2), (9, 1, 1)]


def test_histogram_empty(small_dataset):
    assert rating_engagement_histogram(small_dataset.filter(lambda t: False)) == []
