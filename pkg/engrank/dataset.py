"""Tweet-interaction records: parsing, chronological splits and descriptive statistics."""

from collections import Counter, defaultdict
from dataclasses import dataclass, field
import json
import logging
import math
import re

from .utils import lower_median, open_text

log = logging.getLogger(__name__)

REQUIRED_FIELDS = ('user_id', 'item_id', 'tweet_id', 'rating', 'timestamp',
                   'retweet_count', 'favorite_count', 'user_followers',
                   'user_friends', 'user_statuses', 'has_mention')
COUNT_FIELDS = ('retweet_count', 'favorite_count', 'user_followers',
                'user_friends', 'user_statuses')
RETWEET_FIELD = 'retweeted_status_id'

MIN_RATING = 0
MAX_RATING = 10

_MENTION = re.compile(r'@\w')


class DatasetError(ValueError):
    pass


class ParseError(DatasetError):
    def __init__(self, line_no, message):
        super().__init__(f'line {line_no}: {message}')
        self.line_no = line_no


class SchemaError(DatasetError):
    def __init__(self, field_name, message, line_no=None):
        where = f'line {line_no}: ' if line_no is not None else ''
        super().__init__(f'{where}field "{field_name}" {message}')
        self.field = field_name
        self.line_no = line_no


class DuplicateTweetError(DatasetError):
    def __init__(self, tweet_id, line_no=None):
        where = f'line {line_no}: ' if line_no is not None else ''
        super().__init__(f'{where}duplicate tweet_id {tweet_id!r}')
        self.tweet_id = tweet_id


class SplitError(DatasetError):
    pass


def detect_mention(text):
    """True if the text holds "@" directly followed by a username character."""
    return _MENTION.search(text) is not None


@dataclass(frozen=True)
class Interaction:
    user_id: str
    item_id: str
    tweet_id: str
    rating: int
    timestamp: int
    retweet_count: int
    favorite_count: int
    user_followers: int
    user_friends: int
    user_statuses: int
    has_mention: bool
    retweet_of: str = None

    @property
    def engagement(self):
        return self.retweet_count + self.favorite_count

    @property
    def is_retweet(self):
        return self.retweet_of is not None

    def sort_key(self):
        return (self.timestamp, self.tweet_id)

    def to_record(self):
        record = {
            'user_id': self.user_id,
            'item_id': self.item_id,
            'tweet_id': self.tweet_id,
            'rating': self.rating,
            'timestamp': self.timestamp,
            'retweet_count': self.retweet_count,
            'favorite_count': self.favorite_count,
            'user_followers': self.user_followers,
            'user_friends': self.user_friends,
            'user_statuses': self.user_statuses,
            'has_mention': self.has_mention,
        }
        if self.retweet_of is not None:
            record[RETWEET_FIELD] = self.retweet_of
        return record

    @classmethod
    def from_record(cls, record, line_no=None):
        if not isinstance(record, dict):
            raise ParseError(line_no, 'expected a JSON object')
        if 'has_mention' not in record and isinstance(record.get('text'), str):
            record = dict(record, has_mention=detect_mention(record['text']))
        for name in REQUIRED_FIELDS:
            if name not in record:
                raise SchemaError(name, 'is missing', line_no)

        def opaque(name):
            value = record[name]
            if isinstance(value, bool) or not isinstance(value, (str, int)):
                raise SchemaError(name, 'must be a string', line_no)
            return str(value)

        def integer(name, low=0, high=None):
            value = record[name]
            if isinstance(value, bool) or not isinstance(value, int):
                raise SchemaError(name, 'must be an integer', line_no)
            if value < low or (high is not None and value > high):
                bound = f'[{low}, {high}]' if high is not None else f'>= {low}'
                raise SchemaError(name, f'out of range {bound}: {value}', line_no)
            return value

        has_mention = record['has_mention']
        if not isinstance(has_mention, bool):
            raise SchemaError('has_mention', 'must be a boolean', line_no)

        tweet_id = opaque('tweet_id')
        retweet_of = None
        if record.get(RETWEET_FIELD) is not None:
            retweet_of = opaque(RETWEET_FIELD)
            if retweet_of == tweet_id:
                raise SchemaError(RETWEET_FIELD, 'must differ from tweet_id', line_no)

        counts = {name: integer(name) for name in COUNT_FIELDS}
        return cls(user_id=opaque('user_id'),
                   item_id=opaque('item_id'),
                   tweet_id=tweet_id,
                   rating=integer('rating', MIN_RATING, MAX_RATING),
                   timestamp=integer('timestamp', low=-2 ** 63),
                   has_mention=has_mention,
                   retweet_of=retweet_of,
                   **counts)


@dataclass(frozen=True)
class Dataset:
    interactions: tuple
    name: str = ''
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        interactions = tuple(self.interactions)
        object.__setattr__(self, 'interactions', interactions)
        index = {}
        for position, t in enumerate(interactions):
            if t.tweet_id in index:
                raise DuplicateTweetError(t.tweet_id)
            index[t.tweet_id] = position
        object.__setattr__(self, '_index', index)

    def __len__(self):
        return len(self.interactions)

    def __iter__(self):
        return iter(self.interactions)

    def __contains__(self, tweet_id):
        return tweet_id in self._index

    def get(self, tweet_id):
        position = self._index.get(tweet_id)
        return None if position is None else self.interactions[position]

    def users(self):
        return sorted({t.user_id for t in self.interactions})

    def items(self):
        return sorted({t.item_id for t in self.interactions})

    def by_user(self):
        groups = defaultdict(list)
        for t in self.interactions:
            groups[t.user_id].append(t)
        return dict(groups)

    def sorted(self):
        """Copy ordered by (timestamp, tweet_id)."""
        return Dataset(sorted(self.interactions, key=Interaction.sort_key), self.name)

    def filter(self, predicate, name=None):
        return Dataset([t for t in self.interactions if predicate(t)],
                       self.name if name is None else name)


def parse_tweets(stream, name=''):
    interactions = []
    seen = set()
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(line_no, f'malformed JSON ({e.msg})') from e
        t = Interaction.from_record(record, line_no)
        if t.tweet_id in seen:
            raise DuplicateTweetError(t.tweet_id, line_no)
        seen.add(t.tweet_id)
        interactions.append(t)
    return Dataset(interactions, name)


def serialize_tweets(dataset, stream):
    for t in dataset:
        stream.write(json.dumps(t.to_record()))
        stream.write('\n')


def load_dataset(path, name=None):
    with open_text(path) as f:
        dataset = parse_tweets(f, name=str(path) if name is None else name)
    log.info('loaded %d interactions from %s', len(dataset), path)
    return dataset


def save_dataset(dataset, path):
    with open_text(path, 'w') as f:
        serialize_tweets(dataset, f)
    log.info('wrote %d interactions to %s', len(dataset), path)


def chronological_split(dataset, fractions=(0.8, 0.1, 0.1)):
    """Cuts the time-ordered dataset into (train, test, eval) at floor boundaries."""
    if len(fractions) != 3:
        raise SplitError(f'expected three fractions, got {len(fractions)}')
    if any(f <= 0 for f in fractions):
        raise SplitError(f'fractions must be positive: {tuple(fractions)}')
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise SplitError(f'fractions must sum to 1.0, got {sum(fractions)!r}')
    if len(dataset) == 0:
        raise SplitError('cannot split an empty dataset')

    ordered = sorted(dataset.interactions, key=Interaction.sort_key)
    n = len(ordered)
    n_train = math.floor(n * fractions[0] + 1e-9)
    n_test = math.floor(n * fractions[1] + 1e-9)
    cut = n_train + n_test
    return (Dataset(ordered[:n_train], f'{dataset.name}.train'),
            Dataset(ordered[n_train:cut], f'{dataset.name}.test'),
            Dataset(ordered[cut:], f'{dataset.name}.eval'))


@dataclass(frozen=True)
class StatsReport:
    user_count: int
    item_count: int
    tweet_count: int
    min_per_user: int
    max_per_user: int
    mean_per_user: float
    median_per_user: int
    first_timestamp: int
    last_timestamp: int

    def rows(self):
        return [(name, getattr(self, name)) for name in self.__dataclass_fields__]


def interaction_stats(dataset):
    if len(dataset) == 0:
        raise DatasetError('statistics of an empty dataset')
    per_user = Counter(t.user_id for t in dataset)
    counts = list(per_user.values())
    timestamps = [t.timestamp for t in dataset]
    return StatsReport(user_count=len(per_user),
                       item_count=len({t.item_id for t in dataset}),
                       tweet_count=len(dataset),
                       min_per_user=min(counts),
                       max_per_user=max(counts),
                       mean_per_user=len(dataset) / len(per_user),
                       median_per_user=lower_median(counts),
                       first_timestamp=min(timestamps),
                       last_timestamp=max(timestamps))


def rating_engagement_histogram(dataset):
    """Sorted (rating, engagement, frequency) rows for every observed pair."""
    frequency = Counter((t.rating, t.engagement) for t in dataset)
    return [(rating, engagement, n) for (rating, engagement), n in sorted(frequency.items())]
