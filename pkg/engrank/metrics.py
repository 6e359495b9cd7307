"""DCG@K and nDCG@K with exponential gain and log2 position discount."""

from dataclasses import dataclass
import math

from .utils import write_csv

# 2^1000 summed over millions of positions still fits in a double
MAX_GAIN_EXPONENT = 1000


def _as_list(values):
    return values.tolist() if hasattr(values, 'tolist') else list(values)


def gain(label):
    """2^label - 1, with labels above MAX_GAIN_EXPONENT sharing the top gain."""
    return 2.0 ** min(int(label), MAX_GAIN_EXPONENT) - 1.0


def dcg_at_k(labels, k):
    """Sum over the first k positions of gain(label) / log2(position + 1)."""
    if k < 1:
        raise ValueError(f'cutoff must be positive, got {k}')
    total = 0.0
    for position, label in enumerate(_as_list(labels)[:k], start=1):
        total += gain(label) / math.log2(position + 1)
    return total


def ranking_order(scores):
    """Indices by descending score, ties by ascending original index."""
    scores = _as_list(scores)
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def ndcg_at_k(scores, labels, k):
    scores = _as_list(scores)
    labels = _as_list(labels)
    if len(scores) != len(labels):
        raise ValueError(f'{len(scores)} scores for {len(labels)} labels')
    ideal = dcg_at_k(sorted(labels, reverse=True), k)
    if ideal == 0.0:
        # every ordering of all-zero labels is ideal
        return 1.0
    ranked = [labels[i] for i in ranking_order(scores)]
    return dcg_at_k(ranked, k) / ideal


@dataclass
class EvalReport:
    per_user: list
    mean_ndcg: float
    k: int

    def summary(self):
        return f'mean_ndcg@{self.k}={self.mean_ndcg:.6f}'

    def hard_users(self, threshold):
        """Users whose nDCG@k falls below `threshold`, hardest first."""
        hard = [(user_id, value) for user_id, value in self.per_user if value < threshold]
        return sorted(hard, key=lambda row: (row[1], row[0]))

    def write_csv(self, filename):
        write_csv(filename, ('user_id', 'ndcg'), ((u, repr(v)) for u, v in self.per_user))


def mean_ndcg(groups, scores, k):
    if not groups:
        raise ValueError('cannot average nDCG over zero users')
    if len(scores) != len(groups):
        raise ValueError(f'{len(scores)} score lists for {len(groups)} groups')
    per_user = [(g.user_id, ndcg_at_k(s, g.labels, k)) for g, s in zip(groups, scores)]
    mean = sum(value for _, value in per_user) / len(per_user)
    return EvalReport(per_user=per_user, mean_ndcg=mean, k=k)
