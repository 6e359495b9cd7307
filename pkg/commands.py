from dataclasses import replace
import logging
import os

from engrank.baselines import BASELINES
from engrank.config import blend_grid_steps, boost_params, synth_config
from engrank.dataset import (chronological_split, interaction_stats, load_dataset,
                             rating_engagement_histogram, save_dataset)
from engrank.featurizer import write_letor
from engrank.pipeline import evaluate_scorer, featurize_for_scoring, fit_engagement_model, score_groups
from engrank.ranker import load_model, order_tweets, rank_user, save_model
from engrank.synthgen import generate
from engrank.utils import open_text, write_csv

log = logging.getLogger(__name__)

SPLIT_NAMES = ('train', 'test', 'eval')


def load_scorer(model):
    """A baseline name or the path of a saved model."""
    if model in BASELINES:
        return model
    return load_model(model)


class Synth:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"output": ("PATH", {"aliases": ["-o"]})},
                "optional": {"users": ("INT", {"min": 1, "config": "synth.user_count"}),
                             "items": ("INT", {"min": 1, "config": "synth.item_count"}),
                             "min_per_user": ("INT", {"min": 1}),
                             "max_per_user": ("INT", {"min": 1}),
                             "rating_effect": ("FLOAT", {"min": 0.0, "config": "synth.rating_effect"}),
                             "metadata_effect": ("FLOAT", {"min": 0.0, "config": "synth.metadata_effect"}),
                             "noise": ("FLOAT", {"min": 0.0, "config": "synth.noise"}),
                             "retweet_fraction": ("FLOAT", {"min": 0.0, "max": 1.0,
                                                            "config": "synth.retweet_fraction"}),
                             }}
    FUNCTION = "synthesize"
    DESCRIPTION = "generate a synthetic tweet-interaction dataset"

    CATEGORY = "data"

    def synthesize(self, config, output, min_per_user=None, max_per_user=None):
        c = synth_config(config)
        low, high = c.interactions_per_user
        c = replace(c, interactions_per_user=(low if min_per_user is None else min_per_user,
                                              high if max_per_user is None else max_per_user))
        dataset = generate(c)
        save_dataset(dataset, output)
        return (dataset, )


class Split:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"input": ("PATH", {"aliases": ["-i"]}),
                             "output": ("PATH", {"aliases": ["-o"]})},
                "optional": {"fractions": ("STRING", )}}
    FUNCTION = "split"
    DESCRIPTION = "chronological train/test/eval split into a directory"

    CATEGORY = "data"

    def split(self, config, input, output, fractions=None):
        if fractions is None:
            fractions = list(config.split.fractions)
        else:
            try:
                fractions = [float(f) for f in fractions.split(',')]
            except ValueError:
                raise ValueError(f'--fractions expects comma separated numbers, got {fractions!r}') from None
        parts = chronological_split(load_dataset(input), fractions)
        for name, part in zip(SPLIT_NAMES, parts):
            save_dataset(part, os.path.join(output, f'{name}.jsonl'))
        return parts


class Stats:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"input": ("PATH", {"aliases": ["-i"]})},
                "optional": {"stats_csv": ("PATH", ),
                             "histogram_csv": ("PATH", )}}
    FUNCTION = "describe"
    DESCRIPTION = "per-user counts and the rating/engagement histogram"

    CATEGORY = "data"

    def describe(self, config, input, stats_csv=None, histogram_csv=None):
        dataset = load_dataset(input)
        report = interaction_stats(dataset)
        if stats_csv is not None:
            write_csv(stats_csv, ('statistic', 'value'), report.rows())
        if histogram_csv is not None:
            write_csv(histogram_csv, ('rating', 'engagement', 'frequency'),
                      rating_engagement_histogram(dataset))
        for name, value in report.rows():
            print(f'{name}={value}')
        return (report, )


class Train:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"train": ("PATH", ),
                             "output": ("PATH", {"aliases": ["-o"]})},
                "optional": {"leaves": ("INT", {"min": 1, "max": 4096, "config": "boost.leaves_per_tree"}),
                             "shrinkage": ("FLOAT", {"min": 1e-6, "max": 1.0, "config": "boost.shrinkage"}),
                             "early_stop": ("INT", {"min": 1, "config": "boost.early_stop_rounds"}),
                             "max_trees": ("INT", {"min": 1, "config": "boost.max_trees"}),
                             "min_samples_leaf": ("INT", {"min": 1, "config": "boost.min_samples_leaf"}),
                             "sigma": ("FLOAT", {"min": 1e-6, "config": "boost.sigma"}),
                             "prune_min": ("INT", {"min": 0, "config": "prune.min_interactions"}),
                             "prune_max": ("INT", {"min": 1, "config": "prune.max_interactions"}),
                             "holdout": ("FLOAT", {"min": 0.0, "max": 0.95, "config": "validation.holdout"}),
                             "quiet": ("BOOLEAN", {"aliases": ["-q"]}),
                             }}
    FUNCTION = "train_model"
    DESCRIPTION = "learn the LambdaMART + MART blend and save it as JSON"

    CATEGORY = "training"

    def train_model(self, config, train, output, quiet=False):
        model = fit_engagement_model(load_dataset(train), boost_params(config),
                                     min_interactions=config.prune.min_interactions,
                                     max_interactions=config.prune.max_interactions,
                                     holdout=config.validation.holdout,
                                     grid_steps=blend_grid_steps(config),
                                     progress=not quiet)
        save_model(model, output)
        return (model, )


class Eval:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"model": ("STRING", ),
                             "train": ("PATH", ),
                             "data": ("PATH", )},
                "optional": {"report": ("PATH", ),
                             "hard_threshold": ("FLOAT", {"min": 0.0, "max": 1.0}),
                             "hard_csv": ("PATH", )}}
    FUNCTION = "evaluate"
    DESCRIPTION = "mean nDCG@k of a model file or a baseline over a split"

    CATEGORY = "evaluation"

    def evaluate(self, config, model, train, data, report=None, hard_threshold=None, hard_csv=None):
        k = config.boost.ndcg_cutoff
        result = evaluate_scorer(load_scorer(model), load_dataset(train), load_dataset(data),
                                 k=k, seed=config.boost.seed)
        if report is not None:
            result.write_csv(report)
        print(result.summary())
        if hard_threshold is not None:
            hard = result.hard_users(hard_threshold)
            print(f'hard_users@{k}<{hard_threshold}={len(hard)}')
            if hard_csv is not None:
                write_csv(hard_csv, ('user_id', 'ndcg'), ((u, repr(v)) for u, v in hard))
        return (result, )


class Rank:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"model": ("STRING", ),
                             "train": ("PATH", ),
                             "data": ("PATH", ),
                             "user": ("STRING", )}}
    FUNCTION = "rank"
    DESCRIPTION = "print one user's tweet_ids, most engaging first"

    CATEGORY = "evaluation"

    def rank(self, config, model, train, data, user):
        scorer = load_scorer(model)
        data = load_dataset(data)
        user_data = data.filter(lambda t: t.user_id == user)
        if len(user_data) == 0:
            raise ValueError(f'user {user!r} has no tweets in {data.name}')
        normalizer = None if isinstance(scorer, str) else scorer.normalizer
        groups, raw, agg = featurize_for_scoring(load_dataset(train), user_data, normalizer)
        if isinstance(scorer, str):
            scores = score_groups(scorer, groups, raw, agg, config.boost.seed)[0]
            ranked = order_tweets(scores.tolist(), raw[0].tweet_ids)
        else:
            ranked = rank_user(scorer, groups[0])
        for tweet_id in ranked:
            print(tweet_id)
        return (ranked, )


class Export:
    @classmethod
    def INPUT_TYPES(s):
        return {"required": {"train": ("PATH", ),
                             "data": ("PATH", ),
                             "output": ("PATH", {"aliases": ["-o"]})},
                "optional": {"model": ("PATH", )}}
    FUNCTION = "export"
    DESCRIPTION = "write feature vectors in the qid learning-to-rank text format"

    CATEGORY = "data"

    def export(self, config, train, data, output, model=None):
        normalizer = load_model(model).normalizer if model is not None else None
        groups, _, _ = featurize_for_scoring(load_dataset(train), load_dataset(data), normalizer)
        with open_text(output, 'w') as f:
            write_letor(groups, f)
        log.info('exported %d users (%d rows) to %s',
                 len(groups), sum(len(g) for g in groups), output)
        return (groups, )


COMMAND_CLASS_MAPPINGS = {
    "synth": Synth,
    "split": Split,
    "stats": Stats,
    "train": Train,
    "eval": Eval,
    "rank": Rank,
    "export": Export,
}
