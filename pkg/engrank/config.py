from omegaconf import DictConfig, OmegaConf

from .ranker import BoostParams
from .synthgen import SynthConfig


def default_config():
    defaults = {
        'boost': {
            'max_trees': 1000,
            'leaves_per_tree': 10,
            'shrinkage': 0.1,
            'early_stop_rounds': 50,
            'ndcg_cutoff': 10,
            'sigma': 1.0,
            'seed': 0,
            'min_samples_leaf': 1,
        },
        'prune': {
            'min_interactions': 4,
            'max_interactions': 200,
        },
        'split': {
            'fractions': [0.8, 0.1, 0.1],
        },
        'validation': {
            'holdout': 0.2,
        },
        'blend': {
            'grid_step': 0.05,
        },
        'synth': {
            'user_count': 200,
            'item_count': 50,
            'interactions_per_user': [4, 30],
            'rating_effect': 1.0,
            'metadata_effect': 1.0,
            'noise': 1.0,
            'retweet_fraction': 0.05,
            'mention_rate': 0.3,
            'seed': 0,
        },
    }
    return OmegaConf.create(defaults)


def load_config(path=None, overrides=None):
    """Defaults, then the YAML file at `path`, then dotted-key `overrides`."""
    config = default_config()
    layers = [config]
    if path is not None:
        loaded = OmegaConf.load(path)
        if not isinstance(loaded, DictConfig):
            raise ValueError(f'{path}: expected a mapping of config sections')
        unknown = sorted(set(loaded.keys()) - set(config.keys()))
        if unknown:
            raise ValueError(f'{path}: unknown config section(s) {", ".join(map(str, unknown))}')
        layers.append(loaded)
    config = OmegaConf.merge(*layers)
    for key, value in (overrides or {}).items():
        if value is not None:
            OmegaConf.update(config, key, value, merge=True)
    return config


def boost_params(cfg):
    return BoostParams(**OmegaConf.to_container(cfg.boost))


def synth_config(cfg):
    return SynthConfig(**OmegaConf.to_container(cfg.synth))


def blend_grid_steps(cfg):
    step = float(cfg.blend.grid_step)
    steps = round(1.0 / step) if step > 0 else 0
    if steps < 1 or abs(steps * step - 1.0) > 1e-9:
        raise ValueError(f'blend.grid_step must divide 1.0, got {step}')
    return steps
