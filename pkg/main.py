import argparse
import logging
import sys

from omegaconf import OmegaConf

from commands import COMMAND_CLASS_MAPPINGS
from engrank.config import load_config

log = logging.getLogger('engrank')

GLOBAL_INPUTS = {
    "seed": ("INT", {"min": 0, "config": ["boost.seed", "synth.seed"]}),
    "k": ("INT", {"min": 1, "config": "boost.ndcg_cutoff"}),
    "config": ("PATH", ),
    "verbose": ("BOOLEAN", {"aliases": ["-v"]}),
}
PYTHON_TYPES = {"INT": int, "FLOAT": float, "STRING": str, "PATH": str}


def add_input(parser, name, info, required=False):
    options = info[1] if len(info) > 1 else {}
    flags = ['--' + name.replace('_', '-')] + options.get('aliases', [])
    type_input = info[0]
    if type_input == "BOOLEAN":
        parser.add_argument(*flags, dest=name, action='store_true')
    elif isinstance(type_input, list):
        parser.add_argument(*flags, dest=name, choices=type_input, required=required,
                            default=options.get('default'))
    else:
        parser.add_argument(*flags, dest=name, type=PYTHON_TYPES[type_input], required=required,
                            default=options.get('default'))


def all_inputs(class_inputs):
    merged = {}
    for section in ('required', 'optional'):
        merged.update(class_inputs.get(section, {}))
    return merged


def command_overview():
    """Subcommands listed under their CATEGORY, for the top-level help."""
    categories = {}
    for command, class_def in COMMAND_CLASS_MAPPINGS.items():
        categories.setdefault(class_def.CATEGORY, []).append((command, class_def.DESCRIPTION))
    lines = []
    for category, commands in categories.items():
        lines.append(f'{category}:')
        lines.extend(f'  {command:<8} {description}' for command, description in commands)
    return '\n'.join(lines)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    for name, info in GLOBAL_INPUTS.items():
        add_input(common, name, info)

    parser = argparse.ArgumentParser(prog='engrank',
                                     description='collaborative ranking of tweets by predicted engagement',
                                     epilog=command_overview(),
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    subparsers = parser.add_subparsers(dest='command', required=True, metavar='command')
    for command, class_def in COMMAND_CLASS_MAPPINGS.items():
        sub = subparsers.add_parser(command, parents=[common], description=class_def.DESCRIPTION)
        class_inputs = class_def.INPUT_TYPES()
        for section in ('required', 'optional'):
            for name, info in class_inputs.get(section, {}).items():
                add_input(sub, name, info, required=section == 'required')
    return parser


def validate_inputs(command, inputs):
    """Checks min/max/choice bounds of the given (non-None) values."""
    specs = dict(GLOBAL_INPUTS, **all_inputs(COMMAND_CLASS_MAPPINGS[command].INPUT_TYPES()))
    for x, val in inputs.items():
        if val is None or x not in specs:
            continue
        info = specs[x]
        flag = '--' + x.replace('_', '-')
        if len(info) > 1:
            if "min" in info[1] and val < info[1]["min"]:
                return (False, "Value smaller than min. {} {}: {} < {}".format(command, flag, val, info[1]["min"]))
            if "max" in info[1] and val > info[1]["max"]:
                return (False, "Value bigger than max. {} {}: {} > {}".format(command, flag, val, info[1]["max"]))
        if isinstance(info[0], list) and val not in info[0]:
            return (False, "Value not in list. {} {}: {} not in {}".format(command, flag, val, info[0]))
    return (True, "")


def split_inputs(command, inputs):
    """Separates config overrides (dotted keys) from the command's own arguments."""
    specs = dict(GLOBAL_INPUTS, **all_inputs(COMMAND_CLASS_MAPPINGS[command].INPUT_TYPES()))
    overrides, arguments = {}, {}
    for x, val in inputs.items():
        options = specs[x][1] if len(specs[x]) > 1 else {}
        keys = options.get('config')
        if keys is not None:
            for key in [keys] if isinstance(keys, str) else keys:
                overrides[key] = val
        elif x not in GLOBAL_INPUTS:
            arguments[x] = val
    return overrides, arguments


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
                        stream=sys.stderr, force=True)

    command = args.command
    inputs = {x: v for x, v in vars(args).items() if x != 'command'}
    ok, message = validate_inputs(command, inputs)
    if not ok:
        print(f'error: {message}', file=sys.stderr)
        return 1

    overrides, arguments = split_inputs(command, inputs)
    try:
        config = load_config(args.config, overrides)
        log.info('%s with effective config:\n%s', command, OmegaConf.to_yaml(config).rstrip())
        obj = COMMAND_CLASS_MAPPINGS[command]()
        getattr(obj, obj.FUNCTION)(config, **arguments)
    except (ValueError, KeyError, OSError) as e:
        print(f'error: {e}', file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
