import argparse

STRUCTURES = ('nested-bdt', 'randomized', 'oracle')
ADVERSARIES = ('concentrate', 'round_robin', 'random_spread', 'revisit')


def build_parser():
    """
    Build the argument parser shared by the CLI and load_config.

    Returns:
        argparse.ArgumentParser: Parser with the bench, diff, pebble and validate subcommands.
    """
    parser = argparse.ArgumentParser(
        prog='fingerdict',
        description=(
            "Probe-counting benchmark and differential tester for finger-search\n"
            "dictionaries over 64-bit integer keys.\n\n"
            "Four subcommands are supported:\n"
            "1. bench: run a seeded workload and report probes per rank distance\n"
            "2. diff: run a workload (or an ops file) in lockstep with the oracle\n"
            "3. pebble: Monte-Carlo runs of the oblivious zeroing pebble game\n"
            "4. validate: build a nested forest and check every structural invariant"
        ),
        epilog=(
            "\nEXAMPLES:\n"
            "  fingerdict bench --structure nested-bdt --n 65536 --dist fixed:16 --csv out.csv\n"
            "  fingerdict diff --structure randomized --n 65536 --ops 100000 --seed 7\n"
            "  fingerdict diff --structure randomized --ops-file regression.ops\n"
            "  fingerdict pebble --piles 65536 --seeds 100 --csv pebble.csv\n"
            "  fingerdict validate --n 256\n"
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument("--verbose", action="store_true",
                        help="  Enable debug logging of rebuilds and rebalances.")
    subparsers = parser.add_subparsers(dest="command")

    for name in ('bench', 'diff'):
        sub = subparsers.add_parser(name, help=f"  Run the {name} workload driver.")
        sub.add_argument("--structure", choices=STRUCTURES, default='nested-bdt',
                         help="  Structure under test (default: nested-bdt).")
        sub.add_argument("--n", type=int, default=4096,
                         help="  Initial number of keys (default: 4096).")
        sub.add_argument("--ops", type=int, default=10000,
                         help="  Number of operations to generate (default: 10000).")
        sub.add_argument("--mix", type=str, default='0.2,0.1,0.7',
                         help="  Insert,delete,search proportions (default: 0.2,0.1,0.7).")
        sub.add_argument("--dist", type=str, default='uniform',
                         help="  Distance distribution: uniform, geometric:<p> or fixed:<d>.")
        sub.add_argument("--seed", type=int, default=1,
                         help="  64-bit workload seed (default: 1).")
        sub.add_argument("--csv", type=str, default=None,
                         help="  Write the probe report to this CSV file.")
        sub.add_argument("--json", type=str, default=None,
                         help="  Save mean probes per distance band to this JSON file.")
        sub.add_argument("--prefix-out", type=str, default=None,
                         help="  On divergence, write the reproducing prefix to this ops file.")
        if name == 'diff':
            sub.add_argument("--ops-file", type=str, default=None,
                             help="  Replay operations from a text file instead of generating them.")

    pebble = subparsers.add_parser('pebble', help="  Run pebble-game Monte-Carlo trials.")
    pebble.add_argument("--piles", type=int, default=65536,
                        help="  Number of piles n (default: 65536).")
    pebble.add_argument("--rounds", type=int, default=None,
                        help="  Rounds per game (default: number of piles).")
    pebble.add_argument("--budget", type=int, default=None,
                        help="  Increaser budget c (default: ceil(log2 log2 n)).")
    pebble.add_argument("--seeds", type=int, default=100,
                        help="  Number of seeds per adversary (default: 100).")
    pebble.add_argument("--adversary", choices=ADVERSARIES + ('all',), default='all',
                        help="  Adversary strategy (default: all four).")
    pebble.add_argument("--alternate", action="store_true",
                        help="  Alternate the two zeroing steps instead of doing both per round.")
    pebble.add_argument("--workers", type=int, default=None,
                        help="  Worker processes for independent seeds.")
    pebble.add_argument("--csv", type=str, default=None,
                        help="  Write one row per seed to this CSV file.")

    validate = subparsers.add_parser('validate', help="  Build a nested forest and validate it.")
    validate.add_argument("--n", type=int, default=256,
                          help="  Number of appended keys (default: 256).")
    return parser


def load_config(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    # Build config dictionary with defaults
    config_dict = {
        'command': args.command,
        'verbose': args.verbose,
        'structure': getattr(args, 'structure', 'nested-bdt'),
        'n': getattr(args, 'n', 4096),
        'ops': getattr(args, 'ops', 10000),
        'mix': getattr(args, 'mix', '0.2,0.1,0.7'),
        'dist': getattr(args, 'dist', 'uniform'),
        'seed': getattr(args, 'seed', 1),
        'csv': getattr(args, 'csv', None),
        'json': getattr(args, 'json', None),
        'ops_file': getattr(args, 'ops_file', None),
        'prefix_out': getattr(args, 'prefix_out', None),
        'piles': getattr(args, 'piles', 65536),
        'rounds': getattr(args, 'rounds', None),
        'budget': getattr(args, 'budget', None),
        'seeds': getattr(args, 'seeds', 100),
        'adversary': getattr(args, 'adversary', 'all'),
        'alternate': getattr(args, 'alternate', False),
        'workers': getattr(args, 'workers', None),
    }

    return config_dict
