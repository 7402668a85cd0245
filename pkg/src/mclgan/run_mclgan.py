import argparse
import logging
import sys
import pandas as pd
import mclgan
from mclgan.trainer import PRESETS, TrainConfig, TrainingDiverged, evaluate_checkpoint, run_experiment, run_sweep


logger = logging.getLogger("run_mclgan")


def argument_parser():
    parser = argparse.ArgumentParser(prog="run_mclgan", description="train and evaluate multiple discriminator GANs on synthetic 2D mixtures")
    parser.add_argument(
        "-l",
        "--log",
        dest="logLevel",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL", None],
        help="Set the logging level.",
    )
    parser.add_argument("--progress_bar", help="Show the progress of training and sweeps.", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="train one model")
    _config_arguments(train)
    train.add_argument("--seed", type=int, help="Override the seed of the config.")
    train.add_argument("--out", metavar="<directory>", default="./mclgan_run", help="Output directory.")
    train.add_argument("--plots", help="Save snapshot, utilization and metrics figures next to the tables.", action="store_true")

    sweep = commands.add_parser("sweep", help="train one model per value of a parameter and per seed")
    _config_arguments(sweep)
    sweep.add_argument("--param", metavar="<name>", required=True, help="Config key to sweep.")
    sweep.add_argument("--values", metavar="<v1,v2,...>", required=True, help="Comma separated values of the parameter.")
    sweep.add_argument("--seeds", type=int, default=1, help="Number of seeds per value, starting at the config seed.")
    sweep.add_argument("--jobs", type=int, default=1, help="Number of runs executed in parallel.")
    sweep.add_argument("--out", metavar="<directory>", default="./mclgan_sweep", help="Output directory.")

    evaluation = commands.add_parser("eval", help="evaluate the generator of a checkpoint")
    evaluation.add_argument("--checkpoint", metavar="<file.mclg>", required=True, help="Checkpoint written by train.")
    evaluation.add_argument("--spec", metavar="<config file>", required=True, help="Config file whose data keys define the mixture.")
    evaluation.add_argument("--n", type=int, default=10000, help="Number of generated and real samples.")
    evaluation.add_argument("--seed", type=int, default=0, help="Seed of the evaluation samples.")
    return parser


def _config_arguments(parser):
    parser.add_argument("--config", metavar="<config file>", help="Flat 'key = value' config file.")
    parser.add_argument("--preset", choices=list(PRESETS), help="Start from a named preset instead of the defaults.")
    parser.add_argument("--set", metavar="<key=value>", action="append", default=[], dest="overrides", help="Override a config key; may be repeated.")


def build_config(args) -> TrainConfig:
    config = TrainConfig.from_preset(args.preset) if args.preset else TrainConfig()
    if args.config:
        config = TrainConfig.load(args.config, base=config)
    entries = {}
    for item in args.overrides:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        entries[key] = value
    if entries:
        config = config.with_overrides(**TrainConfig.parse_fields(entries))
    if getattr(args, "seed", None) is not None:
        config = config.with_overrides(seed=args.seed)
    return config


def main(argv=None):
    parser = argument_parser()
    args = parser.parse_args(argv)

    if args.logLevel:
        logging.basicConfig(
            level=getattr(logging, args.logLevel),
            format="%(asctime)s %(levelname)s: %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
    logger.info("This is mclgan version %s", mclgan.__version__)
    logger.debug("arguments: %s", args)

    try:
        if args.command == "eval":
            config = TrainConfig.load(args.spec)
            result = evaluate_checkpoint(args.checkpoint, config, args.n, args.seed)
            print(pd.Series(result).to_string())
            return 0
        config = build_config(args)
    except ValueError as e:
        logger.error(e)
        parser.print_help(sys.stderr)
        return 1

    try:
        if args.command == "train":
            log = run_experiment(config, args.out, args.progress_bar)
            logger.info("final record: %s", log.final.as_row())
            if args.plots:
                from mclgan.plots import write_run_plots

                write_run_plots(log, args.out)
        elif args.command == "sweep":
            run_sweep(config, args.param, args.values.split(","), args.seeds, args.jobs, args.out, args.progress_bar)
    except TrainingDiverged as e:
        logger.error("run aborted: %s", e)
        return 2
    except ValueError as e:
        logger.error(e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
