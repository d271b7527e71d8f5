import argparse
import sys
from pathlib import Path

from uppe_green.models.errors import ConfigError
from uppe_green.models.experiment import (
    EXIT_CONFIG_ERROR, EXIT_IO_ERROR, EXPERIMENTS, parse_config, run,
)
from uppe_green.utils.logging import logger


def build_parser():
    parser = argparse.ArgumentParser(
        prog="uppe-green",
        description="Build and verify Green's functions of the unidirectional pulse propagation equation.",
    )
    parser.add_argument("config", help="path to the experiment config file")
    parser.add_argument("--out", help="output directory (default: $UPPE_GREEN_OUT or a dated temp dir)")
    parser.add_argument("--threads", type=int, help="FFT worker threads, 0 = all cores")
    parser.add_argument("--experiment", choices=EXPERIMENTS, help="override the experiment named in the config")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logger.info("Starting uppe-green")

    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"Cannot read config {args.config}: {e}")
        return EXIT_IO_ERROR

    try:
        cfg = parse_config(text)
    except ConfigError as e:
        logger.error(f"{args.config}: {e}")
        return EXIT_CONFIG_ERROR

    if args.experiment:
        cfg.experiment = args.experiment
    if args.threads is not None:
        if args.threads < 0:
            logger.error("--threads must be >= 0")
            return EXIT_CONFIG_ERROR
        cfg.threads = args.threads

    return run(cfg, out_dir=args.out)


if __name__ == "__main__":
    sys.exit(main())
