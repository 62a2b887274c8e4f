"""qalretrieve command-line entry point."""

import sys
from typing import Optional, Sequence

from src.core.config_manager import parse_config
from src.core.exceptions import UsageError
from src.core.logger import setup_logger
from src.services.harness_service import EXIT_USAGE, run_cli


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Startup sequence:
    1. Resolve the RunConfig (flags, config file, QAL_OUT, defaults)
    2. Logger init (log file next to the results)
    3. Run the experiment and exit with its status
    """
    # 1. Config; usage errors exit 2 before anything is written
    try:
        config = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as e:
        print(f"qalretrieve: error: {e.message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)

    # 2. Logger
    try:
        logger = setup_logger(log_level=config.log_level, log_dir=config.out)
    except OSError as e:
        print(f"qalretrieve: error: cannot create {config.out}: {e}", file=sys.stderr)
        sys.exit(1)
    logger.info(f"qalretrieve starting: {config}")

    # 3. Experiment
    sys.exit(run_cli(config))


if __name__ == "__main__":
    main()
