import logging
import os
import sys

from src.config import config

# BLAS/OpenMP read their thread caps when numpy is first imported
os.environ.update(config.thread_env())

from src.cli.commands import run_command  # noqa: E402

# Configure logging; stdout is left to command output
handlers = [logging.StreamHandler(sys.stderr)]
if config.log_file:
    handlers.append(logging.FileHandler(config.log_file))

logging.basicConfig(
    level=getattr(logging, config.log_level.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=handlers,
)

logger = logging.getLogger(__name__)


def main() -> int:
    """Main entry point."""
    if not config.validate():
        logger.error("Configuration validation failed. Please check your .env file.")
        return 2
    return run_command(sys.argv[1:])


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("Interrupted")
        sys.exit(130)
