import sys

from app.cli.cli import run
from app.log.logging_config import setup_logging

setup_logging()

if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
