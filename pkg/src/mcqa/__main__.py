"""Module entry point so ``python -m mcqa`` matches the ``mcqa`` script."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
