"""
Entry point for ``python -m deepradar``.
"""
import sys

from deepradar.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
