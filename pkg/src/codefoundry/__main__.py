"""
Entry point for running CodeFoundry as a module: python -m codefoundry
"""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
