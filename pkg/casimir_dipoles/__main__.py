"""Run the solver as a module: python -m casimir_dipoles"""

import sys

from .main import main

if __name__ == "__main__":
    sys.exit(main())
