"""Module entry point: python -m heatlattice."""

import sys

from .cli import main

sys.exit(main())
