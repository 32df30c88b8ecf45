"""Module entry point so `python -m calabiflow` mirrors the console script."""
import sys

from .cli import main

sys.exit(main())
