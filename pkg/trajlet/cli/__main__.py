"""
trajlet.cli.__main__

Main entry point for the CLI.

:author: trajlet contributors
:license: GNU General Public License v3
"""


import sys

from . import main


if __name__ == '__main__':
    sys.exit(main())


# The end.
