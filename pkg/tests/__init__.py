"""
trajlet - tests

Test package for trajlet.

:author: trajlet contributors
:license: GNU General Public License v3
"""


# The end.
