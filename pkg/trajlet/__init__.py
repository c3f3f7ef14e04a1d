"""
trajlet

Contrastive trajectory embeddings and similarity retrieval for short 2-D
trajectories.

:author: trajlet contributors
:license: GNU General Public License v3
"""

__author__ = "trajlet contributors"
__license__ = "GNU General Public License v3"
__version__ = "0.1.0"


# The end.
