#!/usr/bin/env python3

"""
trajlet - setup

Minimal setup script for the trajlet project.

:author: trajlet contributors
:license: GNU General Public License v3
"""


from setuptools import setup

if __name__ == "__main__":
    setup()


# The end.
