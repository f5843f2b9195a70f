"""
Setup shim for pyphsim

Package metadata, dependencies and the `pyphsim` console script live in
pyproject.toml; this file only lets older pip versions run an editable
install (`pip install -e .`).
"""

from setuptools import setup

if __name__ == "__main__":
    setup()
