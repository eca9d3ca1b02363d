"""Spring-network simulation through its Schrodinger-form encoding."""

__version__ = "0.1.0"
