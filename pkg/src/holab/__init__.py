"""holab: numerical laboratory for geometric phases and holonomies."""

__version__ = "0.1.0"
