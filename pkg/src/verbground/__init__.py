"""Verb-grounded object retrieval toolkit.

Mines verb-object usage pairs from dependency parses, builds
class-disjoint training data against a frozen image-feature store,
trains a recurrent language encoder into that feature space with a
cosine embedding loss, and evaluates five-candidate retrieval.
"""

__version__ = "0.1.0"
