"""Knowledge-graph embeddings and inference-pattern poisoning attacks on them."""

__version__ = "0.1.0"
