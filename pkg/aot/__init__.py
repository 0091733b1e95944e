"""AOT diffusion - desk-scale diffusion training with approximated optimal transport."""

__version__ = "0.1.0"
