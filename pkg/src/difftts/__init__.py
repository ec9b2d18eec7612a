"""difftts: speaker-conditioned diffusion text-to-speech, CPU-trainable."""

__version__ = "0.1.0"
