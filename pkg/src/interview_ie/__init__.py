"""Information extraction from diarized interview transcripts."""

__version__ = "0.1.0"
