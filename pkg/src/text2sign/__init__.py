"""Spoken text to sign-language gloss / HamNoSys translation toolkit."""

__version__ = "0.1.0"
