"""Bundled attenuation and CTM tables."""
