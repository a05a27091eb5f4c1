"""Anchor-direction visualization for neural survival models."""
