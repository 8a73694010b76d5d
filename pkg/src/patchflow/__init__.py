"""patchflow: patch-local tokenized autoregressive image and flow modeling,
flow-field scene editing, and self-supervised depth extraction, at desk scale.
"""

__version__ = "0.1.0"
