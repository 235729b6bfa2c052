"""Insider-threat detection toolkit.

Ingests CERT-r4.2-style audit logs, encodes events as binary one-hot
feature vectors, trains dense autoencoder and variational autoencoder
models with a Nesterov-Adam optimizer, scores events by reconstruction
error, and evaluates detection quality. A built-in synthetic corpus
generator makes the whole pipeline reproducible at desk scale.
"""

__version__ = "0.1.0"
