"""localmt: private, CPU-only machine translation.

A quantized int8 inference engine with a recurrent-unit decoder and
lexical shortlists, a model package registry, a loopback-only HTTP
service with as-you-type supersession, and a words-per-second benchmark.
"""

__version__ = "0.1.0"

APP_NAME = "localmt"
USER_AGENT = f"{APP_NAME}/{__version__}"
