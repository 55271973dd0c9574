"""Boolean gate mining on mycelium-like networks.

Three pipelines over one substrate family: excitation-spike gate census,
randomized RC network sweeps, and 4-bit Boolean function extraction from
multi-channel voltage recordings.
"""

from . import excitable, experiments, funcmine, rcnet, spikegates, substrate, svgplot, util

__all__ = [
    "excitable",
    "experiments",
    "funcmine",
    "rcnet",
    "spikegates",
    "substrate",
    "svgplot",
    "util",
]

__version__ = "0.1.0"
