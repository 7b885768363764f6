"""
spadrecon: photon-number reconstruction from single-SPAD click data

Subpackages:
- core: distributions, profiles, detector/window schemas
- recovery: recovery-time event strings and the recovery matrix
- detmat: loss, background, afterpulse matrices and their composition
- eme: expectation-maximization-entropy reconstruction and metrics
- tags: time-tag files, delay histograms, profile/click-distribution extraction
- charfit: detector characterization fits
- sim: Monte Carlo SPAD simulator
- uncertainty: Monte Carlo error propagation
- workflows: characterization and reconstruction pipelines
- cli: command-line surface
"""

__version__ = "0.1.0"
