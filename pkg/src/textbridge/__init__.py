"""Text augmentation and video-guided cross-modal bridging toolkit.

Subpackages follow the pipeline: core (types, dataset IO), metrics,
embed, augment, score, attribute, bridge, benchmark, cli.
"""

__version__ = "0.1.0"
