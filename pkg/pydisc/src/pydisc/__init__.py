"""Causal discovery adapter executable.

Runs DirectLiNGAM or a simplified Repetitive Causal Discovery (RCD) on a
CSV file and writes the learned graph in the shared graph-JSON schema, as
expected by the ``lovo`` adapter protocol
(``CMD --input <csv> --output <graph.json>``).
"""

from .lingam import direct_lingam
from .rcd import rcd
from .convert import convert_lingam_latents

__all__ = ["direct_lingam", "rcd", "convert_lingam_latents"]
