"""Open-data 3D urban-energy scene generation.

Builds interactive 3D scenes (terrain, buildings, roads, power lines)
for any named place from open data sources, and serializes them as
figure-schema JSON.
"""

from cenergy.pipeline import PipelineConfig, ModelStats, generate

__all__ = ["PipelineConfig", "ModelStats", "generate"]

__version__ = "0.1.0"
