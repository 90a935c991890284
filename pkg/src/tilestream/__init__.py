"""Tile-based 360-degree video streaming simulator with JND-masked quality scoring."""

from .flowfield import Frame, InputError, ViewpointSample
from .manifest import VideoManifest

__version__ = "0.1.0"
