"""Direct ALE FV/DG schemes on moving Voronoi meshes with topology changes."""

__version__ = "0.1.0"
