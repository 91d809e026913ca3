"""rescuesim: reputation-weighted BFT consensus and vehicular fog offloading simulator."""

__version__ = "0.1.0"
