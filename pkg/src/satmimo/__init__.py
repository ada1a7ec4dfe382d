"""Line-of-sight MIMO design and simulation for GEO feeder and multibeam user links."""

__version__ = "0.1.0"
