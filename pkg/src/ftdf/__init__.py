"""Non-intrusive appliance recognition from power traces.

Windowed time-domain descriptors, lag-correlation feature fusion, and a
bagged decision-tree classifier, with synthetic benchmark data, evaluation
protocols, an HTTP service, and a CLI client.
"""

__version__ = "0.1.0"
