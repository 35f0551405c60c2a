"""
Various constants used by eqfree.
"""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_DOMAIN = 4

# Ring road of the optimal velocity experiments.
OV_TAU = 0.588
OV_CARS = 60
OV_RING_LENGTH = 60.0
OV_INFLECTION = 1.2

CONFIG_BEGIN = "--- config ---"
CONFIG_END = "--- end config ---"
