"""
Eqfree configuration.
"""

import os
import platform

DEBUG = os.environ.get("EQFREE_DEBUG", False)
THREADS = int(os.environ.get("EQFREE_THREADS", "1"))
OUTPUT_DIR = os.environ.get("EQFREE_OUTPUT_DIR", ".")
CSV_DIGITS = int(os.environ.get("EQFREE_CSV_DIGITS", "12"))

# Set the REFERENCE_DIR location somewhat sensibly
if platform.system() == "Darwin":
    REFERENCE_DIR = os.environ.get(
        "EQFREE_REFERENCE_DIR",
        os.path.join(os.path.expanduser("~"), "Library", "Eqfree", "references"),
    )
else:
    REFERENCE_DIR = os.environ.get(
        "EQFREE_REFERENCE_DIR",
        os.path.join(
            os.environ.get(
                "XDG_DATA_HOME",
                os.path.join(os.path.expanduser("~"), ".local", "share"),
            ),
            "eqfree",
            "references",
        ),
    )

# Clean the namespace up.
del os
del platform
