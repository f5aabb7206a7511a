"""cdforge: collaborative maintenance engine for OpenMath content
dictionaries.

Content dictionaries are split into individually editable, versioned
fragments; formulas render through declarative notation definitions
with parallel markup; structure lands in a queryable triple graph; and
every page carries a typed discussion forum.
"""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def corpus_dir() -> Path:
    """Directory with the bundled content dictionaries."""
    return Path(str(resources.files("cdforge") / "corpus"))
