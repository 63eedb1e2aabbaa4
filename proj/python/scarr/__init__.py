"""Control-flow attestation toolkit.

Thin package around the compiled `_scarr` module: offline measurement
generation, prover/verifier sessions, attack drills, and wire framing.
"""

try:
    # Installed layout: the extension lives inside the package.
    from ._scarr import *  # noqa: F401,F403
    from ._scarr import __version__  # noqa: F401
except ImportError:
    # Build-tree layout: the extension sits on PYTHONPATH next to the
    # build directory.
    from _scarr import *  # noqa: F401,F403
    from _scarr import __version__  # noqa: F401
