"""Surface metrics sharing geodesics: charts, flows, integrals, deciders.

The usual entry points are `zoo.build_bundle` / `zoo.catalogue` for the
shipped charts, `projective.check_projective_equivalence` for the main
question, and `acceptance.run_all` for the end-to-end suite.  Submodules
are imported lazily by the callers that need them; nothing heavy happens
at import time.
"""

__version__ = "0.1.0"

__all__ = ["expr", "metric", "flow", "sampling", "integrals", "zoo",
           "projective", "acceptance", "cli", "__version__"]
