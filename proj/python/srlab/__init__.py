"""Python face of the symbolic-regression laboratory.

The native module carries the real surface; this package just locates it.
Installed wheels place ``_srlab`` inside the package, while build trees put
it next to the package on ``sys.path``.
"""

try:
    from ._srlab import *  # noqa: F401,F403
    from ._srlab import __doc__ as _native_doc
except ImportError:  # build tree: the module sits beside the package
    from _srlab import *  # noqa: F401,F403
    from _srlab import __doc__ as _native_doc

__doc__ = (__doc__ or "") + "\n\n" + (_native_doc or "")
del _native_doc
