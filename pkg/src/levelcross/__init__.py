"""Level crossings of random matrix pencils A + lambda B.

Subpackages stay import-light: heavy numerical modules load on first
attribute access so the command line tool can pin BLAS thread counts
before numpy comes in.
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "geometry", "ensembles", "pencil", "solver", "laws", "stats",
    "experiments", "figures", "cli",
)


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
