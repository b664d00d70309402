# Version information for the platelimit package
# This file is overwritten by setuptools_scm on build

try:
    from setuptools_scm import get_version

    __version__ = get_version(root="..", relative_to=__file__)
except (ImportError, LookupError):
    from importlib.metadata import PackageNotFoundError, version

    try:
        __version__ = version("platelimit")
    except PackageNotFoundError:
        __version__ = "unknown"
