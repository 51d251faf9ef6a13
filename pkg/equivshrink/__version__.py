from importlib.metadata import PackageNotFoundError
from importlib.metadata import version

try:
    __version__ = version('equivshrink')
except PackageNotFoundError:
    # Running from a source checkout that was never installed.
    __version__ = '0.0.0'
