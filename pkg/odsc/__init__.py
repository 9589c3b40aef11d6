"""ODRL policies with the ODS profile, compiled to OpenFGA-style relationship-based access control."""

from .errors import OdsError
from .utils.version import SCHEMA_VERSION, package_version

__version__ = package_version()
