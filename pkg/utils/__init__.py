"""Utilities package."""

from .log_setup import configure_logging
from .resource_path import ensure_parent_dir, project_root, resource_path

__all__ = ['resource_path', 'project_root', 'ensure_parent_dir', 'configure_logging']
