"""Project-relative path helpers."""

import os


def project_root() -> str:
    """Absolute path of the repository root (parent of the utils package)."""
    return os.path.abspath(os.path.dirname(os.path.dirname(__file__)))


def resource_path(relative_path: str) -> str:
    """
    Resolve a bundled resource such as the preset file.

    Absolute paths and paths that exist relative to the working directory are
    returned unchanged; anything else is resolved against the project root.

    Args:
        relative_path: Path to resource (e.g., "configurations.json")

    Returns:
        Absolute path to resource
    """
    if os.path.isabs(relative_path) or os.path.exists(relative_path):
        return os.path.abspath(relative_path)
    return os.path.join(project_root(), relative_path)


def ensure_parent_dir(path: str) -> str:
    """Create the parent directory of path if needed and return path."""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return path
