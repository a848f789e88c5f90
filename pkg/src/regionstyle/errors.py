"""Exception types shared across the package."""


class RegionNotFoundError(ValueError):
    """A requested region id is absent from a segmentation mask."""


class ConfigError(ValueError):
    """A pipeline configuration is inconsistent or incomplete."""
