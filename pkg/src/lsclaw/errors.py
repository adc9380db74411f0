"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid flux, scheme, or experiment configuration."""


class GridError(ValueError):
    """Data escapes the discrete grid it was placed on."""


class InvariantError(ValueError):
    """A field violates a structural invariant (monotonicity, range)."""


class ValidityError(ValueError):
    """An oracle is evaluated outside its window of validity."""
