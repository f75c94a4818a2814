"""Exception types shared across the package."""


class ModelError(ValueError):
    """Invalid model input: bad parameters, out-of-range abundance, etc."""


class HypothesisError(ModelError):
    """A growth law or noise level fails a structural hypothesis (H1/H2)."""


class InfeasibleClosureError(ModelError):
    """The per-capita rate is non-positive somewhere on the closure range."""


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""

    def __init__(self, message, *, section=None, key=None, line=None):
        self.section = section
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if section is not None:
            where.append(f"[{section}]" + (f" {key}" if key else ""))
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
