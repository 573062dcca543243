class ConfigError(ValueError):
    """Invalid hyperparameter or configuration value; `field` names the key."""

    def __init__(self, msg: str, field: str | None = None):
        super().__init__(msg)
        self.field = field
