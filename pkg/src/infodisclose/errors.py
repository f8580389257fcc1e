class ConfigError(ValueError):
    """Invalid parameters or configuration."""


class ContractError(RuntimeError):
    """A caller broke an operation's precondition."""
