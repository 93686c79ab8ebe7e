class AttackError(Exception):
    """Base class for attack implementation errors."""


class InsufficientDataError(AttackError):
    """Too few observations to fit or score (e.g. fewer than two scraped pairs)."""
