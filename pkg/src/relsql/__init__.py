"""relsql: relation-aware text-to-SQL semantic parsing on a small autodiff core."""

__version__ = "0.1.0"
