"""Schema induction and synthetic annotation via guided language-model prompting."""

__version__ = "0.1.0"
