"""Pruning, record process and regrafting on discrete approximations of Levy trees."""

__version__ = "0.1.0"
