"""Landau damping toolkit for the screened Vlasov equation."""

__version__ = "0.1.0"
