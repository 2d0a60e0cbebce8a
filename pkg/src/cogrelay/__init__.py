"""Outage and error-rate analysis of an underlay cognitive MIMO-RF/FSO relay link."""

__version__ = "0.1.0"
