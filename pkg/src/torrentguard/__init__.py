"""Fake-torrent detection: portal monitoring, seeder resolution, IP reputation."""

__version__ = "0.1.0"
