"""weaktraj - weak-measurement trajectory reconstruction toolkit"""

__version__ = "0.1.0"
