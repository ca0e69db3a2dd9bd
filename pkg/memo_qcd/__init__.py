"""Top-level package for memo-qcd, quantum density estimation with memetic circuit design."""

__author__ = """memo-qcd developers"""
__version__ = "0.1.0"
