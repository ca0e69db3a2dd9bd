"""Unit test package for memo-qcd."""
