"""
Test package for the tensor decomposition project.

Contains unit tests for every engine plus command-line acceptance tests.
"""
