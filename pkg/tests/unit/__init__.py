"""
Unit tests for the model modules
"""
