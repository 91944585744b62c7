"""
Integration tests for the CLI, verification battery and scripts
"""
