"""
Regression tests against known exact values
"""
