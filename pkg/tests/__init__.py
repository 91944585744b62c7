"""
Bell/CHSH toolkit - Test Suite
"""
