"""
jointdiffusion tests.
"""
