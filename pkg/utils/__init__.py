"""
Utilities package for the MP-QKD key-rate toolkit
"""
