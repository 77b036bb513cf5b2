"""
Services package: key-rate model, estimators, optimizer and Monte Carlo oracle
"""
