# experiments/__init__.py
"""
Experiment harness and curve output for BayesFair.
"""
