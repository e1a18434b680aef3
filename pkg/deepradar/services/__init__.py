"""
Services: synthetic oracle, networks, training and evaluation.
"""
