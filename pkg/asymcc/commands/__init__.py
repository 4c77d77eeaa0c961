"""
Command modules mounted by asymcc.cli
"""
