"""Runnable experiments: training, probing, export and the command line"""
