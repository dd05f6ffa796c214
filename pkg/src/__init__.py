"""Hierarchical Deconvolution - Main Package"""
