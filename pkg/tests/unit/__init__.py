"""Unit tests init"""
