"""Tests init"""
