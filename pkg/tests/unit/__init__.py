"""Unit tests for individual functions and components"""
