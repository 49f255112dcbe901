"""Acceptance checks over whole computations"""
