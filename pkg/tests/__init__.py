"""Test suite for layerbvp"""
