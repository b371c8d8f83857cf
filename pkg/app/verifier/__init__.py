"""Verifier package initialization"""
