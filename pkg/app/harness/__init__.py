"""Harness package initialization"""
