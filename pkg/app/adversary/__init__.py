"""Adversary package initialization"""
