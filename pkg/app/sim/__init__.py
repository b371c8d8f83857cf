"""Simulator package initialization"""
