"""
Unit tests for PAN-OS Multi-Firewall Monitor
Tests performance optimizations and memory leak fixes
"""
