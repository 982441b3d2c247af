"""Test package for Git Patchdance."""
