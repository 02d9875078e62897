"""Command-line surface and run descriptors."""
