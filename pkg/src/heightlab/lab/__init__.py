"""Fixtures, experiment runners and artifact plumbing behind the command line."""
