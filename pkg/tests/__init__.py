"""molguide test suite."""
