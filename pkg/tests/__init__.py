"""A package holding the tests."""
