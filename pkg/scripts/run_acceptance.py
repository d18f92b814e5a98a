"""Run the ten acceptance criteria and print one PASS/FAIL line each."""

import os
import sys

import pytest

HERE = os.path.dirname(os.path.abspath(__file__))

if __name__ == "__main__":
    path = os.path.join(HERE, "..", "tests", "test_acceptance.py")
    sys.exit(pytest.main([path, "-q", "-s", "-p", "no:cacheprovider"] + sys.argv[1:]))
