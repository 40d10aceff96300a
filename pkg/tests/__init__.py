# Makes tests a Python package for pytest discovery
