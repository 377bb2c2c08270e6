# Empty file to make app a Python package