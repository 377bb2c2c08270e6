# Empty file to make config a Python package