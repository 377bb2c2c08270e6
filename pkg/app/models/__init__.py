# Empty file to make models a Python package