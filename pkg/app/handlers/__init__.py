# Empty file to make handlers a Python package