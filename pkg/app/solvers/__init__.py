# This file makes 'solvers' a Python sub-package
