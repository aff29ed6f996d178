# This file makes 'utils' a Python sub-package
