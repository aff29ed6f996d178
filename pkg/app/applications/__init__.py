# This file makes 'applications' a Python sub-package
