# This file makes 'core' a Python sub-package
