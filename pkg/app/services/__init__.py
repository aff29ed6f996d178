# This file makes 'services' a Python sub-package
