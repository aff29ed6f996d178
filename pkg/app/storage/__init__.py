# This file makes 'storage' a Python sub-package
