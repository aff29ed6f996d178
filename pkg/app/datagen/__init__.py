# This file makes 'datagen' a Python sub-package
