# Empty __init__.py for separable package
