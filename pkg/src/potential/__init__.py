# Empty __init__.py for potential package
