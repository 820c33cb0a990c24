# Empty __init__.py for tests package
