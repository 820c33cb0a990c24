# Empty __init__.py for geometry package
