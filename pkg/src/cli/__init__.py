# Empty __init__.py for cli package
