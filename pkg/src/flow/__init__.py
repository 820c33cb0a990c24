# Empty __init__.py for flow package
