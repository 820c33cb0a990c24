# Empty __init__.py for curvature package
