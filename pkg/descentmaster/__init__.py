""" explicit 2-descent on quadratic twists """
