"""Scalar Adam reference: three steps from 1.0 with grads 0.5, -0.2, 0.1."""
import math

lr, b1, b2, eps = 0.00625, 0.9, 0.98, 1e-9
x, m, v = 1.0, 0.0, 0.0
for t, g in enumerate([0.5, -0.2, 0.1], start=1):
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    mh = m / (1 - b1 ** t)
    vh = v / (1 - b2 ** t)
    x -= lr * mh / (math.sqrt(vh) + eps)
    print(t, repr(x))
