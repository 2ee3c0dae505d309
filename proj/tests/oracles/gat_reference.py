"""Single attention layer on a 4-node graph (triangle 0-1-2 plus leaf 3 on 0)."""
import math

H = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 2.0]]
W = [[1.0, 0.5], [-0.5, 1.0]]
a_src, a_dst = [0.3, -0.2], [0.1, 0.4]
nbr = {0: [0, 1, 2, 3], 1: [0, 1, 2], 2: [0, 1, 2], 3: [0, 3]}

z = [[sum(h[k] * W[k][j] for k in range(2)) for j in range(2)] for h in H]
leaky = lambda x: x if x > 0 else 0.2 * x
for i in range(4):
    e = {j: leaky(sum(a_src[c] * z[i][c] for c in range(2)) + sum(a_dst[c] * z[j][c] for c in range(2)))
         for j in nbr[i]}
    m = max(e.values())
    s = sum(math.exp(v - m) for v in e.values())
    alpha = {j: math.exp(v - m) / s for j, v in e.items()}
    out = [sum(alpha[j] * z[j][c] for j in nbr[i]) for c in range(2)]
    print(i, [repr(alpha.get(j, 0.0)) for j in range(4)], [repr(x) for x in out])
