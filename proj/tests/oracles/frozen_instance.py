"""Exhaustive path enumeration for the fixed instance used in test_filters.cpp.

Hidden path x_0..x_T; regime x_{l-1} drives emission y_l; the transition
matrix is column-stochastic (A[i][j] = P(next = i | current = j)).
Prints every posterior statistic with 17 significant digits.
"""
import itertools
import math

A = [[0.8, 0.3], [0.2, 0.7]]
coeffs = [(0.5, 0.4), (-0.6, -0.2)]
sigma = [0.7, 1.2]
pi = [0.6, 0.4]
values = [0.3, 1.1, -0.4, 0.9, -1.3, 0.2]
p, N = 1, 2
T = len(values) - p
y = lambda l: values[p + l - 1]  # y_l, l may be <= 0 for the window


def dens(i, l):
    mu = coeffs[i][0] + coeffs[i][1] * y(l - 1)
    z = (y(l) - mu) / sigma[i]
    return math.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * sigma[i])


total = 0.0
jump = [[0.0] * N for _ in range(N)]
occ = [0.0] * N
ta = [[0.0] * (p + 1) for _ in range(N)]
tb = [0.0] * N
tc = [0.0] * N
td = [0.0] * N
for path in itertools.product(range(N), repeat=T + 1):
    w = pi[path[0]]
    for l in range(1, T + 1):
        w *= A[path[l]][path[l - 1]] * dens(path[l - 1], l)
    total += w
    for l in range(1, T + 1):
        r = path[l - 1]
        jump[r][path[l]] += w
        occ[r] += w
        ta[r][0] += w * y(l) ** 2
        ta[r][1] += w * y(l - 1) * y(l)
        tb[r] += w * y(l - 1) ** 2
        tc[r] += w * y(l)
        td[r] += w * y(l - 1)

f = lambda v: "%.17g" % (v / total)
print("loglik", "%.17g" % math.log(total))
print("jump", [[f(v) for v in row] for row in jump])
print("occ", [f(v) for v in occ])
print("ta", [[f(v) for v in row] for row in ta])
print("tb", [f(v) for v in tb])
print("tc", [f(v) for v in tc])
print("td", [f(v) for v in td])
