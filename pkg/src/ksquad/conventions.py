"""Sign conventions that the underlying mathematics leaves open.

Both constants are pinned by tests: the pentagon side by a rational-function
oracle, the orientation by the A2 wall-crossing check on measured data.
"""

# Global sign applied to exchange matrices computed from triangle adjacency.
# +1 means <gamma_j, gamma_i> = +1 when arc j follows arc i clockwise.
# With +1 the measured A2 sector products on the two sides of the wall differ
# at degree 2; with -1 they agree, and so do WKB flip paths and sector products.
ORIENTATION_SIGN = -1

# With <g1, g2> = 1 and all factors of the form x_b -> x_b (1 + x_g)^<b, g>,
# the identity S(g_first) o S(g_second) = S(g_second) o S(g1 + g2) o S(g_first)
# holds for (g_first, g_second) = PENTAGON_TWO_FACTOR_ORDER, where maps compose
# as automorphisms (the right-most factor acts first on points).
PENTAGON_TWO_FACTOR_ORDER = ("g1", "g2")
