"""Pure-Python dynamic-programming kernels.

Reference implementations of the hot loops behind lcs_length and
tree_edit_distance. The compiled twin in _kernels_c.pyx must stay
behaviourally identical; tests compare the two on random inputs.
"""


def lcs_kernel(a, b):
    """Length of the longest common subsequence of two int sequences."""
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        return 0
    prev = [0] * (m + 1)
    cur = [0] * (m + 1)
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                x, y = prev[j], cur[j - 1]
                cur[j] = x if x >= y else y
        prev, cur = cur, prev
    return prev[m]


def ted_kernel(lmd1, lab1, kr1, lmd2, lab2, kr2):
    """Zhang-Shasha tree edit distance with unit operation costs.

    Trees arrive as postorder arrays: lmd[i] is the postorder index of the
    leftmost leaf descendant of node i, lab[i] an interned label id, and
    kr the ascending keyroot indices.
    """
    n1, n2 = len(lab1), len(lab2)
    td = [[0] * n2 for _ in range(n1)]
    # forest-distance scratch, sized for the largest subproblem
    fd = [[0] * (n2 + 1) for _ in range(n1 + 1)]

    for i in kr1:
        li = lmd1[i]
        ioff = li - 1
        m = i - li + 2
        for j in kr2:
            lj = lmd2[j]
            joff = lj - 1
            n = j - lj + 2
            for x in range(1, m):
                fd[x][0] = fd[x - 1][0] + 1
            for y in range(1, n):
                fd[0][y] = fd[0][y - 1] + 1
            for x in range(1, m):
                row = fd[x]
                up = fd[x - 1]
                for y in range(1, n):
                    if li == lmd1[x + ioff] and lj == lmd2[y + joff]:
                        cost = 0 if lab1[x + ioff] == lab2[y + joff] else 1
                        best = up[y] + 1
                        if row[y - 1] + 1 < best:
                            best = row[y - 1] + 1
                        if up[y - 1] + cost < best:
                            best = up[y - 1] + cost
                        row[y] = best
                        td[x + ioff][y + joff] = best
                    else:
                        p = lmd1[x + ioff] - 1 - ioff
                        q = lmd2[y + joff] - 1 - joff
                        best = up[y] + 1
                        if row[y - 1] + 1 < best:
                            best = row[y - 1] + 1
                        alt = fd[p][q] + td[x + ioff][y + joff]
                        if alt < best:
                            best = alt
                        row[y] = best
    return td[n1 - 1][n2 - 1]
