"""Writes golden.{bed,bim,fam}: 20 samples, 50 SNPs, y = X_st b with 3 causal SNPs.

The phenotype is computed from the dosages with numpy, independent of the
crate's decoder and standardization code. Seeds are drawn until a plain
numpy NIHT recovers the causal set from the full data and from every
training split of 40 random 5-fold partitions, so the fixture is a fair
test of both `fit` and `cv`.
"""
import numpy as np

n, p, k = 20, 50, 3
causal = {7: 1.0, 23: -0.8, 41: 0.6}


def genotypes(rng):
    maf = rng.uniform(0.3, 0.5, size=p)
    x = np.empty((n, p), dtype=int)
    for j in range(p):
        # resample until the column stays polymorphic after dropping any 4 samples
        while True:
            col = rng.binomial(2, maf[j], size=n)
            if n - np.bincount(col, minlength=3).max() >= 5:
                break
        x[:, j] = col
    return x


def standardize(x, ref):
    return (x - ref.mean(axis=0)) / ref.std(axis=0, ddof=1)


def project(b):
    out = np.zeros_like(b)
    out[p:] = b[p:]
    idx = np.argsort(-np.abs(b[:p]), kind="stable")[:k]
    out[idx] = b[idx]
    return out


def niht(a, y, c=0.01):
    b = np.zeros(a.shape[1])
    for _ in range(200):
        g = a.T @ (y - a @ b)
        s = set(np.nonzero(b[:p])[0]) or set(np.argsort(-np.abs(g[:p]))[:k])
        mask = np.zeros(a.shape[1], bool)
        mask[list(s)] = True
        mask[p:] = True
        gs = g * mask
        mu = gs @ gs / np.sum((a @ gs) ** 2)
        nb = project(b + mu * g)
        while set(np.nonzero(nb[:p])[0]) != s:
            d = nb - b
            if mu < (1 - c) * (d @ d) / np.sum((a @ d) ** 2):
                break
            mu /= 2
            nb = project(b + mu * g)
        done = np.max(np.abs(nb - b)) < 1e-4
        b = nb
        if done:
            break
    return set(np.nonzero(b[:p])[0])


def with_intercept(xs):
    return np.hstack([xs, np.ones((xs.shape[0], 1))])


def recoverable(x, y, rng):
    if niht(with_intercept(standardize(x, x)), y) != set(causal):
        return False
    for _ in range(40):
        folds = rng.permutation(n) % 5
        for f in range(5):
            tr = folds != f
            if niht(with_intercept(standardize(x[tr], x[tr])), y[tr]) != set(causal):
                return False
    return True


beta = np.zeros(p)
for j, b in causal.items():
    beta[j] = b
seed = 0
while True:
    x = genotypes(np.random.default_rng(seed))
    y = standardize(x, x) @ beta
    if recoverable(x, y, np.random.default_rng(seed + 1)):
        break
    seed += 1
print(f"seed {seed}")

code = {0: 0b00, 1: 0b10, 2: 0b11}
out = bytearray([0x6C, 0x1B, 0x01])
for j in range(p):
    for start in range(0, n, 4):
        byte = 0
        for k_, i in enumerate(range(start, min(start + 4, n))):
            byte |= code[int(x[i, j])] << (2 * k_)
        out.append(byte)
open("golden.bed", "wb").write(bytes(out))

with open("golden.bim", "w") as f:
    for j in range(p):
        f.write(f"1\tsnp{j}\t0\t{1000 * (j + 1)}\tA\tG\n")
with open("golden.fam", "w") as f:
    for i in range(n):
        f.write(f"fam{i} ind{i} 0 0 1 {y[i]:.17g}\n")
