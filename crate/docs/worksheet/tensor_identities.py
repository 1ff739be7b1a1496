"""Two-dimensional tensor identities checked on random numeric tensors."""
import itertools

import numpy as np

rng = np.random.default_rng(1)

# Hook identity for a trace-free symmetric Xi with derivative D[k,i,j] = nabla_k Xi_ij
# (flat frame): D_kij - D_jik = g_ik div_j - g_ij div_k.
for trial in range(3):
    Dt = rng.normal(size=(2, 2, 2))
    Dt = (Dt + Dt.transpose(0, 2, 1)) / 2
    for k in range(2):
        tr = Dt[k, 0, 0] + Dt[k, 1, 1]
        Dt[k, 0, 0] -= tr / 2
        Dt[k, 1, 1] -= tr / 2
    g = np.eye(2)
    div = np.einsum('aaj->j', Dt)
    err = max(abs(Dt[k, i, j] - Dt[j, i, k] - (g[i, k] * div[j] - g[i, j] * div[k]))
              for i, j, k in itertools.product(range(2), repeat=3))
    print('hook identity, trial', trial, err)

# S_ija Z^a_k = (1/2) trace-free part of (S_iab Z^ab g_jk + S_jab Z^ab g_ik).
phi = 1.7
g, gi = phi**2 * np.eye(2), np.eye(2) / phi**2
e = np.array([1, 1j])
s, zt = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
S = phi**2 * 2 * np.real(s * np.einsum('i,j,k->ijk', e, e, e))
Z = 2 * np.real(zt * np.einsum('i,j->ij', e, e))
print('trace-free:', np.einsum('ij,ijk->k', gi, S), np.einsum('ij,ij', gi, Z))
lhs = np.einsum('ija,ak->ijk', S, np.einsum('ab,bk->ak', gi, Z))
A = np.einsum('iab,ab->i', S, np.einsum('ai,bj,ij->ab', gi, gi, Z))
T = np.einsum('i,jk->ijk', A, g)
sym = T + T.transpose(1, 0, 2)
tf = sym - 0.5 * np.einsum('ij,k->ijk', g, np.einsum('ij,ijk->k', gi, sym))
for c in [0.5, 1, 0.25]:
    print('S.Z identity with factor', c, np.abs(lhs - c * tf).max())
