"""Sphere systems from pairs of constant trace-free symmetric 3x3 tensors.

Embedding X = ((z+w), -i(z-w), zw-1)/(1+zw), phi = 2/(1+zw). Restricts two
random tensors, solves the Bertrand-Darboux equations for the second
derivatives of V, and compares (s, t_z) with the Pluecker read-off
(3/4) phi^2 p_{1,2}/p_{1,-1} and (3/4) phi^2 p_{-2,1}/p_{1,-1}.
"""
import random

import sympy as sp

R = sp.Rational
z, w = sp.symbols('z w')
mu = 1 + z * w
X = sp.Matrix([(z + w) / mu, (z - w) / (sp.I * mu), (z * w - 1) / mu])
phi = 2 / mu
Xz, Xw = X.diff(z), X.diff(w)
print('|X|^2 =', sp.simplify(X.dot(X)))
print('g_zz =', sp.simplify(Xz.dot(Xz)), ' g_zw - phi^2/2 =', sp.simplify(Xz.dot(Xw) - phi**2 / 2))

random.seed(3)


def random_trace_free():
    a = [R(random.randint(-5, 5), random.randint(1, 3)) for _ in range(5)]
    return sp.Matrix([[a[0], a[1], a[2]], [a[1], a[3], a[4]], [a[2], a[4], -a[0] - a[3]]])


def restrict(Lh):
    """(L_zz, L_zw, L_ww, lambda_z, lambda_w)"""
    e = [(Xz.T * Lh * Xz)[0], (Xz.T * Lh * Xw)[0], (Xw.T * Lh * Xw)[0], -(Xz.T * Lh * X)[0], -(Xw.T * Lh * X)[0]]
    return [sp.simplify(v) for v in e]


pair = [restrict(random_trace_free()), restrict(random_trace_free())]
gzw, ginv = phi**2 / 2, 2 / phi**2
Gam = 2 * sp.diff(sp.log(phi), z)

Lzz, Lzw, Lww, lz, lw = pair[0]
print('special conformal Killing: zz,z', sp.simplify(sp.diff(Lzz, z) - 2 * Gam * Lzz),
      '| zz,w', sp.simplify(sp.diff(Lzz, w) - 2 * lz * gzw),
      '| lambda - d(trL)/2', sp.simplify(lz - sp.diff(ginv * 2 * Lzw, z) / 2))

Vz, Vw, A, B, C, Dd, U = sp.symbols('Vz Vw A B C Dd U')
eqs = []
for (Lzz, Lzw, Lww, lz, lw) in pair:
    trL = ginv * 2 * Lzw
    Kzz, Kww, Kzw = Lzz, Lww, Lzw - trL * gzw
    az = ginv * (Kzw * Vz + Kzz * Vw)
    aw = ginv * (Kww * Vz + Kzw * Vw)
    dz = lambda e: sp.diff(e, z) + sp.diff(e, Vz) * (A * Vz + B * Vw) + sp.diff(e, Vw) * U
    dw = lambda e: sp.diff(e, w) + sp.diff(e, Vz) * U + sp.diff(e, Vw) * (C * Vz + Dd * Vw)
    bd = sp.expand(dz(aw) - dw(az))
    eqs += [bd.coeff(Vz), bd.coeff(Vw)]
sol = sp.solve(eqs, [A, B, C, Dd], dict=True)[0]
tz = sp.simplify((sol[A] - Gam) / 2)
s = sp.simplify(sol[B] / 2)


def pl(i, j):
    l = lambda r: {-2: r[4], -1: r[2], 0: r[1], 1: r[0], 2: r[3]}
    return l(pair[0])[i] * l(pair[1])[j] - l(pair[1])[i] * l(pair[0])[j]


print('t_z / (phi^2 p_{-2,1}/p_{1,-1}) =', sp.simplify(tz / (phi**2 * pl(-2, 1) / pl(1, -1))))
print('s / (phi^2 p_{1,2}/p_{1,-1}) =', sp.simplify(s / (phi**2 * pl(1, 2) / pl(1, -1))))
