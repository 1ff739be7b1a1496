"""Potential prolongation on a conformal chart g = phi^2 dz dzbar (w = zbar).

Closed system: V_zz = (Gamma + 2 t_z) V_z + 2 s V_w + tau V, plus conjugate.
Derives tau from the Bertrand-Darboux compatibility with a trace-free Killing
pair (c1, c2), compares it with the tensorial formula, and prints the
coefficients of d_w V_zz used by the second Wilczynski block.
"""
import sympy as sp

z, w = sp.symbols('z w')
phi = sp.Function('phi')(z, w)
t = sp.Function('t')(z, w)
s, sb = sp.Function('s')(z, w), sp.Function('sb')(z, w)
tau, taub = sp.Function('tau')(z, w), sp.Function('taub')(z, w)
V, Vz, Vw, U, c1, c2 = sp.symbols('V Vz Vw U c1 c2')
L = sp.log(phi)
tz, tw = sp.diff(t, z), sp.diff(t, w)
G, Gb = 2 * sp.diff(L, z), 2 * sp.diff(L, w)

Vzz = (G + 2 * tz) * Vz + 2 * s * Vw + tau * V
Vww = (Gb + 2 * tw) * Vw + 2 * sb * Vz + taub * V
c1z, c1w = 0, sp.Rational(4, 3) * s * c2 - 4 * (tw / 3 + sp.diff(L, w)) * c1
c2w, c2z = 0, sp.Rational(4, 3) * sb * c1 - 4 * (tz / 3 + sp.diff(L, z)) * c2


def D(e, var):
    """Total derivative along the closed systems (U = V_zw left free)."""
    r = sp.diff(e, var)
    if var == z:
        r += sp.diff(e, V) * Vz + sp.diff(e, Vz) * Vzz + sp.diff(e, Vw) * U + sp.diff(e, c1) * c1z + sp.diff(e, c2) * c2z
    else:
        r += sp.diff(e, V) * Vw + sp.diff(e, Vz) * U + sp.diff(e, Vw) * Vww + sp.diff(e, c1) * c1w + sp.diff(e, c2) * c2w
    return sp.expand(r)


# Bertrand-Darboux one-form d(C dV) + rho-term with rho_z = 2 phi^-2 d_w(phi^4 c1).
rz = 2 * phi**-2 * (sp.diff(phi**4, w) * c1 + phi**4 * c1w) / 2
rw = 2 * phi**-2 * (sp.diff(phi**4, z) * c2 + phi**4 * c2z) / 2
az = 2 * phi**2 * c1 * Vw + rz * V
aw = 2 * phi**2 * c2 * Vz + rw * V
bd = sp.expand(D(aw, z) - D(az, w))
for a in [Vz, Vw, U]:
    for c in [c1, c2]:
        print('BD coefficient', a, c, sp.simplify(bd.coeff(a).coeff(c)))
tau_bd = sp.solve(sp.simplify(bd.subs({Vz: 0, Vw: 0, U: 0}).coeff(V).coeff(c2)), tau)[0]

xi = 2 * sp.diff(s, w) + 4 * s * sp.diff(L, w) + sp.Rational(4, 3) * s * tw
hess_tzz = sp.diff(t, z, 2) - G * tz
tau_tensor = sp.Rational(2, 3) * hess_tzz - sp.Rational(8, 9) * s * tw - sp.Rational(8, 9) * tz**2 \
    + sp.Rational(1, 3) * (2 * sp.diff(s, w) + 4 * s * sp.diff(L, w))
print('tau(BD) - tau(tensor) =', sp.simplify(tau_bd - tau_tensor))
# Standard gauge t = 0: tau = +xi/3.
print('t = 0: tau - xi/3 =', sp.simplify((tau_tensor - xi / 3).subs(t, 0).doit()))

# d_w V_zz; halve these for the (1/2) d_w V_zz normalisation used in the library.
Uz = sp.expand(D(Vzz, w))
print('q11    =', sp.simplify(Uz.coeff(Vz)))
print('q12    =', sp.simplify(Uz.coeff(Vw)))
print('gamma1 =', sp.simplify(Uz.subs({Vz: 0, Vw: 0, U: 0}).coeff(V)))
print('U coefficient =', sp.simplify(Uz.coeff(U)))
