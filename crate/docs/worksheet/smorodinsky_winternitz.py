"""Flat proper system with V spanned by zw, 1/x^2, 1/y^2.

Recovers (s, t) from the potentials, checks the flat closed system, the sign
of tau in standard gauge, Remn = 0, and the differential consequence of Remn
in its real form.
"""
import sympy as sp

R = sp.Rational
z, w = sp.symbols('z w')
x, y = (z + w) / 2, (z - w) / (2 * sp.I)
pots = [z * w, 1 / x**2, 1 / y**2]

a, b = sp.symbols('a b')
eqs = [sp.diff(v, z, 2) - 2 * a * sp.diff(v, z) - 2 * b * sp.diff(v, w) for v in pots]
sol = sp.solve(eqs[:2], [a, b], dict=True)[0]
tz, s = sp.simplify(sol[a]), sp.simplify(sol[b])
print('t_z =', tz, ' s =', s, ' third potential:', sp.simplify(eqs[2].subs(sol)))
t = sp.simplify(sp.integrate(tz, z))
tw = sp.simplify(sp.diff(t, w))
sb = s.subs({z: w, w: z}, simultaneous=True)
xi = sp.simplify(2 * sp.diff(s, w) + R(4, 3) * s * tw)
xib = xi.subs({z: w, w: z}, simultaneous=True)
print('xi =', sp.factor(xi))

closed = [sp.diff(s, z) - R(4, 3) * tz * s,
          sp.diff(xi, z) - R(16, 3) * s**2 * sb - R(4, 3) * tz * xi,
          sp.diff(xi, w) - R(8, 3) * s * xib,
          sp.diff(tz, z) - R(4, 3) * tz**2 - 2 * s * tw + xi / 2,
          sp.diff(tz, w) - R(4, 3) * s * sb]
print('flat closed system:', [sp.simplify(c) for c in closed])

# Standard gauge: phi' = exp(t/3), V' = exp(-2t/3) V.
phi = sp.exp(t / 3)
G = 2 * sp.diff(sp.log(phi), z)
vp = sp.exp(-2 * t / 3)
tau_std = sp.simplify((sp.diff(vp, z, 2) - G * sp.diff(vp, z) - 2 * s * sp.diff(vp, w)) / vp)
print('tau_std / xi =', sp.simplify(tau_std / xi))
for v in pots:
    vp = sp.exp(-2 * t / 3) * v
    print('  residual', sp.simplify(sp.diff(vp, z, 2) - G * sp.diff(vp, z) - 2 * s * sp.diff(vp, w) - tau_std * vp))

remn = R(80, 9) * s * sb * tz + R(16, 9) * s * tw**2 - 4 * s * xib + R(4, 3) * xi * tw
print('Remn =', sp.simplify(remn))

# Real invariants: |Xi|^2, |S|^2, |t|^2, Xi(t,t), S(t,t,t), S_abk Xi^ab t^k (flat chart).
XI2, S2, T2 = 8 * xi * xib, 16 * s * sb, 4 * tz * tw
Xitt, Sttt = 4 * (xi * tw**2 + xib * tz**2), 8 * (s * tw**3 + sb * tz**3)
SXit = 8 * (s * tw * xib + sb * tz * xi)
derived = 9 * XI2 + S2**2 + R(9, 2) * S2 * T2 + 2 * Sttt - R(57, 2) * SXit + 3 * Xitt
alternative = R(27, 2) * XI2 + S2**2 - 20 * Xitt - R(112, 9) * Sttt - R(123, 9) * S2 * T2
print('derived condition:', sp.simplify(derived))
print('alternative with 27/2 |Xi|^2:', sp.simplify(alternative))
